//! Flat key-value configuration with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabtext_core::bm25::Bm25Params;
use tabtext_core::context::DEFAULT_BUDGET;
use tabtext_core::extractor::{ExtractorTrainConfig, DEFAULT_MAX_ANSWER_LEN};
use tabtext_core::open_domain::DEFAULT_LINKS_PER_CELL;
use tabtext_core::pipeline::{PipelineConfig, Toggles};
use tabtext_core::reranker::{DEFAULT_GRID_STEP, DEFAULT_K_ROWS, DEFAULT_K_SPANS};
use tabtext_core::row_retriever::RowTrainConfig;

use crate::error::{CliError, CliResult};

pub const DEFAULT_CONFIG: &str = "tabtext.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tables: PathBuf,
    pub passages: PathBuf,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub out_dir: PathBuf,

    pub budget: usize,
    pub k_rows: usize,
    pub k_spans: usize,
    pub grid_step: f64,
    pub max_answer_len: usize,

    pub curriculum: Vec<usize>,
    pub rr_epochs: usize,
    pub rr_learning_rate: f64,
    pub rr_l2: f64,
    pub rr_seed: u64,
    pub ae_epochs: usize,
    pub ae_learning_rate: f64,
    pub ae_l2: f64,
    pub ae_seed: u64,

    pub mil: bool,
    pub rf: bool,
    pub mst: bool,
    pub rsr: bool,
    pub pf: bool,

    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub links_per_cell: usize,
    pub retrieve_k: usize,
    pub open_domain: bool,

    pub jobs: usize,
    pub ablate: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        let rr = RowTrainConfig::default();
        let ae = ExtractorTrainConfig::default();
        let bm = Bm25Params::default();
        Config {
            tables: "tables.jsonl".into(),
            passages: "passages.jsonl".into(),
            train: "train.jsonl".into(),
            dev: "dev.jsonl".into(),
            test: "test.jsonl".into(),
            out_dir: "out".into(),
            budget: DEFAULT_BUDGET,
            k_rows: DEFAULT_K_ROWS,
            k_spans: DEFAULT_K_SPANS,
            grid_step: DEFAULT_GRID_STEP,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
            curriculum: rr.curriculum,
            rr_epochs: rr.epochs,
            rr_learning_rate: rr.learning_rate,
            rr_l2: rr.l2,
            rr_seed: rr.seed,
            ae_epochs: ae.epochs,
            ae_learning_rate: ae.learning_rate,
            ae_l2: ae.l2,
            ae_seed: ae.seed,
            mil: true,
            rf: true,
            mst: true,
            rsr: true,
            pf: true,
            bm25_k1: bm.k1,
            bm25_b: bm.b,
            links_per_cell: DEFAULT_LINKS_PER_CELL,
            retrieve_k: 10,
            open_domain: false,
            jobs: 0,
            ablate: ["none", "mil", "mil+rf", "mil+rf+mst", "mil+rf+mst+rsr", "all"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Splits `key=value`; the value is parsed as TOML, falling back to a
/// bare string.
fn parse_override(s: &str) -> CliResult<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {s:?} is not key=value")))?;
    let k = k.trim().to_string();
    let v = v.trim();
    let value = toml::from_str::<toml::Table>(&format!("x = {v}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k, value))
}

impl Config {
    /// Loads `path` (or defaults when `path` is the implicit default and
    /// absent), applies `overrides`, and resolves relative paths against
    /// the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Config> {
        let (file, explicit) = match path {
            Some(p) => (p.to_path_buf(), true),
            None => (PathBuf::from(DEFAULT_CONFIG), false),
        };
        let mut table = if file.exists() {
            let text = std::fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?
        } else if explicit {
            return Err(CliError::Usage(format!("config file {} not found", file.display())));
        } else {
            toml::Table::new()
        };
        for o in overrides {
            let (k, v) = parse_override(o)?;
            table.insert(k, v);
        }
        let mut cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
        let base = file.parent().map(Path::to_path_buf).unwrap_or_default();
        for p in [
            &mut cfg.tables,
            &mut cfg.passages,
            &mut cfg.train,
            &mut cfg.dev,
            &mut cfg.test,
            &mut cfg.out_dir,
        ] {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.pipeline()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.links_per_cell == 0 || self.retrieve_k == 0 {
            return Err(CliError::Usage("links_per_cell and retrieve_k must be at least 1".into()));
        }
        for t in &self.ablate {
            Toggles::parse(t).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn toggles(&self) -> Toggles {
        Toggles {
            mil: self.mil,
            rf: self.rf,
            mst: self.mst,
            rsr: self.rsr,
            pf: self.pf,
        }
    }

    pub fn set_toggles(&mut self, t: Toggles) {
        self.mil = t.mil;
        self.rf = t.rf;
        self.mst = t.mst;
        self.rsr = t.rsr;
        self.pf = t.pf;
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = PipelineConfig {
            toggles: self.toggles(),
            budget: self.budget,
            k_rows: self.k_rows,
            k_spans: self.k_spans,
            grid_step: self.grid_step,
            max_answer_len: self.max_answer_len,
            ..PipelineConfig::default()
        };
        p.rows = RowTrainConfig {
            epochs: self.rr_epochs,
            learning_rate: self.rr_learning_rate,
            l2: self.rr_l2,
            seed: self.rr_seed,
            curriculum: self.curriculum.clone(),
            ..p.rows
        };
        p.extractor = ExtractorTrainConfig {
            epochs: self.ae_epochs,
            learning_rate: self.ae_learning_rate,
            l2: self.ae_l2,
            seed: self.ae_seed,
            ..p.extractor
        };
        p
    }

    /// SHA-256 over every setting that can change an artifact; worker
    /// count, output location and the ablation list are left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            for k in ["jobs", "out_dir", "ablate"] {
                m.remove(k);
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    /// The config as TOML, for writing next to generated data.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_as_toml_or_string() {
        assert_eq!(parse_override("budget=128").unwrap().1, toml::Value::Integer(128));
        assert_eq!(parse_override("pf = false").unwrap().1, toml::Value::Boolean(false));
        assert_eq!(
            parse_override("out_dir=runs/a").unwrap().1,
            toml::Value::String("runs/a".into())
        );
        assert!(parse_override("budget").is_err());
    }

    #[test]
    fn defaults_round_trip_and_hash_ignores_jobs() {
        let c = Config::default();
        let back: Config = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let mut d = c.clone();
        d.jobs = 7;
        assert_eq!(c.hash(), d.hash());
        d.budget = 128;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn unknown_key_is_a_usage_error() {
        let err = Config::load(None, &["bugdet=3".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
