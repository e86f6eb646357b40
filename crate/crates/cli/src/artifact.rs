//! Versioned on-disk artifacts. Every file records the format version,
//! its kind and the hash of the config that produced it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_json};

pub const FORMAT: &str = "tabtext";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Corpus,
    Questions,
    Bags,
    RowModel,
    Extractor,
    Reranker,
    Predictions,
    Report,
    Stats,
    TableIndex,
    PassageIndex,
    Retrieval,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Corpus => "corpus",
            Kind::Questions => "questions",
            Kind::Bags => "bags",
            Kind::RowModel => "row-model",
            Kind::Extractor => "extractor",
            Kind::Reranker => "reranker",
            Kind::Predictions => "predictions",
            Kind::Report => "report",
            Kind::Stats => "stats",
            Kind::TableIndex => "table-index",
            Kind::PassageIndex => "passage-index",
            Kind::Retrieval => "retrieval",
        }
    }

    pub fn file(self) -> &'static str {
        match self {
            Kind::Corpus => "corpus.json",
            Kind::Questions => "questions.json",
            Kind::Bags => "bags.json",
            Kind::RowModel => "row_model.json",
            Kind::Extractor => "extractor.json",
            Kind::Reranker => "reranker.json",
            Kind::Predictions => "predictions.json",
            Kind::Report => "report.json",
            Kind::Stats => "stats.json",
            Kind::TableIndex => "table_index.json",
            Kind::PassageIndex => "passage_index.json",
            Kind::Retrieval => "retrieval.json",
        }
    }

    /// The subcommand that writes this artifact.
    pub fn stage(self) -> &'static str {
        match self {
            Kind::Corpus | Kind::Questions => "ingest",
            Kind::Bags => "supervise",
            Kind::RowModel => "train-rr",
            Kind::Extractor => "train-ae",
            Kind::Reranker => "tune-reranker",
            Kind::Predictions => "predict",
            Kind::Report => "eval",
            Kind::Stats => "stats",
            Kind::TableIndex => "index-tables",
            Kind::PassageIndex => "link",
            Kind::Retrieval => "retrieve",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub config_hash: String,
    pub payload: T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    config_hash: String,
}

/// Artifact directory bound to one config hash.
#[derive(Debug, Clone)]
pub struct Store {
    pub dir: PathBuf,
    pub config_hash: String,
    pub force: bool,
}

impl Store {
    pub fn path(&self, kind: Kind) -> PathBuf {
        self.dir.join(kind.file())
    }

    pub fn exists(&self, kind: Kind) -> bool {
        self.path(kind).exists()
    }

    pub fn save<T: Serialize>(&self, kind: Kind, payload: &T) -> CliResult<PathBuf> {
        let path = self.path(kind);
        let art = Artifact {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            kind: kind.name().into(),
            config_hash: self.config_hash.clone(),
            payload,
        };
        write_json(&path, &art)?;
        Ok(path)
    }

    /// Loads an artifact, refusing one written under a different config
    /// unless the store was opened with `force`.
    pub fn load<T: DeserializeOwned>(&self, kind: Kind) -> CliResult<T> {
        let path = self.path(kind);
        if !path.exists() {
            return Err(CliError::MissingArtifact {
                path,
                stage: kind.stage(),
            });
        }
        let header: Header = read_json(&path)?;
        check_header(&path, kind, &header.format, header.version, &header.kind)?;
        if header.config_hash != self.config_hash {
            let msg = format!(
                "{} was produced under config {} but the current config is {}; rerun `tabtext {}` or pass --force",
                path.display(),
                short(&header.config_hash),
                short(&self.config_hash),
                kind.stage()
            );
            if self.force {
                log::warn!("{msg}");
            } else {
                return Err(CliError::Data(msg));
            }
        }
        let art: Artifact<T> = read_json(&path)?;
        Ok(art.payload)
    }

    /// Like `load`, but `None` when the file is absent.
    pub fn load_optional<T: DeserializeOwned>(&self, kind: Kind) -> CliResult<Option<T>> {
        if self.exists(kind) {
            self.load(kind).map(Some)
        } else {
            Ok(None)
        }
    }
}

fn check_header(path: &Path, kind: Kind, format: &str, version: u32, found: &str) -> CliResult<()> {
    if format != FORMAT || version != FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "{}: unsupported artifact format {format} v{version}",
            path.display()
        )));
    }
    if found != kind.name() {
        return Err(CliError::Data(format!(
            "{}: expected a {} artifact, found {found}",
            path.display(),
            kind.name()
        )));
    }
    Ok(())
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}
