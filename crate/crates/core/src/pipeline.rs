//! End-to-end training and inference with the five ablation switches.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::context::{ContextBuilder, LinkedOrder, SimilarityScorer, TfIdfScorer, DEFAULT_BUDGET};
use crate::corpus::{Corpus, Question};
use crate::error::{Error, Result};
use crate::extractor::{
    build_extraction_instances, train_answer_extractor, ExtractionInstance, ExtractorTrainConfig, ExtractorTraining,
    SpanSelection, SpanScorerModel, DEFAULT_MAX_ANSWER_LEN,
};
use crate::metrics::{evaluate, Prediction, Report};
use crate::reranker::{
    gather_candidates, select_answer, simplex_grid, tune_weights, CandidateSet, RerankWeights, TuneOutcome,
    DEFAULT_GRID_STEP, DEFAULT_K_ROWS, DEFAULT_K_SPANS,
};
use crate::row_retriever::{train_row_retriever, BagLoss, RowScorerModel, RowTrainConfig, RowTrainInstance};
use crate::supervision::{find_answer_rows, SupervisionBag};

/// The ablation switches. All off is the plain retriever-reader baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Toggles {
    pub mil: bool,
    pub rf: bool,
    pub mst: bool,
    pub rsr: bool,
    pub pf: bool,
}

impl Toggles {
    pub const NAMES: [&'static str; 5] = ["mil", "rf", "mst", "rsr", "pf"];

    pub fn all() -> Self {
        Toggles {
            mil: true,
            rf: true,
            mst: true,
            rsr: true,
            pf: true,
        }
    }

    pub fn none() -> Self {
        Toggles {
            mil: false,
            rf: false,
            mst: false,
            rsr: false,
            pf: false,
        }
    }

    fn flags(&self) -> [bool; 5] {
        [self.mil, self.rf, self.mst, self.rsr, self.pf]
    }

    fn flag_mut(&mut self, name: &str) -> Option<&mut bool> {
        match name {
            "mil" => Some(&mut self.mil),
            "rf" => Some(&mut self.rf),
            "mst" => Some(&mut self.mst),
            "rsr" => Some(&mut self.rsr),
            "pf" => Some(&mut self.pf),
            _ => None,
        }
    }

    /// Parses `none`, `all`, or a `+`/`,`-separated list such as `mil+rf`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "" | "none" => return Ok(Toggles::none()),
            "all" => return Ok(Toggles::all()),
            _ => {}
        }
        let mut t = Toggles::none();
        for part in s.split(['+', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            *t.flag_mut(part)
                .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown toggle {part:?}")))? = true;
        }
        Ok(t)
    }
}

impl fmt::Display for Toggles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = Self::NAMES
            .iter()
            .zip(self.flags())
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect();
        if on.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&on.join("+"))
        }
    }
}

/// Drops repeated toggle sets, keeping first occurrences; returns the kept
/// sets and the dropped duplicates.
pub fn dedup_toggles(sets: &[Toggles]) -> (Vec<Toggles>, Vec<Toggles>) {
    let mut seen = BTreeSet::new();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for t in sets {
        if seen.insert(*t) {
            kept.push(*t);
        } else {
            dropped.push(*t);
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub toggles: Toggles,
    pub budget: usize,
    pub k_rows: usize,
    pub k_spans: usize,
    pub grid_step: f64,
    pub max_answer_len: usize,
    pub rows: RowTrainConfig,
    pub extractor: ExtractorTrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            toggles: Toggles::all(),
            budget: DEFAULT_BUDGET,
            k_rows: DEFAULT_K_ROWS,
            k_spans: DEFAULT_K_SPANS,
            grid_step: DEFAULT_GRID_STEP,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
            rows: RowTrainConfig::default(),
            extractor: ExtractorTrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Row-retriever settings with the loss chosen by the MIL switch.
    pub fn row_config(&self) -> RowTrainConfig {
        RowTrainConfig {
            loss: if self.toggles.mil {
                BagLoss::MultiInstance
            } else {
                BagLoss::AllPositive
            },
            ..self.rows.clone()
        }
    }

    /// Extractor settings with span selection chosen by the MST switch.
    pub fn extractor_config(&self) -> ExtractorTrainConfig {
        ExtractorTrainConfig {
            selection: if self.toggles.mst {
                SpanSelection::MultiSpan
            } else {
                SpanSelection::FirstSpan
            },
            max_answer_len: self.max_answer_len,
            ..self.extractor.clone()
        }
    }

    /// Top-K rows and top-K' spans, or a single candidate without RSR.
    pub fn candidate_limits(&self) -> (usize, usize) {
        if self.toggles.rsr {
            (self.k_rows, self.k_spans)
        } else {
            (1, 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if self.k_rows == 0 || self.k_spans == 0 {
            return Err(Error::InvalidConfig("K and K' must be at least 1".into()));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::InvalidConfig("grid step must lie in (0, 1]".into()));
        }
        if self.max_answer_len == 0 {
            return Err(Error::InvalidConfig("max answer length must be positive".into()));
        }
        Ok(())
    }
}

/// Maps `f` over `0..n`, returning results in index order. Lets callers
/// plug in a thread pool without the core depending on one.
pub trait Mapper: Sync {
    fn map<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Mapper for Sequential {
    fn map<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).map(f).collect()
    }
}

/// Owns the passage scorer so a `ContextBuilder` can borrow it.
pub enum Scorer {
    Linked(LinkedOrder),
    TfIdf(TfIdfScorer),
}

impl Scorer {
    pub fn for_toggles(corpus: &Corpus, toggles: Toggles) -> Self {
        if toggles.pf {
            Scorer::TfIdf(TfIdfScorer::new(corpus))
        } else {
            Scorer::Linked(LinkedOrder)
        }
    }

    pub fn as_dyn(&self) -> &dyn SimilarityScorer {
        match self {
            Scorer::Linked(s) => s,
            Scorer::TfIdf(s) => s,
        }
    }
}

pub fn builder<'a>(corpus: &'a Corpus, scorer: &'a Scorer, cfg: &PipelineConfig) -> ContextBuilder<'a> {
    ContextBuilder::new(corpus, scorer.as_dyn(), cfg.budget).with_passage_filter(cfg.toggles.pf)
}

/// Positive bags for every answered question.
pub fn supervise<M: Mapper>(corpus: &Corpus, questions: &[Question], mapper: &M) -> Result<Vec<SupervisionBag>> {
    mapper
        .map(questions.len(), &|i| {
            let q = &questions[i];
            let answer = q.answer_text.as_deref().ok_or_else(|| Error::MissingAnswer(q.id.clone()))?;
            let table = corpus.table_for(q)?;
            Ok(find_answer_rows(table, corpus, &q.id, answer))
        })
        .into_iter()
        .collect()
}

fn question_map(questions: &[Question]) -> BTreeMap<&str, &Question> {
    questions.iter().map(|q| (q.id.as_str(), q)).collect()
}

fn lookup<'q>(map: &BTreeMap<&str, &'q Question>, id: &str) -> Result<&'q Question> {
    map.get(id).copied().ok_or_else(|| Error::UnknownQuestion(id.into()))
}

/// Featurizes every table row for each bag.
pub fn row_instances<M: Mapper>(
    builder: &ContextBuilder<'_>,
    questions: &[Question],
    bags: &[SupervisionBag],
    mapper: &M,
) -> Result<Vec<RowTrainInstance>> {
    let by_id = question_map(questions);
    mapper
        .map(bags.len(), &|i| {
            let bag = &bags[i];
            let q = lookup(&by_id, &bag.question_id)?;
            let table = builder.corpus.table_for(q)?;
            Ok(RowTrainInstance::new(builder, q, table, bag.clone()))
        })
        .into_iter()
        .collect()
}

pub fn train_rows(instances: &[RowTrainInstance], cfg: &PipelineConfig) -> Result<RowScorerModel> {
    train_row_retriever(instances, &cfg.row_config())
}

/// Extraction instances for answerable bags. With RF the row model picks
/// one positive row per question; without it every positive row is used.
pub fn extraction_instances<M: Mapper>(
    builder: &ContextBuilder<'_>,
    questions: &[Question],
    rows: &[RowTrainInstance],
    model: &RowScorerModel,
    cfg: &PipelineConfig,
    mapper: &M,
) -> Result<Vec<ExtractionInstance>> {
    let by_id = question_map(questions);
    let per_q: Vec<Result<Vec<ExtractionInstance>>> = mapper.map(rows.len(), &|i| {
        let inst = &rows[i];
        if !inst.bag.is_answerable() {
            return Ok(Vec::new());
        }
        let q = lookup(&by_id, &inst.question_id)?;
        let table = builder.corpus.table_for(q)?;
        let answer = q.answer_text.as_deref().ok_or_else(|| Error::MissingAnswer(q.id.clone()))?;
        let scores: Option<Vec<f64>> = cfg
            .toggles
            .rf
            .then(|| inst.features.iter().map(|f| model.score(f)).collect());
        build_extraction_instances(builder, q, table, &inst.bag, answer, scores.as_deref())
    });
    let mut out = Vec::new();
    for r in per_q {
        out.extend(r?);
    }
    Ok(out)
}

pub fn train_extractor(instances: &[ExtractionInstance], cfg: &PipelineConfig) -> Result<ExtractorTraining> {
    train_answer_extractor(instances, &cfg.extractor_config())
}

/// Candidate answers for each question under the configured limits.
pub fn candidates<M: Mapper>(
    builder: &ContextBuilder<'_>,
    questions: &[Question],
    rows: &RowScorerModel,
    spans: &SpanScorerModel,
    cfg: &PipelineConfig,
    mapper: &M,
) -> Result<Vec<CandidateSet>> {
    let (k, kp) = cfg.candidate_limits();
    mapper
        .map(questions.len(), &|i| {
            let q = &questions[i];
            let table = builder.corpus.table_for(q)?;
            gather_candidates(builder, q, table, rows, spans, k, kp, cfg.max_answer_len)
        })
        .into_iter()
        .collect()
}

/// Grid-searched weights with RSR, the single-candidate setting without.
pub fn tune(dev: &[Question], dev_candidates: &[CandidateSet], cfg: &PipelineConfig) -> Result<Option<TuneOutcome>> {
    if !cfg.toggles.rsr {
        return Ok(None);
    }
    let pairs: Vec<(CandidateSet, String)> = dev
        .iter()
        .zip(dev_candidates)
        .filter_map(|(q, c)| q.answer_text.clone().map(|a| (c.clone(), a)))
        .collect();
    tune_weights(&pairs, &simplex_grid(cfg.grid_step), cfg.k_rows, cfg.k_spans).map(Some)
}

pub fn weights_for(tuned: Option<&TuneOutcome>) -> RerankWeights {
    tuned.map_or_else(RerankWeights::top1, |t| t.weights)
}

/// One prediction per candidate set; an empty answer when nothing scored.
pub fn predict(candidates: &[CandidateSet], weights: &RerankWeights) -> Vec<Prediction> {
    candidates
        .iter()
        .map(|c| match select_answer(c, weights) {
            Some(a) => Prediction {
                question_id: c.question_id.clone(),
                answer: a.span.surface,
                row: Some(a.span.row),
                provenance: Some(a.span.provenance),
                row_score: a.row_score,
                s_start: a.span.s_start,
                s_end: a.span.s_end,
            },
            None => Prediction {
                question_id: c.question_id.clone(),
                answer: String::new(),
                row: c.rows.first().map(|r| r.row),
                provenance: None,
                row_score: c.rows.first().map_or(0.0, |r| r.row_score),
                s_start: 0.0,
                s_end: 0.0,
            },
        })
        .collect()
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub train_bags: Vec<SupervisionBag>,
    pub row_model: RowScorerModel,
    pub extractor: ExtractorTraining,
    pub extraction_instances: usize,
    pub tuned: Option<TuneOutcome>,
    pub weights: RerankWeights,
    pub predictions: Vec<Prediction>,
    pub report: Report,
}

/// Trains on `train`, tunes on `dev`, predicts and evaluates on `test`.
pub fn run<M: Mapper>(
    corpus: &Corpus,
    train: &[Question],
    dev: &[Question],
    test: &[Question],
    cfg: &PipelineConfig,
    mapper: &M,
) -> Result<PipelineRun> {
    cfg.validate()?;
    let scorer = Scorer::for_toggles(corpus, cfg.toggles);
    let b = builder(corpus, &scorer, cfg);

    let train_bags = supervise(corpus, train, mapper)?;
    let rows = row_instances(&b, train, &train_bags, mapper)?;
    let row_model = train_rows(&rows, cfg)?;
    let ext = extraction_instances(&b, train, &rows, &row_model, cfg, mapper)?;
    let extractor = train_extractor(&ext, cfg)?;

    let tuned = if cfg.toggles.rsr {
        let dev_c = candidates(&b, dev, &row_model, &extractor.model, cfg, mapper)?;
        tune(dev, &dev_c, cfg)?
    } else {
        None
    };
    let weights = weights_for(tuned.as_ref());
    let test_c = candidates(&b, test, &row_model, &extractor.model, cfg, mapper)?;
    let predictions = predict(&test_c, &weights);

    let test_bags = supervise(corpus, test, mapper)?;
    let bag_map: BTreeMap<String, BTreeSet<usize>> = test_bags
        .into_iter()
        .map(|b| (b.question_id, b.positive_rows))
        .collect();
    let report = evaluate(&predictions, test, Some(&bag_map))?;

    Ok(PipelineRun {
        train_bags,
        row_model,
        extractor,
        extraction_instances: ext.len(),
        tuned,
        weights,
        predictions,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub toggles: Toggles,
    pub report: Report,
}

/// Runs the pipeline once per distinct toggle set, in request order.
pub fn ablation_matrix<M: Mapper>(
    corpus: &Corpus,
    train: &[Question],
    dev: &[Question],
    test: &[Question],
    base: &PipelineConfig,
    sets: &[Toggles],
    mapper: &M,
) -> Result<Vec<AblationRow>> {
    let (kept, _) = dedup_toggles(sets);
    kept.into_iter()
        .map(|toggles| {
            let cfg = PipelineConfig {
                toggles,
                ..base.clone()
            };
            run(corpus, train, dev, test, &cfg, mapper).map(|r| AblationRow {
                toggles,
                report: r.report,
            })
        })
        .collect()
}
