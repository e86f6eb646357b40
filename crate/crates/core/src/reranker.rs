//! Joint row+span reranking: a linear combination of the row score and the
//! span start/end scores, with weights picked by grid search on a dev fold.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::ContextBuilder;
use crate::corpus::{Question, Table};
use crate::error::{Error, Result};
use crate::extractor::{score_spans, ScoredSpan, SpanScorerModel};
use crate::metrics::{exact_match, f1_token};
use crate::row_retriever::{retrieve_rows, RowScorerModel};

pub const DEFAULT_K_ROWS: usize = 5;
pub const DEFAULT_K_SPANS: usize = 5;
pub const DEFAULT_GRID_STEP: f64 = 0.1;

/// Weights for `(s, s_st, s_en)` plus how many rows and spans are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankWeights {
    pub w: [f64; 3],
    pub k: usize,
    pub k_prime: usize,
}

impl RerankWeights {
    /// The single-candidate setting: top row, top span.
    pub fn top1() -> Self {
        RerankWeights {
            w: [0.0, 0.5, 0.5],
            k: 1,
            k_prime: 1,
        }
    }
}

pub fn combine_score(w: &[f64; 3], s: f64, s_start: f64, s_end: f64) -> f64 {
    w[0] * s + w[1] * s_start + w[2] * s_end
}

/// All points of the 3-simplex on a grid of the given step, in
/// lexicographic order. A step of 0.1 gives 66 vectors.
pub fn simplex_grid(step: f64) -> Vec<[f64; 3]> {
    let n = libm::round(1.0 / step) as usize;
    let n = n.max(1);
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n - i {
            let k = n - i - j;
            out.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
        }
    }
    out
}

/// A retrieved row with its score and its top spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCandidates {
    pub row: usize,
    pub row_score: f64,
    pub spans: Vec<ScoredSpan>,
}

/// Every candidate answer for one question, rows in retriever order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub question_id: String,
    pub rows: Vec<RowCandidates>,
}

impl CandidateSet {
    /// Keeps the top `k` rows and the top `k_prime` spans of each.
    pub fn truncated(&self, k: usize, k_prime: usize) -> CandidateSet {
        CandidateSet {
            question_id: self.question_id.clone(),
            rows: self
                .rows
                .iter()
                .take(k)
                .map(|r| RowCandidates {
                    row: r.row,
                    row_score: r.row_score,
                    spans: r.spans.iter().take(k_prime).cloned().collect(),
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RowCandidates, &ScoredSpan)> {
        self.rows.iter().flat_map(|r| r.spans.iter().map(move |s| (r, s)))
    }
}

/// Scores the top `k` rows, then the top `k_prime` spans in each row's
/// extraction context.
#[allow(clippy::too_many_arguments)]
pub fn gather_candidates(
    builder: &ContextBuilder<'_>,
    question: &Question,
    table: &Table,
    rows: &RowScorerModel,
    spans: &SpanScorerModel,
    k: usize,
    k_prime: usize,
    max_answer_len: usize,
) -> Result<CandidateSet> {
    if table.row_count() == 0 {
        return Err(Error::EmptyTable(table.id.clone()));
    }
    let ranked = retrieve_rows(builder, question, table, rows, k.max(1));
    let rows = ranked
        .into_iter()
        .map(|(row, row_score)| {
            let ctx = builder.extraction_sequence(question, table, row);
            let spans = score_spans(&question.text, &ctx, spans, row, k_prime.max(1), max_answer_len);
            RowCandidates { row, row_score, spans }
        })
        .collect();
    Ok(CandidateSet {
        question_id: question.id.clone(),
        rows,
    })
}

/// A selected answer with the row score and the combined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub span: ScoredSpan,
    pub row_score: f64,
    pub combined: f64,
}

/// Arg-max combined candidate within the top `k` rows and `k_prime` spans.
/// Ties keep the first candidate in retriever/extractor order.
pub fn select_answer(cands: &CandidateSet, weights: &RerankWeights) -> Option<RankedAnswer> {
    let mut best: Option<RankedAnswer> = None;
    for r in cands.rows.iter().take(weights.k.max(1)) {
        for s in r.spans.iter().take(weights.k_prime.max(1)) {
            let v = combine_score(&weights.w, r.row_score, s.s_start, s.s_end);
            if best.as_ref().is_none_or(|b| v > b.combined) {
                best = Some(RankedAnswer {
                    span: s.clone(),
                    row_score: r.row_score,
                    combined: v,
                });
            }
        }
    }
    best
}

/// Answers one question over its table.
#[allow(clippy::too_many_arguments)]
pub fn answer_question(
    builder: &ContextBuilder<'_>,
    question: &Question,
    table: &Table,
    rows: &RowScorerModel,
    spans: &SpanScorerModel,
    weights: &RerankWeights,
    max_answer_len: usize,
) -> Result<Option<RankedAnswer>> {
    let cands = gather_candidates(builder, question, table, rows, spans, weights.k, weights.k_prime, max_answer_len)?;
    Ok(select_answer(&cands, weights))
}

/// Dev-fold score of one weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub w: [f64; 3],
    pub em: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub weights: RerankWeights,
    pub best: GridPoint,
    pub grid: Vec<GridPoint>,
}

/// Mean EM and F1 (fractions) of the answers `weights` selects on `dev`.
pub fn evaluate_weights(dev: &[(CandidateSet, String)], weights: &RerankWeights) -> (f64, f64) {
    if dev.is_empty() {
        return (0.0, 0.0);
    }
    let (mut em, mut f1) = (0.0, 0.0);
    for (cands, gold) in dev {
        if let Some(a) = select_answer(cands, weights) {
            em += exact_match(&a.span.surface, gold);
            f1 += f1_token(&a.span.surface, gold);
        }
    }
    (em / dev.len() as f64, f1 / dev.len() as f64)
}

/// Grid search: highest EM, then highest F1, then the lexicographically
/// smallest weight vector.
pub fn tune_weights(dev: &[(CandidateSet, String)], grid: &[[f64; 3]], k: usize, k_prime: usize) -> Result<TuneOutcome> {
    if dev.is_empty() {
        return Err(Error::InvalidConfig("empty dev fold".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty weight grid".into()));
    }
    let mut sorted: Vec<[f64; 3]> = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let points: Vec<GridPoint> = sorted
        .iter()
        .map(|w| {
            let (em, f1) = evaluate_weights(dev, &RerankWeights { w: *w, k, k_prime });
            GridPoint { w: *w, em, f1 }
        })
        .collect();
    let mut best = points[0];
    for p in &points[1..] {
        if p.em > best.em || (p.em == best.em && p.f1 > best.f1) {
            best = *p;
        }
    }
    Ok(TuneOutcome {
        weights: RerankWeights { w: best.w, k, k_prime },
        best,
        grid: points,
    })
}

/// Best EM reachable by any candidate: the ceiling a perfect selector
/// would hit.
pub fn oracle_em(cands: &CandidateSet, gold: &str, k: usize, k_prime: usize) -> f64 {
    cands
        .truncated(k, k_prime)
        .iter()
        .map(|(_, s)| exact_match(&s.surface, gold))
        .fold(0.0, f64::max)
}
