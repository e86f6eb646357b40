//! Answer extractor: linear start/end scorers over per-token features of the
//! extraction context, trained with multi-span denoising.
//!
//! A span `(s, e)` scores `s_st(s) + s_en(e)`. Training minimizes the
//! cross-entropy of the start and end distributions (softmax over answer
//! bearing positions) against one chosen gold span. When the answer text
//! occurs several times in the selected row, multi-span training first fits
//! a model on the unambiguous instances and lets it pick which occurrence
//! to train on.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{ContextBuilder, SegmentTag, TokenSequence};
use crate::corpus::{Question, Table};
use crate::error::{Error, Result};
use crate::math::{hash_key, ln_1p, log_sum_exp, softmax, SparseVec};
use crate::optim::{Adagrad, GradBuffer};
use crate::supervision::{enumerate_spans, SpanSource, SupervisionBag};
use crate::text::{is_numeric, is_sentinel, is_stopword, tokenize};

pub const FEATURE_DIM: usize = 1 << 14;
pub const FIXED_FEATURES: usize = 32;
pub const DEFAULT_MAX_ANSWER_LEN: usize = 30;

const E_IN_QUESTION: u32 = 0;
const E_LEFT_NEAR: u32 = 1;
const E_RIGHT_NEAR: u32 = 2;
const E_LEFT_FAR: u32 = 3;
const E_RIGHT_FAR: u32 = 4;
const E_CELL: u32 = 5;
const E_PASSAGE: u32 = 6;
const E_HEADER_MATCH: u32 = 7;
const E_HEADER_DISTANCE: u32 = 8;
const E_NUMERIC: u32 = 9;
const E_STOPWORD: u32 = 10;
const E_SEGMENT_FIRST: u32 = 11;
const E_SEGMENT_LAST: u32 = 12;
const E_SEGMENT_OVERLAP: u32 = 13;

const NEAR: usize = 3;
const FAR: usize = 10;

fn hashed(parts: &[&str]) -> u32 {
    let span = (FEATURE_DIM - FIXED_FEATURES) as u64;
    (FIXED_FEATURES as u64 + hash_key(parts) % span) as u32
}

fn question_terms(question: &str) -> BTreeSet<String> {
    tokenize(question).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Per-token features; `None` for positions that cannot hold an answer.
///
/// Features: whether the token itself is a question term; counts of distinct
/// question terms in near and far windows on each side; segment kind;
/// whether the token sits in a cell whose header the question mentions and
/// its distance to the nearest such cell; token shape; segment boundary
/// flags; question terms in the same segment; hashed identities of the
/// token and its neighbours.
pub fn token_features(context: &TokenSequence, question: &str) -> Vec<Option<SparseVec>> {
    let q = question_terms(question);
    let tokens = context.tokens();
    let origin = context.origin();
    let n = tokens.len();
    let hit: Vec<bool> = tokens
        .iter()
        .map(|t| !is_sentinel(t) && q.contains(t.as_str()))
        .collect();

    let segments = context.segments();
    let mut seg_of = vec![0usize; n];
    for (k, &(_, s, e)) in segments.iter().enumerate() {
        seg_of[s..e].iter_mut().for_each(|x| *x = k);
    }
    let seg_overlap: Vec<usize> = segments
        .iter()
        .map(|&(_, s, e)| {
            tokens[s..e]
                .iter()
                .filter(|t| q.contains(t.as_str()))
                .collect::<BTreeSet<_>>()
                .len()
        })
        .collect();

    // Columns whose header mentions a question term.
    let matched_cols: BTreeSet<u16> = tokens
        .iter()
        .zip(origin)
        .filter_map(|(t, tag)| match tag {
            SegmentTag::Header(c) if q.contains(t.as_str()) => Some(*c),
            _ => None,
        })
        .collect();
    let matched_cell_pos: Vec<usize> = origin
        .iter()
        .enumerate()
        .filter(|(_, tag)| matches!(tag, SegmentTag::Cell(c) if matched_cols.contains(c)))
        .map(|(i, _)| i)
        .collect();

    let window = |lo: usize, hi: usize| -> f64 {
        let set: BTreeSet<&str> = (lo..hi).filter(|&j| hit[j]).map(|j| tokens[j].as_str()).collect();
        ln_1p(set.len() as f64)
    };

    (0..n)
        .map(|i| {
            let tag = origin[i];
            if !tag.is_answer_bearing() {
                return None;
            }
            let tok = tokens[i].as_str();
            let (_, s, e) = segments[seg_of[i]];
            let mut f = vec![
                (E_IN_QUESTION, if hit[i] { 1.0 } else { 0.0 }),
                (E_LEFT_NEAR, window(i.saturating_sub(NEAR), i)),
                (E_RIGHT_NEAR, window(i + 1, (i + 1 + NEAR).min(n))),
                (E_LEFT_FAR, window(i.saturating_sub(FAR), i.saturating_sub(NEAR))),
                (E_RIGHT_FAR, window((i + 1 + NEAR).min(n), (i + 1 + FAR).min(n))),
                (E_NUMERIC, if is_numeric(tok) { 1.0 } else { 0.0 }),
                (E_STOPWORD, if is_stopword(tok) { 1.0 } else { 0.0 }),
                (E_SEGMENT_FIRST, if i == s { 1.0 } else { 0.0 }),
                (E_SEGMENT_LAST, if i + 1 == e { 1.0 } else { 0.0 }),
                (E_SEGMENT_OVERLAP, ln_1p(seg_overlap[seg_of[i]] as f64)),
            ];
            match tag {
                SegmentTag::Cell(c) => {
                    f.push((E_CELL, 1.0));
                    if matched_cols.contains(&c) {
                        f.push((E_HEADER_MATCH, 1.0));
                    }
                }
                _ => f.push((E_PASSAGE, 1.0)),
            }
            if let Some(d) = matched_cell_pos.iter().map(|&p| p.abs_diff(i)).min() {
                f.push((E_HEADER_DISTANCE, 1.0 / (1.0 + d as f64)));
            }
            let prev = if i > 0 { tokens[i - 1].as_str() } else { "<s>" };
            let next = if i + 1 < n { tokens[i + 1].as_str() } else { "</s>" };
            f.push((hashed(&["w", tok]), 1.0));
            f.push((hashed(&["l", prev]), 1.0));
            f.push((hashed(&["r", next]), 1.0));
            Some(SparseVec::from_unsorted(f))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanSelection {
    /// Denoise ambiguous instances with a model trained on unambiguous ones.
    MultiSpan,
    /// Train on the leftmost matching span.
    FirstSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub max_answer_len: usize,
    pub selection: SpanSelection,
}

impl Default for ExtractorTrainConfig {
    fn default() -> Self {
        ExtractorTrainConfig {
            epochs: 6,
            learning_rate: 0.1,
            l2: 0.0,
            seed: 17,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
            selection: SpanSelection::MultiSpan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanScorerModel {
    #[serde(with = "crate::math::dense_as_sparse")]
    pub start_weights: Vec<f64>,
    #[serde(with = "crate::math::dense_as_sparse")]
    pub end_weights: Vec<f64>,
    pub start_bias: f64,
    pub end_bias: f64,
    pub config: ExtractorTrainConfig,
}

/// Start and end scores of every token; ineligible positions get `-inf`.
pub struct TokenScores {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl SpanScorerModel {
    pub fn zeros(config: ExtractorTrainConfig) -> Self {
        SpanScorerModel {
            start_weights: vec![0.0; FEATURE_DIM],
            end_weights: vec![0.0; FEATURE_DIM],
            start_bias: 0.0,
            end_bias: 0.0,
            config,
        }
    }

    pub fn token_scores(&self, features: &[Option<SparseVec>]) -> TokenScores {
        let mut start = Vec::with_capacity(features.len());
        let mut end = Vec::with_capacity(features.len());
        for f in features {
            match f {
                Some(f) => {
                    start.push(f.dot(&self.start_weights) + self.start_bias);
                    end.push(f.dot(&self.end_weights) + self.end_bias);
                }
                None => {
                    start.push(f64::NEG_INFINITY);
                    end.push(f64::NEG_INFINITY);
                }
            }
        }
        TokenScores { start, end }
    }

    /// Span loss `-ln p_start(s) - ln p_end(e)` for a gold span.
    pub fn span_loss(&self, question: &str, context: &TokenSequence, gold: (usize, usize)) -> f64 {
        let feats = token_features(context, question);
        let scores = self.token_scores(&feats);
        span_nll(&scores, gold)
    }
}

fn span_nll(scores: &TokenScores, gold: (usize, usize)) -> f64 {
    let eligible = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let zs = log_sum_exp(&eligible(&scores.start));
    let ze = log_sum_exp(&eligible(&scores.end));
    (zs - scores.start[gold.0]) + (ze - scores.end[gold.1])
}

/// A candidate answer with its component scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub row: usize,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub provenance: SpanSource,
    pub s_start: f64,
    pub s_end: f64,
}

impl ScoredSpan {
    pub fn score(&self) -> f64 {
        self.s_start + self.s_end
    }
}

/// Top-`k` spans by `s_st + s_en`. Candidates lie inside one cell or
/// passage segment and are at most `max_len` tokens long. Ties prefer the
/// earlier start, then the shorter span.
pub fn score_spans(
    question: &str,
    context: &TokenSequence,
    model: &SpanScorerModel,
    row: usize,
    k: usize,
    max_len: usize,
) -> Vec<ScoredSpan> {
    let feats = token_features(context, question);
    let scores = model.token_scores(&feats);
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (tag, s, e) in context.segments() {
        if !tag.is_answer_bearing() {
            continue;
        }
        for start in s..e {
            for end in start..e.min(start + max_len.max(1)) {
                cands.push((scores.start[start] + scores.end[end], start, end));
            }
        }
    }
    cands.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    cands
        .into_iter()
        .take(k)
        .map(|(_, start, end)| ScoredSpan {
            row,
            start,
            end,
            surface: context.surface(start, end),
            provenance: context.source_of(start, end).expect("span within one segment"),
            s_start: scores.start[start],
            s_end: scores.end[end],
        })
        .collect()
}

/// Occurrences of `answer` in the answer-bearing segments of `context`,
/// never crossing a segment boundary.
pub fn context_answer_spans(context: &TokenSequence, answer: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (tag, s, e) in context.segments() {
        if tag.is_answer_bearing() {
            out.extend(
                enumerate_spans(&context.tokens()[s..e], answer)
                    .into_iter()
                    .map(|(a, b)| (a + s, b + s)),
            );
        }
    }
    out
}

/// Training instance for the extractor: one row's context and every span in
/// it that matches the gold answer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionInstance {
    pub question_id: String,
    pub table_id: String,
    pub question: String,
    pub row: usize,
    pub context: TokenSequence,
    pub gold_spans: Vec<(usize, usize)>,
}

/// Most probable positive row by retriever score; ties go to the lower index.
pub fn select_feedback_row(bag: &SupervisionBag, row_scores: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &r in &bag.positive_rows {
        let s = row_scores.get(r).copied().unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|b| s > row_scores.get(b).copied().unwrap_or(f64::NEG_INFINITY)) {
            best = Some(r);
        }
    }
    best.ok_or(Error::EmptyBag)
}

/// Extraction instances for one question. With retriever feedback
/// (`row_scores` given) a single instance is built from the best positive
/// row; without it every positive row yields an instance. Rows whose
/// (possibly truncated) context no longer contains the answer are dropped.
pub fn build_extraction_instances(
    builder: &ContextBuilder<'_>,
    question: &Question,
    table: &Table,
    bag: &SupervisionBag,
    answer: &str,
    row_scores: Option<&[f64]>,
) -> Result<Vec<ExtractionInstance>> {
    let rows: Vec<usize> = match row_scores {
        Some(scores) => vec![select_feedback_row(bag, scores)?],
        None => bag.positive_rows.iter().copied().collect(),
    };
    Ok(rows
        .into_iter()
        .filter_map(|row| {
            let context = builder.extraction_sequence(question, table, row);
            let gold_spans = context_answer_spans(&context, answer);
            (!gold_spans.is_empty()).then(|| ExtractionInstance {
                question_id: question.id.clone(),
                table_id: table.id.clone(),
                question: question.text.clone(),
                row,
                context,
                gold_spans,
            })
        })
        .collect())
}

/// Parameters: start weights, end weights, start bias, end bias.
const START_BIAS: usize = 2 * FEATURE_DIM;
const END_BIAS: usize = 2 * FEATURE_DIM + 1;

/// Loss of one span target and its gradient over the packed parameters.
pub fn span_loss_grad(
    params: &[f64],
    features: &[Option<SparseVec>],
    gold: (usize, usize),
    grad: &mut GradBuffer,
) -> f64 {
    let eligible: Vec<usize> = (0..features.len()).filter(|&i| features[i].is_some()).collect();
    let feat = |i: usize| features[i].as_ref().expect("eligible");
    let start: Vec<f64> = eligible
        .iter()
        .map(|&i| feat(i).dot(&params[..FEATURE_DIM]) + params[START_BIAS])
        .collect();
    let end: Vec<f64> = eligible
        .iter()
        .map(|&i| feat(i).dot(&params[FEATURE_DIM..2 * FEATURE_DIM]) + params[END_BIAS])
        .collect();
    let ps = softmax(&start);
    let pe = softmax(&end);
    let gs = eligible.iter().position(|&i| i == gold.0).expect("gold start eligible");
    let ge = eligible.iter().position(|&i| i == gold.1).expect("gold end eligible");
    let loss = (log_sum_exp(&start) - start[gs]) + (log_sum_exp(&end) - end[ge]);
    for (k, &i) in eligible.iter().enumerate() {
        let ds = ps[k] - if k == gs { 1.0 } else { 0.0 };
        let de = pe[k] - if k == ge { 1.0 } else { 0.0 };
        for &(j, v) in feat(i).entries() {
            grad.add(j as usize, ds * v);
            grad.add(FEATURE_DIM + j as usize, de * v);
        }
        grad.add(START_BIAS, ds);
        grad.add(END_BIAS, de);
    }
    loss
}

/// Fits a span model on `(instance, gold span)` targets from scratch.
pub fn train_span_model(
    data: &[ExtractionInstance],
    targets: &[(usize, (usize, usize))],
    config: &ExtractorTrainConfig,
) -> SpanScorerModel {
    let mut params = vec![0.0; 2 * FEATURE_DIM + 2];
    let mut opt = Adagrad::new(params.len(), config.learning_rate, config.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut grad = GradBuffer::default();
    let feats: Vec<Vec<Option<SparseVec>>> = targets
        .iter()
        .map(|&(i, _)| token_features(&data[i].context, &data[i].question))
        .collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &t in &order {
            let (_, gold) = targets[t];
            span_loss_grad(&params, &feats[t], gold, &mut grad);
            let g = grad.drain_merged();
            opt.step(&mut params, &g);
        }
    }
    SpanScorerModel {
        start_weights: params[..FEATURE_DIM].to_vec(),
        end_weights: params[FEATURE_DIM..2 * FEATURE_DIM].to_vec(),
        start_bias: params[START_BIAS],
        end_bias: params[END_BIAS],
        config: config.clone(),
    }
}

/// Index (into `gold_spans`) of the occurrence the model scores highest;
/// ties go to the earliest.
pub fn best_gold_span(model: &SpanScorerModel, instance: &ExtractionInstance) -> usize {
    let feats = token_features(&instance.context, &instance.question);
    let scores = model.token_scores(&feats);
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, &(s, e)) in instance.gold_spans.iter().enumerate() {
        let v = scores.start[s] + scores.end[e];
        if v > best_score {
            best = k;
            best_score = v;
        }
    }
    best
}

/// Which gold occurrence an ambiguous instance was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiseChoice {
    pub question_id: String,
    pub row: usize,
    /// Index into the instance's gold spans.
    pub chosen: usize,
    pub span: (usize, usize),
    /// The chosen span as (source, start, end) within its cell or passage.
    pub located: Option<(SpanSource, usize, usize)>,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub single_span: usize,
    pub multi_span: usize,
    pub choices: Vec<DenoiseChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorTraining {
    pub model: SpanScorerModel,
    /// Model fitted on single-span instances only (multi-span mode).
    pub initial: Option<SpanScorerModel>,
    pub report: DenoiseReport,
}

/// Trains the extractor.
///
/// Multi-span mode: fit an initial model on the single-span instances, use
/// it to pick the best occurrence in every multi-span instance, then fit the
/// final model from scratch on the single-span plus denoised instances.
/// First-span mode trains once on each instance's leftmost occurrence.
pub fn train_answer_extractor(data: &[ExtractionInstance], config: &ExtractorTrainConfig) -> Result<ExtractorTraining> {
    if data.iter().all(|d| d.gold_spans.is_empty()) {
        return Err(Error::NoExtractionInstances);
    }
    let single: Vec<usize> = (0..data.len()).filter(|&i| data[i].gold_spans.len() == 1).collect();
    let multi: Vec<usize> = (0..data.len()).filter(|&i| data[i].gold_spans.len() > 1).collect();

    let (initial, chosen): (Option<SpanScorerModel>, Vec<usize>) = match config.selection {
        SpanSelection::FirstSpan => (None, multi.iter().map(|_| 0).collect()),
        SpanSelection::MultiSpan => {
            if single.is_empty() {
                return Err(Error::NoSingleSpanInstances);
            }
            let targets: Vec<_> = single.iter().map(|&i| (i, data[i].gold_spans[0])).collect();
            let init = train_span_model(data, &targets, config);
            let chosen = multi.iter().map(|&i| best_gold_span(&init, &data[i])).collect();
            (Some(init), chosen)
        }
    };

    let choices: Vec<DenoiseChoice> = multi
        .iter()
        .zip(&chosen)
        .map(|(&i, &k)| DenoiseChoice {
            question_id: data[i].question_id.clone(),
            row: data[i].row,
            chosen: k,
            span: data[i].gold_spans[k],
            located: data[i].context.locate(data[i].gold_spans[k].0, data[i].gold_spans[k].1),
            candidates: data[i].gold_spans.len(),
        })
        .collect();

    let mut targets: Vec<(usize, (usize, usize))> = Vec::with_capacity(single.len() + multi.len());
    let mut m = 0;
    for (i, d) in data.iter().enumerate() {
        match d.gold_spans.len() {
            0 => {}
            1 => targets.push((i, d.gold_spans[0])),
            _ => {
                targets.push((i, choices[m].span));
                m += 1;
            }
        }
    }
    let model = train_span_model(data, &targets, config);
    Ok(ExtractorTraining {
        model,
        initial,
        report: DenoiseReport {
            single_span: single.len(),
            multi_span: multi.len(),
            choices,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn passage_context(text: &str) -> TokenSequence {
        let mut seq = TokenSequence::new();
        seq.push_passage("P1", &tokenize(text));
        seq
    }

    #[test]
    fn single_token_context_has_one_candidate() {
        let ctx = passage_context("eagles");
        let m = SpanScorerModel::zeros(ExtractorTrainConfig::default());
        let spans = score_spans("q", &ctx, &m, 0, 5, 30);
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end), (0, 0));
        assert_eq!(spans[0].provenance, SpanSource::Passage("P1".into()));
    }

    #[test]
    fn candidates_exhaust_with_max_len_one() {
        let ctx = passage_context("a b c");
        let m = SpanScorerModel::zeros(ExtractorTrainConfig::default());
        let spans = score_spans("q", &ctx, &m, 0, 5, 1);
        assert_eq!(spans.len(), 3);
        // Equal scores: earlier start first.
        assert_eq!(spans.iter().map(|s| s.start).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn peaked_model_ranks_its_token_first() {
        let ctx = passage_context("x y gold z");
        let mut m = SpanScorerModel::zeros(ExtractorTrainConfig::default());
        let ix = hashed(&["w", "gold"]) as usize;
        m.start_weights[ix] = 5.0;
        m.end_weights[ix] = 5.0;
        let spans = score_spans("q", &ctx, &m, 0, 3, 30);
        assert_eq!((spans[0].start, spans[0].end), (2, 2));
        assert_eq!(spans[0].surface, "gold");
    }

    #[test]
    fn spans_never_straddle_segments() {
        let mut ctx = TokenSequence::new();
        ctx.push(SegmentTag::Header(0), "name");
        ctx.push(SegmentTag::Separator, "is");
        ctx.extend(SegmentTag::Cell(0), ["boston", "college"]);
        ctx.push(SegmentTag::Separator, ".");
        ctx.push_passage("P1", &tokenize("boston college eagles"));
        let m = SpanScorerModel::zeros(ExtractorTrainConfig::default());
        for s in score_spans("q", &ctx, &m, 0, 100, 30) {
            assert_eq!(ctx.source_of(s.start, s.end).as_ref(), Some(&s.provenance));
        }
        assert_eq!(context_answer_spans(&ctx, "boston college"), vec![(2, 3), (5, 6)]);
    }

    #[test]
    fn uniform_model_start_loss_is_ln_n() {
        let ctx = passage_context("a b c d e f g");
        let m = SpanScorerModel::zeros(ExtractorTrainConfig::default());
        let loss = m.span_loss("q", &ctx, (2, 2));
        assert!((loss - 2.0 * 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn feedback_row_is_bag_argmax() {
        use alloc::collections::BTreeMap;
        let bag = SupervisionBag {
            question_id: "q".into(),
            table_id: "t".into(),
            positive_rows: [2usize, 5].into_iter().collect(),
            spans_per_row: BTreeMap::new(),
        };
        let mut scores = vec![0.0; 6];
        scores[2] = 0.3;
        scores[5] = 0.8;
        scores[0] = 0.99;
        assert_eq!(select_feedback_row(&bag, &scores), Ok(5));
        scores[2] = 0.8;
        assert_eq!(select_feedback_row(&bag, &scores), Ok(2));
        let one = SupervisionBag {
            positive_rows: [3usize].into_iter().collect(),
            ..bag.clone()
        };
        assert_eq!(select_feedback_row(&one, &[0.9, 0.9, 0.9, 0.0]), Ok(3));
        let empty = SupervisionBag {
            positive_rows: BTreeSet::new(),
            ..bag
        };
        assert_eq!(select_feedback_row(&empty, &scores), Err(Error::EmptyBag));
    }

    #[test]
    fn multi_span_needs_single_span_instances() {
        let ctx = passage_context("eagles and eagles");
        let inst = ExtractionInstance {
            question_id: "q".into(),
            table_id: "t".into(),
            question: "q".into(),
            row: 0,
            gold_spans: context_answer_spans(&ctx, "eagles"),
            context: ctx,
        };
        let err = train_answer_extractor(core::slice::from_ref(&inst), &ExtractorTrainConfig::default()).unwrap_err();
        assert_eq!(err, Error::NoSingleSpanInstances);
        let cfg = ExtractorTrainConfig {
            selection: SpanSelection::FirstSpan,
            ..Default::default()
        };
        let out = train_answer_extractor(&[inst], &cfg).unwrap();
        assert_eq!(out.report.choices[0].chosen, 0);
    }
}
