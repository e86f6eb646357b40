//! Row retriever: a logistic scorer over hashed lexical features of the
//! retrieval linearization, trained with the multi-instance bag loss.
//!
//! The bag loss for one (question, table) pair with positive rows `B` is
//!
//! ```text
//! min_{r in B} -ln f(x_r)  +  sum_{r not in B} -ln(1 - f(x_r))
//! ```
//!
//! so the model is rewarded for scoring any one positive row highly while
//! every negative row must score low. The min is hard: the gradient flows
//! through the arg-min positive only.

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
use crate::math::{clamp_prob, hash_key, ln, ln_1p, sigmoid, SparseVec, PROB_EPS};
use crate::optim::{Adagrad, GradBuffer};
use crate::supervision::SupervisionBag;
use crate::text::{is_sentinel, is_stopword, tokenize};

/// Width of the feature space; the first [`FIXED_FEATURES`] slots are dense
/// overlap features, the rest hold hashed lexical features.
pub const FEATURE_DIM: usize = 1 << 14;
pub const FIXED_FEATURES: usize = 16;

pub const F_UNIGRAM: u32 = 0;
pub const F_BIGRAM: u32 = 1;
pub const F_HEADER: u32 = 2;
pub const F_CELL: u32 = 3;
pub const F_META: u32 = 4;
pub const F_PASSAGE: u32 = 5;
pub const F_COVERAGE: u32 = 6;
pub const F_HEADER_MATCH: u32 = 7;
pub const F_PASSAGES: u32 = 8;
pub const F_CELL_MENTIONED: u32 = 9;

fn hashed(parts: &[&str]) -> u32 {
    let span = (FEATURE_DIM - FIXED_FEATURES) as u64;
    (FIXED_FEATURES as u64 + hash_key(parts) % span) as u32
}

fn content_segment(tag: SegmentTag) -> Option<&'static str> {
    match tag {
        SegmentTag::Header(_) => Some("h"),
        SegmentTag::Cell(_) => Some("c"),
        SegmentTag::Meta => Some("m"),
        SegmentTag::Passage(_) => Some("p"),
        SegmentTag::Question | SegmentTag::Separator => None,
    }
}

/// Sparse features of one linearized row against the question.
///
/// Overlap features count distinct non-stopword question tokens found in the
/// row (overall, as adjacent bigrams, and per segment), the covered fraction
/// of the question, how many column headers the question mentions, and
/// whether some cell is mentioned in full. Hashed features are the row's
/// own cell and passage vocabulary, L2-normalized.
pub fn featurize(x: &TokenSequence, question: &Question) -> SparseVec {
    let q_tokens: Vec<String> = tokenize(&question.text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect();
    let q_set: BTreeSet<&str> = q_tokens.iter().map(String::as_str).collect();
    let q_bigrams: BTreeSet<(&str, &str)> = q_tokens
        .windows(2)
        .map(|w| (w[0].as_str(), w[1].as_str()))
        .collect();

    let mut found: BTreeSet<&str> = BTreeSet::new();
    let mut per_seg: [BTreeSet<&str>; 4] = Default::default();
    let mut bigrams: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut lexical: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut passages: BTreeSet<u32> = BTreeSet::new();
    let mut header_cols: BTreeSet<u16> = BTreeSet::new();
    let (tokens, origin) = (x.tokens(), x.origin());

    for (i, (tok, &tag)) in tokens.iter().zip(origin).enumerate() {
        let Some(seg) = content_segment(tag) else { continue };
        if let SegmentTag::Passage(p) = tag {
            passages.insert(p);
        }
        if is_sentinel(tok) {
            continue;
        }
        if matches!(seg, "c" | "p") && !is_stopword(tok) {
            lexical.insert((seg, tok.as_str()));
        }
        if q_set.contains(tok.as_str()) {
            found.insert(tok);
            let slot = match seg {
                "h" => 0,
                "c" => 1,
                "m" => 2,
                _ => 3,
            };
            per_seg[slot].insert(tok);
            if let SegmentTag::Header(c) = tag {
                header_cols.insert(c);
            }
        }
        if i + 1 < tokens.len() && origin[i + 1] == tag {
            let pair = (tok.as_str(), tokens[i + 1].as_str());
            if q_bigrams.contains(&pair) {
                bigrams.insert(pair);
            }
        }
    }

    let cell_mentioned = x
        .segments()
        .into_iter()
        .filter(|(tag, _, _)| matches!(tag, SegmentTag::Cell(_)))
        .map(|(_, s, e)| {
            let toks: Vec<&String> = tokens[s..e].iter().filter(|t| !is_stopword(t)).collect();
            if toks.is_empty() {
                0.0
            } else {
                toks.iter().filter(|t| q_set.contains(t.as_str())).count() as f64 / toks.len() as f64
            }
        })
        .fold(0.0, f64::max);

    let count = |n: usize| ln_1p(n as f64);
    let mut entries = vec![
        (F_UNIGRAM, count(found.len())),
        (F_BIGRAM, count(bigrams.len())),
        (F_HEADER, count(per_seg[0].len())),
        (F_CELL, count(per_seg[1].len())),
        (F_META, count(per_seg[2].len())),
        (F_PASSAGE, count(per_seg[3].len())),
        (F_HEADER_MATCH, count(header_cols.len())),
        (F_PASSAGES, count(passages.len())),
        (F_CELL_MENTIONED, cell_mentioned),
    ];
    if !q_set.is_empty() {
        entries.push((F_COVERAGE, found.len() as f64 / q_set.len() as f64));
    }
    entries.extend(lexical.iter().map(|(seg, tok)| (hashed(&[seg, tok]), 1.0)));
    SparseVec::from_unsorted(entries)
}

/// Which loss the retriever is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BagLoss {
    /// Hard min over the positive bag plus all negatives.
    MultiInstance,
    /// Every positive row labelled 1 (plain binary cross-entropy).
    AllPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Largest positive bag admitted in epoch `i` (0-based); epochs past the
    /// end of the list admit every bag. Rejected bags still contribute
    /// their negative rows.
    pub curriculum: Vec<usize>,
    pub loss: BagLoss,
}

impl Default for RowTrainConfig {
    fn default() -> Self {
        RowTrainConfig {
            epochs: 8,
            learning_rate: 0.1,
            l2: 0.0,
            seed: 13,
            curriculum: vec![1, 1],
            loss: BagLoss::MultiInstance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowScorerModel {
    #[serde(with = "crate::math::dense_as_sparse")]
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: RowTrainConfig,
}

impl RowScorerModel {
    pub fn zeros(config: RowTrainConfig) -> Self {
        RowScorerModel {
            weights: vec![0.0; FEATURE_DIM],
            bias: 0.0,
            config,
        }
    }

    pub fn logit(&self, features: &SparseVec) -> f64 {
        features.dot(&self.weights) + self.bias
    }

    /// Relevance probability in (0, 1).
    pub fn score(&self, features: &SparseVec) -> f64 {
        sigmoid(self.logit(features))
    }

    /// Scores of every row of `table`, in row order.
    pub fn score_rows(&self, builder: &ContextBuilder<'_>, question: &Question, table: &Table) -> Vec<f64> {
        (0..table.row_count())
            .map(|r| {
                let x = builder.retrieval_sequence(question, table, r);
                self.score(&featurize(&x, question))
            })
            .collect()
    }
}

/// Top-`k` `(row, score)` pairs, descending; ties go to the lower row index.
pub fn rank_rows(scores: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    ranked.truncate(k);
    ranked
}

pub fn retrieve_rows(
    builder: &ContextBuilder<'_>,
    question: &Question,
    table: &Table,
    model: &RowScorerModel,
    k: usize,
) -> Vec<(usize, f64)> {
    rank_rows(&model.score_rows(builder, question, table), k)
}

/// Multi-instance bag loss over row probabilities (index = row).
pub fn mil_loss(probs: &[f64], positives: &BTreeSet<usize>) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::EmptyBag);
    }
    let mut best = f64::INFINITY;
    let mut neg = 0.0;
    for (r, &p) in probs.iter().enumerate() {
        let p = clamp_prob(p);
        if positives.contains(&r) {
            best = best.min(-ln(p));
        } else {
            neg += -ln(1.0 - p);
        }
    }
    Ok(best + neg)
}

/// Binary cross-entropy with every row of `positives` labelled 1.
pub fn all_positive_loss(probs: &[f64], positives: &BTreeSet<usize>) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(r, &p)| {
            let p = clamp_prob(p);
            if positives.contains(&r) {
                -ln(p)
            } else {
                -ln(1.0 - p)
            }
        })
        .sum()
}

/// Loss and its derivative with respect to each row logit.
///
/// With `include_positives` false only the negative rows contribute (the
/// curriculum's treatment of bags it does not yet trust). Clamped
/// probabilities have zero derivative.
pub fn bag_loss_grad(
    logits: &[f64],
    positives: &BTreeSet<usize>,
    loss: BagLoss,
    include_positives: bool,
) -> (f64, Vec<f64>) {
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let clamped = |p: f64| !(PROB_EPS..=1.0 - PROB_EPS).contains(&p);
    let mut grad = vec![0.0; logits.len()];
    let mut total = 0.0;
    for (r, &p) in probs.iter().enumerate() {
        if !positives.contains(&r) {
            total += -ln(1.0 - clamp_prob(p));
            if !clamped(p) {
                grad[r] = p;
            }
        }
    }
    if !include_positives || positives.is_empty() {
        return (total, grad);
    }
    match loss {
        BagLoss::MultiInstance => {
            // Highest probability = smallest loss; ties go to the lowest row.
            let mut arg = None::<usize>;
            for &r in positives {
                if arg.is_none_or(|a| probs[r] > probs[a]) {
                    arg = Some(r);
                }
            }
            let r = arg.expect("non-empty bag");
            total += -ln(clamp_prob(probs[r]));
            if !clamped(probs[r]) {
                grad[r] = probs[r] - 1.0;
            }
        }
        BagLoss::AllPositive => {
            for &r in positives {
                total += -ln(clamp_prob(probs[r]));
                if !clamped(probs[r]) {
                    grad[r] = probs[r] - 1.0;
                }
            }
        }
    }
    (total, grad)
}

/// One (question, table) bag with each row already linearized and featurized.
#[derive(Debug, Clone)]
pub struct RowTrainInstance {
    pub question_id: String,
    pub table_id: String,
    pub bag: SupervisionBag,
    pub linearizations: Vec<TokenSequence>,
    pub features: Vec<SparseVec>,
}

impl RowTrainInstance {
    pub fn new(builder: &ContextBuilder<'_>, question: &Question, table: &Table, bag: SupervisionBag) -> Self {
        let linearizations: Vec<TokenSequence> = (0..table.row_count())
            .map(|r| builder.retrieval_sequence(question, table, r))
            .collect();
        let features = linearizations.iter().map(|x| featurize(x, question)).collect();
        RowTrainInstance {
            question_id: question.id.clone(),
            table_id: table.id.clone(),
            bag,
            linearizations,
            features,
        }
    }
}

/// Loss of one instance and its gradient with respect to `params`
/// (`FEATURE_DIM` weights followed by the bias).
pub fn instance_loss_grad(
    params: &[f64],
    features: &[SparseVec],
    positives: &BTreeSet<usize>,
    loss: BagLoss,
    include_positives: bool,
    grad: &mut GradBuffer,
) -> f64 {
    let bias_ix = params.len() - 1;
    let logits: Vec<f64> = features
        .iter()
        .map(|f| f.dot(&params[..bias_ix]) + params[bias_ix])
        .collect();
    let (value, dlogit) = bag_loss_grad(&logits, positives, loss, include_positives);
    for (f, &g) in features.iter().zip(&dlogit) {
        if g == 0.0 {
            continue;
        }
        for &(i, v) in f.entries() {
            grad.add(i as usize, g * v);
        }
        grad.add(bias_ix, g);
    }
    value
}

/// Trains the row scorer with Adagrad, shuffling bags each epoch from a
/// seeded generator. Bags with no positive row are skipped.
pub fn train_row_retriever(data: &[RowTrainInstance], config: &RowTrainConfig) -> Result<RowScorerModel> {
    if !data.iter().any(|d| d.bag.is_answerable()) {
        return Err(Error::NoTrainableBags);
    }
    let mut params = vec![0.0; FEATURE_DIM + 1];
    let mut opt = Adagrad::new(params.len(), config.learning_rate, config.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).filter(|&i| data[i].bag.is_answerable()).collect();
    let mut grad = GradBuffer::default();

    for epoch in 0..config.epochs {
        let cap = config.curriculum.get(epoch).copied().unwrap_or(usize::MAX);
        order.shuffle(&mut rng);
        for &i in &order {
            let inst = &data[i];
            let admit = inst.bag.len() <= cap;
            instance_loss_grad(&params, &inst.features, &inst.bag.positive_rows, config.loss, admit, &mut grad);
            let g = grad.drain_merged();
            opt.step(&mut params, &g);
        }
    }
    let bias = params.pop().unwrap_or(0.0);
    Ok(RowScorerModel {
        weights: params,
        bias,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{LinkedOrder, SegmentTag};
    use crate::corpus::{Cell, Corpus, Passage};
    use crate::supervision::find_answer_rows;
    use alloc::collections::BTreeMap;

    fn set(rows: &[usize]) -> BTreeSet<usize> {
        rows.iter().copied().collect()
    }

    #[test]
    fn mil_loss_examples() {
        // -ln 0.9 - ln(1 - 0.2)
        let l = mil_loss(&[0.9, 0.6, 0.2], &set(&[0, 1])).unwrap();
        assert!((l - (-(0.9f64.ln()) - 0.8f64.ln())).abs() < 1e-12);
        assert!((l - 0.3285).abs() < 1e-4);
        let l = mil_loss(&[0.5], &set(&[0])).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        let l = mil_loss(&[1.0 - 1e-9, 1e-9, 1e-9], &set(&[0])).unwrap();
        assert!(l < 1e-6);
        assert_eq!(mil_loss(&[0.3], &BTreeSet::new()), Err(Error::EmptyBag));
    }

    #[test]
    fn mil_never_exceeds_all_positive() {
        let probs = [0.9, 0.6, 0.2, 0.4];
        let b = set(&[0, 1, 3]);
        assert!(mil_loss(&probs, &b).unwrap() <= all_positive_loss(&probs, &b));
    }

    #[test]
    fn grad_flows_through_argmin_positive_only() {
        let logits = [0.5, 2.0, -1.0];
        let (_, g) = bag_loss_grad(&logits, &set(&[0, 1]), BagLoss::MultiInstance, true);
        assert_eq!(g[0], 0.0);
        assert!(g[1] < 0.0);
        assert!(g[2] > 0.0);
        let (_, g) = bag_loss_grad(&logits, &set(&[0, 1]), BagLoss::MultiInstance, false);
        assert_eq!((g[0], g[1]), (0.0, 0.0));
    }

    #[test]
    fn rank_ties_by_index_and_clips_k() {
        assert_eq!(rank_rows(&[0.2, 0.9, 0.9], 2), vec![(1, 0.9), (2, 0.9)]);
        assert_eq!(rank_rows(&[0.2, 0.9, 0.1], 5).len(), 3);
        assert_eq!(rank_rows(&[0.7], 1), vec![(0, 0.7)]);
    }

    fn question(text: &str) -> Question {
        Question {
            id: "q".into(),
            text: text.into(),
            answer_text: None,
            table_id: Some("T".into()),
        }
    }

    #[test]
    fn featurize_zero_overlap_and_full_coverage() {
        let mut x = TokenSequence::new();
        x.push(SegmentTag::Header(0), "name");
        x.push(SegmentTag::Separator, "is");
        x.extend(SegmentTag::Cell(0), ["boston", "college"]);
        let none = featurize(&x, &question("river delta"));
        for f in [F_UNIGRAM, F_BIGRAM, F_HEADER, F_CELL, F_META, F_PASSAGE, F_COVERAGE, F_CELL_MENTIONED] {
            assert_eq!(none.get(f), 0.0);
        }
        let full = featurize(&x, &question("boston college"));
        assert_eq!(full.get(F_COVERAGE), 1.0);
        assert_eq!(full.get(F_CELL_MENTIONED), 1.0);
        assert!(full.get(F_BIGRAM) > 0.0);
        assert_eq!(full, featurize(&x, &question("boston college")));
    }

    #[test]
    fn separable_single_bag_converges() {
        let t = Table {
            id: "T".into(),
            meta: String::new(),
            headers: vec!["name".into()],
            rows: vec![vec![Cell::linked("alpha", &["P1"])]],
        };
        let p = Passage {
            id: "P1".into(),
            title: "alpha".into(),
            text: "alpha won in 1999".into(),
        };
        let c = Corpus::new(vec![t.clone()], vec![p]).unwrap();
        let b = ContextBuilder::new(&c, &LinkedOrder, 512);
        let q = question("when did alpha win");
        let bag = find_answer_rows(&t, &c, "q", "1999");
        let inst = RowTrainInstance::new(&b, &q, &t, bag);
        let model = train_row_retriever(&[inst], &RowTrainConfig::default()).unwrap();
        assert!(model.score_rows(&b, &q, &t)[0] > 0.5);
    }

    #[test]
    fn training_rejects_all_empty_bags() {
        let inst = RowTrainInstance {
            question_id: "q".into(),
            table_id: "T".into(),
            bag: SupervisionBag {
                question_id: "q".into(),
                table_id: "T".into(),
                positive_rows: BTreeSet::new(),
                spans_per_row: BTreeMap::new(),
            },
            linearizations: vec![],
            features: vec![SparseVec::default()],
        };
        assert_eq!(
            train_row_retriever(&[inst], &RowTrainConfig::default()),
            Err(Error::NoTrainableBags)
        );
    }
}
