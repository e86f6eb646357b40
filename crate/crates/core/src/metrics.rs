//! Answer scoring (EM/F1 with provenance buckets), row accuracy and
//! table-retrieval HITS@K.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Question;
use crate::error::{Error, Result};
use crate::supervision::SpanSource;
use crate::text::answer_tokens;

/// 1.0 iff both strings normalize to the same answer.
pub fn exact_match(pred: &str, gold: &str) -> f64 {
    if answer_tokens(pred) == answer_tokens(gold) {
        1.0
    } else {
        0.0
    }
}

/// Token-multiset F1 over normalized answers.
pub fn f1_token(pred: &str, gold: &str) -> f64 {
    let p = answer_tokens(pred);
    let g = answer_tokens(gold);
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &g {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// One system answer. `provenance` is `None` when nothing was predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub answer: String,
    #[serde(default)]
    pub row: Option<usize>,
    #[serde(default)]
    pub provenance: Option<SpanSource>,
    #[serde(default)]
    pub row_score: f64,
    #[serde(default)]
    pub s_start: f64,
    #[serde(default)]
    pub s_end: f64,
}

/// Mean EM/F1 (percent) over `count` questions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub em: f64,
    pub f1: f64,
}

#[derive(Default)]
struct Acc {
    n: usize,
    em: f64,
    f1: f64,
}

impl Acc {
    fn add(&mut self, em: f64, f1: f64) {
        self.n += 1;
        self.em += em;
        self.f1 += f1;
    }

    fn bucket(&self) -> Option<Bucket> {
        (self.n > 0).then(|| Bucket {
            count: self.n,
            em: 100.0 * self.em / self.n as f64,
            f1: 100.0 * self.f1 / self.n as f64,
        })
    }
}

/// Evaluation summary. Percentages throughout. Buckets with no members
/// are `None`. Questions without a prediction count toward `total` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub total: Bucket,
    pub table: Option<Bucket>,
    pub passage: Option<Bucket>,
    pub unanswered: usize,
    pub row_accuracy: Option<f64>,
}

/// Scores predictions against gold answers. Gold questions without an
/// answer are ignored; with `bags`, row accuracy is the share of scored
/// questions whose predicted row lies in the question's bag.
pub fn evaluate(
    predictions: &[Prediction],
    gold: &[Question],
    bags: Option<&BTreeMap<String, BTreeSet<usize>>>,
) -> Result<Report> {
    let gold_ids: BTreeSet<&str> = gold.iter().map(|q| q.id.as_str()).collect();
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        if !gold_ids.contains(p.question_id.as_str()) {
            return Err(Error::UnknownQuestion(p.question_id.clone()));
        }
        if by_id.insert(p.question_id.as_str(), p).is_some() {
            return Err(Error::DuplicatePrediction(p.question_id.clone()));
        }
    }
    let (mut total, mut table, mut passage) = (Acc::default(), Acc::default(), Acc::default());
    let mut unanswered = 0;
    let (mut row_hits, mut row_n) = (0usize, 0usize);
    for q in gold {
        let Some(answer) = q.answer_text.as_deref() else { continue };
        let pred = by_id.get(q.id.as_str());
        let (em, f1) = match pred {
            Some(p) => (exact_match(&p.answer, answer), f1_token(&p.answer, answer)),
            None => (0.0, 0.0),
        };
        total.add(em, f1);
        match pred.and_then(|p| p.provenance.as_ref()) {
            Some(SpanSource::Cell(_)) => table.add(em, f1),
            Some(SpanSource::Passage(_)) => passage.add(em, f1),
            None => unanswered += 1,
        }
        if let Some(bag) = bags.and_then(|b| b.get(&q.id)) {
            row_n += 1;
            if pred.and_then(|p| p.row).is_some_and(|r| bag.contains(&r)) {
                row_hits += 1;
            }
        }
    }
    Ok(Report {
        total: total.bucket().unwrap_or(Bucket { count: 0, em: 0.0, f1: 0.0 }),
        table: table.bucket(),
        passage: passage.bucket(),
        unanswered,
        row_accuracy: (bags.is_some() && row_n > 0).then(|| 100.0 * row_hits as f64 / row_n as f64),
    })
}

/// Fraction of questions whose gold table is among the first `k` ranked.
pub fn hits_at_k(ranked: &[Vec<String>], gold: &[String], k: usize) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .zip(gold)
        .filter(|(r, g)| r.iter().take(k).any(|t| t == *g))
        .count();
    hits as f64 / gold.len() as f64
}

/// `(k, HITS@k in percent)` for each requested `k`.
pub fn hits_curve(ranked: &[Vec<String>], gold: &[String], ks: &[usize]) -> Vec<(usize, f64)> {
    ks.iter().map(|&k| (k, 100.0 * hits_at_k(ranked, gold, k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn em_examples() {
        assert_eq!(exact_match("The Eagles", "eagles"), 1.0);
        assert_eq!(exact_match("2017", "2018"), 0.0);
        assert_eq!(exact_match("", "x"), 0.0);
    }

    #[test]
    fn f1_examples() {
        assert!((f1_token("the 2018 season", "2018") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_token("a b c", "a b c"), 1.0);
        assert_eq!(f1_token("x y", "z"), 0.0);
        assert_eq!(f1_token("", ""), 1.0);
        assert_eq!(f1_token("", "a x"), 0.0);
        // Multiset: the repeated token only matches once.
        assert!((f1_token("x x", "x y") - 0.5).abs() < 1e-12);
    }

    fn q(id: &str, ans: &str) -> Question {
        Question {
            id: id.into(),
            text: "?".into(),
            answer_text: Some(ans.into()),
            table_id: Some("t".into()),
        }
    }

    fn p(id: &str, ans: &str, prov: Option<SpanSource>, row: Option<usize>) -> Prediction {
        Prediction {
            question_id: id.into(),
            answer: ans.into(),
            row,
            provenance: prov,
            row_score: 0.0,
            s_start: 0.0,
            s_end: 0.0,
        }
    }

    #[test]
    fn one_hit_one_miss_is_fifty() {
        let gold = vec![q("a", "x"), q("b", "y")];
        let preds = vec![p("a", "x", Some(SpanSource::Cell(0)), None), p("b", "z", Some(SpanSource::Cell(1)), None)];
        let r = evaluate(&preds, &gold, None).unwrap();
        assert_eq!(r.total.em, 50.0);
        assert!(r.passage.is_none());
        assert_eq!(r.table.unwrap().count, 2);
        assert!(r.row_accuracy.is_none());
    }

    #[test]
    fn missing_prediction_scores_zero() {
        let gold = vec![q("a", "x"), q("b", "y")];
        let r = evaluate(&[p("a", "x", Some(SpanSource::Passage("p".into())), Some(0))], &gold, None).unwrap();
        assert_eq!(r.total.em, 50.0);
        assert_eq!(r.unanswered, 1);
        assert_eq!(r.passage.unwrap().em, 100.0);
    }

    #[test]
    fn duplicate_and_unknown_rejected() {
        let gold = vec![q("a", "x")];
        let d = vec![p("a", "x", None, None), p("a", "x", None, None)];
        assert_eq!(evaluate(&d, &gold, None), Err(Error::DuplicatePrediction("a".into())));
        assert_eq!(
            evaluate(&[p("zz", "x", None, None)], &gold, None),
            Err(Error::UnknownQuestion("zz".into()))
        );
    }

    #[test]
    fn row_accuracy_uses_bags() {
        let gold = vec![q("a", "x"), q("b", "y")];
        let preds = vec![p("a", "x", None, Some(2)), p("b", "y", None, Some(0))];
        let mut bags = BTreeMap::new();
        bags.insert(String::from("a"), BTreeSet::from([1, 2]));
        bags.insert(String::from("b"), BTreeSet::from([1]));
        let r = evaluate(&preds, &gold, Some(&bags)).unwrap();
        assert_eq!(r.row_accuracy, Some(50.0));
    }

    #[test]
    fn hits_monotone_example() {
        let ranked = vec![
            vec![String::from("t1"), String::from("t2")],
            vec![String::from("t3"), String::from("t4")],
        ];
        let gold = vec![String::from("t2"), String::from("t3")];
        assert_eq!(hits_at_k(&ranked, &gold, 1), 0.5);
        assert_eq!(hits_at_k(&ranked, &gold, 2), 1.0);
        assert_eq!(hits_curve(&ranked, &gold, &[1, 2]), vec![(1, 50.0), (2, 100.0)]);
    }
}
