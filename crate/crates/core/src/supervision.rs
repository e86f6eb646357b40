//! Distant supervision: which rows and spans of a table match the gold
//! answer text.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{retrieval_unit, Corpus, Table};
use crate::text::{answer_tokens, is_article, tokenize};

/// Where a span lives: a cell of the row (0-based column) or a passage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanSource {
    Cell(usize),
    Passage(String),
}

impl SpanSource {
    pub fn is_cell(&self) -> bool {
        matches!(self, SpanSource::Cell(_))
    }
}

/// A token span (inclusive end) inside a cell or passage token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub source: SpanSource,
    pub start_token: usize,
    pub end_token: usize,
    pub surface: String,
}

/// Positive rows of one (question, table) pair and their matching spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionBag {
    pub question_id: String,
    pub table_id: String,
    pub positive_rows: BTreeSet<usize>,
    pub spans_per_row: BTreeMap<usize, Vec<SpanRef>>,
}

impl SupervisionBag {
    /// False when the answer occurs nowhere in the table or its passages.
    pub fn is_answerable(&self) -> bool {
        !self.positive_rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positive_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive_rows.is_empty()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.positive_rows.contains(&row)
    }

    pub fn spans(&self, row: usize) -> &[SpanRef] {
        self.spans_per_row.get(&row).map_or(&[], |v| v.as_slice())
    }
}

/// All non-overlapping occurrences of `answer` in `tokens`, left to right.
///
/// Tokens are compared after normalization; articles inside the context are
/// skipped while matching, so "lord of the rings" matches the answer
/// "Lord of the Rings" (normalized "lord of rings"). A span never starts on
/// an article.
pub fn enumerate_spans<S: AsRef<str>>(tokens: &[S], answer: &str) -> Vec<(usize, usize)> {
    let want = answer_tokens(answer);
    let mut out = Vec::new();
    if want.is_empty() {
        return out;
    }
    let mut i = 0;
    while i < tokens.len() {
        match match_at(tokens, i, &want) {
            Some(end) => {
                out.push((i, end));
                i = end + 1;
            }
            None => i += 1,
        }
    }
    out
}

fn match_at<S: AsRef<str>>(tokens: &[S], start: usize, want: &[String]) -> Option<usize> {
    if tokens[start].as_ref() != want[0] {
        return None;
    }
    let mut k = 1;
    let mut j = start + 1;
    while k < want.len() {
        let tok = tokens.get(j)?.as_ref();
        if tok == want[k] {
            k += 1;
        } else if !is_article(tok) {
            return None;
        }
        j += 1;
    }
    Some(j - 1)
}

fn surface<S: AsRef<str>>(tokens: &[S], start: usize, end: usize) -> String {
    let mut s = String::new();
    for (i, t) in tokens[start..=end].iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_ref());
    }
    s
}

/// Builds the positive bag for `answer` over `table`: cells in column order,
/// then linked passages in link order.
pub fn find_answer_rows(
    table: &Table,
    corpus: &Corpus,
    question_id: &str,
    answer: &str,
) -> SupervisionBag {
    let mut bag = SupervisionBag {
        question_id: question_id.into(),
        table_id: table.id.clone(),
        positive_rows: BTreeSet::new(),
        spans_per_row: BTreeMap::new(),
    };
    for r in 0..table.row_count() {
        let unit = retrieval_unit(table, r);
        let mut spans = Vec::new();
        for (c, cell) in unit.cells.iter().enumerate() {
            let toks = tokenize(&cell.text);
            for (s, e) in enumerate_spans(&toks, answer) {
                spans.push(SpanRef {
                    source: SpanSource::Cell(c),
                    start_token: s,
                    end_token: e,
                    surface: surface(&toks, s, e),
                });
            }
        }
        for pid in &unit.linked_passages {
            let toks = corpus.passage_tokens(pid);
            for (s, e) in enumerate_spans(toks, answer) {
                spans.push(SpanRef {
                    source: SpanSource::Passage(pid.clone()),
                    start_token: s,
                    end_token: e,
                    surface: surface(toks, s, e),
                });
            }
        }
        if !spans.is_empty() {
            bag.positive_rows.insert(r);
            bag.spans_per_row.insert(r, spans);
        }
    }
    bag
}

/// Histogram of positive-bag sizes plus the multi-span rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityStats {
    pub total: usize,
    /// Bag size -> number of questions (size 0 = answer not found).
    pub row_counts: BTreeMap<usize, usize>,
    /// Questions whose answer was found in at least one row.
    pub answerable: usize,
    /// Questions with at least two positive rows.
    pub multi_row: usize,
    /// Answerable questions whose selected row carries more than one span.
    pub multi_span: usize,
}

impl AmbiguityStats {
    /// `selected` picks the row whose span count decides the multi-span rate
    /// (the row retriever's choice); `None` falls back to the first positive row.
    pub fn compute<F>(bags: &[SupervisionBag], mut selected: F) -> Self
    where
        F: FnMut(&SupervisionBag) -> Option<usize>,
    {
        let mut row_counts = BTreeMap::new();
        let (mut answerable, mut multi_row, mut multi_span) = (0, 0, 0);
        for bag in bags {
            *row_counts.entry(bag.len()).or_insert(0) += 1;
            if bag.is_empty() {
                continue;
            }
            answerable += 1;
            if bag.len() > 1 {
                multi_row += 1;
            }
            let row = selected(bag)
                .filter(|r| bag.contains(*r))
                .or_else(|| bag.positive_rows.iter().next().copied());
            if row.is_some_and(|r| bag.spans(r).len() > 1) {
                multi_span += 1;
            }
        }
        AmbiguityStats {
            total: bags.len(),
            row_counts,
            answerable,
            multi_row,
            multi_span,
        }
    }

    /// Bag size -> percentage of all questions.
    pub fn percentages(&self) -> BTreeMap<usize, f64> {
        self.row_counts
            .iter()
            .map(|(&k, &n)| (k, pct(n, self.total)))
            .collect()
    }

    pub fn multi_row_rate(&self) -> f64 {
        pct(self.multi_row, self.total)
    }

    /// Percentage of answerable questions with several spans in the selected row.
    pub fn multi_span_rate(&self) -> f64 {
        pct(self.multi_span, self.answerable)
    }
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

/// Convenience wrapper: `ambiguity_stats` with the first-positive-row fallback.
pub fn ambiguity_stats(bags: &[SupervisionBag]) -> AmbiguityStats {
    AmbiguityStats::compute(bags, |_| None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Cell, Passage};
    use crate::text::normalize_answer;
    use alloc::vec;

    #[test]
    fn spans_examples() {
        let toks = tokenize("2018 was good and 2018 again");
        assert_eq!(enumerate_spans(&toks, "2018"), vec![(0, 0), (4, 4)]);
        let toks = tokenize("New York Jets");
        assert_eq!(enumerate_spans(&toks, "new york"), vec![(0, 1)]);
        let toks = tokenize("york new");
        assert!(enumerate_spans(&toks, "new york").is_empty());
    }

    #[test]
    fn spans_skip_inner_articles_and_never_overlap() {
        let toks = tokenize("the lord of the rings");
        assert_eq!(enumerate_spans(&toks, "Lord of the Rings"), vec![(1, 4)]);
        let toks = tokenize("aa aa aa");
        assert_eq!(enumerate_spans(&toks, "aa aa"), vec![(0, 1)]);
        assert!(enumerate_spans(&toks, "the").is_empty());
    }

    fn fixture() -> (Table, Corpus) {
        let rows = vec![
            vec![Cell::new("alpha"), Cell::linked("x", &["P1"])],
            vec![Cell::new("beta"), Cell::new("y")],
            vec![Cell::new("gamma"), Cell::new("z")],
            vec![Cell::new("delta 2018"), Cell::new("w")],
        ];
        let t = Table {
            id: "T".into(),
            meta: String::new(),
            headers: vec!["a".into(), "b".into()],
            rows,
        };
        let p = Passage {
            id: "P1".into(),
            title: "p".into(),
            text: "In 2018 it rained; by late 2018 it stopped.".into(),
        };
        let corpus = Corpus::new(vec![t.clone()], vec![p]).unwrap();
        (t, corpus)
    }

    #[test]
    fn bag_counts_spans_per_row() {
        let (t, c) = fixture();
        let bag = find_answer_rows(&t, &c, "q", "2018");
        assert_eq!(bag.positive_rows.iter().copied().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(bag.spans(0).len(), 2);
        assert_eq!(bag.spans(3).len(), 1);
        assert_eq!(bag.spans(3)[0].source, SpanSource::Cell(0));
        assert_eq!(bag.spans(0)[0].source, SpanSource::Passage("P1".into()));
        let empty = find_answer_rows(&t, &c, "q", "1999");
        assert!(!empty.is_answerable());
    }

    #[test]
    fn span_refs_round_trip() {
        let (t, c) = fixture();
        let bag = find_answer_rows(&t, &c, "q", "2018");
        for (row, spans) in &bag.spans_per_row {
            for s in spans {
                let toks = match &s.source {
                    SpanSource::Cell(col) => tokenize(&t.rows[*row][*col].text),
                    SpanSource::Passage(id) => c.passage_tokens(id).to_vec(),
                };
                let text = toks[s.start_token..=s.end_token].join(" ");
                assert_eq!(normalize_answer(&text), "2018");
                assert_eq!(normalize_answer(&s.surface), "2018");
            }
        }
    }

    #[test]
    fn stats_histogram() {
        let mk = |rows: &[usize]| SupervisionBag {
            question_id: "q".into(),
            table_id: "t".into(),
            positive_rows: rows.iter().copied().collect(),
            spans_per_row: rows
                .iter()
                .map(|&r| {
                    (
                        r,
                        vec![SpanRef {
                            source: SpanSource::Cell(0),
                            start_token: 0,
                            end_token: 0,
                            surface: "x".into(),
                        }],
                    )
                })
                .collect(),
        };
        let bags = vec![mk(&[0]), mk(&[1]), mk(&[0, 2])];
        let stats = ambiguity_stats(&bags);
        let pcts = stats.percentages();
        assert!((pcts[&1] - 66.666_666).abs() < 1e-3);
        assert!((pcts[&2] - 33.333_333).abs() < 1e-3);
        assert_eq!(stats.multi_span, 0);
        assert!((stats.multi_row_rate() - 33.333_333).abs() < 1e-3);
    }
}
