//! Row linearizations and query-informed passage ordering.
//!
//! Two layouts are produced for a table row:
//!
//! * retrieval: `[CLS] q [SEP] (hdr is cell [DOT])* [SEP] meta [DOT] (p [DOT])*`
//! * extraction: `(hdr is cell .)* p*`
//!
//! Every token carries a [`SegmentTag`], so a span found in the extraction
//! context can be traced back to the cell or passage it came from.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{retrieval_unit, Corpus, Passage, Question, Table};
use crate::math::sqrt;
use crate::supervision::SpanSource;
use crate::text::{tokenize, CLS, DOT, IS, SEP};

pub const DEFAULT_BUDGET: usize = 512;

/// Origin of one token in a linearized sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentTag {
    Question,
    Header(u16),
    Cell(u16),
    Meta,
    /// Index into [`TokenSequence::passage_ids`].
    Passage(u32),
    Separator,
}

impl SegmentTag {
    /// Cells and passages are the only places an answer span may come from.
    pub fn is_answer_bearing(self) -> bool {
        matches!(self, SegmentTag::Cell(_) | SegmentTag::Passage(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenSequence {
    tokens: Vec<String>,
    origin: Vec<SegmentTag>,
    passage_ids: Vec<String>,
}

impl TokenSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tag: SegmentTag, token: impl Into<String>) {
        self.tokens.push(token.into());
        self.origin.push(tag);
    }

    pub fn extend<I, S>(&mut self, tag: SegmentTag, tokens: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for t in tokens {
            self.push(tag, t);
        }
    }

    /// Appends a passage's tokens, registering its id.
    pub fn push_passage<S: AsRef<str>>(&mut self, id: &str, tokens: &[S]) {
        let ix = match self.passage_ids.iter().position(|p| p == id) {
            Some(ix) => ix,
            None => {
                self.passage_ids.push(id.into());
                self.passage_ids.len() - 1
            }
        };
        let tag = SegmentTag::Passage(ix as u32);
        for t in tokens {
            self.push(tag, t.as_ref());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn origin(&self) -> &[SegmentTag] {
        &self.origin
    }

    pub fn passage_ids(&self) -> &[String] {
        &self.passage_ids
    }

    /// Keeps the first `budget` tokens.
    pub fn truncate(&mut self, budget: usize) {
        self.tokens.truncate(budget);
        self.origin.truncate(budget);
    }

    /// Maximal runs of identical tags as `(tag, start, end_exclusive)`.
    pub fn segments(&self) -> Vec<(SegmentTag, usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.origin.len() {
            if i == self.origin.len() || self.origin[i] != self.origin[start] {
                out.push((self.origin[start], start, i));
                start = i;
            }
        }
        out
    }

    /// Where the inclusive span `[start, end]` comes from, if it lies inside a
    /// single cell or passage segment.
    pub fn source_of(&self, start: usize, end: usize) -> Option<SpanSource> {
        if start > end || end >= self.len() {
            return None;
        }
        let tag = self.origin[start];
        if self.origin[start..=end].iter().any(|t| *t != tag) {
            return None;
        }
        match tag {
            SegmentTag::Cell(c) => Some(SpanSource::Cell(c as usize)),
            SegmentTag::Passage(p) => Some(SpanSource::Passage(self.passage_ids[p as usize].clone())),
            _ => None,
        }
    }

    /// Like `source_of`, with the span's token offsets inside its cell or
    /// passage.
    pub fn locate(&self, start: usize, end: usize) -> Option<(SpanSource, usize, usize)> {
        let source = self.source_of(start, end)?;
        let first = self.origin.iter().position(|t| *t == self.origin[start])?;
        Some((source, start - first, end - first))
    }

    pub fn surface(&self, start: usize, end: usize) -> String {
        self.tokens[start..=end].join(" ")
    }
}

/// Relevance of a passage to a question, used to order a row's passages.
pub trait SimilarityScorer: Sync {
    fn score(&self, question: &str, passage: &Passage) -> f64;
}

/// Scores every passage equally, so a stable sort keeps linked order.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinkedOrder;

impl SimilarityScorer for LinkedOrder {
    fn score(&self, _question: &str, _passage: &Passage) -> f64 {
        0.0
    }
}

/// Cosine similarity of TF-IDF vectors, IDF taken over the passage corpus.
#[derive(Debug, Clone)]
pub struct TfIdfScorer {
    docs: usize,
    df: BTreeMap<String, usize>,
    vectors: BTreeMap<String, BTreeMap<String, f64>>,
}

impl TfIdfScorer {
    pub fn new(corpus: &Corpus) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for p in corpus.passages() {
            let mut terms: Vec<&String> = corpus.passage_tokens(&p.id).iter().collect();
            terms.sort();
            terms.dedup();
            for t in terms {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let mut scorer = TfIdfScorer {
            docs: corpus.passages().len(),
            df,
            vectors: BTreeMap::new(),
        };
        let vectors = corpus
            .passages()
            .iter()
            .map(|p| (p.id.clone(), scorer.vector(corpus.passage_tokens(&p.id))))
            .collect();
        scorer.vectors = vectors;
        scorer
    }

    fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        crate::math::ln((1 + self.docs) as f64 / (1 + df) as f64) + 1.0
    }

    fn vector<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(String::from(t.as_ref())).or_insert(0.0) += 1.0;
        }
        for (t, w) in tf.iter_mut() {
            *w *= self.idf(t);
        }
        tf
    }
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|v| w * v))
        .sum();
    let na = sqrt(a.values().map(|w| w * w).sum());
    let nb = sqrt(b.values().map(|w| w * w).sum());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl SimilarityScorer for TfIdfScorer {
    fn score(&self, question: &str, passage: &Passage) -> f64 {
        let q = self.vector(&tokenize(question));
        match self.vectors.get(&passage.id) {
            Some(p) => cosine(&q, p),
            None => cosine(&q, &self.vector(&tokenize(&passage.text))),
        }
    }
}

/// Token cost of a row linearization: the fixed part, and the overhead each
/// passage adds beyond its own tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearizationCost {
    pub fixed: usize,
    pub per_passage: usize,
}

fn row_cost(table: &Table, row: usize) -> usize {
    table
        .headers
        .iter()
        .zip(&table.rows[row])
        .map(|(h, c)| tokenize(h).len() + tokenize(&c.text).len() + 2)
        .sum()
}

impl LinearizationCost {
    pub fn retrieval(question: &Question, table: &Table, row: usize) -> Self {
        let q = tokenize(&question.text).len();
        let meta = tokenize(&table.meta).len();
        LinearizationCost {
            fixed: 1 + q + 1 + row_cost(table, row) + 1 + meta + 1,
            per_passage: 1,
        }
    }

    pub fn extraction(table: &Table, row: usize) -> Self {
        LinearizationCost {
            fixed: row_cost(table, row),
            per_passage: 0,
        }
    }
}

/// Orders a row's linked passages by descending `scorer` score (stable, so
/// ties keep linked order) and keeps the longest prefix that fits `budget`
/// on top of the row's fixed cost. When the fixed part leaves any room, the
/// first passage is kept even if it will be cut by truncation.
pub fn filter_passages(
    question: &Question,
    unit: &crate::corpus::RetrievalUnit,
    corpus: &Corpus,
    scorer: &dyn SimilarityScorer,
    cost: LinearizationCost,
    budget: usize,
) -> Vec<String> {
    let mut scored: Vec<(f64, &String)> = unit
        .linked_passages
        .iter()
        .map(|id| {
            let p = corpus.passage(id).expect("linked passage resolves");
            (scorer.score(&question.text, p), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));

    let mut used = cost.fixed;
    let mut out = Vec::new();
    for (_, id) in scored {
        if used >= budget {
            break;
        }
        let c = corpus.passage_tokens(id).len() + cost.per_passage;
        if out.is_empty() || used + c <= budget {
            out.push(id.clone());
            used += c;
        } else {
            break;
        }
    }
    out
}

/// `[CLS] q [SEP] (hdr is cell [DOT])* [SEP] meta [DOT] (p [DOT])*`, cut at `budget`.
pub fn linearize_for_retrieval(
    question: &Question,
    table: &Table,
    row: usize,
    passages: &[String],
    corpus: &Corpus,
    budget: usize,
) -> TokenSequence {
    let mut seq = TokenSequence::new();
    seq.push(SegmentTag::Separator, CLS);
    seq.extend(SegmentTag::Question, tokenize(&question.text));
    seq.push(SegmentTag::Separator, SEP);
    push_row(&mut seq, table, row, DOT);
    seq.push(SegmentTag::Separator, SEP);
    seq.extend(SegmentTag::Meta, tokenize(&table.meta));
    seq.push(SegmentTag::Separator, DOT);
    for id in passages {
        seq.push_passage(id, corpus.passage_tokens(id));
        seq.push(SegmentTag::Separator, DOT);
    }
    seq.truncate(budget);
    seq
}

/// `(hdr is cell .)*` followed by each passage's tokens; not truncated.
pub fn linearize_for_extraction(
    table: &Table,
    row: usize,
    passages: &[String],
    corpus: &Corpus,
) -> TokenSequence {
    let mut seq = TokenSequence::new();
    push_row(&mut seq, table, row, ".");
    for id in passages {
        seq.push_passage(id, corpus.passage_tokens(id));
    }
    seq
}

fn push_row(seq: &mut TokenSequence, table: &Table, row: usize, stop: &str) {
    for (c, (h, cell)) in table.headers.iter().zip(&table.rows[row]).enumerate() {
        let c = c as u16;
        seq.extend(SegmentTag::Header(c), tokenize(h));
        seq.push(SegmentTag::Separator, IS);
        seq.extend(SegmentTag::Cell(c), tokenize(&cell.text));
        seq.push(SegmentTag::Separator, stop);
    }
}

/// Builds both linearizations for a question's rows with a shared scorer and
/// budget. With the passage filter off, passages keep linked order and only
/// token-level truncation applies.
#[derive(Clone, Copy)]
pub struct ContextBuilder<'a> {
    pub corpus: &'a Corpus,
    pub scorer: &'a dyn SimilarityScorer,
    pub budget: usize,
    pub passage_filter: bool,
}

impl<'a> ContextBuilder<'a> {
    pub fn new(corpus: &'a Corpus, scorer: &'a dyn SimilarityScorer, budget: usize) -> Self {
        ContextBuilder {
            corpus,
            scorer,
            budget,
            passage_filter: true,
        }
    }

    pub fn with_passage_filter(mut self, on: bool) -> Self {
        self.passage_filter = on;
        self
    }

    fn passages(&self, question: &Question, table: &Table, row: usize, cost: LinearizationCost) -> Vec<String> {
        let unit = retrieval_unit(table, row);
        if self.passage_filter {
            filter_passages(question, &unit, self.corpus, self.scorer, cost, self.budget)
        } else {
            unit.linked_passages
        }
    }

    pub fn retrieval_sequence(&self, question: &Question, table: &Table, row: usize) -> TokenSequence {
        let cost = LinearizationCost::retrieval(question, table, row);
        let passages = self.passages(question, table, row, cost);
        linearize_for_retrieval(question, table, row, &passages, self.corpus, self.budget)
    }

    pub fn extraction_sequence(&self, question: &Question, table: &Table, row: usize) -> TokenSequence {
        let cost = LinearizationCost::extraction(table, row);
        let passages = self.passages(question, table, row, cost);
        let mut seq = linearize_for_extraction(table, row, &passages, self.corpus);
        seq.truncate(self.budget);
        seq
    }

    /// Untruncated extraction context over all linked passages.
    pub fn full_extraction_sequence(&self, table: &Table, row: usize) -> TokenSequence {
        let unit = retrieval_unit(table, row);
        linearize_for_extraction(table, row, &unit.linked_passages, self.corpus)
    }
}
