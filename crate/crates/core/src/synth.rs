//! Synthetic table+text benchmark with planted gold rows and spans.
//!
//! Each table gets one question. The question names a relation header, a
//! topic word from the table meta and a few context words that occur only
//! in the gold row's passage. The answer is a corpus-unique number. Decoy
//! copies of the answer can be planted in other rows (multi-row ambiguity)
//! or elsewhere in the gold row (multi-span ambiguity), always next to
//! words the question does not mention.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Cell, Corpus, Passage, Question, Table};
use crate::error::{Error, Result};
use crate::extractor::DenoiseChoice;
use crate::metrics::{exact_match, Prediction};
use crate::supervision::{SpanRef, SpanSource};

/// Where the gold occurrence sits relative to multi-span decoys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoldPlacement {
    Any,
    NeverFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_tables: usize,
    pub rows_per_table: usize,
    pub columns: usize,
    pub vocab_size: usize,
    pub p_multirow: f64,
    pub p_multispan: f64,
    /// Probability that a decoy context word comes from the shared
    /// distractor pool rather than the general vocabulary.
    pub dissimilarity: f64,
    pub placement: GoldPlacement,
    pub p_answer_in_cell: f64,
    /// Probability that each gold context word is also planted in some
    /// other row of the table.
    pub context_overlap: f64,
    pub context_words: usize,
    pub filler_words: usize,
    /// Long background passages linked before each row's own passage.
    pub extra_passages: usize,
    pub extra_passage_len: usize,
    pub dev_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_tables: 200,
            rows_per_table: 8,
            columns: 4,
            vocab_size: 2000,
            p_multirow: 0.0,
            p_multispan: 0.0,
            dissimilarity: 1.0,
            placement: GoldPlacement::Any,
            p_answer_in_cell: 0.25,
            context_overlap: 0.3,
            context_words: 3,
            filler_words: 6,
            extra_passages: 0,
            extra_passage_len: 40,
            dev_fraction: 0.15,
            test_fraction: 0.15,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_multirow", self.p_multirow),
            ("p_multispan", self.p_multispan),
            ("dissimilarity", self.dissimilarity),
            ("p_answer_in_cell", self.p_answer_in_cell),
            ("context_overlap", self.context_overlap),
            ("dev_fraction", self.dev_fraction),
            ("test_fraction", self.test_fraction),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.dev_fraction + self.test_fraction > 1.0 {
            return Err(Error::InvalidConfig("dev_fraction + test_fraction exceeds 1".into()));
        }
        if self.columns < 2 {
            return Err(Error::InvalidConfig("columns must be at least 2".into()));
        }
        if self.rows_per_table < 2 {
            return Err(Error::InvalidConfig("rows_per_table must be at least 2".into()));
        }
        if self.context_words == 0 {
            return Err(Error::InvalidConfig("context_words must be at least 1".into()));
        }
        if self.vocab_size < 4 * self.context_words {
            return Err(Error::InvalidConfig("vocab_size too small".into()));
        }
        if self.columns > HEADER_WORDS {
            return Err(Error::InvalidConfig(format!("columns must be at most {HEADER_WORDS}")));
        }
        if self.n_tables > MAX_NUMBERS / (4 * self.rows_per_table * (self.extra_passages + 4)) {
            return Err(Error::InvalidConfig("corpus too large for the number space".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// The planted truth for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEvidence {
    pub question_id: String,
    pub table_id: String,
    pub split: Split,
    pub row: usize,
    pub span: SpanRef,
    pub decoy_rows: Vec<usize>,
    pub decoy_spans: usize,
}

#[derive(Debug, Clone)]
pub struct SynthBench {
    pub corpus: Corpus,
    pub questions: Vec<Question>,
    pub gold: Vec<GoldEvidence>,
}

impl SynthBench {
    pub fn split(&self, split: Split) -> Vec<Question> {
        self.questions
            .iter()
            .zip(&self.gold)
            .filter(|(_, g)| g.split == split)
            .map(|(q, _)| q.clone())
            .collect()
    }

    pub fn gold_for(&self, question_id: &str) -> Option<&GoldEvidence> {
        self.gold
            .binary_search_by(|g| g.question_id.as_str().cmp(question_id))
            .ok()
            .map(|i| &self.gold[i])
    }
}

const HEADER_WORDS: usize = 24;
const TOPIC_WORDS: usize = 40;
const DISTRACTOR_WORDS: usize = 12;
const HEADER_BASE: usize = 0;
const TOPIC_BASE: usize = HEADER_BASE + HEADER_WORDS;
const DISTRACTOR_BASE: usize = TOPIC_BASE + TOPIC_WORDS;
const VOCAB_BASE: usize = DISTRACTOR_BASE + DISTRACTOR_WORDS;
const MAX_NUMBERS: usize = 900_000;

const CONSONANTS: &[u8] = b"bdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SYLLABLES: usize = 75;
const WORD_SPACE: usize = SYLLABLES * SYLLABLES * SYLLABLES;

/// The `i`-th synthetic word: three consonant-vowel syllables, scrambled
/// so neighbouring indices look unrelated. Injective below `WORD_SPACE`.
fn word(i: usize) -> String {
    let mut k = (i % WORD_SPACE) * 7919 % WORD_SPACE;
    let mut out = String::with_capacity(6);
    for _ in 0..3 {
        let s = k % SYLLABLES;
        k /= SYLLABLES;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
    }
    out
}

/// Distinct six-digit numbers, one per call.
struct Numbers(usize);

impl Numbers {
    fn next(&mut self) -> String {
        let v = 100_000 + self.0 * 7919 % MAX_NUMBERS;
        self.0 += 1;
        format!("{v}")
    }
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    numbers: Numbers,
    next_entity: usize,
}

impl Gen<'_> {
    fn vocab(&mut self) -> String {
        word(VOCAB_BASE + self.rng.random_range(0..self.cfg.vocab_size))
    }

    fn vocab_except(&mut self, avoid: &BTreeSet<String>) -> String {
        loop {
            let w = self.vocab();
            if !avoid.contains(&w) {
                return w;
            }
        }
    }

    fn entity(&mut self) -> String {
        let w = word(VOCAB_BASE + self.cfg.vocab_size + self.next_entity);
        self.next_entity += 1;
        w
    }

    fn decoy_word(&mut self, avoid: &BTreeSet<String>) -> String {
        if self.rng.random_bool(self.cfg.dissimilarity) {
            word(DISTRACTOR_BASE + self.rng.random_range(0..DISTRACTOR_WORDS))
        } else {
            self.vocab_except(avoid)
        }
    }

    fn filler(&mut self, n: usize, avoid: &BTreeSet<String>) -> Vec<String> {
        (0..n).map(|_| self.vocab_except(avoid)).collect()
    }
}

/// A passage under construction: sentences of tokens. `gold` marks the
/// sentence and offset holding the true answer.
struct Draft {
    sentences: Vec<Vec<String>>,
    gold: Option<(usize, usize)>,
}

impl Draft {
    fn render(&self) -> (String, Option<usize>) {
        let mut toks: Vec<&str> = Vec::new();
        let mut gold = None;
        for (s, sent) in self.sentences.iter().enumerate() {
            if let Some((gs, off)) = self.gold {
                if gs == s {
                    gold = Some(toks.len() + off);
                }
            }
            toks.extend(sent.iter().map(String::as_str));
        }
        (toks.join(" "), gold)
    }
}

/// Generates a benchmark. Pure in `config`.
pub fn generate(config: &SynthConfig) -> Result<SynthBench> {
    config.validate()?;
    let mut g = Gen {
        cfg: config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        numbers: Numbers(0),
        next_entity: 0,
    };

    let n = config.n_tables;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut g.rng);
    let n_test = libm::round(n as f64 * config.test_fraction) as usize;
    let n_dev = libm::round(n as f64 * config.dev_fraction) as usize;
    let mut split = vec![Split::Train; n];
    for (k, &t) in order.iter().enumerate() {
        if k < n_test {
            split[t] = Split::Test;
        } else if k < n_test + n_dev {
            split[t] = Split::Dev;
        }
    }

    let headers_pool: Vec<String> = (0..HEADER_WORDS).map(|i| word(HEADER_BASE + i)).collect();
    let mut tables = Vec::with_capacity(n);
    let mut passages = Vec::new();
    let mut questions = Vec::with_capacity(n);
    let mut gold = Vec::with_capacity(n);

    for (t, &table_split) in split.iter().enumerate() {
        let table_id = format!("t{t:05}");
        let question_id = format!("q{t:05}");
        let rows = config.rows_per_table;
        let cols = config.columns;

        let topics: Vec<String> = (0..2)
            .map(|_| word(TOPIC_BASE + g.rng.random_range(0..TOPIC_WORDS)))
            .collect();
        let mut headers: Vec<String> = headers_pool.choose_multiple(&mut g.rng, cols).cloned().collect();
        headers[0] = word(HEADER_BASE);
        if headers[1..].contains(&headers[0]) {
            let spare = headers_pool.iter().find(|h| !headers.contains(h)).cloned();
            let dup = headers[1..].iter().position(|h| *h == headers[0]).map(|p| p + 1);
            if let (Some(s), Some(d)) = (spare, dup) {
                headers[d] = s;
            }
        }

        let gold_row = g.rng.random_range(0..rows);
        let answer_col = g.rng.random_range(1..cols);
        let in_cell = g.rng.random_bool(config.p_answer_in_cell);
        let multirow = g.rng.random_bool(config.p_multirow);
        let multispan = g.rng.random_bool(config.p_multispan);
        // Cells precede passages in every context, so a cell answer with
        // passage decoys would always be the first occurrence.
        let in_cell = in_cell && !(multispan && config.placement == GoldPlacement::NeverFirst);
        let answer = g.numbers.next();

        // Context words: distinct per row, never shared across rows of a table.
        let mut used: BTreeSet<String> = BTreeSet::new();
        let mut ctx: Vec<Vec<String>> = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut c = Vec::with_capacity(config.context_words);
            while c.len() < config.context_words {
                let w = g.vocab();
                if used.insert(w.clone()) {
                    c.push(w);
                }
            }
            ctx.push(c);
        }
        let avoid = used.clone();
        let mut shared: Vec<Vec<String>> = vec![Vec::new(); rows];
        for w in ctx[gold_row].clone() {
            if g.rng.random_bool(config.context_overlap) {
                let mut r = g.rng.random_range(0..rows - 1);
                if r >= gold_row {
                    r += 1;
                }
                shared[r].push(w);
            }
        }

        let decoy_rows: Vec<usize> = if multirow {
            let k = g.rng.random_range(1..=3usize.min(rows - 1));
            let others: Vec<usize> = (0..rows).filter(|&r| r != gold_row).collect();
            let mut d: Vec<usize> = others.choose_multiple(&mut g.rng, k).copied().collect();
            d.sort_unstable();
            d
        } else {
            Vec::new()
        };
        let decoy_spans = if multispan { g.rng.random_range(1..=2usize) } else { 0 };

        let background: Vec<String> = (0..config.extra_passages)
            .map(|k| {
                let id = format!("{table_id}-bg{k}");
                let toks = g.filler(config.extra_passage_len, &avoid);
                let n = g.numbers.next();
                let mut text = toks.join(" ");
                text.push(' ');
                text.push_str(&n);
                passages.push(Passage {
                    id: id.clone(),
                    title: topics[k % topics.len()].clone(),
                    text,
                });
                id
            })
            .collect();

        let mut table_rows = Vec::with_capacity(rows);
        let mut gold_span: Option<SpanRef> = None;
        for r in 0..rows {
            let entity = g.entity();
            let pid = format!("{table_id}-r{r}");
            let mut draft = Draft {
                sentences: Vec::new(),
                gold: None,
            };
            draft.sentences.push(vec![entity.clone()]);
            draft.sentences.push(g.filler(config.filler_words, &avoid));

            let mut describe = ctx[r].clone();
            describe.extend(shared[r].iter().cloned());
            if r == gold_row && !in_cell {
                describe.push(headers[answer_col].clone());
                describe.push(answer.clone());
            } else if !in_cell {
                describe.push(headers[answer_col].clone());
                describe.push(g.numbers.next());
            }
            let mut sentences = vec![describe];
            let mut n_decoys = 0;
            if decoy_rows.contains(&r) {
                n_decoys = 1;
            }
            if r == gold_row {
                n_decoys = decoy_spans;
            }
            for _ in 0..n_decoys {
                let mut s: Vec<String> = (0..config.context_words).map(|_| g.decoy_word(&avoid)).collect();
                s.push(answer.clone());
                sentences.push(s);
            }
            // Sentence 0 is the description; decoys go anywhere unless the
            // gold occurrence must come last.
            let gold_sentence = if r == gold_row && !in_cell {
                if config.placement == GoldPlacement::NeverFirst || sentences.len() == 1 {
                    sentences.rotate_left(1);
                    sentences.len() - 1
                } else {
                    let desc = sentences.remove(0);
                    let at = g.rng.random_range(0..=sentences.len());
                    sentences.insert(at, desc);
                    at
                }
            } else {
                let desc = sentences.remove(0);
                sentences.shuffle(&mut g.rng);
                let at = g.rng.random_range(0..=sentences.len());
                sentences.insert(at, desc);
                usize::MAX
            };
            let base = draft.sentences.len();
            if gold_sentence != usize::MAX {
                draft.gold = Some((base + gold_sentence, config.context_words + 1));
            }
            draft.sentences.extend(sentences);
            draft.sentences.push(vec![g.vocab_except(&avoid), g.numbers.next()]);
            let (text, gold_pos) = draft.render();
            passages.push(Passage {
                id: pid.clone(),
                title: entity.clone(),
                text,
            });
            if let Some(pos) = gold_pos {
                gold_span = Some(SpanRef {
                    source: SpanSource::Passage(pid.clone()),
                    start_token: pos,
                    end_token: pos,
                    surface: answer.clone(),
                });
            }

            let mut links: Vec<String> = background.clone();
            links.push(pid);
            let mut cells = vec![Cell { text: entity, links }];
            for c in 1..cols {
                let text = if in_cell && c == answer_col {
                    if r == gold_row {
                        gold_span = Some(SpanRef {
                            source: SpanSource::Cell(c),
                            start_token: 0,
                            end_token: 0,
                            surface: answer.clone(),
                        });
                        answer.clone()
                    } else {
                        g.numbers.next()
                    }
                } else {
                    g.vocab_except(&avoid)
                };
                cells.push(Cell::new(text));
            }
            table_rows.push(cells);
        }

        let mut q_words = vec![headers[answer_col].clone(), topics[0].clone()];
        q_words.extend(ctx[gold_row].iter().cloned());
        questions.push(Question {
            id: question_id.clone(),
            text: q_words.join(" "),
            answer_text: Some(answer.clone()),
            table_id: Some(table_id.clone()),
        });
        gold.push(GoldEvidence {
            question_id,
            table_id: table_id.clone(),
            split: table_split,
            row: gold_row,
            span: gold_span.expect("gold span planted"),
            decoy_rows,
            decoy_spans,
        });
        tables.push(Table {
            id: table_id,
            meta: topics.join(" "),
            headers,
            rows: table_rows,
        });
    }

    Ok(SynthBench {
        corpus: Corpus::new(tables, passages)?,
        questions,
        gold,
    })
}

/// How closely a run matches the planted truth. Fractions in `[0, 1]`;
/// `None` when there was nothing to measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub row_accuracy: Option<f64>,
    pub denoise_accuracy: Option<f64>,
    pub answer_em: Option<f64>,
}

/// Compares selected rows, denoising choices and answers with the gold
/// evidence. Items for unknown questions are ignored; a denoising choice
/// counts as correct only if it lands on the true row and the true span.
pub fn oracle_evaluate(
    gold: &[GoldEvidence],
    selected_rows: &BTreeMap<String, usize>,
    choices: &[DenoiseChoice],
    predictions: &[Prediction],
) -> OracleReport {
    let by_id: BTreeMap<&str, &GoldEvidence> = gold.iter().map(|g| (g.question_id.as_str(), g)).collect();
    let frac = |hits: usize, n: usize| (n > 0).then(|| hits as f64 / n as f64);

    let (mut hits, mut n) = (0, 0);
    for (q, &row) in selected_rows {
        if let Some(g) = by_id.get(q.as_str()) {
            n += 1;
            hits += usize::from(g.row == row);
        }
    }
    let row_accuracy = frac(hits, n);

    let (mut hits, mut n) = (0, 0);
    for c in choices {
        if let Some(g) = by_id.get(c.question_id.as_str()) {
            n += 1;
            let right = c.row == g.row
                && c.located.as_ref().is_some_and(|(src, s, e)| {
                    *src == g.span.source && *s == g.span.start_token && *e == g.span.end_token
                });
            hits += usize::from(right);
        }
    }
    let denoise_accuracy = frac(hits, n);

    let (mut em, mut n) = (0.0, 0);
    for p in predictions {
        if let Some(g) = by_id.get(p.question_id.as_str()) {
            n += 1;
            em += exact_match(&p.answer, &g.span.surface);
        }
    }
    let answer_em = (n > 0).then(|| em / n as f64);

    OracleReport {
        row_accuracy,
        denoise_accuracy,
        answer_em,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supervision::{ambiguity_stats, find_answer_rows};
    use crate::text::{is_stopword, tokenize};

    fn small(p_multirow: f64, p_multispan: f64) -> SynthConfig {
        SynthConfig {
            n_tables: 60,
            p_multirow,
            p_multispan,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn words_are_distinct_and_plain() {
        let ws: BTreeSet<String> = (0..5000).map(word).collect();
        assert_eq!(ws.len(), 5000);
        assert!(ws.iter().all(|w| !is_stopword(w) && tokenize(w) == vec![w.clone()]));
    }

    #[test]
    fn no_ambiguity_when_knobs_off() {
        let b = generate(&small(0.0, 0.0)).unwrap();
        for (q, g) in b.questions.iter().zip(&b.gold) {
            let t = b.corpus.table(&g.table_id).unwrap();
            let bag = find_answer_rows(t, &b.corpus, &q.id, q.answer_text.as_deref().unwrap());
            assert_eq!(bag.positive_rows, BTreeSet::from([g.row]));
            assert_eq!(bag.spans(g.row), core::slice::from_ref(&g.span));
        }
    }

    #[test]
    fn gold_is_consistent_with_supervision() {
        let cfg = SynthConfig {
            placement: GoldPlacement::NeverFirst,
            extra_passages: 2,
            ..small(0.5, 0.5)
        };
        let b = generate(&cfg).unwrap();
        for (q, g) in b.questions.iter().zip(&b.gold) {
            let t = b.corpus.table(&g.table_id).unwrap();
            let bag = find_answer_rows(t, &b.corpus, &q.id, q.answer_text.as_deref().unwrap());
            assert!(bag.contains(g.row));
            assert!(bag.spans(g.row).contains(&g.span));
            assert_eq!(bag.len(), 1 + g.decoy_rows.len());
            assert_eq!(bag.spans(g.row).len(), 1 + g.decoy_spans);
            if g.decoy_spans > 0 && !g.span.source.is_cell() {
                assert_ne!(bag.spans(g.row)[0], g.span);
            }
        }
    }

    #[test]
    fn multirow_rate_tracks_knob() {
        let b = generate(&SynthConfig {
            n_tables: 1000,
            rows_per_table: 4,
            ..small(0.4, 0.0)
        })
        .unwrap();
        let bags: Vec<_> = b
            .questions
            .iter()
            .map(|q| {
                let t = b.corpus.table_for(q).unwrap();
                find_answer_rows(t, &b.corpus, &q.id, q.answer_text.as_deref().unwrap())
            })
            .collect();
        let rate = ambiguity_stats(&bags).multi_row_rate();
        assert!((rate - 40.0).abs() <= 5.0, "rate {rate}");
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&small(0.3, 0.3)).unwrap();
        let b = generate(&small(0.3, 0.3)).unwrap();
        assert_eq!(a.corpus.tables(), b.corpus.tables());
        assert_eq!(a.corpus.passages(), b.corpus.passages());
        assert_eq!((a.questions, a.gold), (b.questions, b.gold));
        let c = generate(&SynthConfig { seed: 2, ..small(0.3, 0.3) }).unwrap();
        assert_ne!(b.corpus.passages(), c.corpus.passages());
    }

    #[test]
    fn splits_cover_every_question() {
        let b = generate(&small(0.0, 0.0)).unwrap();
        let total = b.split(Split::Train).len() + b.split(Split::Dev).len() + b.split(Split::Test).len();
        assert_eq!(total, 60);
        assert_eq!(b.split(Split::Test).len(), 9);
        assert!(b.gold_for("q00007").is_some());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate(&SynthConfig { p_multirow: 1.5, ..small(0.0, 0.0) }).is_err());
        assert!(generate(&SynthConfig { columns: 1, ..small(0.0, 0.0) }).is_err());
    }

    #[test]
    fn perfect_run_scores_one() {
        let b = generate(&small(0.0, 0.0)).unwrap();
        let rows: BTreeMap<String, usize> = b.gold.iter().map(|g| (g.question_id.clone(), g.row)).collect();
        let preds: Vec<Prediction> = b
            .gold
            .iter()
            .map(|g| Prediction {
                question_id: g.question_id.clone(),
                answer: g.span.surface.clone(),
                row: Some(g.row),
                provenance: Some(g.span.source.clone()),
                row_score: 1.0,
                s_start: 0.0,
                s_end: 0.0,
            })
            .collect();
        let r = oracle_evaluate(&b.gold, &rows, &[], &preds);
        assert_eq!(r.row_accuracy, Some(1.0));
        assert_eq!(r.answer_em, Some(1.0));
        assert_eq!(r.denoise_accuracy, None);
    }
}
