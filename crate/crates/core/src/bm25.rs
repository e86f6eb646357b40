//! Okapi BM25 over pre-tokenized documents.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::ln;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`; never negative.
pub fn idf(n_docs: usize, df: usize) -> f64 {
    let (n, df) = (n_docs as f64, df as f64);
    ln((n - df + 0.5) / (df + 0.5) + 1.0)
}

/// Contribution of one query term with frequency `tf` in a document of
/// length `dl`.
pub fn term_score(tf: u32, dl: u32, avg_len: f64, idf: f64, p: Bm25Params) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = tf as f64;
    let norm = if avg_len > 0.0 {
        1.0 - p.b + p.b * dl as f64 / avg_len
    } else {
        1.0
    };
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * norm)
}

/// Inverted index. Documents keep their insertion order; postings are
/// sorted by document number, so building is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    pub doc_ids: Vec<String>,
    pub doc_len: Vec<u32>,
    pub avg_len: f64,
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build<I>(docs: I, params: Bm25Params) -> Self
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut doc_ids = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        for (d, (id, tokens)) in docs.into_iter().enumerate() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((d as u32, c));
            }
            doc_ids.push(id);
            doc_len.push(tokens.len() as u32);
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avg_len = if doc_len.is_empty() {
            0.0
        } else {
            total as f64 / doc_len.len() as f64
        };
        Bm25Index {
            params,
            doc_ids,
            doc_len,
            avg_len,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, |p| p.len())
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.len(), self.doc_freq(term))
    }

    /// Score of every document; each distinct query term counts once.
    pub fn scores(&self, query: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut terms: Vec<&str> = query.iter().map(String::as_str).collect();
        terms.sort_unstable();
        terms.dedup();
        for t in terms {
            let Some(post) = self.postings.get(t) else { continue };
            let w = idf(self.len(), post.len());
            for &(d, tf) in post {
                out[d as usize] += term_score(tf, self.doc_len[d as usize], self.avg_len, w, self.params);
            }
        }
        out
    }

    pub fn score(&self, query: &[String], doc: usize) -> f64 {
        self.scores(query)[doc]
    }

    /// Top `k` documents as `(doc number, score)`, descending, ties by id.
    /// Zero-scoring documents are included.
    pub fn search(&self, query: &[String], k: usize) -> Vec<(usize, f64)> {
        let scores = self.scores(query);
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then_with(|| self.doc_ids[a].cmp(&self.doc_ids[b]))
        });
        order.into_iter().take(k).map(|d| (d, scores[d])).collect()
    }
}
