//! Open-domain front end: lexical table retrieval, BM25 row-passage
//! linking and hard-negative table mining.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bm25::{Bm25Index, Bm25Params};
use crate::corpus::{Cell, Passage, Table};
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const TAB_META: &str = "[TAB-META]";
pub const ROW: &str = "[ROW]";
pub const HDR: &str = "[HDR]";
pub const CEL: &str = "[CEL]";
pub const DEFAULT_LINKS_PER_CELL: usize = 10;

/// `id [TAB-META] meta ([ROW] ([HDR] h [CEL] c)*)*`, tokenized. The table
/// id stands in for the title. Delimiters never match query tokens.
pub fn linearize_table(table: &Table) -> Vec<String> {
    let mut out = tokenize(&table.id);
    out.push(TAB_META.into());
    out.extend(tokenize(&table.meta));
    for row in &table.rows {
        out.push(ROW.into());
        for (h, c) in table.headers.iter().zip(row) {
            out.push(HDR.into());
            out.extend(tokenize(h));
            out.push(CEL.into());
            out.extend(tokenize(&c.text));
        }
    }
    out
}

/// One BM25 document per table, keyed by table id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableIndex {
    pub bm25: Bm25Index,
}

pub fn build_table_index(tables: &[Table], params: Bm25Params) -> TableIndex {
    TableIndex {
        bm25: Bm25Index::build(tables.iter().map(|t| (t.id.clone(), linearize_table(t))), params),
    }
}

/// Top `k` tables for a question, descending by score, ties by id.
pub fn retrieve_tables(question: &str, index: &TableIndex, k: usize) -> Vec<(String, f64)> {
    index
        .bm25
        .search(&tokenize(question), k)
        .into_iter()
        .map(|(d, s)| (index.bm25.doc_ids[d].clone(), s))
        .collect()
}

/// Passages indexed as title followed by body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageIndex {
    pub bm25: Bm25Index,
}

pub fn build_passage_index(passages: &[Passage], params: Bm25Params) -> PassageIndex {
    PassageIndex {
        bm25: Bm25Index::build(
            passages.iter().map(|p| {
                let mut toks = tokenize(&p.title);
                toks.extend(tokenize(&p.text));
                (p.id.clone(), toks)
            }),
            params,
        ),
    }
}

/// Rewrites a cell query before it hits the passage index.
pub trait QueryAugmenter: Sync {
    fn augment(&self, cell_text: &str) -> String;
}

/// Per-cell links plus their ordered, deduplicated union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLinks {
    pub per_cell: Vec<Vec<String>>,
    pub union: Vec<String>,
}

/// Queries the passage index with each cell of `table[row]`; only passages
/// sharing at least one term are linked.
pub fn link_row_passages(
    table: &Table,
    row: usize,
    index: &PassageIndex,
    n: usize,
    augmenter: Option<&dyn QueryAugmenter>,
) -> RowLinks {
    let mut per_cell = Vec::new();
    let mut union: Vec<String> = Vec::new();
    for cell in &table.rows[row] {
        let query = match augmenter {
            Some(a) => tokenize(&a.augment(&cell.text)),
            None => tokenize(&cell.text),
        };
        let links: Vec<String> = if query.is_empty() {
            Vec::new()
        } else {
            index
                .bm25
                .search(&query, n)
                .into_iter()
                .filter(|(_, s)| *s > 0.0)
                .map(|(d, _)| index.bm25.doc_ids[d].clone())
                .collect()
        };
        for l in &links {
            if !union.contains(l) {
                union.push(l.clone());
            }
        }
        per_cell.push(links);
    }
    RowLinks { per_cell, union }
}

/// Copy of `table` with every cell's links replaced by BM25 links.
pub fn link_table(table: &Table, index: &PassageIndex, n: usize, augmenter: Option<&dyn QueryAugmenter>) -> Table {
    let rows = (0..table.row_count())
        .map(|r| {
            let links = link_row_passages(table, r, index, n, augmenter);
            table.rows[r]
                .iter()
                .zip(links.per_cell)
                .map(|(c, l)| Cell {
                    text: c.text.clone(),
                    links: l,
                })
                .collect()
        })
        .collect();
    Table {
        id: table.id.clone(),
        meta: table.meta.clone(),
        headers: table.headers.clone(),
        rows,
    }
}

/// Retrieves `pool` tables, drops the gold one and samples uniformly from
/// the `top_m` best survivors.
pub fn hard_negative_mining(
    question: &str,
    gold_table: &str,
    index: &TableIndex,
    pool: usize,
    top_m: usize,
    seed: u64,
) -> Result<String> {
    if pool == 0 || top_m == 0 {
        return Err(Error::InvalidConfig("pool size and top-m must be at least 1".into()));
    }
    let survivors: Vec<String> = retrieve_tables(question, index, pool)
        .into_iter()
        .map(|(id, _)| id)
        .filter(|id| id != gold_table)
        .take(top_m)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    survivors.choose(&mut rng).cloned().ok_or(Error::NoHardNegative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table(id: &str, meta: &str, cells: &[&str]) -> Table {
        Table {
            id: id.into(),
            meta: meta.into(),
            headers: vec!["name".into(), "school".into()],
            rows: vec![cells.iter().map(|c| Cell::new(*c)).collect()],
        }
    }

    fn passage(id: &str, title: &str, text: &str) -> Passage {
        Passage {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }

    #[test]
    fn linearization_layout() {
        let t = table("t1", "Draft picks", &["Ann", "Boston College"]);
        let s = linearize_table(&t).join(" ");
        assert_eq!(s, "t1 [TAB-META] draft picks [ROW] [HDR] name [CEL] ann [HDR] school [CEL] boston college");
    }

    #[test]
    fn table_retrieval() {
        assert!(build_table_index(&[], Bm25Params::default()).bm25.is_empty());
        let ts = vec![table("a", "rivers", &["Nile", "x"]), table("b", "mountains", &["Everest", "y"])];
        let ix = build_table_index(&ts, Bm25Params::default());
        assert_eq!(ix.bm25.len(), 2);
        assert_eq!(ix, build_table_index(&ts, Bm25Params::default()));
        let hits = retrieve_tables("tallest of the mountains", &ix, 10);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0, "b");
    }

    #[test]
    fn title_match_links_first() {
        let ps = vec![
            passage("p1", "Boston", "a city in massachusetts"),
            passage("p2", "Boston College", "a university in boston"),
            passage("p3", "Yale", "a college"),
            passage("p4", "Nile", "a river"),
        ];
        let ix = build_passage_index(&ps, Bm25Params::default());
        let t = table("t", "", &["", "Boston College"]);
        let links = link_row_passages(&t, 0, &ix, 10, None);
        assert!(links.per_cell[0].is_empty());
        assert_eq!(links.per_cell[1][0], "p2");
        assert!(links.union.len() <= 4);
        assert!(!links.union.contains(&String::from("p4")));
    }

    #[test]
    fn union_keeps_first_retrieval_order() {
        let ps = vec![passage("p1", "Ann", "x"), passage("p2", "Bob", "ann")];
        let ix = build_passage_index(&ps, Bm25Params::default());
        let t = table("t", "", &["Bob", "Ann"]);
        let links = link_row_passages(&t, 0, &ix, 10, None);
        assert_eq!(links.per_cell[0], vec!["p2"]);
        assert_eq!(links.union, vec!["p2", "p1"]);
        let relinked = link_table(&t, &ix, 10, None);
        assert_eq!(relinked.rows[0][0].links, vec!["p2"]);
    }

    struct Expand;
    impl QueryAugmenter for Expand {
        fn augment(&self, cell: &str) -> String {
            alloc::format!("{cell} river")
        }
    }

    #[test]
    fn augmenter_changes_query() {
        let ps = vec![passage("p1", "Nile", "a river"), passage("p2", "Ann", "x")];
        let ix = build_passage_index(&ps, Bm25Params::default());
        let t = table("t", "", &["zzz", "qqq"]);
        assert!(link_row_passages(&t, 0, &ix, 10, None).union.is_empty());
        assert_eq!(link_row_passages(&t, 0, &ix, 10, Some(&Expand)).union, vec!["p1"]);
    }

    #[test]
    fn hard_negatives() {
        let ts = vec![table("gold", "rivers", &["Nile", "x"]), table("t2", "rivers lakes", &["y", "z"])];
        let ix = build_table_index(&ts, Bm25Params::default());
        assert_eq!(hard_negative_mining("rivers", "gold", &ix, 2, 5, 1).unwrap(), "t2");
        let only = vec![table("gold", "rivers", &["Nile", "x"])];
        let ix1 = build_table_index(&only, Bm25Params::default());
        assert_eq!(hard_negative_mining("rivers", "gold", &ix1, 5, 5, 1), Err(Error::NoHardNegative));
        let many: Vec<Table> = (0..6).map(|i| table(&alloc::format!("t{i}"), "rivers", &["a", "b"])).collect();
        let ixm = build_table_index(&many, Bm25Params::default());
        let a = hard_negative_mining("rivers", "t0", &ixm, 6, 3, 9).unwrap();
        assert_eq!(a, hard_negative_mining("rivers", "t0", &ixm, 6, 3, 9).unwrap());
        assert!(["t1", "t2", "t3"].contains(&a.as_str()));
    }
}
