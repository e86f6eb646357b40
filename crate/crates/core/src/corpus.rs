//! Hybrid corpus data model: tables whose cells link to passages.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub text: String,
    #[serde(default)]
    pub links: Vec<String>,
}

impl Cell {
    pub fn new(text: impl Into<String>) -> Self {
        Cell {
            text: text.into(),
            links: Vec::new(),
        }
    }

    pub fn linked(text: impl Into<String>, links: &[&str]) -> Self {
        Cell {
            text: text.into(),
            links: links.iter().map(|l| String::from(*l)).collect(),
        }
    }
}

/// A table; `meta` is the title and caption joined by a space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    #[serde(default)]
    pub meta: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn columns(&self) -> usize {
        self.headers.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    fn validate(&self) -> Result<()> {
        let shape = |reason: String| Error::TableShape {
            table: self.id.clone(),
            reason,
        };
        if self.headers.is_empty() {
            return Err(shape("table has no columns".into()));
        }
        if self.rows.is_empty() {
            return Err(shape("table has no rows".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.headers.len() {
                return Err(shape(format!(
                    "row {} has {} cells, expected {}",
                    r + 1,
                    row.len(),
                    self.headers.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_id: Option<String>,
}

/// One table row plus its linked passages: the unit the row retriever scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalUnit {
    pub table_id: String,
    pub row_index: usize,
    pub cells: Vec<Cell>,
    /// Union of the cells' links, first occurrence order, no duplicates.
    pub linked_passages: Vec<String>,
}

/// Cuts a table into one retrieval unit per row, in row order.
pub fn split_table(table: &Table) -> Vec<RetrievalUnit> {
    (0..table.row_count())
        .map(|r| retrieval_unit(table, r))
        .collect()
}

pub fn retrieval_unit(table: &Table, row: usize) -> RetrievalUnit {
    let cells = table.rows[row].clone();
    let linked_passages = row_links(&cells);
    RetrievalUnit {
        table_id: table.id.clone(),
        row_index: row,
        cells,
        linked_passages,
    }
}

fn row_links(cells: &[Cell]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for link in cells.iter().flat_map(|c| c.links.iter()) {
        if seen.insert(link.as_str()) {
            out.push(link.clone());
        }
    }
    out
}

/// Immutable, link-closed collection of tables and passages.
#[derive(Debug, Clone)]
pub struct Corpus {
    tables: Vec<Table>,
    passages: Vec<Passage>,
    table_ix: BTreeMap<String, usize>,
    passage_ix: BTreeMap<String, usize>,
    passage_tokens: Vec<Vec<String>>,
}

impl Corpus {
    /// Validates shapes and ids, and checks every cell link resolves.
    pub fn new(tables: Vec<Table>, passages: Vec<Passage>) -> Result<Self> {
        let mut passage_ix = BTreeMap::new();
        for (i, p) in passages.iter().enumerate() {
            if p.text.trim().is_empty() {
                return Err(Error::EmptyPassage(p.id.clone()));
            }
            if passage_ix.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicatePassage(p.id.clone()));
            }
        }
        let mut table_ix = BTreeMap::new();
        for (i, t) in tables.iter().enumerate() {
            t.validate()?;
            if table_ix.insert(t.id.clone(), i).is_some() {
                return Err(Error::DuplicateTable(t.id.clone()));
            }
            for (r, row) in t.rows.iter().enumerate() {
                for (c, cell) in row.iter().enumerate() {
                    if let Some(missing) = cell.links.iter().find(|l| !passage_ix.contains_key(*l)) {
                        return Err(Error::DanglingLink {
                            table: t.id.clone(),
                            row: r + 1,
                            column: c + 1,
                            passage: missing.clone(),
                        });
                    }
                }
            }
        }
        let passage_tokens = passages.iter().map(|p| tokenize(&p.text)).collect();
        Ok(Corpus {
            tables,
            passages,
            table_ix,
            passage_ix,
            passage_tokens,
        })
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn table(&self, id: &str) -> Option<&Table> {
        self.table_ix.get(id).map(|&i| &self.tables[i])
    }

    pub fn table_index(&self, id: &str) -> Option<usize> {
        self.table_ix.get(id).copied()
    }

    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.passage_ix.get(id).map(|&i| &self.passages[i])
    }

    pub fn passage_index(&self, id: &str) -> Option<usize> {
        self.passage_ix.get(id).copied()
    }

    /// Tokenized passage text; `id` must belong to the corpus.
    pub fn passage_tokens(&self, id: &str) -> &[String] {
        &self.passage_tokens[self.passage_ix[id]]
    }

    /// The table a closed-domain question is attached to.
    pub fn table_for(&self, q: &Question) -> Result<&Table> {
        let id = q
            .table_id
            .as_deref()
            .ok_or_else(|| Error::MissingTableId(q.id.clone()))?;
        self.table(id).ok_or_else(|| Error::UnknownTable(id.into()))
    }

    pub fn into_parts(self) -> (Vec<Table>, Vec<Passage>) {
        (self.tables, self.passages)
    }
}
