//! Question answering over tables with linked passages, trained from
//! (question, answer-text) pairs alone.
//!
//! The crate is `no_std` + `alloc`. Everything that touches files, the
//! clock or threads lives in the `tabtext` companion crate; this crate holds
//! the data model and the algorithms:
//!
//! * [`corpus`]: tables, cells, passages and retrieval units.
//! * [`supervision`]: answer normalization, positive-row bags and span
//!   enumeration.
//! * [`context`]: tokenization, query-informed passage ordering and the two
//!   row linearizations.
//! * [`row_retriever`]: hashed lexical row scorer trained with the
//!   multi-instance bag loss and a curriculum.
//! * [`extractor`]: start/end span scorer with multi-span denoising.
//! * [`reranker`]: grid-searched linear combination of row and span scores.
//! * [`open_domain`]: BM25 table retrieval, row-passage linking and
//!   hard-negative mining.
//! * [`metrics`]: EM/F1, provenance buckets, row accuracy and HITS@k.
//! * [`synth`]: a seeded corpus generator with planted gold evidence.
//! * [`pipeline`]: in-memory orchestration of the stages above.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bm25;
pub mod context;
pub mod corpus;
pub mod error;
pub mod extractor;
pub mod math;
pub mod metrics;
pub mod open_domain;
pub mod optim;
pub mod pipeline;
pub mod reranker;
pub mod row_retriever;
pub mod supervision;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
