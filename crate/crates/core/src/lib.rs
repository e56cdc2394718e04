//! Knowledge-graph driven question answering toolkit.
//!
//! The pipeline ingests commonsense triples, verbalizes them, synthesizes
//! multiple-choice items and masked pretraining corpora, and scores answer
//! candidates with autoregressive or masked token-probability providers.
//! A marginal-ranking trainer and an evaluation harness sit on top.

pub mod elicit;
pub mod error;
pub mod eval;
pub mod kg;
pub mod mask;
pub mod qa;
pub mod scoring;
pub mod synth;
pub mod text;
pub mod train;
pub mod verbalize;

pub use error::{Error, Result};
pub use kg::{KnowledgeGraph, Source, SpatialClassTaxonomy, Triple};
pub use qa::{ItemMeta, QAItem};
pub use verbalize::TemplateTable;
