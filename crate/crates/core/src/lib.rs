//! Mines open-domain ("chit-chat") sequences out of annotated task-oriented
//! dialogue corpora.
//!
//! The pipeline: load a corpus ([`corpus`]), turn utterances into documents,
//! optionally keeping only annotation-filtered clauses ([`segment`]), fit a
//! clustering-based topic model with class-based TF-IDF representations
//! ([`topics`]), retrieve the topics closest to a set of chit-chat keywords
//! ([`prospect`]), and render the matches with dialogue provenance
//! ([`report`]).

pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod prospect;
pub mod report;
pub mod segment;
pub mod topics;

mod jsonutil;

pub use error::{Error, Result};
