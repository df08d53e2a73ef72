//! Function-level vulnerability classification for C code.
//!
//! The pipeline parses a function ([`frontend`]), builds its code property
//! graph ([`cpg`]), turns the graph into a feature matrix and adjacency matrix
//! ([`veccpg`]) and classifies it with a graph attention model ([`gcgat`]).
//! [`datakit`] handles labeling, splits, synthetic corpora and metrics.

pub mod cli;
pub mod cpg;
pub mod datakit;
pub mod frontend;
pub mod gcgat;
pub mod pipeline;
pub mod veccpg;

mod error;

pub use error::{Error, Result};
