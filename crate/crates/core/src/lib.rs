//! Semantic class prototypes from noisy photo metadata, and the zero-shot
//! learning models and analyses that evaluate them.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`corpus`]: JSON-lines photo metadata to token sets and a vocabulary.
//! 2. [`pairs`]: word pairs per photo, optionally one vote per user.
//! 3. [`sgns`]: skip-gram embeddings trained on the pairs.
//! 4. [`prototypes`]: class prototypes from class-name variants.
//! 5. [`zsl`]: zero-shot models fit on seen classes, ranking unseen ones.
//! 6. [`analysis`]: accuracy, hierarchy diagnostics and ablations.
//!
//! [`pipeline`] chains the stages in memory and [`synth`] generates a
//! corpus with known structure for tests and demos.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod matrix_io;
pub mod pairs;
pub mod pipeline;
pub mod prototypes;
pub mod sgns;
pub mod synth;
pub mod zsl;

pub use error::{Error, Result};
