//! Skip-thought neighbor sentence encoders.
//!
//! A GRU encoder maps a sentence to a fixed-size vector `z`; one shared
//! conditional-GRU decoder (or, for the skip-thought baseline, one decoder
//! per neighbor position) reconstructs the sentences around it. The crate
//! covers the whole pipeline at desk scale:
//!
//! - [`corpus`]: tokenization, vocabularies, padded encodings and
//!   neighborhood streaming.
//! - [`nncore`]: GRU and conditional GRU cells with hand-written backward
//!   passes, the output head and the masked likelihood.
//! - [`models`]: the objective variants, parameter accounting and the binary
//!   checkpoint format.
//! - [`trainer`]: ADAM with element-wise clipping.
//! - [`representation`]: sentence vectors, normalization and vocabulary
//!   expansion.
//! - [`evaluation`]: pair features, softmax regression, cross validation and
//!   the downstream task harness.
//! - [`explore`]: cosine retrieval and greedy generation.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod explore;
pub mod models;
pub mod nncore;
pub mod representation;
pub mod trainer;

pub use error::{Error, Result};
