//! Learning to rank with localized geometric-mean metric learning.
//!
//! A model is a set of local SPD metrics, each anchored at a training
//! document, plus per-query non-negative weights over them. Metrics come
//! from the closed-form geometric-mean solution on sampled similar and
//! dissimilar pairs; weights are fitted by projected SGD on a WARP loss.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod gmml;
pub mod metrics;
pub mod model;
pub mod persist;
pub mod spd;
pub mod warp;

pub use data::{Dataset, SynthConfig};
pub use error::{Error, Result};
pub use model::{CandidateSet, Document, Hyper, LocalMetric, RankingModel};
pub use spd::{SpdMatrix, SymMatrix};
pub use warp::{TrainConfig, TripleSample};
