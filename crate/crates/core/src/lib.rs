//! Dense-subgraph fraud detection on bipartite user-object graphs.
//!
//! A suspicious block is a set of users `A` together with the objects they
//! concentrate on. Objects are scored by the share of their engagement that
//! comes from `A`. Two further signals sharpen that score: how many of `A`'s
//! events land inside sudden bursts, and how far `A`'s ratings diverge from
//! everyone else's. The block score is optimised by greedy shaving from
//! seeds produced by a truncated SVD.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod detector;
pub mod error;
pub mod evalkit;
pub mod graph;
pub mod heap;
pub mod scalar;
pub mod spectral;
pub mod suspiciousness;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use graph::{EdgeRecord, ObjectId, RatingScale, UserId, UserSet};
pub use scalar::{CompensatedSum, Scalar};

pub type Graph = graph::BipartiteGraph<f64>;
pub type Histogram = temporal::TimeSeriesHist<f64>;
pub type Spikes = temporal::SpikeProfile<f64>;
pub type Context<'g> = suspiciousness::ScoreContext<'g, f64>;
pub type Contrast<'a> = suspiciousness::ContrastState<'a, f64>;
pub type Detector = detector::HoloScope<f64>;
pub type Detection = detector::DetectionResult<f64>;
pub type Svd = spectral::TruncatedSvd<f64>;
