//! Travel-mode imputation for mobile device location data.
//!
//! The crate is organised as a pipeline:
//!
//! * [`geo`] distance and speed primitives on lat/lon coordinates,
//! * [`trips`] point filtering and trip segmentation (stay regions or
//!   consecutive-observation thresholds),
//! * [`features`] per-trip trajectory features, proximity to rail/bus/highway
//!   networks and `[0, 1]` scaling,
//! * [`model`] the jointly trained wide (multinomial logit) and deep (RELU
//!   network) classifier,
//! * [`baselines`] GLM, CART, bagging and random forest comparators,
//! * [`eval`] k-fold cross-validation, confusion matrices and demand summaries,
//! * [`synth`] a seeded generator of labelled trajectories and networks,
//! * [`pipeline`] file-based stages driven by a single [`config::PipelineConfig`].
//!
//! Data-parallel loops (per device, per trip, per tree, per CV cell) go through
//! [`par`], which uses rayon when the `parallel` feature is enabled and plain
//! iterators otherwise. Results are identical either way.

// `!(x < y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod eval;
pub mod features;
pub mod geo;
pub mod io;
pub mod mode;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod synth;
pub mod trips;

pub use mode::{Mode, ModeLabel, Provenance};
