//! Transition recommendation workbench.
//!
//! Everything needed to study "which transition goes between these two
//! shots" as a retrieval problem, end to end and fully offline:
//!
//! - [`fx`] — transition taxonomy and a procedural renderer that turns
//!   `(shot A, shot B, category, duration)` into concrete frames.
//! - [`synthgen`] — synthetic corpus generator with planted, recoverable
//!   editing rules, plus filtering / splitting / stats.
//! - [`nn`] — small tape-based autodiff engine (dense, conv, attention
//!   primitives) that the models are built from.
//! - [`model`] — the two-stage architecture: a clip classifier that yields
//!   a transition embedding table, and a multi-modal transformer that
//!   embeds shot contexts and ranks categories by dot product.
//! - [`train`] — triplet-margin training loops, warmup/step LR schedule,
//!   classification pretraining and baselines.
//! - [`eval`] — recall@k / mean-rank metrics, ablation grids, 2-D
//!   embedding projections.
//! - [`cli`] — config-file driven subcommands gluing the above together.
//!
//! All randomness flows through explicit seeds; every run is
//! reproducible bit-for-bit on the same target.

pub mod cli;
pub mod eval;
pub mod fx;
pub mod model;
pub mod nn;
pub mod synthgen;
pub mod train;
pub mod util;

pub use fx::{Frame, Shot, TransitionCategory, TransitionClip};
pub use synthgen::{CorpusManifest, SampleRecord};
