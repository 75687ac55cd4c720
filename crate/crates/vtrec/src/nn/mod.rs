//! Minimal reverse-mode autodiff engine the models are built on.
//!
//! No external NN framework: [`graph::Graph`] records a tape of ~25 op
//! kinds (dense, conv via im2col, layer norm, masked softmax, the
//! gather/concat plumbing retrieval losses need) and differentiates it
//! in one reverse sweep. Parameters live in a [`params::ParamStore`];
//! frozen entries take part in forward passes but never receive
//! gradients. Every op's backward rule is checked against central finite
//! differences in `grad_tests`.

mod conv;
mod graph;
mod params;

pub use graph::{Graph, NodeId};
pub use params::{
    gaussian, identity, init_rng, kaiming_normal, load_checkpoint, save_checkpoint,
    xavier_uniform, zeros, Adam, Grads, NnError, Param, ParamStore,
};

#[cfg(test)]
mod grad_tests;
