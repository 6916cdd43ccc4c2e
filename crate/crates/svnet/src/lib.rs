//! Statistically validated projections of bipartite ownership networks.
//!
//! Given a holder-by-asset ownership snapshot, this crate fits the bipartite
//! configuration model (the maximum-entropy ensemble matching both degree
//! sequences on average), computes an exact null distribution for every
//! pairwise portfolio overlap by degree-grouped binomial convolution, and
//! keeps only the overlaps that survive a multiplicity-corrected
//! significance threshold. The surviving edges form a validated monopartite
//! network on either layer, plus the systemic-risk analytics built on it.
//!
//! Start from [`graph::load_snapshot`] or [`synth::generate`], then
//! [`validator::validate_snapshot`]; the `examples/` directory has one
//! runnable walkthrough per capability and the `svnet` binary exposes the
//! whole pipeline as subcommands.

#![forbid(unsafe_code)]

pub mod analytics;
pub mod bicm;
pub mod cli;
pub mod error;
pub mod graph;
pub mod numeric;
pub mod pvalue;
pub mod report;
pub mod synth;
pub mod validator;

pub use bicm::{fit_bicm, fit_bicm_default, BiCMSolution};
pub use error::{Error, Result};
pub use graph::{delta_networks, load_snapshot, Layer, OverlapRecord, Snapshot};
pub use pvalue::{Backend, PValueEngine, PValueResult};
pub use synth::{generate, DegreeLaw, SynthSpec};
pub use validator::{validate_snapshot, CorrectionMethod, ValidatedNetwork, ValidationConfig};
