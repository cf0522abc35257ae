//! Sum-product networks over discrete indicator leaves.
//!
//! The crate covers the full path from a model file to exact Bayesian
//! updates of the sum-node weights:
//!
//! * [`graph`] holds the immutable network structure, validation and the
//!   Dirichlet prior type.
//! * [`format`] reads and writes the line-based model and prior files and
//!   the CSV data files.
//! * [`inference`] runs the bottom-up evaluation pass, the top-down
//!   differentiation pass and counts induced trees exactly.
//! * [`moments`] computes, for every sum edge at once, the posterior moments
//!   of the edge weight after one observation, in two circuit passes.
//! * [`online`] builds the ADF, BMM and CCCP streaming learners on top of
//!   the moment computation.
//! * [`oracle`] is the exponential-time reference that enumerates induced
//!   trees; it also hosts the random network generator.
//! * [`scaling`] times moment queries over a sweep of network sizes.

pub mod format;
pub mod graph;
pub mod inference;
pub mod moments;
pub mod online;
pub mod oracle;
pub mod scaling;
pub mod special;

mod error;

pub use error::Error;
pub use graph::{DirichletPrior, Instance, NodeId, NodeKind, Scope, SpnBuilder, SpnGraph, ValidationReport, Weights};
pub use inference::{CircuitTrace, LogValue, PassStats, TreeCount};
pub use moments::{EdgeMoment, EdgeMomentReport, Lambdas, MomentFunction};
pub use online::{Algorithm, LearnerState, TrainLog};
