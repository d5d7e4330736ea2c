//! Adaptive finite elements on quadtree meshes of the unit square and the
//! L-shape, with the option of replacing intermediate solves by a few
//! smoothing iterations on the prolonged previous solution.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod cli;
pub mod driver;
pub mod estimate;
pub mod fespace;
pub mod mesh;
pub mod output;
pub mod problems;
pub mod solvers;
pub mod sparse;
pub mod transfer;

pub use driver::{run, run_with_observer, CycleRecord, Mode, RunConfig, RunResult, Smoother};
pub use estimate::MarkingConfig;
pub use fespace::{ConstraintSet, FeSpace};
pub use mesh::Mesh;
pub use problems::Problem;
