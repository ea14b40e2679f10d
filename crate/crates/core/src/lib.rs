//! Dynamic mode decomposition with sparsity-promoting amplitude selection,
//! temporal interpolation, frame sampling strategies, LBP-TOP features and
//! a cross-validated evaluation harness for short high-frame-rate clips.

// `!(x >= lo)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dmd;
pub mod dmdsp;
pub mod error;
pub mod eval;
pub mod features;
mod linalg;
pub mod sampling;
pub mod seqio;
pub mod synth;
pub mod tim;

pub use dmd::{decompose, DmdDecomposition};
pub use error::{Error, Result};
pub use seqio::{FrameSequence, SnapshotPair};
