//! Learning engine for scalar-output computational graphs.
//!
//! Three training rules are implemented over the same graph model:
//!
//! - [`autodiff`]: forward evaluation and reverse differentiation (BP). This is
//!   the ground truth every other rule is compared against.
//! - [`pc`]: predictive-coding state, the energy `F = ½ Σ ε²`, synchronous
//!   inference dynamics and plain inference learning (IL).
//! - [`zil`]: zero-divergence inference learning, both the layer-indexed
//!   schedule and the level-scheduled form for levelled graphs.
//!
//! [`leveller`] inserts identity vertices so that every vertex has a single
//! root-path length, which is what makes the level schedule exact.
//! [`zoo`] builds desk-scale graphs for the model families exercised by the
//! [`harness`].
//!
//! ## Sign conventions
//!
//! Prediction errors are `ε = x − μ`. All updates are descent steps:
//! `Δz = −α ∂E/∂z` for BP, and `Δζ = −α ∂F/∂ζ = α Σ ε ∂μ/∂ζ` for IL and Z-IL.

pub mod autodiff;
pub mod error;
pub mod graph;
pub mod harness;
pub mod leveller;
pub mod numeric;
pub mod params;
pub mod pc;
pub mod zil;
pub mod zoo;

pub use error::{Error, Result};
pub use graph::{ElemFn, Graph, GraphBuilder, LeafRole, VertexId};
pub use harness::report::{divergence, UpdateReport};
pub use params::LeafValues;
