//! Projected gradient descent with generative-model priors.
//!
//! Signals are constrained to the range of a feed-forward generator
//! `G: ℝᵏ → ℝⁿ`. Solvers alternate a gradient step on a measurement loss with
//! an approximate projection onto `Range(G)` computed by latent gradient
//! descent. Everything is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod generator;
pub mod measurement;
pub mod numerics;
pub mod objectives;
pub mod projection;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use generator::{Activation, GeneratorSpec, Layer, RangeSample};
pub use measurement::Link;
pub use numerics::RngStream;
pub use objectives::LossKind;
pub use projection::LatentInit;
pub use scalar::Scalar;
pub use solvers::StepSize;

pub type Vector = numerics::DenseVector<f64>;
pub type Matrix = numerics::DenseMatrix<f64>;
pub type Generator = generator::GeneratorNet<f64>;
pub type Model = measurement::MeasurementModel<f64>;
pub type Obs = measurement::Observation<f64>;
pub type Loss = objectives::Objective<f64>;
pub type ProjectionConfig = projection::ProjectionConfig<f64>;
pub type SolverConfig = solvers::SolverConfig<f64>;
pub type SolveTrace = solvers::SolveTrace<f64>;
pub type Innovation = solvers::SparseInnovation<f64>;
