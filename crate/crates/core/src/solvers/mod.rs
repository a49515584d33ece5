//! Projected-gradient solvers and latent-space baselines.
//!
//! Every solver is deterministic given its inputs and `SolverConfig::seed`,
//! and returns a [`SolveTrace`] with one record per iterate, `t = 0` included.
//! Projections are warm-started from the previous outer iterate's latent code;
//! the first projection uses `projection.init`.

mod baselines;
mod myopic;
mod pgd;
mod phase;

pub use baselines::{csgm_baseline, dpr_baseline, LatentDescentConfig};
pub use myopic::{myopic_eps_pgd, thresh_in_basis, MyopicSolution, SparseInnovation};
pub use pgd::{eps_pgd, pgd_linear};
pub use phase::{phase_init, phase_pgd, phase_pgd_with, PhaseInit, PhaseSource};

use crate::diagnostics::{recon_error, rsc_rss_estimate, sign_invariant_dist};
use crate::error::{Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{DenseVector, RngStream};
use crate::objectives::Objective;
use crate::projection::{project, LatentInit, ProjectionConfig, ProjectionResult};
use crate::scalar::Scalar;

/// Outer step size.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSize<T> {
    Fixed(T),
    /// `η = 1/β̂` in true-gradient units, with `β̂` the sampled restricted
    /// smoothness over `pairs` range pairs.
    Auto { pairs: usize },
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T> {
    pub outer_steps: usize,
    pub step_size: StepSize<T>,
    pub projection: ProjectionConfig<T>,
    pub seed: u64,
    /// Ground truth, used only to enrich the trace.
    pub truth: Option<DenseVector<T>>,
    /// Keep every iterate `x_t` in the trace.
    pub record_iterates: bool,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(outer_steps: usize, step_size: T, projection: ProjectionConfig<T>) -> Self {
        Self {
            outer_steps,
            step_size: StepSize::Fixed(step_size),
            projection,
            seed: 0,
            truth: None,
            record_iterates: false,
        }
    }

    /// η = 0.5, T = 15, T_in = 200 (3000 inner updates), η_in = 0.01.
    pub fn linear_protocol() -> Self {
        Self::new(15, T::lit(0.5), ProjectionConfig::new(200, T::lit(0.01)))
    }

    /// η = 0.9, T = 50, T_in = 50 (2500 inner updates, the DPR budget), η_in = 0.01.
    pub fn phase_protocol() -> Self {
        Self::new(50, T::lit(0.9), ProjectionConfig::new(50, T::lit(0.01)))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_truth(mut self, truth: DenseVector<T>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn recording_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_steps == 0 {
            return Err(Error::InvalidArgument("outer_steps must be at least 1".into()));
        }
        match &self.step_size {
            StepSize::Fixed(eta) if !(*eta > T::zero()) || !eta.is_finite() => {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")))
            }
            StepSize::Auto { pairs: 0 } => {
                return Err(Error::InvalidArgument("auto step size needs at least one pair".into()))
            }
            _ => {}
        }
        self.projection.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord<T> {
    pub t: usize,
    pub objective: T,
    /// `‖x_t − x*‖² / n`.
    pub per_pixel_error: Option<T>,
    /// `min(‖x_t − x*‖, ‖x_t + x*‖)`.
    pub sign_invariant_error: Option<T>,
    /// Residual of the projection that produced `x_t`; `None` at `t = 0`.
    pub proj_residual: Option<T>,
    /// Phase entries that changed sign since the previous iteration.
    pub phase_flips: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace<T> {
    pub records: Vec<TraceRecord<T>>,
    pub x_hat: DenseVector<T>,
    pub z_hat: Option<DenseVector<T>>,
    /// Outer step size actually used.
    pub step_size: T,
    /// Latent gradient updates spent, summed over all projections.
    pub inner_updates: usize,
    /// `x_0, …, x_T` when requested.
    pub iterates: Vec<DenseVector<T>>,
}

impl<T: Scalar> SolveTrace<T> {
    pub fn objective_values(&self) -> Vec<T> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last(&self) -> &TraceRecord<T> {
        self.records.last().expect("trace holds t = 0")
    }

    pub fn sign_invariant_errors(&self) -> Vec<Option<T>> {
        self.records.iter().map(|r| r.sign_invariant_error).collect()
    }
}

/// Accumulates trace records while a solver runs.
pub(crate) struct TraceBuilder<'a, T> {
    truth: Option<&'a DenseVector<T>>,
    record_iterates: bool,
    records: Vec<TraceRecord<T>>,
    iterates: Vec<DenseVector<T>>,
    inner_updates: usize,
}

impl<'a, T: Scalar> TraceBuilder<'a, T> {
    pub(crate) fn new(truth: Option<&'a DenseVector<T>>, record_iterates: bool) -> Self {
        Self {
            truth,
            record_iterates,
            records: Vec::new(),
            iterates: Vec::new(),
            inner_updates: 0,
        }
    }

    pub(crate) fn push(&mut self, x: &DenseVector<T>, objective: T, proj: Option<&ProjectionResult<T>>, phase_flips: usize) {
        let t = self.records.len();
        let (per_pixel_error, sign_invariant_error) = match self.truth {
            Some(truth) => (
                Some(recon_error(x, truth).expect("truth length checked")),
                Some(sign_invariant_dist(x, truth).expect("truth length checked")),
            ),
            None => (None, None),
        };
        if let Some(p) = proj {
            self.inner_updates += p.inner_updates;
        }
        self.records.push(TraceRecord {
            t,
            objective,
            per_pixel_error,
            sign_invariant_error,
            proj_residual: proj.map(|p| p.residual),
            phase_flips,
        });
        if self.record_iterates {
            self.iterates.push(x.clone());
        }
    }

    pub(crate) fn add_inner_updates(&mut self, n: usize) {
        self.inner_updates += n;
    }

    pub(crate) fn finish(self, x_hat: DenseVector<T>, z_hat: Option<DenseVector<T>>, step_size: T) -> SolveTrace<T> {
        SolveTrace {
            records: self.records,
            x_hat,
            z_hat,
            step_size,
            inner_updates: self.inner_updates,
            iterates: self.iterates,
        }
    }
}

pub(crate) fn check_truth<T: Scalar>(cfg: &SolverConfig<T>, n: usize) -> Result<()> {
    if let Some(t) = &cfg.truth {
        crate::error::check_dim("ground truth", n, t.len())?;
    }
    Ok(())
}

/// Resolves the configured step size against `obj` (in the objective's own
/// gradient convention). The auto estimate draws from stream 1 of the seed
/// so it never perturbs the projection stream.
pub(crate) fn resolve_step<T: Scalar>(cfg: &SolverConfig<T>, obj: &Objective<T>, g: &GeneratorNet<T>) -> Result<T> {
    match cfg.step_size {
        StepSize::Fixed(eta) => Ok(eta),
        StepSize::Auto { pairs } => {
            let mut rng = RngStream::with_stream(cfg.seed, 1);
            let est = rsc_rss_estimate(obj, g, pairs, &mut rng)?;
            if !(est.beta > T::zero()) {
                return Err(Error::Degenerate(format!(
                    "restricted smoothness estimate {} is not positive",
                    est.beta
                )));
            }
            Ok(obj.gradient_scale() / est.beta)
        }
    }
}

/// Projection settings for outer iteration `t` given the previous latent code.
pub(crate) fn projection_for<T: Scalar>(base: &ProjectionConfig<T>, prev_z: Option<&DenseVector<T>>) -> ProjectionConfig<T> {
    let mut cfg = base.clone();
    if let Some(z) = prev_z {
        cfg.init = LatentInit::Warm(z.clone());
    }
    cfg
}

pub(crate) fn project_step<T: Scalar>(
    g: &GeneratorNet<T>,
    w: &DenseVector<T>,
    base: &ProjectionConfig<T>,
    prev_z: Option<&DenseVector<T>>,
    rng: &mut RngStream,
) -> Result<ProjectionResult<T>> {
    project(g, w, &projection_for(base, prev_z), rng)
}
