use super::{check_truth, project_step, SolveTrace, SolverConfig, StepSize, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::scalar::{sign_pos, Scalar};

/// Where Phase-PGD takes its phase vector from.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSource<T> {
    /// `p_t = sign(Ax_t)`, with `sign(0) = +1`.
    Estimated,
    /// A fixed phase vector, e.g. the true `sign(Ax*)`. Reduces the solver
    /// to linear PGD on `y ⊙ p`.
    Oracle(DenseVector<T>),
}

/// Initialisation strategies for phase retrieval.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseInit<T> {
    /// `x* + δ‖x*‖·u` for a uniformly random unit `u`. Needs the truth, so
    /// it is only meaningful for synthetic experiments.
    OraclePerturb { delta: T, truth: Option<DenseVector<T>> },
    /// The range sample minimising `‖y − |Ax|‖²` among `count` draws.
    BestOfSamples { count: usize, unit_norm: bool },
}

fn magnitude_loss<T: Scalar>(y: &DenseVector<T>, ax: &DenseVector<T>) -> T {
    y.iter()
        .zip(ax.iter())
        .map(|(&yi, &u)| {
            let r = yi - u.abs();
            r * r
        })
        .sum()
}

fn check_magnitudes<T: Scalar>(y: &DenseVector<T>) -> Result<()> {
    match y.iter().position(|&v| !(v >= T::zero())) {
        Some(i) => Err(Error::InvalidArgument(format!(
            "magnitude observations must be nonnegative; y[{i}] = {}",
            y[i]
        ))),
        None => Ok(()),
    }
}

/// Phase-PGD with estimated phases. See [`phase_pgd_with`].
pub fn phase_pgd<T: Scalar>(
    y: &DenseVector<T>,
    a: &DenseMatrix<T>,
    g: &GeneratorNet<T>,
    cfg: &SolverConfig<T>,
    x0: &DenseVector<T>,
) -> Result<SolveTrace<T>> {
    phase_pgd_with(y, a, g, cfg, x0, &PhaseSource::Estimated)
}

/// Phase-PGD from `x₀`: per iteration `p = sign(Ax)`,
/// `w = x + ηAᵀ(y ⊙ p − Ax)`, `x ← P_G(w)`.
///
/// The trace objective is the phase-free loss `‖y − |Ax_t|‖²`, which equals
/// `‖y ⊙ p_t − Ax_t‖²` at `p_t = sign(Ax_t)`. `phase_flips` at record `t`
/// counts sign changes between the phases used for `x_t` and `x_{t-1}`.
pub fn phase_pgd_with<T: Scalar>(
    y: &DenseVector<T>,
    a: &DenseMatrix<T>,
    g: &GeneratorNet<T>,
    cfg: &SolverConfig<T>,
    x0: &DenseVector<T>,
    source: &PhaseSource<T>,
) -> Result<SolveTrace<T>> {
    cfg.validate()?;
    let n = a.cols();
    check_dim("measurements", a.rows(), y.len())?;
    check_dim("initial point", n, x0.len())?;
    check_dim("generator output", n, g.output_dim())?;
    check_truth(cfg, n)?;
    check_magnitudes(y)?;
    if let PhaseSource::Oracle(p) = source {
        check_dim("oracle phase", a.rows(), p.len())?;
    }
    let eta = match cfg.step_size {
        StepSize::Fixed(eta) => eta,
        StepSize::Auto { .. } => {
            return Err(Error::InvalidArgument("phase_pgd takes a fixed step size".into()));
        }
    };
    let mut rng = RngStream::new(cfg.seed);
    let mut trace = TraceBuilder::new(cfg.truth.as_ref(), cfg.record_iterates);

    let mut x = x0.clone();
    let mut z: Option<DenseVector<T>> = None;
    let mut prev_phase: Option<DenseVector<T>> = None;
    let mut ax = a.matvec(&x)?;
    trace.push(&x, magnitude_loss(y, &ax), None, 0);
    for _ in 0..cfg.outer_steps {
        let phase = match source {
            PhaseSource::Estimated => ax.map(sign_pos),
            PhaseSource::Oracle(p) => p.clone(),
        };
        let flips = prev_phase
            .as_ref()
            .map_or(0, |prev| prev.iter().zip(phase.iter()).filter(|(a, b)| a != b).count());
        let residual = y.hadamard(&phase).sub(&ax);
        let w = x.add_scaled(eta, &a.matvec_adjoint(&residual)?);
        let proj = project_step(g, &w, &cfg.projection, z.as_ref(), &mut rng)?;
        x = proj.x_proj.clone();
        z = Some(proj.z_hat.clone());
        ax = a.matvec(&x)?;
        trace.push(&x, magnitude_loss(y, &ax), Some(&proj), flips);
        prev_phase = Some(phase);
    }
    Ok(trace.finish(x, z, eta))
}

/// Builds a starting point for [`phase_pgd`].
pub fn phase_init<T: Scalar>(
    y: &DenseVector<T>,
    a: &DenseMatrix<T>,
    g: &GeneratorNet<T>,
    strategy: &PhaseInit<T>,
    rng: &mut RngStream,
) -> Result<DenseVector<T>> {
    check_dim("measurements", a.rows(), y.len())?;
    match strategy {
        PhaseInit::OraclePerturb { delta, truth } => {
            let truth = truth
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("oracle_perturb needs the ground truth".into()))?;
            check_dim("ground truth", a.cols(), truth.len())?;
            let u = rng.unit_vector::<T>(truth.len());
            Ok(truth.add_scaled(*delta * truth.norm(), &u))
        }
        PhaseInit::BestOfSamples { count, unit_norm } => {
            if *count == 0 {
                return Err(Error::InvalidArgument("best_of_samples needs count >= 1".into()));
            }
            check_dim("generator output", a.cols(), g.output_dim())?;
            let mut best: Option<(T, DenseVector<T>)> = None;
            for _ in 0..*count {
                let s = g.sample_range(rng, *unit_norm);
                let loss = magnitude_loss(y, &a.matvec(&s.x)?);
                if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                    best = Some((loss, s.x));
                }
            }
            Ok(best.expect("count >= 1").1)
        }
    }
}
