use std::sync::Arc;

use super::{check_truth, project_step, resolve_step, SolveTrace, SolverConfig, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::generator::GeneratorNet;
use crate::measurement::{Link, MeasurementModel};
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::objectives::{LossKind, Objective};
use crate::scalar::Scalar;

/// PGD for `y = Ax`: from `x₀ = 0`, alternate
/// `w_t = x_t + ηAᵀ(y − Ax_t)` and `x_{t+1} = P_G(w_t)`.
///
/// Trace objective is `‖y − Ax_t‖²`.
pub fn pgd_linear<T: Scalar>(
    y: &DenseVector<T>,
    a: &DenseMatrix<T>,
    g: &GeneratorNet<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveTrace<T>> {
    cfg.validate()?;
    let n = a.cols();
    check_dim("measurements", a.rows(), y.len())?;
    check_dim("generator output", n, g.output_dim())?;
    check_truth(cfg, n)?;
    let obj = Objective::squared(Arc::new(MeasurementModel::new(a.clone(), Link::Linear)), y.clone())?;
    let eta = resolve_step(cfg, &obj, g)?;
    let mut rng = RngStream::new(cfg.seed);
    let mut trace = TraceBuilder::new(cfg.truth.as_ref(), cfg.record_iterates);

    let mut x = DenseVector::zeros(n);
    let mut z: Option<DenseVector<T>> = None;
    trace.push(&x, obj.value(&x)?, None, 0);
    for _ in 0..cfg.outer_steps {
        let residual = y.sub(&a.matvec(&x)?);
        let w = x.add_scaled(eta, &a.matvec_adjoint(&residual)?);
        let proj = project_step(g, &w, &cfg.projection, z.as_ref(), &mut rng)?;
        x = proj.x_proj.clone();
        z = Some(proj.z_hat.clone());
        trace.push(&x, obj.value(&x)?, Some(&proj), 0);
    }
    Ok(trace.finish(x, z, eta))
}

/// ε-PGD for a general differentiable loss: `w_t = x_t − η∇F(x_t)`,
/// `x_{t+1} = P_G(w_t)`, from `x₀ = 0`. The gradient follows
/// [`Objective::gradient`]'s convention, so with a squared objective this
/// reproduces [`pgd_linear`] exactly.
pub fn eps_pgd<T: Scalar>(obj: &Objective<T>, g: &GeneratorNet<T>, cfg: &SolverConfig<T>) -> Result<SolveTrace<T>> {
    cfg.validate()?;
    if obj.kind() == LossKind::PhaseCorrected {
        return Err(Error::KindMismatch {
            kind: obj.kind().name(),
            what: "eps_pgd (use phase_pgd)".into(),
        });
    }
    let n = obj.signal_dim();
    check_dim("generator output", n, g.output_dim())?;
    check_truth(cfg, n)?;
    let eta = resolve_step(cfg, obj, g)?;
    let mut rng = RngStream::new(cfg.seed);
    let mut trace = TraceBuilder::new(cfg.truth.as_ref(), cfg.record_iterates);

    let mut x = DenseVector::zeros(n);
    let mut z: Option<DenseVector<T>> = None;
    let (mut f, mut grad) = obj.value_and_gradient(&x)?;
    trace.push(&x, f, None, 0);
    for _ in 0..cfg.outer_steps {
        let w = x.add_scaled(-eta, &grad);
        let proj = project_step(g, &w, &cfg.projection, z.as_ref(), &mut rng)?;
        x = proj.x_proj.clone();
        z = Some(proj.z_hat.clone());
        (f, grad) = obj.value_and_gradient(&x)?;
        trace.push(&x, f, Some(&proj), 0);
    }
    Ok(trace.finish(x, z, eta))
}
