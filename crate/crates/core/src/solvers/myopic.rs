use super::{check_truth, project_step, resolve_step, SolveTrace, SolverConfig, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::objectives::{LossKind, Objective};
use crate::scalar::Scalar;

const BASIS_TOL: f64 = 1e-8;

/// A component `v` with at most `sparsity` nonzero coefficients in the
/// orthonormal basis `basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseInnovation<T> {
    pub v: DenseVector<T>,
    pub basis: DenseMatrix<T>,
    pub sparsity: usize,
}

impl<T: Scalar> SparseInnovation<T> {
    pub fn new(v: DenseVector<T>, basis: DenseMatrix<T>, sparsity: usize) -> Result<Self> {
        let s = Self { v, basis, sparsity };
        s.validate()?;
        Ok(s)
    }

    /// `l` spikes of height `±magnitude` at distinct random coordinates of
    /// the standard basis.
    pub fn planted_spikes(n: usize, l: usize, magnitude: T, rng: &mut RngStream) -> Result<Self> {
        if l > n {
            return Err(Error::InvalidArgument(format!("cannot place {l} spikes in {n} coordinates")));
        }
        let mut v = DenseVector::zeros(n);
        for i in rng.distinct_indices(n, l) {
            v[i] = rng.sign::<T>() * magnitude;
        }
        Self::new(v, DenseMatrix::identity(n), l)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.v.len();
        check_dim("basis rows", n, self.basis.rows())?;
        check_dim("basis columns", n, self.basis.cols())?;
        if !self.basis.has_orthonormal_columns(T::lit(1e-10)) {
            return Err(Error::InvalidArgument("innovation basis is not orthonormal".into()));
        }
        let nnz = self.coefficients().count_nonzero(T::zero());
        if nnz > self.sparsity {
            return Err(Error::InvalidArgument(format!(
                "innovation has {nnz} nonzero coefficients, more than {}",
                self.sparsity
            )));
        }
        Ok(())
    }

    /// `Bᵀv`.
    pub fn coefficients(&self) -> DenseVector<T> {
        self.basis.matvec_adjoint_unchecked(&self.v)
    }

    /// Indices of the nonzero entries of `Bᵀv`.
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.coefficients())
    }
}

/// Sorted indices of the nonzero entries of `c`.
pub(crate) fn support_of<T: Scalar>(c: &DenseVector<T>) -> Vec<usize> {
    c.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(i, _)| i).collect()
}

fn check_basis<T: Scalar>(basis: &DenseMatrix<T>, n: usize) -> Result<()> {
    check_dim("basis rows", n, basis.rows())?;
    check_dim("basis columns", n, basis.cols())?;
    if !basis.has_orthonormal_columns(T::lit(BASIS_TOL)) {
        return Err(Error::InvalidArgument("basis is not orthonormal".into()));
    }
    Ok(())
}

fn thresh_unchecked<T: Scalar>(w: &DenseVector<T>, basis: &DenseMatrix<T>, l: usize) -> DenseVector<T> {
    let n = w.len();
    if l >= n {
        return w.clone();
    }
    let c = basis.matvec_adjoint_unchecked(w);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps equal magnitudes in index order.
    order.sort_by(|&i, &j| c[j].abs().partial_cmp(&c[i].abs()).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept = DenseVector::zeros(n);
    for &i in &order[..l] {
        kept[i] = c[i];
    }
    basis.matvec_unchecked(&kept)
}

/// `B·H_l(Bᵀw)`, where `H_l` keeps the `l` largest-magnitude coefficients
/// (ties go to the lower index). Returns `w` unchanged when `l ≥ n`.
pub fn thresh_in_basis<T: Scalar>(w: &DenseVector<T>, basis: &DenseMatrix<T>, l: usize) -> Result<DenseVector<T>> {
    check_basis(basis, w.len())?;
    Ok(thresh_unchecked(w, basis, l))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MyopicSolution<T> {
    pub x_hat: DenseVector<T>,
    pub u_hat: DenseVector<T>,
    pub v_hat: DenseVector<T>,
    pub trace: SolveTrace<T>,
    /// `u_0, …, u_T` when the config records iterates.
    pub u_iterates: Vec<DenseVector<T>>,
    pub v_iterates: Vec<DenseVector<T>>,
}

/// Myopic ε-PGD for `x* = G(z*) + v*` with `v*` sparse in `basis`. From
/// `u₀ = v₀ = 0`, each iteration evaluates `g = ∇F(x_t)` once and sets
/// `u ← P_G(u − ηg)`, `v ← Thresh_{B,l}(v − ηg)`, `x ← u + v`.
pub fn myopic_eps_pgd<T: Scalar>(
    obj: &Objective<T>,
    g: &GeneratorNet<T>,
    basis: &DenseMatrix<T>,
    l: usize,
    cfg: &SolverConfig<T>,
) -> Result<MyopicSolution<T>> {
    cfg.validate()?;
    if obj.kind() == LossKind::PhaseCorrected {
        return Err(Error::KindMismatch {
            kind: obj.kind().name(),
            what: "myopic_eps_pgd".into(),
        });
    }
    let n = obj.signal_dim();
    check_dim("generator output", n, g.output_dim())?;
    check_basis(basis, n)?;
    check_truth(cfg, n)?;
    let eta = resolve_step(cfg, obj, g)?;
    let mut rng = RngStream::new(cfg.seed);
    let mut trace = TraceBuilder::new(cfg.truth.as_ref(), cfg.record_iterates);
    let mut u_iterates = Vec::new();
    let mut v_iterates = Vec::new();

    let mut u = DenseVector::zeros(n);
    let mut v = DenseVector::zeros(n);
    let mut x = DenseVector::zeros(n);
    let mut z: Option<DenseVector<T>> = None;
    let (mut f, mut grad) = obj.value_and_gradient(&x)?;
    trace.push(&x, f, None, 0);
    if cfg.record_iterates {
        u_iterates.push(u.clone());
        v_iterates.push(v.clone());
    }
    for _ in 0..cfg.outer_steps {
        let proj = project_step(g, &u.add_scaled(-eta, &grad), &cfg.projection, z.as_ref(), &mut rng)?;
        v = thresh_unchecked(&v.add_scaled(-eta, &grad), basis, l);
        u = proj.x_proj.clone();
        z = Some(proj.z_hat.clone());
        x = u.add(&v);
        (f, grad) = obj.value_and_gradient(&x)?;
        trace.push(&x, f, Some(&proj), 0);
        if cfg.record_iterates {
            u_iterates.push(u.clone());
            v_iterates.push(v.clone());
        }
    }
    Ok(MyopicSolution {
        trace: trace.finish(x.clone(), z, eta),
        x_hat: x,
        u_hat: u,
        v_hat: v,
        u_iterates,
        v_iterates,
    })
}
