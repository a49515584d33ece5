//! Sampled estimates of the restricted constants and fitted convergence rates.
//!
//! Every estimator draws pair `i` from stream `(key, i)` with `key` taken
//! from the caller's generator, so estimates over `N` pairs are prefix-stable
//! in `N` and independent of thread scheduling.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::objectives::Objective;
use crate::scalar::Scalar;
use crate::solvers::SolveTrace;

const MIN_PAIR_DIST: f64 = 1e-9;

/// Sampled S-REC constants of `A` over `Range(G)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SrecEstimate<T> {
    /// Smallest `‖A d‖²/‖d‖²` over sampled range differences.
    pub gamma: T,
    /// Largest `‖A d‖/‖d‖`.
    pub rho: T,
    pub pairs_used: usize,
    /// The estimator assumes zero slack.
    pub slack: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RscRssEstimate<T> {
    pub alpha: T,
    pub beta: T,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit<T> {
    /// `exp(slope)` of the least-squares line through `ln F_t`.
    pub alpha: T,
    pub floor: T,
    pub iterations_used: usize,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: T,
}

fn range_pairs<T, R, F>(g: &GeneratorNet<T>, num_pairs: usize, rng: &mut RngStream, f: F) -> Vec<Option<R>>
where
    T: Scalar,
    R: Send,
    F: Fn(&DenseVector<T>, &DenseVector<T>) -> Option<R> + Sync,
{
    let key = rng.split_key();
    (0..num_pairs)
        .into_par_iter()
        .map(|i| {
            let mut s = RngStream::with_stream(key, i as u64);
            let x1 = g.sample_range(&mut s, false).x;
            let x2 = g.sample_range(&mut s, false).x;
            f(&x1, &x2)
        })
        .collect()
}

fn extremes<T: Scalar>(values: impl Iterator<Item = T>) -> Option<(T, T, usize)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v, 1)),
        Some((lo, hi, n)) => Some((lo.min(v), hi.max(v), n + 1)),
    })
}

/// Estimates `γ` and `ρ` from `num_pairs` range pairs, skipping pairs closer
/// than `1e-9`.
pub fn empirical_srec<T: Scalar>(
    a: &DenseMatrix<T>,
    g: &GeneratorNet<T>,
    num_pairs: usize,
    rng: &mut RngStream,
) -> Result<SrecEstimate<T>> {
    if num_pairs == 0 {
        return Err(Error::InvalidArgument("num_pairs must be at least 1".into()));
    }
    check_dim("generator output", a.cols(), g.output_dim())?;
    let ratios = range_pairs(g, num_pairs, rng, |x1, x2| {
        let d = x1.sub(x2);
        let dd = d.norm_sq();
        (dd.sqrt() > T::lit(MIN_PAIR_DIST)).then(|| a.matvec_unchecked(&d).norm_sq() / dd)
    });
    let (gamma, hi, used) = extremes(ratios.into_iter().flatten())
        .ok_or_else(|| Error::Degenerate("all sampled range pairs coincide".into()))?;
    Ok(SrecEstimate {
        gamma,
        rho: hi.sqrt(),
        pairs_used: used,
        slack: T::zero(),
    })
}

/// Estimates the restricted strong convexity and smoothness constants of
/// `obj` over `Range(G)` from `q = 2[F(x') − F(x) − ⟨∇F(x), x' − x⟩]/‖x' − x‖²`,
/// using the true gradient.
pub fn rsc_rss_estimate<T: Scalar>(
    obj: &Objective<T>,
    g: &GeneratorNet<T>,
    num_pairs: usize,
    rng: &mut RngStream,
) -> Result<RscRssEstimate<T>> {
    if num_pairs == 0 {
        return Err(Error::InvalidArgument("num_pairs must be at least 1".into()));
    }
    check_dim("generator output", obj.signal_dim(), g.output_dim())?;
    let two = T::lit(2.0);
    let qs = range_pairs(g, num_pairs, rng, |x, xp| {
        let d = xp.sub(x);
        let dd = d.norm_sq();
        if !(dd.sqrt() > T::lit(MIN_PAIR_DIST)) {
            return None;
        }
        let fx = obj.value(x).ok()?;
        let fxp = obj.value(xp).ok()?;
        let grad = obj.full_gradient(x).ok()?;
        Some(two * (fxp - fx - grad.dot(&d)) / dd)
    });
    let (alpha, beta, samples) = extremes(qs.into_iter().flatten())
        .ok_or_else(|| Error::Degenerate("all sampled range pairs coincide".into()))?;
    Ok(RscRssEstimate { alpha, beta, samples })
}

/// Fits `F_t ≈ c·αᵗ` by least squares on `ln F_t` over the iterations with
/// `F_t > floor`.
pub fn convergence_rate<T: Scalar>(values: &[T], floor: T) -> Result<RateFit<T>> {
    if floor < T::zero() {
        return Err(Error::InvalidArgument("floor must be nonnegative".into()));
    }
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > floor && f.is_finite())
        .map(|(t, &f)| (t as f64, f.to_f64_lossy().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 values above the floor, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let slope = stl / stt;
    let rss: f64 = pts.iter().map(|p| (p.1 - ml - slope * (p.0 - mt)).powi(2)).sum();
    Ok(RateFit {
        alpha: T::lit(slope.exp()),
        floor,
        iterations_used: pts.len(),
        residual: T::lit((rss / n).sqrt()),
    })
}

/// [`convergence_rate`] over a solver trace's objective values.
pub fn trace_rate<T: Scalar>(trace: &SolveTrace<T>, floor: T) -> Result<RateFit<T>> {
    convergence_rate(&trace.objective_values(), floor)
}

/// Largest sampled `|⟨u − u', v − v'⟩| / (‖u − u'‖‖v − v'‖)` over range
/// pairs `(u, u')` and pairs `(v, v')` of `l`-sparse combinations of the
/// columns of `basis`.
pub fn incoherence_estimate<T: Scalar>(
    g: &GeneratorNet<T>,
    basis: &DenseMatrix<T>,
    l: usize,
    num_samples: usize,
    rng: &mut RngStream,
) -> Result<T> {
    let n = g.output_dim();
    check_dim("basis rows", n, basis.rows())?;
    if !basis.has_orthonormal_columns(T::lit(1e-8)) {
        return Err(Error::InvalidArgument("basis columns are not orthonormal".into()));
    }
    let r = basis.cols();
    if l == 0 || l > r {
        return Err(Error::InvalidArgument(format!("sparsity must lie in 1..={r}, got {l}")));
    }
    if num_samples == 0 {
        return Err(Error::InvalidArgument("num_samples must be at least 1".into()));
    }
    let key = rng.split_key();
    let sparse = |s: &mut RngStream| {
        let mut c = DenseVector::zeros(r);
        for i in s.distinct_indices(r, l) {
            c[i] = s.normal(T::one());
        }
        basis.matvec_unchecked(&c)
    };
    let tol = T::lit(MIN_PAIR_DIST);
    let mus: Vec<Option<T>> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let mut s = RngStream::with_stream(key, i as u64);
            let du = g.sample_range(&mut s, false).x.sub(&g.sample_range(&mut s, false).x);
            let dv = sparse(&mut s).sub(&sparse(&mut s));
            let (nu, nv) = (du.norm(), dv.norm());
            (nu > tol && nv > tol).then(|| (du.dot(&dv).abs() / (nu * nv)).min(T::one()))
        })
        .collect();
    extremes(mus.into_iter().flatten())
        .map(|(_, hi, _)| hi)
        .ok_or_else(|| Error::Degenerate("all sampled differences vanish".into()))
}

/// `min(‖x₁ − x₂‖, ‖x₁ + x₂‖)`.
pub fn sign_invariant_dist<T: Scalar>(x1: &DenseVector<T>, x2: &DenseVector<T>) -> Result<T> {
    check_dim("sign-invariant distance", x1.len(), x2.len())?;
    let (mut minus, mut plus) = (T::zero(), T::zero());
    for (&a, &b) in x1.iter().zip(x2.iter()) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    Ok(minus.min(plus).sqrt())
}

/// Per-pixel squared error `‖x̂ − x*‖² / n`.
pub fn recon_error<T: Scalar>(x_hat: &DenseVector<T>, x_true: &DenseVector<T>) -> Result<T> {
    check_dim("reconstruction error", x_true.len(), x_hat.len())?;
    if x_true.is_empty() {
        return Ok(T::zero());
    }
    Ok(x_hat.dist_sq(x_true) / T::lit(x_true.len() as f64))
}

/// Step-size window for linear PGD given an S-REC estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport<T> {
    pub eta: T,
    /// `1/(2γ̂)`.
    pub lower: T,
    /// `1/γ̂`.
    pub upper: T,
    pub in_window: bool,
    /// `1/(ηγ̂) − 1`.
    pub predicted_factor: T,
    /// Whether `ρ̂² < 1/η`.
    pub rho_condition: bool,
}

impl<T: Scalar> WindowReport<T> {
    /// Both conditions of the linear convergence guarantee hold.
    pub fn holds(&self) -> bool {
        self.in_window && self.rho_condition
    }
}

pub fn theorem1_window_check<T: Scalar>(srec: &SrecEstimate<T>, eta: T) -> Result<WindowReport<T>> {
    if !(srec.gamma > T::zero()) {
        return Err(Error::Degenerate(format!("gamma estimate {} is not positive", srec.gamma)));
    }
    if !(eta > T::zero()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    let upper = srec.gamma.recip();
    let lower = upper / T::lit(2.0);
    Ok(WindowReport {
        eta,
        lower,
        upper,
        in_window: eta > lower && eta < upper,
        predicted_factor: (eta * srec.gamma).recip() - T::one(),
        rho_condition: srec.rho * srec.rho < eta.recip(),
    })
}

/// A step size inside `(1/(2γ̂), 1/γ̂)`. When `1/ρ̂²` also exceeds the lower
/// edge this is the midpoint of `(1/(2γ̂), min(1/γ̂, 1/ρ̂²))`, satisfying both
/// conditions; otherwise no step satisfies both and this returns `1.1/(2γ̂)`,
/// just inside the lower edge, where the gradient step is least expansive.
pub fn window_step_size<T: Scalar>(srec: &SrecEstimate<T>) -> Result<T> {
    if !(srec.gamma > T::zero()) {
        return Err(Error::Degenerate(format!("gamma estimate {} is not positive", srec.gamma)));
    }
    let lower = (T::lit(2.0) * srec.gamma).recip();
    let upper = srec.gamma.recip();
    let rho_cap = (srec.rho * srec.rho).recip();
    if rho_cap > lower {
        Ok((lower + upper.min(rho_cap)) / T::lit(2.0))
    } else {
        Ok(T::lit(1.1) * lower)
    }
}

/// Which contraction bound for ε-PGD is the larger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActiveBound {
    /// `β/α − 1`.
    RatioMinusOne,
    /// `2 − β/α`.
    TwoMinusRatio,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsPgdFactors<T> {
    pub ratio: T,
    pub ratio_minus_one: T,
    pub two_minus_ratio: T,
    /// `max(β/α − 1, 2 − β/α)`.
    pub bound: T,
    pub active: ActiveBound,
    /// `1 ≤ β/α < 2`.
    pub in_regime: bool,
}

pub fn eps_pgd_factors<T: Scalar>(est: &RscRssEstimate<T>) -> Result<EpsPgdFactors<T>> {
    if !(est.alpha > T::zero()) {
        return Err(Error::Degenerate(format!("alpha estimate {} is not positive", est.alpha)));
    }
    let ratio = est.beta / est.alpha;
    let two = T::lit(2.0);
    let (r1, r2) = (ratio - T::one(), two - ratio);
    let (bound, active) = if r1 >= r2 {
        (r1, ActiveBound::RatioMinusOne)
    } else {
        (r2, ActiveBound::TwoMinusRatio)
    };
    Ok(EpsPgdFactors {
        ratio,
        ratio_minus_one: r1,
        two_minus_ratio: r2,
        bound,
        active,
        in_regime: ratio >= T::one() && ratio < two,
    })
}

/// `(2 − (β/α)(1 − 2.5μ)/(1 − μ)) / (1 − (β/2α)·μ/(1 − μ))`, reported only.
pub fn myopic_factor<T: Scalar>(est: &RscRssEstimate<T>, mu: T) -> Result<T> {
    if !(est.alpha > T::zero()) {
        return Err(Error::Degenerate(format!("alpha estimate {} is not positive", est.alpha)));
    }
    if !(mu >= T::zero() && mu < T::one()) {
        return Err(Error::InvalidArgument(format!("incoherence must lie in [0, 1), got {mu}")));
    }
    let ratio = est.beta / est.alpha;
    let q = mu / (T::one() - mu);
    let num = T::lit(2.0) - ratio * (T::one() - T::lit(2.5) * mu) / (T::one() - mu);
    let den = T::one() - ratio / T::lit(2.0) * q;
    Ok(num / den)
}
