//! Approximate projection onto `Range(G)` by gradient descent in latent space.
//!
//! [`project`] minimises `‖x − G(z)‖²` over `z` and returns the best iterate
//! seen, so its residual never exceeds that of the starting point. Nothing
//! certifies the result is a global minimiser; the residual is reported so
//! callers can audit the approximation gap (see [`brute_force_project`] for
//! an exhaustive check on small latent spaces).

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{DenseVector, RngStream};
use crate::scalar::Scalar;

/// Starting point of a latent descent.
#[derive(Clone, Debug, PartialEq)]
pub enum LatentInit<T> {
    Zero,
    /// `z ~ N(0, I_k)`.
    Random,
    Warm(DenseVector<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionConfig<T> {
    pub inner_steps: usize,
    pub inner_rate: T,
    /// Independent descents; restart 0 starts from `init`, the rest from random draws.
    pub restarts: usize,
    pub init: LatentInit<T>,
    /// Reporting only.
    pub tolerance: T,
}

impl<T: Scalar> ProjectionConfig<T> {
    pub fn new(inner_steps: usize, inner_rate: T) -> Self {
        Self {
            inner_steps,
            inner_rate,
            restarts: 1,
            init: LatentInit::Random,
            tolerance: T::zero(),
        }
    }

    pub fn with_init(mut self, init: LatentInit<T>) -> Self {
        self.init = init;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 {
            return Err(Error::InvalidArgument("inner_steps must be at least 1".into()));
        }
        if !(self.inner_rate > T::zero()) || !self.inner_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "inner_rate must be positive, got {}",
                self.inner_rate
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult<T> {
    pub z_hat: DenseVector<T>,
    /// `G(z_hat)`.
    pub x_proj: DenseVector<T>,
    /// `‖x − x_proj‖²`.
    pub residual: T,
    /// Latent gradient updates performed, summed over restarts.
    pub inner_updates: usize,
}

pub(crate) fn initial_latent<T: Scalar>(init: &LatentInit<T>, k: usize, rng: &mut RngStream) -> Result<DenseVector<T>> {
    match init {
        LatentInit::Zero => Ok(DenseVector::zeros(k)),
        LatentInit::Random => Ok(rng.normal_vector(k, T::one())),
        LatentInit::Warm(z) => {
            check_dim("warm-start latent", k, z.len())?;
            Ok(z.clone())
        }
    }
}

fn descend<T: Scalar>(
    g: &GeneratorNet<T>,
    x: &DenseVector<T>,
    mut z: DenseVector<T>,
    steps: usize,
    rate: T,
) -> Result<ProjectionResult<T>> {
    let two = T::lit(2.0);
    let mut best: Option<ProjectionResult<T>> = None;
    for step in 0..=steps {
        let (gz, grad) = g.forward_and_pullback(&z, |gz| gz.sub(x).scaled(two))?;
        let residual = x.dist_sq(&gz);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(ProjectionResult {
                z_hat: z.clone(),
                x_proj: gz,
                residual,
                inner_updates: steps,
            });
        }
        if step == steps || !grad.is_finite() {
            break;
        }
        z = z.add_scaled(-rate, &grad);
    }
    Ok(best.expect("at least one evaluation"))
}

/// Approximate `argmin_{G(z)} ‖x − G(z)‖²`.
///
/// Each restart runs `inner_steps` updates `z ← z − η_in ∇_z‖x − G(z)‖²`.
/// Restart `r` draws from its own stream `(key, r)` where `key` is taken
/// from `rng`, so restarts can run concurrently and still merge
/// deterministically (lowest residual, then lowest restart index).
pub fn project<T: Scalar>(
    g: &GeneratorNet<T>,
    x: &DenseVector<T>,
    cfg: &ProjectionConfig<T>,
    rng: &mut RngStream,
) -> Result<ProjectionResult<T>> {
    cfg.validate()?;
    check_dim("projection target", g.output_dim(), x.len())?;
    let k = g.latent_dim();
    let key = rng.split_key();
    let run = |r: usize| -> Result<ProjectionResult<T>> {
        let mut stream = RngStream::with_stream(key, r as u64);
        let init = if r == 0 { &cfg.init } else { &LatentInit::Random };
        let z0 = initial_latent(init, k, &mut stream)?;
        descend(g, x, z0, cfg.inner_steps, cfg.inner_rate)
    };
    let results: Vec<ProjectionResult<T>> = if cfg.restarts == 1 {
        vec![run(0)?]
    } else {
        (0..cfg.restarts)
            .into_par_iter()
            .map(run)
            .collect::<Result<Vec<_>>>()?
    };
    let total = cfg.inner_steps * cfg.restarts;
    let mut best = results
        .into_iter()
        .reduce(|a, b| if b.residual < a.residual { b } else { a })
        .expect("restarts >= 1");
    best.inner_updates = total;
    Ok(best)
}

/// Exhaustive search over the lattice `[lo, hi]^k` with `points_per_dim`
/// points per axis. Only for `k ≤ 3`. Ties keep the first lattice point in
/// lexicographic order.
pub fn brute_force_project<T: Scalar>(
    g: &GeneratorNet<T>,
    x: &DenseVector<T>,
    bounds: (T, T),
    points_per_dim: usize,
) -> Result<ProjectionResult<T>> {
    let k = g.latent_dim();
    if k > 3 {
        return Err(Error::InvalidArgument(format!(
            "brute-force projection limited to k <= 3, got k = {k}"
        )));
    }
    if points_per_dim < 2 || !(bounds.0 < bounds.1) {
        return Err(Error::InvalidArgument("need at least 2 points on a nonempty interval".into()));
    }
    check_dim("projection target", g.output_dim(), x.len())?;
    let (lo, hi) = bounds;
    let denom = T::lit((points_per_dim - 1) as f64);
    let coord = |i: usize| lo + (hi - lo) * T::lit(i as f64) / denom;
    let total = points_per_dim.pow(k as u32);
    let mut best: Option<ProjectionResult<T>> = None;
    let mut idx = vec![0usize; k];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..k).rev() {
            idx[d] = rem % points_per_dim;
            rem /= points_per_dim;
        }
        let z: DenseVector<T> = idx.iter().map(|&i| coord(i)).collect();
        let gz = g.forward(&z)?;
        let residual = x.dist_sq(&gz);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(ProjectionResult {
                z_hat: z,
                x_proj: gz,
                residual,
                inner_updates: 0,
            });
        }
    }
    Ok(best.expect("lattice is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorSpec;

    #[test]
    fn warm_start_at_range_point_is_exact() {
        let g = GeneratorNet::<f64>::random(&GeneratorSpec::relu(4, vec![16], 10), &mut RngStream::new(1)).unwrap();
        let s = g.sample_range(&mut RngStream::new(2), false);
        let cfg = ProjectionConfig::new(50, 0.05).with_init(LatentInit::Warm(s.z.clone()));
        let r = project(&g, &s.x, &cfg, &mut RngStream::new(3)).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.x_proj, s.x);
    }

    #[test]
    fn identity_generator_one_step() {
        let g = GeneratorNet::<f64>::identity(5);
        let x = RngStream::new(4).normal_vector::<f64>(5, 1.0);
        let cfg = ProjectionConfig::new(1, 0.5).with_init(LatentInit::Zero);
        let r = project(&g, &x, &cfg, &mut RngStream::new(0)).unwrap();
        assert_eq!(r.x_proj, x);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn residual_never_exceeds_initial() {
        let g = GeneratorNet::<f64>::random(&GeneratorSpec::relu(3, vec![12], 8), &mut RngStream::new(5)).unwrap();
        let mut rng = RngStream::new(6);
        for _ in 0..20 {
            let x = rng.normal_vector::<f64>(8, 1.0);
            let z0 = rng.normal_vector::<f64>(3, 1.0);
            // absurd step size: descent diverges, best-seen still holds
            let cfg = ProjectionConfig::new(10, 50.0).with_init(LatentInit::Warm(z0.clone()));
            let r = project(&g, &x, &cfg, &mut rng).unwrap();
            let init_res = x.dist_sq(&g.forward(&z0).unwrap());
            assert!(r.residual <= init_res);
            assert!((x.dist_sq(&g.forward(&r.z_hat).unwrap()) - r.residual).abs() <= 1e-12 * (1.0 + r.residual));
        }
    }

    #[test]
    fn deterministic_with_restarts() {
        let g = GeneratorNet::<f64>::random(&GeneratorSpec::relu(3, vec![12], 8), &mut RngStream::new(5)).unwrap();
        let x = RngStream::new(9).normal_vector::<f64>(8, 1.0);
        let cfg = ProjectionConfig::new(40, 0.05).with_restarts(4);
        let a = project(&g, &x, &cfg, &mut RngStream::new(1)).unwrap();
        let b = project(&g, &x, &cfg, &mut RngStream::new(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.inner_updates, 160);
    }

    #[test]
    fn invalid_config() {
        let g = GeneratorNet::<f64>::identity(2);
        let x = DenseVector::zeros(2);
        let mut rng = RngStream::new(0);
        assert!(project(&g, &x, &ProjectionConfig::new(0, 0.1), &mut rng).is_err());
        assert!(project(&g, &x, &ProjectionConfig::new(5, 0.0), &mut rng).is_err());
        assert!(project(&g, &x, &ProjectionConfig::new(5, 0.1).with_restarts(0), &mut rng).is_err());
        assert!(project(&g, &DenseVector::zeros(3), &ProjectionConfig::new(5, 0.1), &mut rng).is_err());
        let warm = ProjectionConfig::new(5, 0.1).with_init(LatentInit::Warm(DenseVector::zeros(3)));
        assert!(project(&g, &x, &warm, &mut rng).is_err());
    }

    #[test]
    fn brute_force_identity_and_constant() {
        let g = GeneratorNet::<f64>::identity(1);
        let r = brute_force_project(&g, &DenseVector::from_f64(&[0.7]), (-1.0, 1.0), 201).unwrap();
        assert!((r.z_hat[0] - 0.7).abs() < 1e-12);

        let spec = GeneratorSpec {
            weight_scale: 0.0,
            bias_scale: 1.0,
            ..GeneratorSpec::relu(2, vec![3], 4)
        };
        let c = GeneratorNet::<f64>::random(&spec, &mut RngStream::new(3)).unwrap();
        let x = DenseVector::from_f64(&[1.0, 2.0, 3.0, 4.0]);
        let r = brute_force_project(&c, &x, (-1.0, 1.0), 5).unwrap();
        let konst = c.forward(&DenseVector::zeros(2)).unwrap();
        assert_eq!(r.residual, x.dist_sq(&konst));
    }

    #[test]
    fn brute_force_rejects_large_latent() {
        let g = GeneratorNet::<f64>::identity(4);
        assert!(brute_force_project(&g, &DenseVector::zeros(4), (-1.0, 1.0), 3).is_err());
    }
}
