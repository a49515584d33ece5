use super::{SolveTrace, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::objectives::{LossKind, Objective};
use crate::projection::{initial_latent, LatentInit};
use crate::scalar::Scalar;

/// Plain gradient descent in latent space.
#[derive(Clone, Debug)]
pub struct LatentDescentConfig<T> {
    pub steps: usize,
    pub rate: T,
    pub init: LatentInit<T>,
    pub seed: u64,
    pub truth: Option<DenseVector<T>>,
}

impl<T: Scalar> LatentDescentConfig<T> {
    pub fn new(steps: usize, rate: T) -> Self {
        Self {
            steps,
            rate,
            init: LatentInit::Random,
            seed: 0,
            truth: None,
        }
    }

    /// 3000 updates at rate 0.01.
    pub fn csgm_protocol() -> Self {
        Self::new(3000, T::lit(0.01))
    }

    /// 2500 updates at rate 0.01.
    pub fn dpr_protocol() -> Self {
        Self::new(2500, T::lit(0.01))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: LatentInit<T>) -> Self {
        self.init = init;
        self
    }

    pub fn with_truth(mut self, truth: DenseVector<T>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if !(self.rate > T::zero()) || !self.rate.is_finite() {
            return Err(Error::InvalidArgument(format!("rate must be positive, got {}", self.rate)));
        }
        Ok(())
    }
}

/// Runs `z ← z − rate·∇_z L(G(z))` where `loss` returns `L(x)` and `∇_x L`.
fn latent_descent<T: Scalar>(
    g: &GeneratorNet<T>,
    cfg: &LatentDescentConfig<T>,
    loss: impl Fn(&DenseVector<T>) -> Result<(T, DenseVector<T>)>,
) -> Result<SolveTrace<T>> {
    cfg.validate()?;
    if let Some(t) = &cfg.truth {
        check_dim("ground truth", g.output_dim(), t.len())?;
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut z = initial_latent(&cfg.init, g.latent_dim(), &mut rng)?;
    let mut trace = TraceBuilder::new(cfg.truth.as_ref(), false);
    let mut x = DenseVector::zeros(0);
    for step in 0..=cfg.steps {
        let mut value = T::zero();
        let mut failed = None;
        let (gz, grad) = g.forward_and_pullback(&z, |gz| match loss(gz) {
            Ok((v, c)) => {
                value = v;
                c
            }
            Err(e) => {
                failed = Some(e);
                DenseVector::zeros(gz.len())
            }
        })?;
        if let Some(e) = failed {
            return Err(e);
        }
        trace.push(&gz, value, None, 0);
        x = gz;
        if step < cfg.steps {
            z = z.add_scaled(-cfg.rate, &grad);
        }
    }
    trace.add_inner_updates(cfg.steps);
    Ok(trace.finish(x, Some(z), cfg.rate))
}

/// `ẑ = argmin_z F(G(z))` by latent gradient descent from `cfg.init`;
/// `x̂ = G(ẑ)`. Typically used with the squared objective `‖y − AG(z)‖²`.
pub fn csgm_baseline<T: Scalar>(
    obj: &Objective<T>,
    g: &GeneratorNet<T>,
    cfg: &LatentDescentConfig<T>,
) -> Result<SolveTrace<T>> {
    if obj.kind() == LossKind::PhaseCorrected {
        return Err(Error::KindMismatch {
            kind: obj.kind().name(),
            what: "csgm_baseline (use dpr_baseline)".into(),
        });
    }
    check_dim("generator output", obj.signal_dim(), g.output_dim())?;
    latent_descent(g, cfg, |x| Ok((obj.value(x)?, obj.full_gradient(x)?)))
}

/// `ẑ = argmin_z ‖y − |AG(z)|‖²` by latent subgradient descent, taking the
/// derivative of `|u|` at `0` as `0`.
pub fn dpr_baseline<T: Scalar>(
    y: &DenseVector<T>,
    a: &DenseMatrix<T>,
    g: &GeneratorNet<T>,
    cfg: &LatentDescentConfig<T>,
) -> Result<SolveTrace<T>> {
    check_dim("measurements", a.rows(), y.len())?;
    check_dim("generator output", a.cols(), g.output_dim())?;
    let two = T::lit(2.0);
    latent_descent(g, cfg, |x| {
        let ax = a.matvec(x)?;
        let mut value = T::zero();
        let c: DenseVector<T> = y
            .iter()
            .zip(ax.iter())
            .map(|(&yi, &u)| {
                let r = u.abs() - yi;
                value += r * r;
                let s = if u > T::zero() {
                    T::one()
                } else if u < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                };
                two * r * s
            })
            .collect();
        Ok((value, a.matvec_adjoint(&c)?))
    })
}
