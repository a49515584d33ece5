//! Loss functions `F(x)` with analytic gradients.
//!
//! # Gradient convention
//!
//! For the three least-squares kinds (`Squared`, `SinusoidL2`,
//! `PhaseCorrected`) [`Objective::gradient`] returns **half** the true
//! gradient, e.g. `Aᵀ(Ax − y)` for `F = ‖y − Ax‖²`. The update
//! `x − η·gradient` is then literally `x + ηAᵀ(y − Ax)`, so published step
//! sizes (η = 0.5 for linear PGD, η = 0.9 for phase retrieval) carry over
//! unchanged. `SimSigmoid` returns its exact gradient. The factor is exposed
//! as [`Objective::gradient_scale`], and [`Objective::full_gradient`] applies
//! it; anything comparing against `F` itself (finite differences, RSC/RSS
//! estimates) must use the full gradient.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::measurement::{Link, MeasurementModel};
use crate::numerics::DenseVector;
use crate::scalar::{sigmoid, softplus, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `‖y − Ax‖²`, linear link.
    Squared,
    /// `(1/m) Σ softplus(aᵢᵀx) − yᵢ aᵢᵀx`, sigmoid link.
    SimSigmoid,
    /// `‖y − (Ax + sin Ax)‖²`, sinusoid link.
    SinusoidL2,
    /// `‖y ⊙ p − Ax‖²` for a phase vector `p ∈ {±1}ᵐ`, magnitude link.
    PhaseCorrected,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::SimSigmoid => "sim_sigmoid",
            LossKind::SinusoidL2 => "sinusoid_l2",
            LossKind::PhaseCorrected => "phase_corrected",
        }
    }

    pub fn link(self) -> Link {
        match self {
            LossKind::Squared => Link::Linear,
            LossKind::SimSigmoid => Link::Sigmoid,
            LossKind::SinusoidL2 => Link::Sinusoid,
            LossKind::PhaseCorrected => Link::Magnitude,
        }
    }

    /// The natural loss for a link.
    pub fn for_link(link: Link) -> Self {
        match link {
            Link::Linear => LossKind::Squared,
            Link::Sigmoid => LossKind::SimSigmoid,
            Link::Sinusoid => LossKind::SinusoidL2,
            Link::Magnitude => LossKind::PhaseCorrected,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct Objective<T> {
    model: Arc<MeasurementModel<T>>,
    y: DenseVector<T>,
    kind: LossKind,
    phase: Option<DenseVector<T>>,
}

fn check_phase<T: Scalar>(p: &DenseVector<T>, m: usize) -> Result<()> {
    check_dim("phase vector", m, p.len())?;
    if p.iter().all(|&v| v == T::one() || v == -T::one()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("phase entries must be exactly ±1".into()))
    }
}

impl<T: Scalar> Objective<T> {
    /// Objective of `kind` bound to `(model, y)`. `PhaseCorrected` needs a
    /// phase vector; use [`Objective::phase_corrected`].
    pub fn new(model: impl Into<Arc<MeasurementModel<T>>>, y: DenseVector<T>, kind: LossKind) -> Result<Self> {
        let model = model.into();
        if kind == LossKind::PhaseCorrected {
            return Err(Error::KindMismatch {
                kind: kind.name(),
                what: "construction without a phase vector".into(),
            });
        }
        Self::build(model, y, kind, None)
    }

    pub fn squared(model: impl Into<Arc<MeasurementModel<T>>>, y: DenseVector<T>) -> Result<Self> {
        Self::new(model, y, LossKind::Squared)
    }

    pub fn phase_corrected(
        model: impl Into<Arc<MeasurementModel<T>>>,
        y: DenseVector<T>,
        phase: DenseVector<T>,
    ) -> Result<Self> {
        let model = model.into();
        check_phase(&phase, model.num_measurements())?;
        Self::build(model, y, LossKind::PhaseCorrected, Some(phase))
    }

    fn build(
        model: Arc<MeasurementModel<T>>,
        y: DenseVector<T>,
        kind: LossKind,
        phase: Option<DenseVector<T>>,
    ) -> Result<Self> {
        if model.link() != kind.link() {
            return Err(Error::KindMismatch {
                kind: kind.name(),
                what: format!("{} link", model.link()),
            });
        }
        check_dim("observations", model.num_measurements(), y.len())?;
        Ok(Self { model, y, kind, phase })
    }

    /// Same objective with the phase vector replaced.
    pub fn rebind_phase(&self, phase: DenseVector<T>) -> Result<Self> {
        if self.kind != LossKind::PhaseCorrected {
            return Err(Error::KindMismatch {
                kind: self.kind.name(),
                what: "rebind_phase".into(),
            });
        }
        check_phase(&phase, self.model.num_measurements())?;
        Ok(Self {
            model: Arc::clone(&self.model),
            y: self.y.clone(),
            kind: self.kind,
            phase: Some(phase),
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn model(&self) -> &MeasurementModel<T> {
        &self.model
    }

    pub fn y(&self) -> &DenseVector<T> {
        &self.y
    }

    pub fn phase(&self) -> Option<&DenseVector<T>> {
        self.phase.as_ref()
    }

    pub fn signal_dim(&self) -> usize {
        self.model.signal_dim()
    }

    /// Ratio between the true gradient of `F` and [`Objective::gradient`].
    pub fn gradient_scale(&self) -> T {
        match self.kind {
            LossKind::SimSigmoid => T::one(),
            _ => T::lit(2.0),
        }
    }

    /// `y ⊙ p` for the phase-corrected kind, `y` otherwise.
    fn target(&self) -> DenseVector<T> {
        match &self.phase {
            Some(p) => self.y.hadamard(p),
            None => self.y.clone(),
        }
    }

    pub fn value(&self, x: &DenseVector<T>) -> Result<T> {
        let ax = self.model.matrix().matvec(x)?;
        Ok(self.value_from_ax(&ax))
    }

    fn value_from_ax(&self, ax: &DenseVector<T>) -> T {
        match self.kind {
            LossKind::Squared | LossKind::PhaseCorrected => self.target().dist_sq(ax),
            LossKind::SinusoidL2 => ax
                .iter()
                .zip(self.y.iter())
                .map(|(&u, &y)| {
                    let r = y - (u + u.sin());
                    r * r
                })
                .sum(),
            LossKind::SimSigmoid => {
                let m = T::lit(ax.len() as f64);
                ax.iter()
                    .zip(self.y.iter())
                    .map(|(&u, &y)| softplus(u) - y * u)
                    .sum::<T>()
                    / m
            }
        }
    }

    /// Gradient under the half-gradient convention described at module level.
    pub fn gradient(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        let ax = self.model.matrix().matvec(x)?;
        Ok(self.gradient_from_ax(&ax))
    }

    fn gradient_from_ax(&self, ax: &DenseVector<T>) -> DenseVector<T> {
        let a = self.model.matrix();
        let r = match self.kind {
            LossKind::Squared | LossKind::PhaseCorrected => ax.sub(&self.target()),
            LossKind::SinusoidL2 => ax.zip_map(&self.y, |u, y| (T::one() + u.cos()) * (u + u.sin() - y)),
            LossKind::SimSigmoid => {
                let inv_m = T::one() / T::lit(ax.len() as f64);
                ax.zip_map(&self.y, |u, y| (sigmoid(u) - y) * inv_m)
            }
        };
        a.matvec_adjoint_unchecked(&r)
    }

    /// True gradient `∇F(x)`.
    pub fn full_gradient(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        Ok(self.gradient(x)?.scaled(self.gradient_scale()))
    }

    /// `(F(x), gradient(x))` sharing one product `Ax`.
    pub fn value_and_gradient(&self, x: &DenseVector<T>) -> Result<(T, DenseVector<T>)> {
        check_dim("objective", self.signal_dim(), x.len())?;
        let ax = self.model.matrix().matvec(x)?;
        Ok((self.value_from_ax(&ax), self.gradient_from_ax(&ax)))
    }
}
