//! Forward observation models `y = link(Ax)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::scalar::{sigmoid, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Link {
    /// `Ax`
    Linear,
    /// `Ax + sin(Ax)`
    Sinusoid,
    /// `1 / (1 + exp(-Ax))`
    Sigmoid,
    /// `|Ax|`
    Magnitude,
}

impl Link {
    #[inline]
    pub fn apply<T: Scalar>(self, u: T) -> T {
        match self {
            Link::Linear => u,
            Link::Sinusoid => u + u.sin(),
            Link::Sigmoid => sigmoid(u),
            Link::Magnitude => u.abs(),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Linear => "linear",
            Link::Sinusoid => "sinusoid",
            Link::Sigmoid => "sigmoid",
            Link::Magnitude => "magnitude",
        })
    }
}

impl FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Link::Linear),
            "sinusoid" => Ok(Link::Sinusoid),
            "sigmoid" => Ok(Link::Sigmoid),
            "magnitude" => Ok(Link::Magnitude),
            other => Err(Error::InvalidArgument(format!("unknown link {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementModel<T> {
    matrix: DenseMatrix<T>,
    link: Link,
}

impl<T: Scalar> MeasurementModel<T> {
    pub fn new(matrix: DenseMatrix<T>, link: Link) -> Self {
        Self { matrix, link }
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn num_measurements(&self) -> usize {
        self.matrix.rows()
    }

    pub fn signal_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn observe(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        let ax = self.matrix.matvec(x)?;
        Ok(ax.map(|u| self.link.apply(u)))
    }

    /// `observe(x)` plus i.i.d. `N(0, noise_std²)` noise.
    pub fn observe_noisy(&self, x: &DenseVector<T>, noise_std: T, rng: &mut RngStream) -> Result<DenseVector<T>> {
        if !(noise_std >= T::zero()) {
            return Err(Error::InvalidArgument(format!("noise_std must be nonnegative, got {noise_std}")));
        }
        let clean = self.observe(x)?;
        if noise_std == T::zero() {
            return Ok(clean);
        }
        Ok(clean.map(|v| v + rng.normal(noise_std)))
    }
}

/// Observed data, optionally with the ground truth of a synthetic instance.
#[derive(Clone, Debug)]
pub struct Observation<T> {
    pub y: DenseVector<T>,
    pub model: MeasurementModel<T>,
    pub x_true: Option<DenseVector<T>>,
    pub z_true: Option<DenseVector<T>>,
}

impl<T: Scalar> Observation<T> {
    /// Noise-free observation of a known signal.
    pub fn planted(model: MeasurementModel<T>, x_true: DenseVector<T>, z_true: Option<DenseVector<T>>) -> Result<Self> {
        let y = model.observe(&x_true)?;
        Ok(Self {
            y,
            model,
            x_true: Some(x_true),
            z_true,
        })
    }

    pub fn from_data(model: MeasurementModel<T>, y: DenseVector<T>) -> Result<Self> {
        check_dim("observation", model.num_measurements(), y.len())?;
        Ok(Self {
            y,
            model,
            x_true: None,
            z_true: None,
        })
    }
}
