//! Floating-point abstraction shared by every module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the solvers are generic over (`f32` or `f64`).
///
/// The convergence-floor checks used throughout the test suite (`F < 1e-8`)
/// assume `f64`; `f32` works for forward evaluation and coarse solves.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `sign` with the convention `sign(0) = +1`.
#[inline]
pub fn sign_pos<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// Logistic sigmoid, evaluated without overflow for large `|u|`.
#[inline]
pub fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^u)` as `max(u, 0) + log(1 + e^{-|u|})`.
#[inline]
pub fn softplus<T: Scalar>(u: T) -> T {
    u.max(T::zero()) + (-u.abs()).exp().ln_1p()
}
