//! Fixed-weight multilayer network `G: ℝᵏ → ℝⁿ` used as the signal prior.
//!
//! # Weight file layout
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! binary64, matrices row-major (`out_dim` rows by `in_dim` columns).
//!
//! ```text
//! magic        8 bytes   "GPGDNET\0"
//! version      u32       1
//! depth d      u32
//! d times:     u32 in_dim, u32 out_dim, u32 activation (0 identity, 1 relu, 2 tanh)
//! d times:     out_dim*in_dim f64 weights, then out_dim f64 bias
//! ```
//!
//! Nothing may follow the last bias; trailing bytes are rejected.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, RngStream};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"GPGDNET\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn tag(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Tanh),
            other => Err(Error::MalformedWeights(format!("unknown activation tag {other}"))),
        }
    }

    #[inline]
    fn apply<T: Scalar>(self, u: T) -> T {
        match self {
            Activation::Identity => u,
            Activation::Relu => u.max(T::zero()),
            Activation::Tanh => u.tanh(),
        }
    }

    /// Derivative given the pre-activation `u` and the output `a = σ(u)`.
    /// The relu derivative at exactly 0 is 0.
    #[inline]
    fn derivative<T: Scalar>(self, u: T, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if u > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weights: DenseMatrix<T>,
    pub bias: DenseVector<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weights: DenseMatrix<T>, bias: DenseVector<T>, activation: Activation) -> Result<Self> {
        check_dim("layer bias", weights.rows(), bias.len())?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// The generator network. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet<T> {
    layers: Vec<Layer<T>>,
}

/// A point of `Range(G)` together with its latent code.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeSample<T> {
    pub z: DenseVector<T>,
    pub x: DenseVector<T>,
}

/// Shape and initialisation of a random-weight generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub output_activation: Activation,
    /// Weights are drawn from `N(0, weight_scale² / fan_in)`.
    pub weight_scale: f64,
    /// Biases are drawn from `N(0, bias_scale²)`.
    pub bias_scale: f64,
}

impl GeneratorSpec {
    /// The 20 → 200 → 784 shape of the MNIST generator.
    pub fn mnist_shape() -> Self {
        Self::relu(20, vec![200], 784)
    }

    /// Bias-free relu network with identity output layer.
    pub fn relu(latent_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        Self {
            latent_dim,
            hidden,
            output_dim,
            activation: Activation::Relu,
            output_activation: Activation::Identity,
            weight_scale: 1.0,
            bias_scale: 0.0,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.latent_dim);
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims
    }
}

/// Cached activations of one forward pass.
struct Tape<T> {
    /// `pre[i]` is layer `i`'s pre-activation, `post[i]` its output.
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T: Scalar> GeneratorNet<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("generator needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_dim("layer chain", pair[0].output_dim(), pair[1].input_dim())?;
        }
        for layer in &layers {
            if layer.input_dim() == 0 || layer.output_dim() == 0 {
                return Err(Error::InvalidArgument("layer dimensions must be positive".into()));
            }
            if !layer.weights.is_finite() || !layer.bias.is_finite() {
                return Err(Error::InvalidArgument("non-finite generator weight".into()));
            }
        }
        Ok(Self { layers })
    }

    /// `G(z) = z` on ℝᵏ.
    pub fn identity(k: usize) -> Self {
        Self {
            layers: vec![Layer {
                weights: DenseMatrix::identity(k),
                bias: DenseVector::zeros(k),
                activation: Activation::Identity,
            }],
        }
    }

    /// Random-weight network drawn layer by layer: weights row-major, then biases.
    pub fn random(spec: &GeneratorSpec, rng: &mut RngStream) -> Result<Self> {
        let dims = spec.dims();
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("dimension chain {dims:?} has a zero")));
        }
        if !(spec.weight_scale >= 0.0) || !(spec.bias_scale >= 0.0) {
            return Err(Error::InvalidArgument("scales must be nonnegative".into()));
        }
        let depth = dims.len() - 1;
        let mut layers = Vec::with_capacity(depth);
        for i in 0..depth {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let std = T::lit(spec.weight_scale / (fan_in as f64).sqrt());
            let weights = (0..fan_in * fan_out).map(|_| rng.normal(std)).collect();
            let weights = DenseMatrix::from_row_major(fan_out, fan_in, weights)?;
            let bias = rng.normal_vector(fan_out, T::lit(spec.bias_scale));
            let activation = if i + 1 == depth {
                spec.output_activation
            } else {
                spec.activation
            };
            layers.push(Layer::new(weights, bias, activation)?);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, z: &DenseVector<T>) -> Result<DenseVector<T>> {
        check_dim("generator latent", self.latent_dim(), z.len())?;
        let mut h: Vec<T> = z.to_vec();
        for layer in &self.layers {
            let mut a = layer.weights.matvec_unchecked(&h).into_vec();
            for (v, &b) in a.iter_mut().zip(layer.bias.iter()) {
                *v = layer.activation.apply(*v + b);
            }
            h = a;
        }
        Ok(DenseVector::from_vec(h))
    }

    fn forward_tape(&self, z: &[T]) -> Tape<T> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { z } else { &post[i - 1] };
            let mut u = layer.weights.matvec_unchecked(input).into_vec();
            for (v, &b) in u.iter_mut().zip(layer.bias.iter()) {
                *v += b;
            }
            let a = u.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(u);
            post.push(a);
        }
        Tape { pre, post }
    }

    fn backward(&self, tape: &Tape<T>, cotangent: &[T]) -> DenseVector<T> {
        let mut delta: Vec<T> = cotangent.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            for ((d, &u), &a) in delta.iter_mut().zip(&tape.pre[i]).zip(&tape.post[i]) {
                *d *= layer.activation.derivative(u, a);
            }
            delta = layer.weights.matvec_adjoint_unchecked(&delta).into_vec();
        }
        DenseVector::from_vec(delta)
    }

    /// `∇_z ⟨cotangent, G(z)⟩` by reverse-mode differentiation.
    pub fn latent_gradient(&self, z: &DenseVector<T>, cotangent: &DenseVector<T>) -> Result<DenseVector<T>> {
        check_dim("generator latent", self.latent_dim(), z.len())?;
        check_dim("generator cotangent", self.output_dim(), cotangent.len())?;
        let tape = self.forward_tape(z);
        Ok(self.backward(&tape, cotangent))
    }

    /// Evaluates `G(z)` and then `∇_z ⟨c, G(z)⟩` where the cotangent `c`
    /// is computed from the output by `cotangent`. One forward pass total.
    pub fn forward_and_pullback(
        &self,
        z: &DenseVector<T>,
        cotangent: impl FnOnce(&DenseVector<T>) -> DenseVector<T>,
    ) -> Result<(DenseVector<T>, DenseVector<T>)> {
        check_dim("generator latent", self.latent_dim(), z.len())?;
        let tape = self.forward_tape(z);
        let x = DenseVector::from_vec(tape.post[tape.post.len() - 1].clone());
        let c = cotangent(&x);
        check_dim("generator cotangent", self.output_dim(), c.len())?;
        let g = self.backward(&tape, &c);
        Ok((x, g))
    }

    /// Draws `z ~ N(0, I_k)` (optionally rescaled to unit norm) and returns `(z, G(z))`.
    pub fn sample_range(&self, rng: &mut RngStream, unit_norm: bool) -> RangeSample<T> {
        let z = if unit_norm {
            rng.unit_vector(self.latent_dim())
        } else {
            rng.normal_vector(self.latent_dim(), T::one())
        };
        let x = self.forward(&z).expect("latent dimension matches by construction");
        RangeSample { z, x }
    }

    /// Largest pairwise distance among `num_samples` range points; a lower
    /// bound on the diameter of `Range(G)`.
    pub fn estimate_diameter(&self, num_samples: usize, unit_norm: bool, rng: &mut RngStream) -> Result<T> {
        if num_samples < 2 {
            return Err(Error::InvalidArgument("diameter estimate needs at least 2 samples".into()));
        }
        let points: Vec<_> = (0..num_samples)
            .map(|_| self.sample_range(rng, unit_norm).x)
            .collect();
        let mut best = T::zero();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                best = best.max(points[i].dist_sq(&points[j]));
            }
        }
        Ok(best.sqrt())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            w.write_all(&(layer.input_dim() as u32).to_le_bytes())?;
            w.write_all(&(layer.output_dim() as u32).to_le_bytes())?;
            w.write_all(&layer.activation.tag().to_le_bytes())?;
        }
        for layer in &self.layers {
            for &v in layer.weights.as_slice().iter().chain(layer.bias.iter()) {
                w.write_all(&v.to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::MalformedWeights("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::MalformedWeights(format!("unsupported version {version}")));
        }
        let depth = cur.u32()? as usize;
        if depth == 0 {
            return Err(Error::MalformedWeights("zero layers".into()));
        }
        let mut shapes = Vec::with_capacity(depth.min(1024));
        for _ in 0..depth {
            let (i, o) = (cur.u32()? as usize, cur.u32()? as usize);
            let act = Activation::from_tag(cur.u32()?)?;
            shapes.push((i, o, act));
        }
        let mut layers = Vec::with_capacity(depth);
        for (i, o, act) in shapes {
            let weights = cur.reals::<T>(i.checked_mul(o).ok_or_else(|| {
                Error::MalformedWeights("layer size overflows".into())
            })?)?;
            let bias = cur.reals::<T>(o)?;
            let weights = DenseMatrix::from_row_major(o, i, weights)
                .map_err(|e| Error::MalformedWeights(e.to_string()))?;
            layers.push(Layer::new(weights, DenseVector::from_vec(bias), act)?);
        }
        if cur.pos != bytes.len() {
            return Err(Error::MalformedWeights(format!(
                "{} trailing bytes",
                bytes.len() - cur.pos
            )));
        }
        Self::new(layers).map_err(|e| match e {
            Error::DimensionMismatch { .. } => Error::MalformedWeights(e.to_string()),
            other => other,
        })
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_weights(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::MalformedWeights("unexpected end of file".into())),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::MalformedWeights("payload size overflows".into())
        })?)?;
        raw.chunks_exact(8)
            .map(|c| {
                let v = f64::from_le_bytes(c.try_into().unwrap());
                if v.is_finite() {
                    Ok(T::lit(v))
                } else {
                    Err(Error::MalformedWeights("non-finite weight".into()))
                }
            })
            .collect()
    }
}
