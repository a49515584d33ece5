#![allow(dead_code)]

use genpgd::numerics::{gaussian_matrix, DenseMatrix, DenseVector, RngStream};
use genpgd::{Generator, GeneratorSpec};

pub struct Planted {
    pub g: Generator,
    pub a: DenseMatrix<f64>,
    pub x: DenseVector<f64>,
    pub z: DenseVector<f64>,
}

/// Random bias-free relu generator `k → hidden → n`, Gaussian `A` with
/// variance `1/m`, and a range point `x* = G(z*)`.
pub fn planted(k: usize, hidden: usize, n: usize, m: usize, seed: u64) -> Planted {
    let mut rng = RngStream::new(seed);
    let g = Generator::random(&GeneratorSpec::relu(k, vec![hidden], n), &mut rng).unwrap();
    let a = gaussian_matrix(m, n, 1.0 / m as f64, &mut rng).unwrap();
    let s = g.sample_range(&mut rng, false);
    Planted { g, a, x: s.x, z: s.z }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
