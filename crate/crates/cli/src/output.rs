//! CSV and PGM writers.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use genpgd::{SolveTrace, Vector};

pub const TRACE_HEADER: [&str; 6] = ["t", "F", "per_pixel_error", "sign_invariant_error", "proj_residual", "phase_flips"];

/// 17 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_trace<W: Write>(w: W, trace: &SolveTrace) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        out.write_record([
            r.t.to_string(),
            fmt_float(r.objective),
            fmt_opt(r.per_pixel_error),
            fmt_opt(r.sign_invariant_error),
            fmt_opt(r.proj_residual),
            r.phase_flips.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &SolveTrace) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(std::io::BufWriter::new(f), trace)
}

/// Side length when `n` is a perfect square.
pub fn image_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n && n > 0).then_some(s)
}

/// Linear map `[lo, hi] → [0, 255]` used for an image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaling {
    pub lo: f64,
    pub hi: f64,
}

/// Binary PGM (P5) of a square image, min-max scaled to `0..=255`.
/// A constant image maps to 0.
pub fn write_pgm<W: Write>(mut w: W, x: &Vector, side: usize) -> Result<Scaling> {
    anyhow::ensure!(side * side == x.len(), "{} pixels do not form a {side}x{side} image", x.len());
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let bytes: Vec<u8> = x
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    write!(w, "P5\n{side} {side}\n255\n")?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(Scaling { lo, hi })
}

pub fn write_pgm_file(path: &Path, x: &Vector, side: usize) -> Result<Scaling> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_pgm(std::io::BufWriter::new(f), x, side)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn pgm_layout_and_scaling() {
        let x = Vector::from_f64(&[0.0, 1.0, 2.0, 4.0]);
        let mut buf = Vec::new();
        let s = write_pgm(&mut buf, &x, 2).unwrap();
        assert_eq!(s, Scaling { lo: 0.0, hi: 4.0 });
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[0, 64, 128, 255]);
        assert!(write_pgm(Vec::new(), &x, 3).is_err());
    }

    #[test]
    fn image_sides() {
        assert_eq!(image_side(784), Some(28));
        assert_eq!(image_side(128), None);
    }
}
