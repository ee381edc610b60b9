//! Triple scoring functions over encoded entity vectors.
//!
//! RotatE treats a `d`-vector as `d/2` complex numbers (real half first,
//! imaginary half second) and rotates the head by unit-modulus phases:
//!
//! ```text
//! score(h, theta, t) = -|| h * e^{i theta} - t ||_2
//! ```
//!
//! DistMult is the trilinear product `sum_i h_i r_i t_i`, symmetric in head
//! and tail.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    RotatE,
    DistMult,
}

impl DecoderKind {
    /// Width of one relation's parameter row for entity dimension `dim`.
    pub fn relation_width(self, dim: usize) -> usize {
        match self {
            DecoderKind::RotatE => dim / 2,
            DecoderKind::DistMult => dim,
        }
    }

    pub fn check_dim(self, dim: usize) -> Result<()> {
        if self == DecoderKind::RotatE && dim % 2 != 0 {
            return Err(Error::invalid(format!("RotatE needs an even dimension, got {dim}")));
        }
        Ok(())
    }

    #[inline]
    pub fn score<F: Real>(self, h: &[F], rel: &[F], t: &[F]) -> F {
        match self {
            DecoderKind::RotatE => rotate(h, rel, t),
            DecoderKind::DistMult => distmult(h, rel, t),
        }
    }

    /// Adds `upstream * d score / d (h, rel, t)` into the gradient slices.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn backward<F: Real>(
        self,
        h: &[F],
        rel: &[F],
        t: &[F],
        upstream: F,
        dh: &mut [F],
        drel: &mut [F],
        dt: &mut [F],
    ) {
        match self {
            DecoderKind::RotatE => rotate_backward(h, rel, t, upstream, dh, drel, dt),
            DecoderKind::DistMult => {
                for i in 0..h.len() {
                    dh[i] += upstream * rel[i] * t[i];
                    drel[i] += upstream * h[i] * t[i];
                    dt[i] += upstream * h[i] * rel[i];
                }
            }
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::RotatE => "rotate",
            DecoderKind::DistMult => "distmult",
        })
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotate" => Ok(DecoderKind::RotatE),
            "distmult" => Ok(DecoderKind::DistMult),
            other => Err(Error::invalid(format!("unknown decoder {other:?}"))),
        }
    }
}

/// Checked RotatE score.
pub fn rotate_score<F: Real>(h: &[F], phase: &[F], t: &[F]) -> Result<F> {
    let d = h.len();
    if d % 2 != 0 {
        return Err(Error::invalid(format!("RotatE needs an even dimension, got {d}")));
    }
    if t.len() != d || phase.len() != d / 2 {
        return Err(Error::ShapeMismatch(format!(
            "head {d}, phase {}, tail {}",
            phase.len(),
            t.len()
        )));
    }
    Ok(rotate(h, phase, t))
}

/// Checked DistMult score.
pub fn distmult_score<F: Real>(h: &[F], r: &[F], t: &[F]) -> Result<F> {
    if h.len() != r.len() || h.len() != t.len() {
        return Err(Error::ShapeMismatch(format!(
            "head {}, relation {}, tail {}",
            h.len(),
            r.len(),
            t.len()
        )));
    }
    Ok(distmult(h, r, t))
}

#[inline]
fn distmult<F: Real>(h: &[F], r: &[F], t: &[F]) -> F {
    let mut acc = F::zero();
    for i in 0..h.len() {
        acc += h[i] * t[i] * r[i];
    }
    acc
}

/// Squared distance of the rotated head from the tail.
#[inline]
fn rotate_sq<F: Real>(h: &[F], phase: &[F], t: &[F]) -> F {
    let half = phase.len();
    let (h_re, h_im) = h.split_at(half);
    let (t_re, t_im) = t.split_at(half);
    let mut acc = F::zero();
    for j in 0..half {
        let (s, c) = phase[j].sin_cos();
        let u = h_re[j] * c - h_im[j] * s - t_re[j];
        let w = h_re[j] * s + h_im[j] * c - t_im[j];
        acc += u * u + w * w;
    }
    acc
}

#[inline]
fn rotate<F: Real>(h: &[F], phase: &[F], t: &[F]) -> F {
    -rotate_sq(h, phase, t).sqrt()
}

fn rotate_backward<F: Real>(
    h: &[F],
    phase: &[F],
    t: &[F],
    upstream: F,
    dh: &mut [F],
    dphase: &mut [F],
    dt: &mut [F],
) {
    let dist = rotate_sq(h, phase, t).sqrt();
    if dist == F::zero() {
        // Subgradient 0 at the cusp.
        return;
    }
    let half = phase.len();
    let g = upstream / dist;
    for j in 0..half {
        let (a, b) = (h[j], h[half + j]);
        let (s, c) = phase[j].sin_cos();
        let u = a * c - b * s - t[j];
        let w = a * s + b * c - t[half + j];
        // score = -dist, d dist / d u = u / dist.
        dh[j] += -g * (u * c + w * s);
        dh[half + j] += -g * (-u * s + w * c);
        dt[j] += g * u;
        dt[half + j] += g * w;
        dphase[j] += -g * (u * (-a * s - b * c) + w * (a * c - b * s));
    }
}
