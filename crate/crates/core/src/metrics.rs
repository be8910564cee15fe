//! Entropy and efficiency figures of merit.
//!
//! Keys are assumed uniform, so `H(X) = 1` and the conditional entropy of
//! the BSC is the binary entropy of its crossover probability.

use serde::{Deserialize, Serialize};

use crate::bits::{check_same_len, BitFrame};
use crate::error::{ReconError, Result};
use crate::scalar::Real;

/// `H(p) = -p log2 p - (1-p) log2 (1-p)`, with `0 log2 0 = 0`.
pub fn binary_entropy<T: Real>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(ReconError::Domain(p.as_f64()));
    }
    let term = |v: T| if v > T::zero() { -v * v.log2() } else { T::zero() };
    Ok(term(p) + term(T::one() - p))
}

/// The `p` in `[0, 1/2]` with `H(p) = h`, by bisection.
pub fn inverse_binary_entropy(h: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(ReconError::Domain(h));
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fraction of positions in which the frames differ.
pub fn qber(x: &BitFrame, y: &BitFrame) -> Result<f64> {
    check_same_len(x, y)?;
    if x.is_empty() {
        return Err(ReconError::EmptyFrame);
    }
    Ok(x.hamming_distance(y)? as f64 / x.len() as f64)
}

/// Efficiency figures for one reconciled frame (or an average over frames).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord<T> {
    pub leak_ir: u64,
    pub leak_ev: u64,
    pub n: usize,
    pub q: T,
    pub fer: T,
    pub f: T,
    pub f_fer: T,
    pub beta: T,
}

impl<T: Real> EfficiencyRecord<T> {
    pub fn with_leak_ev(mut self, leak_ev: u64) -> Self {
        self.leak_ev = leak_ev;
        self
    }
}

/// `f = leak / (n H(q))`, `f_FER = (1-FER) f + FER / H(q)` and the
/// matching beta-efficiency.
pub fn efficiency_metrics<T: Real>(leak_ir: u64, n: usize, q: T, fer: T) -> Result<EfficiencyRecord<T>> {
    if q == T::zero() {
        return Err(ReconError::ZeroQber);
    }
    if n == 0 {
        return Err(ReconError::EmptyFrame);
    }
    if !(fer >= T::zero() && fer <= T::one()) {
        return Err(ReconError::Domain(fer.as_f64()));
    }
    let h = binary_entropy(q)?;
    let f = T::of(leak_ir as f64) / (T::of(n as f64) * h);
    Ok(EfficiencyRecord {
        leak_ir,
        leak_ev: 0,
        n,
        q,
        fer,
        f,
        f_fer: f_fer(f, fer, h),
        beta: beta_from_f(f, h),
    })
}

/// FER-adjusted efficiency given `h = H(q)`.
pub fn f_fer<T: Real>(f: T, fer: T, h: T) -> T {
    if fer == T::zero() {
        f
    } else if fer == T::one() {
        T::one() / h
    } else {
        (T::one() - fer) * f + fer / h
    }
}

/// Solves `beta (1 - h) = 1 - f h` for beta.
pub fn beta_from_f<T: Real>(f: T, h: T) -> T {
    (T::one() - f * h) / (T::one() - h)
}

/// Inverse of [`beta_from_f`].
pub fn f_from_beta<T: Real>(beta: T, h: T) -> T {
    (T::one() - beta * (T::one() - h)) / h
}

/// Leaked information per processed key bit, `f H(q)`. Secret key is no
/// longer extractable once this reaches 1.
pub fn leak_per_bit<T: Real>(f: T, q: T) -> Result<T> {
    if !(q >= T::zero() && q < T::of(0.5)) {
        return Err(ReconError::Domain(q.as_f64()));
    }
    if f < T::zero() {
        return Err(ReconError::InvalidParameter("negative efficiency".into()));
    }
    Ok(f * binary_entropy(q)?)
}
