use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::metrics::binary_entropy;
use crate::scalar::Real;

/// Error-verification parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationParams {
    /// Tag length in bits.
    pub t: u32,
    pub p_collision: f64,
}

impl Default for VerificationParams {
    fn default() -> Self {
        VerificationParams {
            t: 50,
            p_collision: 1e-10,
        }
    }
}

impl VerificationParams {
    pub fn new(t: u32, p_collision: f64) -> Result<Self> {
        let p = VerificationParams { t, p_collision };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.t > 63 {
            return Err(ReconError::InvalidParameter(format!(
                "tag length {} outside 1..=63",
                self.t
            )));
        }
        if !(self.p_collision > 0.0 && self.p_collision < 1.0) {
            return Err(ReconError::Domain(self.p_collision));
        }
        Ok(())
    }
}

/// How the tag cost enters the effective efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagCost {
    /// One tag per clustered frame, shared by its `k` EC frames:
    /// `t / (k n H(q))`.
    #[default]
    Amortized,
    /// `t / (n H(q))` regardless of `k`.
    Literal,
}

/// `k` EC frames of `n` bits verified together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub k: usize,
    pub n: usize,
    pub fer: f64,
    /// 0 or 1 repeat requests per clustered frame.
    pub repeats_allowed: u8,
}

impl ClusterPlan {
    pub fn new(k: usize, n: usize, fer: f64, repeats_allowed: u8, full_frame: usize) -> Result<Self> {
        if k == 0 || n == 0 || k * n > full_frame {
            return Err(ReconError::InvalidParameter(format!(
                "cluster of {k} x {n} bits does not fit a {full_frame}-bit full frame"
            )));
        }
        if !(0.0..=1.0).contains(&fer) {
            return Err(ReconError::Domain(fer));
        }
        if repeats_allowed > 1 {
            return Err(ReconError::InvalidParameter(
                "at most one repeat request per cluster".into(),
            ));
        }
        Ok(ClusterPlan {
            k,
            n,
            fer,
            repeats_allowed,
        })
    }
}

/// Probability that at least one of `k` EC frames is wrong:
/// `1 - (1 - fer)^k`.
pub fn fer_cluster<T: Real>(fer: T, k: usize) -> T {
    if fer >= T::one() {
        return T::one();
    }
    let k = T::of(k as f64);
    -(k * (-fer).ln_1p()).exp_m1()
}

/// `(1 - F_c) f + (F_c + P_coll) / H(q) + tag`, with `F_c` from
/// [`fer_cluster`] and the tag term per [`TagCost`].
pub fn effective_efficiency<T: Real>(
    f: T,
    fer: T,
    k: usize,
    n: usize,
    q: T,
    params: &VerificationParams,
    tag: TagCost,
) -> Result<T> {
    if k == 0 || n == 0 {
        return Err(ReconError::InvalidParameter("k and n must be positive".into()));
    }
    if q <= T::zero() {
        return Err(ReconError::ZeroQber);
    }
    let h = binary_entropy(q)?;
    let fc = fer_cluster(fer, k);
    Ok((T::one() - fc) * f
        + (fc + T::of(params.p_collision)) / h
        + tag_term(params.t, k, n, h, tag))
}

fn tag_term<T: Real>(t: u32, k: usize, n: usize, h: T, tag: TagCost) -> T {
    let frames = match tag {
        TagCost::Amortized => k,
        TagCost::Literal => 1,
    };
    T::of(f64::from(t)) / (T::of((frames * n) as f64) * h)
}

/// Effective efficiency when each failed EC frame is corrected once more:
/// residual frame failure `fer^2`, expected extra leakage `fer f` per frame,
/// and a second tag for every cluster that failed the first check.
pub fn effective_efficiency_with_repeat<T: Real>(
    f: T,
    fer: T,
    k: usize,
    n: usize,
    q: T,
    params: &VerificationParams,
    tag: TagCost,
) -> Result<T> {
    if k == 0 || n == 0 {
        return Err(ReconError::InvalidParameter("k and n must be positive".into()));
    }
    if q <= T::zero() {
        return Err(ReconError::ZeroQber);
    }
    let h = binary_entropy(q)?;
    let first = fer_cluster(fer, k);
    let residual = fer_cluster(fer * fer, k);
    Ok((T::one() - residual) * f * (T::one() + fer)
        + (residual + T::of(params.p_collision)) / h
        + tag_term(params.t, k, n, h, tag) * (T::one() + first))
}

/// Search bounds and model for [`optimize_cluster`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSearch {
    pub k_max: usize,
    pub repeats_allowed: bool,
    pub tag: TagCost,
}

/// Exhaustive search for the `k` in `1..=k_max` minimising the effective
/// efficiency; the smallest such `k` wins ties. With repeats allowed, each
/// `k` is charged the cheaper of repeating and discarding.
pub fn optimize_cluster<T: Real>(
    f: T,
    fer: T,
    n: usize,
    q: T,
    params: &VerificationParams,
    search: &ClusterSearch,
) -> Result<(usize, T)> {
    if search.k_max == 0 {
        return Err(ReconError::InvalidParameter("empty cluster-size range".into()));
    }
    let mut best: Option<(usize, T)> = None;
    for k in 1..=search.k_max {
        let mut v = effective_efficiency(f, fer, k, n, q, params, search.tag)?;
        if search.repeats_allowed {
            let r = effective_efficiency_with_repeat(f, fer, k, n, q, params, search.tag)?;
            if r < v {
                v = r;
            }
        }
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    Ok(best.expect("k_max >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::f_fer;
    use proptest::prelude::*;

    #[test]
    fn fer_cluster_examples() {
        assert_eq!(fer_cluster(0.0, 7), 0.0);
        assert_eq!(fer_cluster(1.0, 7), 1.0);
        assert!((fer_cluster(0.01f64, 10) - 0.095_617_924_991_195_5).abs() < 1e-15);
        assert!((fer_cluster(0.01f32, 10) - 0.095_617_92).abs() < 1e-6);
    }

    #[test]
    fn single_frame_reduces_to_f_fer() {
        let p = VerificationParams::default();
        let h = binary_entropy(0.03).unwrap();
        let v: f64 = effective_efficiency(1.08, 0.02, 1, 4096, 0.03, &p, TagCost::Amortized).unwrap();
        let expect = f_fer(1.08, 0.02, h) + (1e-10 + 50.0 / 4096.0) / h;
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn limit_without_verification_cost() {
        let p = VerificationParams {
            t: 1,
            p_collision: 1e-300,
        };
        let v: f64 = effective_efficiency(1.1, 0.0, 1, 1 << 40, 0.05, &p, TagCost::Amortized).unwrap();
        assert!((v - 1.1).abs() < 1e-9);
    }

    #[test]
    fn literal_tag_cost_ignores_k() {
        let p = VerificationParams::default();
        let a = effective_efficiency(1.1, 0.0, 2, 1000, 0.02, &p, TagCost::Literal).unwrap();
        let b = effective_efficiency(1.1, 0.0, 9, 1000, 0.02, &p, TagCost::Literal).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_free_frames_cluster_maximally() {
        let search = ClusterSearch {
            k_max: 64,
            repeats_allowed: false,
            tag: TagCost::Amortized,
        };
        let (k, _) =
            optimize_cluster(1.1, 0.0, 1 << 16, 0.02, &VerificationParams::default(), &search)
                .unwrap();
        assert_eq!(k, 64);
        let empty = ClusterSearch { k_max: 0, ..search };
        assert!(optimize_cluster(1.1, 0.0, 1 << 16, 0.02, &VerificationParams::default(), &empty)
            .is_err());
    }

    #[test]
    fn plan_checks_capacity() {
        assert!(ClusterPlan::new(8, 1000, 0.01, 1, 8000).is_ok());
        assert!(ClusterPlan::new(9, 1000, 0.01, 1, 8000).is_err());
        assert!(ClusterPlan::new(1, 1000, 1.5, 0, 8000).is_err());
        assert!(ClusterPlan::new(1, 1000, 0.1, 2, 8000).is_err());
    }

    proptest! {
        #[test]
        fn optimum_is_a_true_argmin(fer in 0.0f64..0.2, q in 0.01f64..0.11, repeat: bool) {
            let p = VerificationParams::default();
            let search = ClusterSearch { k_max: 40, repeats_allowed: repeat, tag: TagCost::Amortized };
            let (k, best) = optimize_cluster(1.1, fer, 4096, q, &p, &search).unwrap();
            prop_assert!((1..=40).contains(&k));
            for j in 1..=40 {
                let v = if repeat {
                    effective_efficiency_with_repeat(1.1, fer, j, 4096, q, &p, TagCost::Amortized).unwrap()
                } else {
                    effective_efficiency(1.1, fer, j, 4096, q, &p, TagCost::Amortized).unwrap()
                };
                prop_assert!(best <= v);
            }
        }

        #[test]
        fn fer_cluster_is_monotone(fer in 0.0f64..1.0, k in 1usize..200) {
            let a = fer_cluster(fer, k);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(fer_cluster(fer, k + 1) >= a);
        }
    }
}
