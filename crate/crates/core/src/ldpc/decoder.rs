use super::ParityCheckMatrix;
use crate::bits::BitFrame;
use crate::error::{ReconError, Result};
use crate::scalar::Real;

/// Magnitude at which channel and edge LLRs are clamped by default.
pub const DEFAULT_SATURATION: f64 = 25.0;

pub const DEFAULT_MAX_ITERATIONS: usize = 50;

/// Flooding sum-product decoder for syndrome decoding.
///
/// LLR sign convention: positive means bit 0 is more likely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumProductDecoder<T> {
    pub max_iterations: usize,
    pub saturation: T,
}

impl<T: Real> Default for SumProductDecoder<T> {
    fn default() -> Self {
        SumProductDecoder {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            saturation: T::of(DEFAULT_SATURATION),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome<T> {
    pub hard_decision: BitFrame,
    /// `H * hard_decision` equals the target syndrome.
    pub converged: bool,
    /// Message-passing iterations run; zero when the channel decision
    /// already satisfied the syndrome.
    pub iterations: usize,
    pub posteriors: Vec<T>,
}

/// Per-call decoder state; never shared between decodes.
pub struct SoftDecoderState<T> {
    pub channel: Vec<T>,
    /// Check-to-variable messages in row-major edge order.
    pub check_to_var: Vec<T>,
    pub var_to_check: Vec<T>,
    pub posteriors: Vec<T>,
    pub iteration: usize,
    pub max_iterations: usize,
}

/// `ln((1 - q) / q)`, the LLR magnitude of a BSC observation.
pub fn bsc_llr<T: Real>(q: T) -> T {
    ((T::one() - q) / q).ln()
}

impl<T: Real> SumProductDecoder<T> {
    pub fn new(max_iterations: usize) -> Self {
        SumProductDecoder {
            max_iterations,
            ..Self::default()
        }
    }

    /// Runs belief propagation towards `target` syndrome from `llr`.
    pub fn decode(
        &self,
        h: &ParityCheckMatrix,
        llr: &[T],
        target: &BitFrame,
    ) -> Result<DecodeOutcome<T>> {
        if llr.len() != h.n() {
            return Err(ReconError::LengthMismatch {
                left: llr.len(),
                right: h.n(),
            });
        }
        if target.len() != h.m() {
            return Err(ReconError::LengthMismatch {
                left: target.len(),
                right: h.m(),
            });
        }
        let sat = self.saturation;
        let clamp = |x: T| x.max(-sat).min(sat);
        let mut st = SoftDecoderState {
            channel: llr.iter().map(|&x| clamp(x)).collect(),
            check_to_var: vec![T::zero(); h.edges()],
            var_to_check: vec![T::zero(); h.edges()],
            posteriors: Vec::new(),
            iteration: 0,
            max_iterations: self.max_iterations,
        };
        st.posteriors = st.channel.clone();
        let mut hard = hard_decision(&st.posteriors);
        if satisfies(h, &hard, target) {
            return Ok(st.finish(hard, true));
        }
        for i in 0..h.n() {
            for &e in h.col_edge_ids(i) {
                st.var_to_check[e as usize] = st.channel[i];
            }
        }
        // tanh(|v|/2) = (1 - e^-|v|) / (1 + e^-|v|) and
        // 2 atanh(p) = ln((1 + p) / (1 - p)); products stay strictly inside
        // [0, 1) so the logarithm is finite.
        let limit = T::one() - T::epsilon() * T::of(4.0);
        let mut mags: Vec<T> = Vec::new();
        let mut suffix: Vec<T> = Vec::new();
        while st.iteration < st.max_iterations {
            st.iteration += 1;
            for j in 0..h.m() {
                let range = h.row_range(j);
                let mut negative = target.get(j);
                mags.clear();
                for &v in &st.var_to_check[range.clone()] {
                    negative ^= v < T::zero();
                    let e = (-v.abs()).exp();
                    mags.push((T::one() - e) / (T::one() + e));
                }
                suffix.clear();
                suffix.resize(mags.len() + 1, T::one());
                for k in (0..mags.len()).rev() {
                    suffix[k] = suffix[k + 1] * mags[k];
                }
                let mut prefix = T::one();
                for (k, e) in range.enumerate() {
                    let p = (prefix * suffix[k + 1]).min(limit);
                    let msg = clamp(((T::one() + p) / (T::one() - p)).ln());
                    let own_negative = st.var_to_check[e] < T::zero();
                    st.check_to_var[e] = if negative ^ own_negative { -msg } else { msg };
                    prefix = prefix * mags[k];
                }
            }
            for i in 0..h.n() {
                let edges = h.col_edge_ids(i);
                let total = edges
                    .iter()
                    .fold(st.channel[i], |acc, &e| acc + st.check_to_var[e as usize]);
                st.posteriors[i] = total;
                for &e in edges {
                    st.var_to_check[e as usize] = clamp(total - st.check_to_var[e as usize]);
                }
            }
            hard = hard_decision(&st.posteriors);
            if satisfies(h, &hard, target) {
                return Ok(st.finish(hard, true));
            }
        }
        Ok(st.finish(hard, false))
    }
}

impl<T: Real> SoftDecoderState<T> {
    fn finish(self, hard_decision: BitFrame, converged: bool) -> DecodeOutcome<T> {
        DecodeOutcome {
            hard_decision,
            converged,
            iterations: self.iteration,
            posteriors: self.posteriors,
        }
    }
}

fn hard_decision<T: Real>(posteriors: &[T]) -> BitFrame {
    BitFrame::from_bools(posteriors.iter().map(|&p| p < T::zero()))
}

fn satisfies(h: &ParityCheckMatrix, x: &BitFrame, target: &BitFrame) -> bool {
    h.rows()
        .enumerate()
        .all(|(j, row)| x.parity_of(row) == target.get(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit_bsc, ChannelParams};
    use crate::ldpc::{peg_construct, DegreeDistribution};

    fn code() -> ParityCheckMatrix {
        let d = DegreeDistribution::new(vec![(2, 0.3), (3, 0.5), (8, 0.2)]).unwrap();
        peg_construct(2000, &d, 1000, 5).unwrap()
    }

    fn llr_for<T: Real>(y: &BitFrame, magnitude: f64) -> Vec<T> {
        y.iter()
            .map(|b| T::of(if b { -magnitude } else { magnitude }))
            .collect()
    }

    #[test]
    fn noiseless_input_converges_immediately() {
        let h = code();
        let x = BitFrame::random(h.n(), 1, 0);
        let out = SumProductDecoder::<f64>::default()
            .decode(&h, &llr_for(&x, 30.0), &h.syndrome(&x).unwrap())
            .unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 1);
        assert_eq!(out.hard_decision, x);
    }

    #[test]
    fn no_information_does_not_converge() {
        let h = code();
        let x = BitFrame::random(h.n(), 2, 0);
        let out = SumProductDecoder::<f64>::default()
            .decode(&h, &vec![0.0; h.n()], &h.syndrome(&x).unwrap())
            .unwrap();
        assert!(!out.converged);
        assert!(out.posteriors.iter().all(|p| p.abs() < 1e-9));
    }

    fn corrects_bsc_noise<T: Real>() {
        let h = code();
        let q = 0.03;
        let decoder = SumProductDecoder::<T>::default();
        for frame in 0..10 {
            let x = BitFrame::random(h.n(), 3, frame);
            let y = transmit_bsc(&x, &ChannelParams::new(q, 4).unwrap());
            let out = decoder
                .decode(&h, &llr_for::<T>(&y, bsc_llr(q)), &h.syndrome(&x).unwrap())
                .unwrap();
            assert!(out.converged, "frame {frame}");
            assert_eq!(out.hard_decision, x);
        }
    }

    #[test]
    fn corrects_bsc_noise_f64() {
        corrects_bsc_noise::<f64>();
    }

    #[test]
    fn corrects_bsc_noise_f32() {
        corrects_bsc_noise::<f32>();
    }

    #[test]
    fn convergence_implies_syndrome_match() {
        let h = code();
        let decoder = SumProductDecoder::<f64>::new(20);
        for frame in 0..20 {
            let x = BitFrame::random(h.n(), 6, frame);
            let y = transmit_bsc(&x, &ChannelParams::new(0.08, 7).unwrap());
            let target = h.syndrome(&x).unwrap();
            let out = decoder.decode(&h, &llr_for::<f64>(&y, bsc_llr(0.08)), &target).unwrap();
            assert_eq!(out.converged, h.syndrome(&out.hard_decision).unwrap() == target);
            assert!(out.posteriors.iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn length_checks() {
        let h = code();
        let d = SumProductDecoder::<f64>::default();
        assert!(d.decode(&h, &[0.0; 3], &BitFrame::zeros(h.m())).is_err());
        assert!(d.decode(&h, &vec![0.0; h.n()], &BitFrame::zeros(3)).is_err());
    }
}
