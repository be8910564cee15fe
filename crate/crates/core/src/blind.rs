//! Blind rate-adaptive reconciliation: syndrome coding with a fixed number
//! `d` of modulated positions that start punctured and are turned into
//! shortened bits on request until Bob's decoder succeeds.

use std::time::Instant;

use num_rational::{BigRational, Ratio};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bits::BitFrame;
use crate::error::{ReconError, Result};
use crate::ldpc::{bsc_llr, BlindCode, CodeSet, SumProductDecoder};
use crate::metrics::binary_entropy;
use crate::report::{Protocol, ReconciliationReport};
use crate::rng::{self, Purpose};
use crate::scalar::Real;
use crate::session::{Endpoint, MessageKind};

/// `(N - m - s) / (N - p - s)`, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AdaptedRate(Ratio<u64>);

impl AdaptedRate {
    pub fn value(self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `ceil(n (1 - R))` for a key of `n` bits.
    pub fn syndrome_leak(self, n: usize) -> u64 {
        let n = n as u64;
        let rest = Ratio::from_integer(n) * (Ratio::from_integer(1) - self.0);
        rest.ceil().to_integer()
    }
}

pub fn adapted_rate(frame_size: usize, m: usize, p: usize, s: usize) -> Result<AdaptedRate> {
    let den = frame_size as i128 - p as i128 - s as i128;
    let num = frame_size as i128 - m as i128 - s as i128;
    if !(0 < num && num < den) {
        return Err(ReconError::InvalidParameter(format!(
            "adapted rate {num}/{den} outside (0, 1)"
        )));
    }
    Ok(AdaptedRate(Ratio::new(num as u64, den as u64)))
}

/// Bits requested per reveal round: `ceil(n (0.028 - 0.02 R) alpha)`.
///
/// Evaluated exactly: `rate` and `alpha` are taken as the binary fractions
/// they hold and the constants as decimal fractions.
pub fn reveal_count(n: usize, rate: f64, alpha: f64) -> Result<usize> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(ReconError::Domain(rate));
    }
    let exact = |x: f64| BigRational::from_float(x).expect("finite");
    reveal_count_exact(n, &exact(rate), alpha_ratio(alpha)?)
}

fn alpha_ratio(alpha: f64) -> Result<BigRational> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ReconError::InvalidParameter(format!(
            "step size must be positive, got {alpha}"
        )));
    }
    Ok(BigRational::from_float(alpha).expect("finite"))
}

fn reveal_count_exact(n: usize, rate: &BigRational, alpha: BigRational) -> Result<usize> {
    let r = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let v = BigRational::from_integer(BigInt::from(n)) * (r(28, 1000) - r(2, 100) * rate) * alpha;
    v.ceil()
        .to_integer()
        .to_usize()
        .ok_or_else(|| ReconError::InvalidParameter("reveal count out of range".into()))
}

/// [`reveal_count`] with the rate of `code`'s matrix taken as `(N - m) / N`.
fn base_reveal_count(code: &BlindCode, n: usize, alpha: f64) -> Result<usize> {
    let h = &code.matrix;
    let rate = BigRational::new(
        BigInt::from(h.n() - h.m()),
        BigInt::from(h.n()),
    );
    reveal_count_exact(n, &rate, alpha_ratio(alpha)?)
}

/// Which rate enters [`reveal_count`] after the first round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRate {
    /// Base code rate `1 - m/N`; the step is constant within a session.
    Base,
    /// Current adapted rate.
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlindConfig {
    pub alpha: f64,
    /// Give up once the booked leakage reaches `f_max n H(q_design)` of the
    /// selected code.
    pub f_max: f64,
    pub max_iterations: usize,
    pub step_rate: StepRate,
    /// `false` degrades to one-shot syndrome decoding.
    pub reveal_rounds: bool,
    /// Seeds the values Alice places in punctured positions.
    pub seed: u64,
}

impl Default for BlindConfig {
    fn default() -> Self {
        BlindConfig {
            alpha: 1.0,
            f_max: 3.0,
            max_iterations: crate::ldpc::DEFAULT_MAX_ITERATIONS,
            step_rate: StepRate::Base,
            reveal_rounds: true,
            seed: 0,
        }
    }
}

impl BlindConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.f_max > 0.0 && self.max_iterations > 0) {
            return Err(ReconError::InvalidParameter(format!(
                "unusable blind config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Split of the `d` modulated positions into punctured and shortened ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateAdaptationPlan {
    punctured: Vec<u32>,
    shortened: Vec<u32>,
}

impl RateAdaptationPlan {
    pub fn all_punctured(positions: &[u32]) -> Self {
        RateAdaptationPlan {
            punctured: positions.to_vec(),
            shortened: Vec::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.punctured.len() + self.shortened.len()
    }

    pub fn p(&self) -> usize {
        self.punctured.len()
    }

    pub fn s(&self) -> usize {
        self.shortened.len()
    }

    pub fn punctured(&self) -> &[u32] {
        &self.punctured
    }

    pub fn shortened(&self) -> &[u32] {
        &self.shortened
    }

    fn shorten(&mut self, cols: &[u32]) {
        self.punctured.retain(|c| !cols.contains(c));
        self.shortened.extend_from_slice(cols);
    }
}

/// Positions Bob asks Alice to disclose in one round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RevealSelection {
    /// Punctured columns that become shortened.
    pub shorten: Vec<u32>,
    /// Key columns disclosed once nothing is left punctured.
    pub key: Vec<u32>,
}

impl RevealSelection {
    pub fn len(&self) -> usize {
        self.shorten.len() + self.key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn columns(&self) -> impl Iterator<Item = u32> + '_ {
        self.shorten.iter().chain(&self.key).copied()
    }
}

fn least_confident<T: Real>(candidates: &[u32], posteriors: &[T], k: usize) -> Vec<u32> {
    let mut ranked: Vec<u32> = candidates.to_vec();
    ranked.sort_by(|&a, &b| {
        posteriors[a as usize]
            .abs()
            .partial_cmp(&posteriors[b as usize].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranked.truncate(k);
    ranked
}

/// Picks `v` columns to disclose: punctured columns with the smallest
/// posterior magnitude first, then undisclosed key columns ranked the same
/// way.
pub fn convert_punctured_to_shortened<T: Real>(
    plan: &RateAdaptationPlan,
    posteriors: &[T],
    v: usize,
    undisclosed_key: &[u32],
) -> Result<RevealSelection> {
    let shorten = least_confident(&plan.punctured, posteriors, v);
    let key = least_confident(undisclosed_key, posteriors, v - shorten.len());
    let sel = RevealSelection { shorten, key };
    if sel.is_empty() {
        return Err(ReconError::NothingToReveal);
    }
    Ok(sel)
}

fn index_width(frame_size: usize) -> u32 {
    (usize::BITS - (frame_size.max(2) - 1).leading_zeros()).max(1)
}

fn encode_columns(cols: impl Iterator<Item = u32>, width: u32) -> BitFrame {
    let mut f = BitFrame::zeros(0);
    for c in cols {
        f.push_uint(u64::from(c), width);
    }
    f
}

fn decode_columns(payload: &BitFrame, width: u32, frame_size: usize) -> Result<Vec<u32>> {
    if payload.len() % width as usize != 0 {
        return Err(ReconError::Wire("reveal request is not a whole number of indices".into()));
    }
    (0..payload.len() / width as usize)
        .map(|i| {
            let c = payload.read_uint(i * width as usize, width);
            if c as usize >= frame_size {
                return Err(ReconError::Wire(format!("column {c} out of range")));
            }
            Ok(c as u32)
        })
        .collect()
}

/// Columns carrying key bits, ascending.
pub fn key_columns(code: &BlindCode) -> Vec<u32> {
    let mut reserved = vec![false; code.matrix.n()];
    for &c in &code.modulated {
        reserved[c as usize] = true;
    }
    (0..code.matrix.n() as u32)
        .filter(|&c| !reserved[c as usize])
        .collect()
}

/// Live state of one Blind session as seen by Bob.
#[derive(Debug, Clone)]
pub struct BlindSessionState {
    pub plan: RateAdaptationPlan,
    pub alpha: f64,
    /// Key columns disclosed in clear.
    pub revealed_key: Vec<u32>,
    pub attempts: u32,
}

impl BlindSessionState {
    pub fn k_revealed(&self) -> usize {
        self.revealed_key.len()
    }

    pub fn adapted_rate(&self, code: &BlindCode) -> Result<AdaptedRate> {
        adapted_rate(code.matrix.n(), code.matrix.m(), self.plan.p(), self.plan.s())
    }

    /// `ceil(n (1 - R_adapted)) + k_revealed`.
    pub fn leak_ir(&self, code: &BlindCode) -> Result<u64> {
        let n = code.matrix.n() - self.plan.d();
        Ok(self.adapted_rate(code)?.syndrome_leak(n) + self.k_revealed() as u64)
    }
}

/// [`blind_reconcile_in`] in double precision.
#[allow(clippy::too_many_arguments)]
pub fn blind_reconcile(
    alice_ep: &Endpoint,
    bob_ep: &Endpoint,
    x: &BitFrame,
    y: &BitFrame,
    q_hat: f64,
    q_true: f64,
    code_set: &CodeSet,
    cfg: &BlindConfig,
) -> Result<(ReconciliationReport, BitFrame)> {
    blind_reconcile_in::<f64>(alice_ep, bob_ep, x, y, q_hat, q_true, code_set, cfg)
}

/// Runs one Blind session; returns the report and Bob's output frame.
///
/// The base code is chosen from `q_hat` through the code set's selection
/// table. The decoder's channel LLRs use the selected code's design QBER, so
/// the run only depends on `q_hat` through the code choice.
#[allow(clippy::too_many_arguments)]
pub fn blind_reconcile_in<T: Real>(
    alice_ep: &Endpoint,
    bob_ep: &Endpoint,
    x: &BitFrame,
    y: &BitFrame,
    q_hat: f64,
    q_true: f64,
    code_set: &CodeSet,
    cfg: &BlindConfig,
) -> Result<(ReconciliationReport, BitFrame)> {
    cfg.validate()?;
    crate::bits::check_same_len(x, y)?;
    if !(q_hat > 0.0 && q_hat < 0.5) {
        return Err(ReconError::Domain(q_hat));
    }
    let code = code_set.select(q_hat);
    let h = &*code.matrix;
    let (big_n, d) = (h.n(), code.modulated.len());
    let n = big_n - d;
    if x.len() != n {
        return Err(ReconError::LengthMismatch {
            left: x.len(),
            right: n,
        });
    }
    let started = Instant::now();
    let clock0 = alice_ep.session().clock();
    let ledger0 = alice_ep.session().ledger();
    let keys = key_columns(code);
    let width = index_width(big_n);

    // Alice: extended frame with random values in the punctured positions.
    let mut x_ext = BitFrame::zeros(big_n);
    for (i, &c) in keys.iter().enumerate() {
        x_ext.set(c as usize, x.get(i));
    }
    let mut pad = rng::stream(cfg.seed, Purpose::Puncture, x.frame_index());
    for &c in &code.modulated {
        x_ext.set(c as usize, pad.gen());
    }
    alice_ep.send(MessageKind::Syndrome, h.syndrome(&x_ext)?)?;

    // Bob.
    let syndrome = bob_ep.expect(MessageKind::Syndrome)?.payload;
    let decoder = SumProductDecoder::<T> {
        max_iterations: cfg.max_iterations,
        ..SumProductDecoder::default()
    };
    let sat = decoder.saturation;
    let channel = bsc_llr(T::of(code.design_qber));
    let mut llr = vec![T::zero(); big_n];
    for (i, &c) in keys.iter().enumerate() {
        llr[c as usize] = if y.get(i) { -channel } else { channel };
    }
    let mut state = BlindSessionState {
        plan: RateAdaptationPlan::all_punctured(&code.modulated),
        alpha: cfg.alpha,
        revealed_key: Vec::new(),
        attempts: 0,
    };
    let mut disclosed = vec![false; big_n];
    let budget = cfg.f_max * n as f64 * binary_entropy(code.design_qber)?;
    let base_v = base_reveal_count(code, n, cfg.alpha)?;

    let (output, aborted) = loop {
        state.attempts += 1;
        let out = decoder.decode(h, &llr, &syndrome)?;
        if out.converged {
            break (out.hard_decision.gather(&keys), false);
        }
        if !cfg.reveal_rounds || state.leak_ir(code)? as f64 >= budget {
            break (y.clone(), true);
        }
        let v = match cfg.step_rate {
            StepRate::Base => base_v,
            StepRate::Adapted => {
                let r = state.adapted_rate(code)?.value();
                let r = BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
                reveal_count_exact(n, &r, alpha_ratio(cfg.alpha)?)?
            }
        };
        let undisclosed: Vec<u32> = if v > state.plan.p() {
            keys.iter().copied().filter(|&c| !disclosed[c as usize]).collect()
        } else {
            Vec::new()
        };
        let sel = match convert_punctured_to_shortened(&state.plan, &out.posteriors, v, &undisclosed)
        {
            Ok(sel) => sel,
            Err(ReconError::NothingToReveal) => break (y.clone(), true),
            Err(e) => return Err(e),
        };
        bob_ep.send(MessageKind::RevealRequest, encode_columns(sel.columns(), width))?;

        let request = alice_ep.expect(MessageKind::RevealRequest)?.payload;
        let cols = decode_columns(&request, width, big_n)?;
        let values = BitFrame::from_bools(cols.iter().map(|&c| x_ext.get(c as usize)));
        alice_ep.send(MessageKind::RevealValues, values)?;

        let values = bob_ep.expect(MessageKind::RevealValues)?.payload;
        if values.len() != sel.len() {
            return Err(ReconError::Wire("reveal answer length differs from request".into()));
        }
        for (k, c) in sel.columns().enumerate() {
            llr[c as usize] = if values.get(k) { -sat } else { sat };
            disclosed[c as usize] = true;
        }
        state.plan.shorten(&sel.shorten);
        state.revealed_key.extend_from_slice(&sel.key);
    };
    debug_assert_eq!(state.plan.d(), d);

    let leak_ir = state.leak_ir(code)?;
    let ledger = alice_ep.session().ledger().since(ledger0);
    let residual = x.hamming_distance(&output)?;
    let mut report = ReconciliationReport::new(
        Protocol::Blind,
        n,
        q_true,
        q_hat,
        residual,
        aborted,
        leak_ir,
        ledger,
        state.attempts,
    );
    report.sim_time = alice_ep.session().clock() - clock0;
    report.wall_time = started.elapsed().as_secs_f64();
    Ok((report, output.with_index(x.frame_index())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit_bsc, ChannelParams};
    use crate::ldpc::CodeSetSpec;
    use crate::session::{replay_leak, LatencyModel, Session};
    use num_rational::Ratio;

    #[test]
    fn adapted_rate_examples() {
        let n = 65536;
        let m = 16384;
        assert_eq!(adapted_rate(n, m, 0, 0).unwrap().value(), Ratio::new(3, 4));
        assert_eq!(
            adapted_rate(n, m, 4000, 0).unwrap().value(),
            Ratio::new(49152, 61536)
        );
        assert_eq!(
            adapted_rate(n, m, 0, 4000).unwrap().value(),
            Ratio::new(45152, 61536)
        );
        assert!(adapted_rate(10, 4, 6, 4).is_err());
        assert!(adapted_rate(10, 10, 0, 0).is_err());
    }

    #[test]
    fn reveal_count_examples() {
        assert_eq!(reveal_count(61536, 0.8, 1.0).unwrap(), 739);
        assert!(reveal_count(100, 1.4, 1.0).is_err());
        assert!(reveal_count(100, 0.5, 0.0).is_err());
        assert_eq!(reveal_count(1000, 0.5, 2.0).unwrap(), 36);
    }

    #[test]
    fn syndrome_leak_matches_counting() {
        // n (1 - R) = m - d + s when N - p - s = n.
        let r = adapted_rate(1000, 300, 60, 40).unwrap();
        assert_eq!(r.syndrome_leak(900), 300 - 100 + 40);
    }

    #[test]
    fn shortening_bookkeeping() {
        let mut plan = RateAdaptationPlan::all_punctured(&[5, 6, 7, 8]);
        let posteriors = [0.0, 0.0, 0.0, 0.0, 0.0, 3.0, -0.5, 2.0, -1.0, 0.1];
        let sel = convert_punctured_to_shortened(&plan, &posteriors, 2, &[]).unwrap();
        assert_eq!(sel.shorten, vec![6, 8]);
        plan.shorten(&sel.shorten);
        assert_eq!((plan.p(), plan.s(), plan.d()), (2, 2, 4));

        let empty = RateAdaptationPlan::all_punctured(&[]);
        let sel = convert_punctured_to_shortened(&empty, &posteriors, 3, &[0, 9, 2]).unwrap();
        assert_eq!(sel.key, vec![0, 2, 9]);
        assert!(convert_punctured_to_shortened(&empty, &posteriors, 3, &[]).is_err());
    }

    fn small_set() -> CodeSet {
        CodeSetSpec {
            frame_size: 4000,
            count: 4,
            q_min: 0.02,
            q_max: 0.08,
            ..CodeSetSpec::default()
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn noiseless_run_is_one_message() {
        let set = small_set();
        let x = BitFrame::random(set.key_len(), 1, 0);
        let (s, a, b) = Session::open(LatencyModel::default());
        let (report, out) =
            blind_reconcile(&a, &b, &x, &x, 0.02, 0.0, &set, &BlindConfig::default()).unwrap();
        assert!(report.success);
        assert_eq!(out, x);
        assert_eq!((report.messages, report.attempts), (1, 1));
        assert_eq!(s.ledger().leaked_bits, set.select(0.02).matrix.m() as u64);
    }

    #[test]
    fn noisy_runs_keep_books_straight() {
        let set = small_set();
        for frame in 0..6 {
            let x = BitFrame::random(set.key_len(), 2, frame);
            let y = transmit_bsc(&x, &ChannelParams::new(0.04, 3).unwrap());
            let (s, a, b) = Session::open(LatencyModel::default());
            let (report, out) =
                blind_reconcile(&a, &b, &x, &y, 0.04, 0.04, &set, &BlindConfig::default()).unwrap();
            assert_eq!(report.success, out == x);
            assert!(!report.aborted);
            let d = set.modulated_count() as u64;
            assert_eq!(replay_leak(&s.transcript()), report.leak_ir + d);
            assert_eq!(report.messages % 2, 1);
            assert_eq!(u64::from(report.attempts), report.messages.div_ceil(2));
        }
    }

    #[test]
    fn one_shot_mode_aborts_instead_of_revealing() {
        let set = small_set();
        let x = BitFrame::random(set.key_len(), 4, 0);
        let y = transmit_bsc(&x, &ChannelParams::new(0.15, 5).unwrap());
        let (_s, a, b) = Session::open(LatencyModel::default());
        let cfg = BlindConfig {
            reveal_rounds: false,
            ..BlindConfig::default()
        };
        let (report, out) = blind_reconcile(&a, &b, &x, &y, 0.02, 0.15, &set, &cfg).unwrap();
        assert!(report.aborted && !report.success);
        assert_eq!(out, y);
        assert_eq!(report.messages, 1);
    }

    #[test]
    fn rejects_wrong_key_length() {
        let set = small_set();
        let x = BitFrame::zeros(10);
        let (_s, a, b) = Session::open(LatencyModel::default());
        assert!(blind_reconcile(&a, &b, &x, &x, 0.02, 0.02, &set, &BlindConfig::default()).is_err());
    }
}
