//! Single-frame runs and their aggregation.

use rayon::prelude::*;
use recon_core::blind::{blind_reconcile_in, BlindConfig};
use recon_core::cascade::{cascade_reconcile, CascadeConfig};
use recon_core::ldpc::CodeSet;
use recon_core::rng::derive_seed;
use recon_core::{
    transmit_bsc, BitFrame, ChannelParams, LatencyModel, Protocol, ReconciliationReport, Session,
};
use serde::Serialize;

use crate::config::CodeSource;
use crate::error::{BenchError, BenchResult};

const KEY_STREAM: u64 = 0x6b65_79;
const CHANNEL_STREAM: u64 = 0x6368_616e;
const PROTOCOL_STREAM: u64 = 0x7072_6f74;

/// What reconciles a frame.
#[derive(Debug, Clone, Copy)]
pub enum Engine<'a> {
    Cascade(&'a CascadeConfig),
    Blind(&'a CodeSet, &'a BlindConfig),
}

impl Engine<'_> {
    pub fn protocol(&self) -> Protocol {
        match self {
            Engine::Cascade(_) => Protocol::Cascade,
            Engine::Blind(..) => Protocol::Blind,
        }
    }

    /// Key bits per frame; `frame_size` only applies to Cascade.
    pub fn key_len(&self, frame_size: usize) -> usize {
        match self {
            Engine::Cascade(_) => frame_size,
            Engine::Blind(set, _) => set.key_len(),
        }
    }

    /// Code length for Blind, frame length for Cascade.
    pub fn frame_size(&self, frame_size: usize) -> usize {
        match self {
            Engine::Cascade(_) => frame_size,
            Engine::Blind(set, _) => set.frame_size(),
        }
    }
}

/// Everything a frame depends on besides the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSetup {
    pub seed: u64,
    pub frame_size: usize,
    pub q: f64,
    pub q_hat: f64,
    pub latency: LatencyModel,
}

/// Alice's frame and Bob's noisy copy for frame `index`. The data depends on
/// `(seed, q, index)` only, so every protocol and estimate sees the same
/// frames.
pub fn frame_pair(seed: u64, n: usize, q: f64, index: u64) -> BenchResult<(BitFrame, BitFrame)> {
    let x = BitFrame::random(n, derive_seed(seed, KEY_STREAM), index);
    let y = transmit_bsc(&x, &ChannelParams::new(q, derive_seed(seed, CHANNEL_STREAM))?);
    Ok((x, y))
}

/// Reconciles one frame in a fresh session; the success flag is checked
/// against Alice's frame.
pub fn run_frame(
    engine: Engine<'_>,
    setup: &FrameSetup,
    index: u64,
    attempt: u64,
) -> BenchResult<(ReconciliationReport, BitFrame, BitFrame)> {
    let n = engine.key_len(setup.frame_size);
    let (x, y) = frame_pair(setup.seed, n, setup.q, index)?;
    let (report, out) = reconcile(engine, setup, &x, &y, attempt)?;
    Ok((report, x, out))
}

/// Reconciles a given pair; `attempt` selects fresh protocol randomness for
/// repeated runs on the same frame.
pub fn reconcile(
    engine: Engine<'_>,
    setup: &FrameSetup,
    x: &BitFrame,
    y: &BitFrame,
    attempt: u64,
) -> BenchResult<(ReconciliationReport, BitFrame)> {
    let (_session, a, b) = Session::open(setup.latency);
    let proto_seed = derive_seed(derive_seed(setup.seed, PROTOCOL_STREAM), attempt);
    let (report, out) = match engine {
        Engine::Cascade(cfg) => {
            let cfg = CascadeConfig {
                seed: derive_seed(proto_seed, cfg.seed),
                ..cfg.clone()
            };
            cascade_reconcile(&a, &b, x, y, setup.q_hat, setup.q, &cfg)?
        }
        Engine::Blind(set, cfg) => {
            let cfg = BlindConfig {
                seed: derive_seed(proto_seed, cfg.seed),
                ..cfg.clone()
            };
            blind_reconcile_in::<f32>(&a, &b, x, y, setup.q_hat, setup.q, set, &cfg)?
        }
    };
    if report.success != (&out == x) {
        return Err(BenchError::Oracle(format!(
            "frame {} reported success = {} against the oracle",
            x.frame_index(),
            report.success
        )));
    }
    Ok((report, out))
}

/// Runs frames `0..frames` in parallel; the result is in frame order.
pub fn run_frames(
    engine: Engine<'_>,
    setup: &FrameSetup,
    frames: usize,
) -> BenchResult<Vec<ReconciliationReport>> {
    (0..frames as u64)
        .into_par_iter()
        .map(|i| run_frame(engine, setup, i, 0).map(|(r, _, _)| r))
        .collect()
}

/// Per-frame CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRow {
    pub protocol: Protocol,
    pub frame_size: usize,
    pub frame: u64,
    pub n: usize,
    pub q_true: f64,
    pub q_hat: f64,
    pub success: bool,
    pub aborted: bool,
    pub residual_errors: usize,
    pub leak_ir: u64,
    pub messages: u64,
    pub rounds: u64,
    pub attempts: u32,
    pub f: f64,
    pub f_fer: f64,
    pub sim_time: f64,
}

impl FrameRow {
    pub fn new(frame_size: usize, frame: u64, r: &ReconciliationReport) -> Self {
        FrameRow {
            protocol: r.protocol,
            frame_size,
            frame,
            n: r.n,
            q_true: r.q_true,
            q_hat: r.q_hat,
            success: r.success,
            aborted: r.aborted,
            residual_errors: r.residual_errors,
            leak_ir: r.leak_ir,
            messages: r.messages,
            rounds: r.rounds,
            attempts: r.attempts,
            f: r.f,
            f_fer: r.f_fer,
            sim_time: r.sim_time,
        }
    }
}

/// One grid point, computed from its frame rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub frame_size: usize,
    pub n: usize,
    pub q_true: f64,
    pub q_hat: f64,
    pub frames: usize,
    pub mean_f: f64,
    pub std_f: f64,
    pub fer: f64,
    pub mean_messages: f64,
    pub messages_per_bit: f64,
    pub mean_rounds: f64,
    pub aborted: usize,
}

impl SweepRow {
    pub fn from_frames(rows: &[FrameRow]) -> Self {
        assert!(!rows.is_empty());
        let k = rows.len() as f64;
        let mean = |g: &dyn Fn(&FrameRow) -> f64| rows.iter().map(g).sum::<f64>() / k;
        let mean_f = mean(&|r| r.f);
        let var = if rows.len() > 1 {
            rows.iter().map(|r| (r.f - mean_f).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let mean_messages = mean(&|r| r.messages as f64);
        SweepRow {
            protocol: rows[0].protocol,
            frame_size: rows[0].frame_size,
            n: rows[0].n,
            q_true: rows[0].q_true,
            q_hat: rows[0].q_hat,
            frames: rows.len(),
            mean_f,
            std_f: var.sqrt(),
            fer: mean(&|r| f64::from(u8::from(!r.success))),
            mean_messages,
            messages_per_bit: mean_messages / rows[0].n as f64,
            mean_rounds: mean(&|r| r.rounds as f64),
            aborted: rows.iter().filter(|r| r.aborted).count(),
        }
    }
}

/// Runs a grid point and returns its frame rows and summary.
pub fn sweep_point(
    engine: Engine<'_>,
    setup: &FrameSetup,
    frames: usize,
) -> BenchResult<(Vec<FrameRow>, SweepRow)> {
    let size = engine.frame_size(setup.frame_size);
    let rows: Vec<FrameRow> = run_frames(engine, setup, frames)?
        .iter()
        .enumerate()
        .map(|(i, r)| FrameRow::new(size, i as u64, r))
        .collect();
    let summary = SweepRow::from_frames(&rows);
    Ok((rows, summary))
}

/// Loads the cached set in `src.dir` when it was generated from `src.spec`,
/// otherwise generates and caches it. An unreadable cache is a data error.
pub fn load_code_set(src: &CodeSource) -> BenchResult<CodeSet> {
    let data = |e: recon_core::ReconError| BenchError::Data(format!("{}: {e}", src.dir.display()));
    if src.dir.join(recon_core::ldpc::MANIFEST).exists() {
        if CodeSet::manifest_spec(&src.dir).map_err(data)?.as_ref() == Some(&src.spec) {
            return CodeSet::load(&src.dir).map_err(data);
        }
    }
    let set = src.spec.generate()?;
    set.save(&src.dir, Some(&src.spec)).map_err(data)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(q: f64, q_hat: f64) -> FrameSetup {
        FrameSetup {
            seed: 3,
            frame_size: 4096,
            q,
            q_hat,
            latency: LatencyModel::default(),
        }
    }

    #[test]
    fn frames_do_not_depend_on_the_estimate() {
        let cfg = CascadeConfig::default();
        let (a, xa, _) = run_frame(Engine::Cascade(&cfg), &setup(0.03, 0.03), 2, 0).unwrap();
        let (b, xb, _) = run_frame(Engine::Cascade(&cfg), &setup(0.03, 0.05), 2, 0).unwrap();
        assert_eq!(xa, xb);
        assert_eq!(a.q_true, b.q_true);
        assert_ne!(a.q_hat, b.q_hat);
    }

    #[test]
    fn summary_is_recomputed_from_rows() {
        let cfg = CascadeConfig::default();
        let (rows, s) = sweep_point(Engine::Cascade(&cfg), &setup(0.03, 0.03), 6).unwrap();
        assert_eq!(rows.len(), 6);
        let mean = rows.iter().map(|r| r.f).sum::<f64>() / 6.0;
        assert!((s.mean_f - mean).abs() < 1e-12);
        assert_eq!(s.frames, 6);
        assert!(rows.iter().enumerate().all(|(i, r)| r.frame == i as u64));
    }

    #[test]
    fn parallel_runs_are_deterministic() {
        let cfg = CascadeConfig::default();
        let a = sweep_point(Engine::Cascade(&cfg), &setup(0.05, 0.05), 4).unwrap();
        let b = sweep_point(Engine::Cascade(&cfg), &setup(0.05, 0.05), 4).unwrap();
        assert_eq!(a, b);
    }
}
