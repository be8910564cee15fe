//! The experiments behind each subcommand. Each returns its CSV rows; the
//! caller decides where they go.

use std::time::Instant;

use recon_core::ldpc::CodeSet;
use recon_core::metrics::{binary_entropy, qber};
use recon_core::postproc::{
    optimize_cluster, qber_estimator_study, verify_cluster, ClusterSearch, DriftProcess,
    EstimatorRow, PolyHash,
};
use recon_core::rng::derive_seed;
use recon_core::{LatencyModel, Protocol, Session};
use serde::Serialize;

use crate::config::ExperimentSpec;
use crate::error::{BenchError, BenchResult};
use crate::runner::{
    frame_pair, load_code_set, reconcile, sweep_point, Engine, FrameRow, FrameSetup, SweepRow,
};

pub fn latency_model(spec: &ExperimentSpec, ms: f64) -> BenchResult<LatencyModel> {
    LatencyModel::new(ms * 1e-3, spec.bandwidth_bps).map_err(|e| BenchError::Config(e.to_string()))
}

/// Code sets named by the spec, loaded or generated.
pub fn code_sets(spec: &ExperimentSpec) -> BenchResult<Vec<CodeSet>> {
    spec.codes.iter().map(load_code_set).collect()
}

fn engines<'a>(
    spec: &'a ExperimentSpec,
    sets: &'a [CodeSet],
) -> Vec<Engine<'a>> {
    let mut out = Vec::new();
    for p in &spec.protocols {
        match p {
            Protocol::Cascade => out.push(Engine::Cascade(&spec.cascade)),
            Protocol::Blind => out.extend(sets.iter().map(|s| Engine::Blind(s, &spec.blind))),
        }
    }
    out
}

fn needs_codes(spec: &ExperimentSpec, protocols: &[Protocol]) -> bool {
    protocols.contains(&Protocol::Blind) && !spec.codes.is_empty()
}

/// Matched-estimate efficiency and message counts over the QBER grid.
pub fn simulate(spec: &ExperimentSpec) -> BenchResult<(Vec<FrameRow>, Vec<SweepRow>)> {
    let sets = if needs_codes(spec, &spec.protocols) {
        code_sets(spec)?
    } else {
        Vec::new()
    };
    let latency = latency_model(spec, spec.latency_ms)?;
    let mut frames = Vec::new();
    let mut summary = Vec::new();
    for engine in engines(spec, &sets) {
        for &q in &spec.qbers {
            let setup = FrameSetup {
                seed: spec.seed,
                frame_size: spec.frame_size,
                q,
                q_hat: q,
                latency,
            };
            let (rows, s) = sweep_point(engine, &setup, spec.frames)?;
            frames.extend(rows);
            summary.push(s);
        }
    }
    Ok((frames, summary))
}

/// Every `(q_true, q_hat)` pair of the mismatch grid.
pub fn sweep_qber_mismatch(spec: &ExperimentSpec) -> BenchResult<(Vec<FrameRow>, Vec<SweepRow>)> {
    let sets = if needs_codes(spec, &spec.protocols) {
        code_sets(spec)?
    } else {
        Vec::new()
    };
    let latency = latency_model(spec, spec.latency_ms)?;
    let mut frames = Vec::new();
    let mut summary = Vec::new();
    for engine in engines(spec, &sets) {
        for &q in &spec.mismatch.q_true {
            for &q_hat in &spec.mismatch.q_hat {
                let setup = FrameSetup {
                    seed: spec.seed,
                    frame_size: spec.frame_size,
                    q,
                    q_hat,
                    latency,
                };
                let (rows, s) = sweep_point(engine, &setup, spec.frames)?;
                frames.extend(rows);
                summary.push(s);
            }
        }
    }
    Ok((frames, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRow {
    pub n: usize,
    pub q: f64,
    pub fer: f64,
    pub f: f64,
    pub repeats: bool,
    pub k_star: usize,
    pub f_eff: f64,
}

/// Optimal cluster size over the `(n, q, FER)` grid, with and without a
/// repeat request.
pub fn sweep_cluster(spec: &ExperimentSpec) -> BenchResult<Vec<ClusterRow>> {
    let c = &spec.cluster;
    let mut rows = Vec::new();
    for &n in &c.frame_sizes {
        for &q in &c.qbers {
            let f = c.f_at(q);
            for &fer in &c.fers {
                for repeats in [false, true] {
                    let search = ClusterSearch {
                        k_max: c.k_max,
                        repeats_allowed: repeats,
                        tag: c.tag,
                    };
                    let (k_star, f_eff) = optimize_cluster(f, fer, n, q, &c.verification, &search)?;
                    rows.push(ClusterRow {
                        n,
                        q,
                        fer,
                        f,
                        repeats,
                        k_star,
                        f_eff,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn estimate_blocksize(spec: &ExperimentSpec) -> BenchResult<Vec<EstimatorRow>> {
    let cfg = &spec.estimator;
    let drift = DriftProcess {
        seed: derive_seed(spec.seed, cfg.drift.seed),
        ..cfg.drift.clone()
    };
    let trajectory = drift.generate()?;
    Ok(qber_estimator_study(&trajectory, cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyRow {
    pub latency_ms: f64,
    pub q: f64,
    pub n: usize,
    pub frames: usize,
    pub mean_rounds: f64,
    pub mean_messages: f64,
    pub mean_bytes: f64,
    /// Measured wall time per frame on this host.
    pub compute_s: f64,
    pub throughput_bps: f64,
    /// Throughput with the compute term dropped.
    pub latency_only_bps: f64,
}

/// Serial Cascade throughput: `n / (compute + rounds * latency + bits / bandwidth)`.
///
/// Frames are run once; the latency grid only changes the model.
pub fn bench_latency(spec: &ExperimentSpec) -> BenchResult<Vec<LatencyRow>> {
    let l = &spec.latency;
    let n = spec.frame_size;
    let setup = FrameSetup {
        seed: spec.seed,
        frame_size: n,
        q: l.q,
        q_hat: l.q,
        latency: LatencyModel::default(),
    };
    let engine = Engine::Cascade(&spec.cascade);
    let mut rounds = 0.0;
    let mut messages = 0.0;
    let mut bytes = 0.0;
    let mut compute = 0.0;
    for i in 0..l.frames as u64 {
        let (x, y) = frame_pair(setup.seed, n, setup.q, i)?;
        let started = Instant::now();
        let (r, _) = reconcile(engine, &setup, &x, &y, 0)?;
        compute += started.elapsed().as_secs_f64();
        rounds += r.rounds as f64;
        messages += r.messages as f64;
        bytes += r.bytes_on_wire as f64;
    }
    let k = l.frames as f64;
    let (rounds, messages, bytes, compute) = (rounds / k, messages / k, bytes / k, compute / k);
    let transfer = spec.bandwidth_bps.map_or(0.0, |b| bytes * 8.0 / b);
    Ok(l.latencies_ms
        .iter()
        .map(|&ms| {
            let wait = rounds * ms * 1e-3 + transfer;
            LatencyRow {
                latency_ms: ms,
                q: l.q,
                n,
                frames: l.frames,
                mean_rounds: rounds,
                mean_messages: messages,
                mean_bytes: bytes,
                compute_s: compute,
                throughput_bps: n as f64 / (compute + wait),
                latency_only_bps: if wait > 0.0 { n as f64 / wait } else { f64::INFINITY },
            }
        })
        .collect())
}

/// Relative throughput loss going from latency `a` to latency `b`.
pub fn throughput_decline(rows: &[LatencyRow], a_ms: f64, b_ms: f64) -> Option<f64> {
    let at = |ms: f64| rows.iter().find(|r| r.latency_ms == ms).map(|r| r.throughput_bps);
    Some(1.0 - at(b_ms)? / at(a_ms)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousRow {
    pub frame: u64,
    pub full_frame: usize,
    pub protocol: Protocol,
    pub q_channel: f64,
    pub q_measured: f64,
    pub q_hat: f64,
    /// Reconciliation runs spent on the frame; more than one after a failed
    /// verification.
    pub runs: u32,
    pub leak_ir: u64,
    pub leak_ev: u64,
    pub messages: u64,
    pub f: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullFrameRow {
    pub full_frame: usize,
    pub frames: usize,
    pub q_mean: f64,
    pub leak_ir: u64,
    pub leak_ev: u64,
    pub f: f64,
}

/// Most reconciliation runs spent on one EC frame before it is dropped.
const MAX_RUNS: u32 = 4;

/// Frames with a drifting QBER, each estimated by the QBER measured on its
/// predecessor, reconciled, and checked with a tag; a failed check reruns the
/// frame.
pub fn continuous(spec: &ExperimentSpec) -> BenchResult<(Vec<ContinuousRow>, Vec<FullFrameRow>)> {
    let c = &spec.continuous;
    let sets = if c.protocol == Protocol::Blind {
        code_sets(spec)?
    } else {
        Vec::new()
    };
    let engine = match c.protocol {
        Protocol::Cascade => Engine::Cascade(&spec.cascade),
        Protocol::Blind => Engine::Blind(
            sets.first()
                .ok_or_else(|| BenchError::Config("blind needs a code set".into()))?,
            &spec.blind,
        ),
    };
    let n = engine.key_len(spec.frame_size);
    let path = DriftProcess {
        chunk_bits: n,
        chunks: c.frames,
        seed: derive_seed(spec.seed, c.drift.seed),
        ..c.drift.clone()
    }
    .path()?;
    let latency = latency_model(spec, spec.latency_ms)?;
    let params = spec.cluster.verification;
    let mut rows = Vec::with_capacity(c.frames);
    let mut q_hat = c.q_hat_initial;
    for (i, &q) in path.iter().enumerate() {
        let index = i as u64;
        let setup = FrameSetup {
            seed: spec.seed,
            frame_size: spec.frame_size,
            q,
            q_hat,
            latency,
        };
        let (x, y) = frame_pair(spec.seed, n, q, index)?;
        let (mut leak_ir, mut leak_ev, mut messages, mut runs) = (0, 0, 0, 0);
        let mut out = y.clone();
        let mut success = false;
        while runs < MAX_RUNS && !success {
            let (report, bob) = reconcile(engine, &setup, &x, &y, u64::from(runs))?;
            runs += 1;
            leak_ir += report.leak_ir;
            messages += report.messages;
            let (_s, a, b) = Session::open(latency);
            let hash = PolyHash::seeded(params.t, spec.seed, index << 8 | u64::from(runs))?;
            let v = verify_cluster(
                &a,
                &b,
                std::slice::from_ref(&x),
                std::slice::from_ref(&bob),
                &params,
                &hash,
            )?;
            leak_ev += v.leak_ev;
            success = v.pass && report.success;
            out = bob;
        }
        let q_measured = qber(&out, &y)?;
        let h = binary_entropy(q)?;
        rows.push(ContinuousRow {
            frame: index,
            full_frame: i / c.full_frame,
            protocol: c.protocol,
            q_channel: q,
            q_measured,
            q_hat,
            runs,
            leak_ir,
            leak_ev,
            messages,
            f: leak_ir as f64 / (n as f64 * h),
            success,
        });
        if q_measured > 0.0 {
            q_hat = q_measured;
        }
    }
    let full = rows
        .chunks(c.full_frame)
        .enumerate()
        .map(|(j, chunk)| {
            let leak_ir: u64 = chunk.iter().map(|r| r.leak_ir).sum();
            let ideal: f64 = chunk
                .iter()
                .map(|r| n as f64 * binary_entropy(r.q_channel).unwrap_or(f64::NAN))
                .sum();
            FullFrameRow {
                full_frame: j,
                frames: chunk.len(),
                q_mean: chunk.iter().map(|r| r.q_channel).sum::<f64>() / chunk.len() as f64,
                leak_ir,
                leak_ev: chunk.iter().map(|r| r.leak_ev).sum(),
                f: leak_ir as f64 / ideal,
            }
        })
        .collect();
    Ok((rows, full))
}

/// Builds (or loads) every configured code set.
pub fn gen_code(spec: &ExperimentSpec) -> BenchResult<Vec<CodeSet>> {
    code_sets(spec)
}
