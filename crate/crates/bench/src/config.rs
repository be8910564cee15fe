//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use recon_core::blind::BlindConfig;
use recon_core::cascade::CascadeConfig;
use recon_core::ldpc::CodeSetSpec;
use recon_core::postproc::{DriftProcess, EstimatorStudyConfig, TagCost, VerificationParams};
use recon_core::Protocol;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    /// Cascade frame length.
    pub frame_size: usize,
    pub frames: usize,
    pub qbers: Vec<f64>,
    pub protocols: Vec<Protocol>,
    /// One-way latency applied to every simulated session, in ms.
    pub latency_ms: f64,
    pub bandwidth_bps: Option<f64>,
    pub cascade: CascadeConfig,
    pub blind: BlindConfig,
    pub codes: Vec<CodeSource>,
    pub mismatch: MismatchSpec,
    pub latency: LatencySpec,
    pub cluster: ClusterSpec,
    pub estimator: EstimatorStudyConfig,
    pub continuous: ContinuousSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            seed: 1,
            frame_size: 1 << 16,
            frames: 100,
            qbers: vec![0.02, 0.04, 0.06],
            protocols: vec![Protocol::Cascade, Protocol::Blind],
            latency_ms: 0.0,
            bandwidth_bps: None,
            cascade: CascadeConfig::default(),
            blind: BlindConfig::default(),
            codes: vec![CodeSource::default()],
            mismatch: MismatchSpec::default(),
            latency: LatencySpec::default(),
            cluster: ClusterSpec::default(),
            estimator: EstimatorStudyConfig::default(),
            continuous: ContinuousSpec::default(),
        }
    }
}

/// A cached code set and the recipe that regenerates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSource {
    pub dir: PathBuf,
    pub spec: CodeSetSpec,
}

impl Default for CodeSource {
    fn default() -> Self {
        CodeSource {
            dir: PathBuf::from("codes/n65536"),
            spec: CodeSetSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MismatchSpec {
    pub q_true: Vec<f64>,
    pub q_hat: Vec<f64>,
}

impl Default for MismatchSpec {
    fn default() -> Self {
        MismatchSpec {
            q_true: vec![0.02, 0.04, 0.06],
            q_hat: (2..=18).map(|i| f64::from(i) * 0.005).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencySpec {
    pub latencies_ms: Vec<f64>,
    pub q: f64,
    pub frames: usize,
}

impl Default for LatencySpec {
    fn default() -> Self {
        LatencySpec {
            latencies_ms: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            q: 0.02,
            frames: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSpec {
    pub qbers: Vec<f64>,
    pub fers: Vec<f64>,
    /// EC frame lengths to evaluate.
    pub frame_sizes: Vec<usize>,
    /// `(q, f)` points, linearly interpolated and held constant outside.
    pub f_curve: Vec<(f64, f64)>,
    pub k_max: usize,
    pub tag: TagCost,
    pub verification: VerificationParams,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            qbers: (1..=10).map(|i| f64::from(i) * 0.01).collect(),
            fers: vec![0.0, 1e-3, 3e-3, 1e-2, 3e-2, 0.1],
            frame_sizes: vec![1944, 4000, 1 << 16],
            f_curve: vec![(0.02, 1.05), (0.04, 1.056), (0.06, 1.058)],
            k_max: 100,
            tag: TagCost::Amortized,
            verification: VerificationParams::default(),
        }
    }
}

impl ClusterSpec {
    pub fn f_at(&self, q: f64) -> f64 {
        let c = &self.f_curve;
        match c.iter().position(|&(x, _)| x >= q) {
            None => c[c.len() - 1].1,
            Some(0) => c[0].1,
            Some(i) => {
                let ((x0, y0), (x1, y1)) = (c[i - 1], c[i]);
                y0 + (y1 - y0) * (q - x0) / (x1 - x0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuousSpec {
    pub frames: usize,
    /// EC frames per full frame.
    pub full_frame: usize,
    pub protocol: Protocol,
    /// Estimate used for the first frame; later frames use the QBER
    /// measured on the previous one.
    pub q_hat_initial: f64,
    /// One step per EC frame; `chunk_bits` and `chunks` are ignored.
    pub drift: DriftProcess,
}

impl Default for ContinuousSpec {
    fn default() -> Self {
        ContinuousSpec {
            frames: 64,
            full_frame: 8,
            protocol: Protocol::Cascade,
            q_hat_initial: 0.03,
            drift: DriftProcess {
                step_sd: 1.5e-3,
                reversion: 0.05,
                ..DriftProcess::default()
            },
        }
    }
}

fn check(ok: bool, what: &str) -> BenchResult<()> {
    if ok {
        Ok(())
    } else {
        Err(BenchError::Config(what.into()))
    }
}

fn probabilities(qs: &[f64]) -> bool {
    !qs.is_empty() && qs.iter().all(|q| (0.0..0.5).contains(q))
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> BenchResult<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads `path`; relative code directories are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut spec = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut spec.codes {
            if c.dir.is_relative() {
                c.dir = base.join(&c.dir);
            }
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn validate(&self) -> BenchResult<()> {
        check(self.frames >= 1, "frames must be at least 1")?;
        check(self.frame_size >= 2, "frame_size must be at least 2")?;
        check(probabilities(&self.qbers), "qbers must be a non-empty list in [0, 0.5)")?;
        check(!self.protocols.is_empty(), "protocols must not be empty")?;
        check(
            self.latency_ms >= 0.0 && self.latency_ms.is_finite(),
            "latency_ms must be finite and >= 0",
        )?;
        check(
            self.bandwidth_bps.is_none_or(|b| b > 0.0 && b.is_finite()),
            "bandwidth_bps must be positive",
        )?;
        self.cascade
            .validate()
            .and_then(|_| self.blind.validate())
            .map_err(|e| BenchError::Config(e.to_string()))?;
        for c in &self.codes {
            c.spec.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        check(
            probabilities(&self.mismatch.q_true) && !self.mismatch.q_hat.is_empty(),
            "mismatch grids must be non-empty",
        )?;
        check(
            self.mismatch.q_hat.iter().all(|&q| q > 0.0 && q < 0.5),
            "mismatch q_hat must lie in (0, 0.5)",
        )?;
        let l = &self.latency;
        check(
            !l.latencies_ms.is_empty() && l.latencies_ms.iter().all(|&x| x >= 0.0 && x.is_finite()),
            "latencies_ms must be a non-empty list of finite values >= 0",
        )?;
        check(l.frames >= 1 && l.q > 0.0 && l.q < 0.5, "latency q in (0, 0.5), frames >= 1")?;
        let c = &self.cluster;
        check(probabilities(&c.qbers) && c.qbers.iter().all(|&q| q > 0.0), "cluster qbers in (0, 0.5)")?;
        check(
            !c.fers.is_empty() && c.fers.iter().all(|f| (0.0..=1.0).contains(f)),
            "cluster fers in [0, 1]",
        )?;
        check(
            !c.frame_sizes.is_empty() && !c.frame_sizes.contains(&0),
            "cluster frame_sizes must be positive",
        )?;
        check(
            !c.f_curve.is_empty() && c.f_curve.windows(2).all(|w| w[0].0 < w[1].0),
            "f_curve must be non-empty with increasing q",
        )?;
        check(c.k_max >= 1, "k_max must be at least 1")?;
        c.verification
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        self.estimator
            .validate()
            .and_then(|_| self.estimator.drift.validate())
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let k = &self.continuous;
        check(k.frames >= 1 && k.full_frame >= 1, "continuous frames and full_frame >= 1")?;
        check(
            k.q_hat_initial > 0.0 && k.q_hat_initial < 0.5,
            "q_hat_initial must lie in (0, 0.5)",
        )?;
        k.drift
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let spec = ExperimentSpec::default();
        spec.validate().unwrap();
        assert_eq!(ExperimentSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let spec = ExperimentSpec::from_toml(
            "seed = 9\nqbers = [0.03]\n[cascade]\niterations = 6\nblock_growth = \"doubling\"\n",
        )
        .unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.cascade.iterations, 6);
        assert_eq!(spec.blind, BlindConfig::default());
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "frames = 0",
            "qbers = []",
            "unknown = 1",
            "[cascade]\niterations = 1",
            "[latency]\nq = 0.7",
            "[[codes]]\ndir = \"x\"\n[codes.spec]\nf_design = 0.5",
            "seed = \"one\"",
        ] {
            let e = ExperimentSpec::from_toml(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn f_curve_interpolates() {
        let c = ClusterSpec::default();
        assert_eq!(c.f_at(0.01), 1.05);
        assert!((c.f_at(0.03) - 1.053).abs() < 1e-12);
        assert_eq!(c.f_at(0.09), 1.058);
    }
}
