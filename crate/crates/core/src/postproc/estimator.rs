use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::rng::{self, Purpose};

/// Mean-reverting random walk of the QBER, clamped to `[q_min, q_max]`, one
/// step per chunk of `chunk_bits` bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftProcess {
    pub q_start: f64,
    pub q_mean: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Standard deviation of one step.
    pub step_sd: f64,
    /// Fraction of the distance to `q_mean` recovered per step.
    pub reversion: f64,
    pub chunk_bits: usize,
    pub chunks: usize,
    pub seed: u64,
}

impl Default for DriftProcess {
    fn default() -> Self {
        DriftProcess {
            q_start: 0.03,
            q_mean: 0.03,
            q_min: 0.01,
            q_max: 0.08,
            step_sd: 1.9e-4,
            reversion: 1e-4,
            chunk_bits: 1000,
            chunks: 100_000,
            seed: 0,
        }
    }
}

impl DriftProcess {
    /// A process that never moves.
    pub fn constant(q: f64, chunk_bits: usize, chunks: usize, seed: u64) -> Self {
        DriftProcess {
            q_start: q,
            q_mean: q,
            q_min: q,
            q_max: q,
            step_sd: 0.0,
            reversion: 0.0,
            chunk_bits,
            chunks,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.q_start, self.q_mean, self.q_min, self.q_max];
        if let Some(&p) = probs.iter().find(|p| !(0.0..0.5).contains(*p)) {
            return Err(ReconError::Domain(p));
        }
        if self.q_min > self.q_max || !(self.q_min..=self.q_max).contains(&self.q_start) {
            return Err(ReconError::InvalidParameter(
                "q_start must lie within [q_min, q_max]".into(),
            ));
        }
        if !(self.step_sd >= 0.0 && self.step_sd.is_finite()) {
            return Err(ReconError::InvalidParameter("step_sd must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.reversion) {
            return Err(ReconError::InvalidParameter("reversion must lie in [0, 1]".into()));
        }
        if self.chunk_bits == 0 || self.chunks == 0 {
            return Err(ReconError::InvalidParameter("empty trajectory".into()));
        }
        Ok(())
    }

    /// The QBER of each chunk, without sampling errors.
    pub fn path(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = rng::stream(self.seed, Purpose::Drift, 0);
        let step = Normal::new(0.0, self.step_sd).map_err(|e| ReconError::InvalidParameter(e.to_string()))?;
        let mut q = self.q_start;
        let mut out = Vec::with_capacity(self.chunks);
        for _ in 0..self.chunks {
            out.push(q);
            q += self.reversion * (self.q_mean - q) + step.sample(&mut rng);
            q = q.clamp(self.q_min, self.q_max);
        }
        Ok(out)
    }

    /// Path plus a binomial error count for every chunk.
    pub fn generate(&self) -> Result<ErrorTrajectory> {
        let q = self.path()?;
        let mut rng = rng::stream(self.seed, Purpose::Drift, 1);
        let errors = q
            .iter()
            .map(|&p| {
                Binomial::new(self.chunk_bits as u64, p)
                    .map(|b| b.sample(&mut rng) as u32)
                    .map_err(|_| ReconError::Domain(p))
            })
            .collect::<Result<_>>()?;
        Ok(ErrorTrajectory {
            chunk_bits: self.chunk_bits,
            q,
            errors,
        })
    }
}

/// Error stream summarised per chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrajectory {
    pub chunk_bits: usize,
    /// Channel QBER of each chunk.
    pub q: Vec<f64>,
    /// Errors observed in each chunk.
    pub errors: Vec<u32>,
}

impl ErrorTrajectory {
    pub fn total_bits(&self) -> usize {
        self.chunk_bits * self.errors.len()
    }

    /// Observed error rate of consecutive blocks of `block_size` bits; a
    /// trailing partial block is dropped.
    pub fn block_rates(&self, block_size: usize) -> Result<Vec<f64>> {
        if block_size == 0 || block_size % self.chunk_bits != 0 {
            return Err(ReconError::InvalidParameter(format!(
                "block size {block_size} is not a positive multiple of the {}-bit chunk",
                self.chunk_bits
            )));
        }
        let per = block_size / self.chunk_bits;
        Ok(self
            .errors
            .chunks_exact(per)
            .map(|c| c.iter().map(|&e| f64::from(e)).sum::<f64>() / block_size as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorStudyConfig {
    pub block_sizes: Vec<usize>,
    /// Estimate lags; 1 is serial processing.
    pub parallelism: Vec<usize>,
    pub drift: DriftProcess,
}

impl Default for EstimatorStudyConfig {
    fn default() -> Self {
        EstimatorStudyConfig {
            block_sizes: vec![
                1_000, 2_000, 5_000, 10_000, 20_000, 50_000, 100_000, 200_000, 500_000, 1_000_000,
            ],
            parallelism: vec![1, 2, 4],
            drift: DriftProcess::default(),
        }
    }
}

impl EstimatorStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(ReconError::InvalidParameter("block sizes must be positive".into()));
        }
        if self.parallelism.is_empty() || self.parallelism.iter().any(|p| ![1, 2, 4].contains(p)) {
            return Err(ReconError::InvalidParameter("parallelism must be 1, 2 or 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub block_size: usize,
    pub lag: usize,
    pub mae: f64,
    pub rmse: f64,
    pub samples: usize,
}

/// Fewest estimate/target pairs a row is computed from.
const MIN_PAIRS: usize = 10;

/// Predicts the observed error rate of block `i + lag` by that of block `i`
/// and scores the predictions.
pub fn qber_estimator_study(
    trajectory: &ErrorTrajectory,
    cfg: &EstimatorStudyConfig,
) -> Result<Vec<EstimatorRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.block_sizes.len() * cfg.parallelism.len());
    for &block_size in &cfg.block_sizes {
        let rates = trajectory.block_rates(block_size)?;
        for &lag in &cfg.parallelism {
            let pairs = rates.len().saturating_sub(lag);
            if pairs < MIN_PAIRS {
                return Err(ReconError::InsufficientData(format!(
                    "{} bits give {pairs} estimates at block size {block_size} and lag {lag}",
                    trajectory.total_bits()
                )));
            }
            let (abs, sq) = rates
                .iter()
                .zip(&rates[lag..])
                .fold((0.0, 0.0), |(a, s), (est, truth)| {
                    let e = est - truth;
                    (a + e.abs(), s + e * e)
                });
            rows.push(EstimatorRow {
                block_size,
                lag,
                mae: abs / pairs as f64,
                rmse: (sq / pairs as f64).sqrt(),
                samples: pairs,
            });
        }
    }
    Ok(rows)
}
