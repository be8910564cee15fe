//! Binary symmetric channel.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bits::BitFrame;
use crate::error::{ReconError, Result};
use crate::rng::{self, Purpose};

/// Crossover probability and seed of a simulated BSC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    q: f64,
    seed: u64,
}

impl ChannelParams {
    /// `q` must lie in `[0, 0.5)`.
    pub fn new(q: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&q) {
            return Err(ReconError::Domain(q));
        }
        Ok(ChannelParams { q, seed })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Sends `x` through the channel: each bit flips independently with
/// probability `q`. The noise stream is keyed by the frame index, so the
/// output is a pure function of `(x, params)`.
pub fn transmit_bsc(x: &BitFrame, params: &ChannelParams) -> BitFrame {
    let mut y = x.clone();
    if params.q == 0.0 {
        return y;
    }
    let mut rng = rng::stream(params.seed, Purpose::Channel, x.frame_index());
    for i in 0..y.len() {
        if rng.gen_bool(params.q) {
            y.flip(i);
        }
    }
    y
}
