//! Two-party information reconciliation for QKD post-processing.
//!
//! The crate provides the efficient Cascade protocol, LDPC syndrome coding
//! under the Blind rate-adaptation protocol, the error-verification cost
//! model, and the classical-channel simulation both protocols run over.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod bits;
pub mod blind;
pub mod cascade;
pub mod channel;
pub mod error;
pub mod ldpc;
pub mod metrics;
pub mod postproc;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod session;

pub use bits::BitFrame;
pub use channel::{transmit_bsc, ChannelParams};
pub use error::{ReconError, Result};
pub use report::{Protocol, ReconciliationReport};
pub use scalar::Real;
pub use session::{Endpoint, LatencyModel, LeakLedger, Message, MessageKind, Session};

/// Efficiency figures in double precision.
pub type Efficiency = metrics::EfficiencyRecord<f64>;
/// Sum-product decoder in double precision.
pub type SpaDecoder = ldpc::SumProductDecoder<f64>;
/// Single-precision decoder for throughput-oriented runs.
pub type SpaDecoderF32 = ldpc::SumProductDecoder<f32>;
/// Decoder output in double precision.
pub type DecodeOutcome = ldpc::DecodeOutcome<f64>;
