use serde::{Deserialize, Serialize};

use crate::metrics::binary_entropy;
use crate::session::LeakLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Cascade,
    Blind,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Cascade => "cascade",
            Protocol::Blind => "blind",
        }
    }
}

/// Outcome of reconciling one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub protocol: Protocol,
    pub n: usize,
    pub q_true: f64,
    pub q_hat: f64,
    /// Protocol finished and Bob's output matches Alice's frame.
    pub success: bool,
    /// Blind gave up before decoding.
    pub aborted: bool,
    /// Errors left in Bob's output, by comparison with Alice's frame.
    pub residual_errors: usize,
    pub leak_ir: u64,
    pub leak_ev: u64,
    pub messages: u64,
    pub rounds: u64,
    pub bytes_on_wire: u64,
    /// Decode attempts (Blind) or iterations run (Cascade).
    pub attempts: u32,
    /// `leak_ir / (n H(q_true))`; `NaN` when `q_true = 0`.
    pub f: f64,
    /// Single-frame FER adjustment: `f` on success, `1 / H(q_true)` otherwise.
    pub f_fer: f64,
    pub sim_time: f64,
    pub wall_time: f64,
}

impl ReconciliationReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        protocol: Protocol,
        n: usize,
        q_true: f64,
        q_hat: f64,
        residual_errors: usize,
        aborted: bool,
        leak_ir: u64,
        ledger: LeakLedger,
        attempts: u32,
    ) -> Self {
        let h = binary_entropy(q_true).unwrap_or(f64::NAN);
        let f = if h > 0.0 {
            leak_ir as f64 / (n as f64 * h)
        } else {
            f64::NAN
        };
        let success = !aborted && residual_errors == 0;
        ReconciliationReport {
            protocol,
            n,
            q_true,
            q_hat,
            success,
            aborted,
            residual_errors,
            leak_ir,
            leak_ev: 0,
            messages: ledger.messages,
            rounds: ledger.rounds,
            bytes_on_wire: ledger.bytes_on_wire,
            attempts,
            f,
            f_fer: if success { f } else { 1.0 / h },
            sim_time: 0.0,
            wall_time: 0.0,
        }
    }
}
