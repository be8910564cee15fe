//! The efficient Cascade protocol.
//!
//! Each iteration shuffles the frame, splits it into power-of-two blocks and
//! has Alice announce one parity per block. Bob binary-searches every block
//! whose parity disagrees; all searches advance in lock step so one
//! request/reply pair serves a whole level. Every corrected bit flips the
//! parity of the blocks holding it in earlier iterations (the cascade step),
//! which queues further searches.
//!
//! In iteration 2 the bits are split into a low- and a high-confidence group
//! by how much iteration 1 revealed about them, and each group gets its own
//! block size.
//!
//! Bob sends only requests (node identifiers); all parities travel from
//! Alice to Bob, so the ledger's leaked bits are exactly the disclosed parities.

mod registry;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bits::BitFrame;
use crate::error::{ReconError, Result};
use crate::report::{Protocol, ReconciliationReport};
use crate::rng::{self, Purpose};
use crate::session::{Endpoint, MessageKind};

pub use registry::{BlockId, BlockRegistry, NodeRef};

/// How the block size grows after iteration 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockGrowth {
    /// `k_i = 2 k_{i-1}`.
    Doubling,
    /// Explicit exponent offsets relative to `k_1`, one per iteration from 3 on.
    Offsets(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub iterations: usize,
    /// `k_1 = 2^round(log2(block_constant / q_hat))`.
    pub block_constant: f64,
    pub block_growth: BlockGrowth,
    pub confidence_split: bool,
    /// A bit is low-confidence when the smallest public iteration-1 node
    /// holding it is at least `k_1 / 2^low_confidence_depth` long.
    pub low_confidence_depth: u32,
    /// Iteration-2 block sizes follow the `k_1` rule with their own constants.
    pub low_confidence_constant: f64,
    pub high_confidence_constant: f64,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            iterations: 4,
            block_constant: 2.5,
            block_growth: BlockGrowth::Offsets(vec![4, 6]),
            confidence_split: true,
            low_confidence_depth: 1,
            low_confidence_constant: 3.2,
            high_confidence_constant: 20.0,
            seed: 0,
        }
    }
}

fn exponent_for(constant: f64, q_hat: f64) -> i64 {
    (constant / q_hat).log2().round() as i64
}

fn pow2_clamped(exponent: i64, n: usize) -> usize {
    let max = usize::BITS as i64 - 1 - n.leading_zeros() as i64;
    1usize << exponent.clamp(0, max)
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 2 {
            return Err(ReconError::InvalidParameter(
                "cascade needs at least 2 iterations".into(),
            ));
        }
        if !(self.block_constant > 0.0
            && self.low_confidence_constant > 0.0
            && self.high_confidence_constant > 0.0)
        {
            return Err(ReconError::InvalidParameter(
                "block constants must be positive".into(),
            ));
        }
        if let BlockGrowth::Offsets(o) = &self.block_growth {
            if o.len() + 2 < self.iterations {
                return Err(ReconError::InvalidParameter(format!(
                    "{} block offsets given for {} iterations",
                    o.len(),
                    self.iterations
                )));
            }
        }
        Ok(())
    }

    pub fn top_exponent(&self, q_hat: f64) -> i64 {
        exponent_for(self.block_constant, q_hat)
    }

    /// `k_1`, a power of two no larger than `n`.
    pub fn first_block_size(&self, q_hat: f64, n: usize) -> usize {
        pow2_clamped(self.top_exponent(q_hat), n)
    }

    /// Block size of iteration `i` (zero based) when no confidence split
    /// applies.
    pub fn block_size(&self, iteration: usize, q_hat: f64, n: usize) -> usize {
        let e1 = self.top_exponent(q_hat);
        let e = match (&self.block_growth, iteration) {
            (_, 0) => e1,
            (BlockGrowth::Doubling, i) => e1 + i as i64,
            (BlockGrowth::Offsets(_), 1) => e1 + 1,
            (BlockGrowth::Offsets(o), i) => e1 + i64::from(o[i - 2]),
        };
        pow2_clamped(e, n)
    }

    /// Low- and high-confidence block sizes of iteration 2.
    pub fn split_block_sizes(&self, q_hat: f64, n: usize) -> (usize, usize) {
        (
            pow2_clamped(exponent_for(self.low_confidence_constant, q_hat), n),
            pow2_clamped(exponent_for(self.high_confidence_constant, q_hat), n),
        )
    }
}

fn chunk_lengths(total: usize, k: usize) -> impl Iterator<Item = u32> {
    let full = total / k;
    let rest = total % k;
    std::iter::repeat_n(k as u32, full).chain((rest > 0).then_some(rest as u32))
}

/// Permutation and block lengths for iteration `iteration`. Both parties
/// derive it from the shared seed and public knowledge only.
fn layout(
    cfg: &CascadeConfig,
    registry: &BlockRegistry,
    iteration: usize,
    q_hat: f64,
    frame_index: u64,
) -> (Vec<u32>, Vec<u32>) {
    let n = registry.frame_len();
    let mut rng = rng::stream(
        cfg.seed,
        Purpose::Permutation,
        frame_index
            .wrapping_mul(64)
            .wrapping_add(iteration as u64),
    );
    if iteration == 1 && cfg.confidence_split {
        let k1 = cfg.first_block_size(q_hat, n) as u32;
        let threshold = (k1 >> cfg.low_confidence_depth).max(1);
        let sizes = registry.known_node_sizes(0);
        let (mut low, mut high): (Vec<u32>, Vec<u32>) =
            (0..n as u32).partition(|&p| sizes[p as usize] >= threshold);
        low.shuffle(&mut rng);
        high.shuffle(&mut rng);
        let (k_low, k_high) = cfg.split_block_sizes(q_hat, n);
        let lengths = chunk_lengths(low.len(), k_low)
            .chain(chunk_lengths(high.len(), k_high))
            .collect();
        low.extend(high);
        return (low, lengths);
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let k = cfg.block_size(iteration, q_hat, n);
    (order, chunk_lengths(n, k).collect())
}

const NODE_BITS: u32 = 32;

fn encode_nodes(nodes: &[NodeRef]) -> BitFrame {
    let mut out = BitFrame::zeros(0);
    for node in nodes {
        out.push_uint(u64::from(node.block), NODE_BITS);
        out.push_uint(u64::from(node.heap), NODE_BITS);
    }
    out
}

fn decode_nodes(bits: &BitFrame) -> Result<Vec<NodeRef>> {
    let width = 2 * NODE_BITS as usize;
    if bits.len() % width != 0 {
        return Err(ReconError::Wire("truncated node request".into()));
    }
    Ok((0..bits.len() / width)
        .map(|i| NodeRef {
            block: bits.read_uint(i * width, NODE_BITS) as u32,
            heap: bits.read_uint(i * width + NODE_BITS as usize, NODE_BITS) as u32,
        })
        .collect())
}

/// Alice's side: answers parity requests from her frame.
struct Alice<'a> {
    x: &'a BitFrame,
    registry: BlockRegistry,
}

impl Alice<'_> {
    fn announce(&mut self, blocks: std::ops::Range<BlockId>, ep: &Endpoint) -> Result<()> {
        let parities = BitFrame::from_bools(blocks.clone().map(|b| {
            self.x.parity_of(self.registry.positions(NodeRef::root(b)))
        }));
        for (b, p) in blocks.zip(parities.iter()) {
            self.registry.learn(NodeRef::root(b), p);
        }
        ep.send(MessageKind::ParityBatch, parities)
    }

    fn answer(&mut self, ep: &Endpoint) -> Result<()> {
        let request = ep.expect(MessageKind::RevealRequest)?;
        let nodes = decode_nodes(&request.payload)?;
        let mut reply = BitFrame::zeros(0);
        for node in nodes {
            if node.block as usize >= self.registry.block_count() {
                return Err(ReconError::Wire(format!("unknown block {}", node.block)));
            }
            let p = self.x.parity_of(self.registry.positions(node));
            self.registry.learn(node, p);
            reply.push(p);
        }
        ep.send(MessageKind::ParityBatch, reply)
    }
}

/// Bob's side: owns the frame being corrected and all running searches.
struct Bob {
    y: BitFrame,
    registry: BlockRegistry,
    /// Current node of every running search, in launch order.
    active: Vec<NodeRef>,
    searching: Vec<bool>,
}

enum Step {
    Continue,
    Request(NodeRef),
    Done,
}

impl Bob {
    fn new(y: BitFrame) -> Self {
        let n = y.len();
        Bob {
            y,
            registry: BlockRegistry::new(n),
            active: Vec::new(),
            searching: Vec::new(),
        }
    }

    fn bob_parity(&self, node: NodeRef) -> bool {
        if node.is_root() {
            self.registry.bob_block_parity(node.block)
        } else {
            self.y.parity_of(self.registry.positions(node))
        }
    }

    fn launch(&mut self, block: BlockId) {
        let b = block as usize;
        if self.searching.len() <= b {
            self.searching.resize(self.registry.block_count(), false);
        }
        if !self.searching[b] {
            self.searching[b] = true;
            self.active.push(NodeRef::root(block));
        }
    }

    fn receive_announcement(&mut self, blocks: std::ops::Range<BlockId>, ep: &Endpoint) -> Result<()> {
        let msg = ep.expect(MessageKind::ParityBatch)?;
        if msg.payload.len() != blocks.len() {
            return Err(ReconError::Wire("parity count mismatch".into()));
        }
        for (b, p) in blocks.clone().zip(msg.payload.iter()) {
            self.registry.learn(NodeRef::root(b), p);
        }
        for b in blocks {
            if self.registry.is_odd(b) {
                self.launch(b);
            }
        }
        Ok(())
    }

    /// Advances one search as far as public parities allow.
    fn step(&mut self, idx: usize) -> Step {
        let node = self.active[idx];
        let alice = self
            .registry
            .alice_parity(node)
            .expect("search nodes always have public parity");
        if alice == self.bob_parity(node) {
            // an earlier correction landed inside this node
            if !node.is_root() && self.registry.is_odd(node.block) {
                self.active[idx] = NodeRef::root(node.block);
                return Step::Continue;
            }
            return Step::Done;
        }
        if self.registry.is_leaf(node) {
            let pos = self.registry.positions(node)[0] as usize;
            self.y.flip(pos);
            for b in self.registry.cascade_step(pos) {
                if b != node.block {
                    self.launch(b);
                }
            }
            if self.registry.is_odd(node.block) {
                // odd number of further errors remain in the block
                self.active[idx] = NodeRef::root(node.block);
                return Step::Continue;
            }
            return Step::Done;
        }
        let left = node.left();
        match self.registry.alice_parity(left) {
            Some(a) => {
                self.active[idx] = if a != self.bob_parity(left) {
                    left
                } else {
                    node.right()
                };
                Step::Continue
            }
            None => Step::Request(left),
        }
    }

    /// Runs every search until it finishes or needs a parity from Alice.
    fn advance(&mut self) -> Vec<NodeRef> {
        let mut requests = Vec::new();
        let mut waiting = Vec::new();
        let mut idx = 0;
        while idx < self.active.len() {
            match self.step(idx) {
                Step::Continue => continue,
                Step::Request(node) => {
                    requests.push(node);
                    waiting.push(self.active[idx]);
                }
                Step::Done => {
                    let block = self.active[idx].block;
                    self.searching[block as usize] = false;
                }
            }
            idx += 1;
        }
        // Corrections made late in the pass can re-open blocks whose search
        // already finished; those were pushed onto `active` and handled above.
        self.active = waiting;
        requests
    }

    fn learn_reply(&mut self, requests: &[NodeRef], ep: &Endpoint) -> Result<()> {
        let msg = ep.expect(MessageKind::ParityBatch)?;
        if msg.payload.len() != requests.len() {
            return Err(ReconError::Wire("parity count mismatch".into()));
        }
        for (&node, p) in requests.iter().zip(msg.payload.iter()) {
            self.registry.learn(node, p);
        }
        Ok(())
    }

    /// Request/reply rounds until no block is odd.
    fn converge(&mut self, alice: &mut Alice<'_>, alice_ep: &Endpoint, bob_ep: &Endpoint) -> Result<()> {
        loop {
            let requests = self.advance();
            if requests.is_empty() {
                return Ok(());
            }
            bob_ep.send(MessageKind::RevealRequest, encode_nodes(&requests))?;
            alice.answer(alice_ep)?;
            self.learn_reply(&requests, bob_ep)?;
        }
    }
}

/// Reconciles Bob's `y` towards Alice's `x`.
///
/// `q_true` is only used for reporting efficiency; the protocol itself sees
/// nothing but `q_hat`.
pub fn cascade_reconcile(
    alice_ep: &Endpoint,
    bob_ep: &Endpoint,
    x: &BitFrame,
    y: &BitFrame,
    q_hat: f64,
    q_true: f64,
    cfg: &CascadeConfig,
) -> Result<(ReconciliationReport, BitFrame)> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(ReconError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(ReconError::EmptyFrame);
    }
    if !(q_hat > 0.0 && q_hat < 0.5) {
        return Err(ReconError::Domain(q_hat));
    }
    let started = Instant::now();
    let clock0 = alice_ep.session().clock();
    let ledger0 = alice_ep.session().ledger();
    let n = x.len();
    let mut alice = Alice {
        x,
        registry: BlockRegistry::new(n),
    };
    let mut bob = Bob::new(y.clone());

    for it in 0..cfg.iterations {
        if it > 0 {
            bob_ep.send(MessageKind::Ack, BitFrame::zeros(0))?;
            alice_ep.expect(MessageKind::Ack)?;
        }
        let (order, lengths) = layout(cfg, &alice.registry, it, q_hat, x.frame_index());
        let blocks = alice.registry.add_iteration(order, &lengths, None);
        alice.announce(blocks.clone(), alice_ep)?;

        let (order, lengths) = layout(cfg, &bob.registry, it, q_hat, y.frame_index());
        let bob_blocks = bob.registry.add_iteration(order, &lengths, Some(&bob.y));
        debug_assert_eq!(blocks, bob_blocks);
        bob.receive_announcement(bob_blocks, bob_ep)?;
        bob.converge(&mut alice, alice_ep, bob_ep)?;
    }
    bob_ep.send(MessageKind::Ack, BitFrame::zeros(0))?;
    alice_ep.expect(MessageKind::Ack)?;

    let delta = alice_ep.session().ledger().since(ledger0);
    let residual = x.hamming_distance(&bob.y)?;
    let mut report = ReconciliationReport::new(
        Protocol::Cascade,
        n,
        q_true,
        q_hat,
        residual,
        false,
        delta.leaked_bits,
        delta,
        cfg.iterations as u32,
    );
    report.sim_time = alice_ep.session().clock() - clock0;
    report.wall_time = started.elapsed().as_secs_f64();
    Ok((report, bob.y))
}

/// Binary search on one odd block, outside of a full protocol run.
///
/// `registry` holds the public block structure (it is cloned for Alice's
/// side). Returns the corrected position; Bob's frame is updated in place.
pub fn binary_search_block(
    registry: &BlockRegistry,
    block: BlockId,
    x: &BitFrame,
    y: &mut BitFrame,
    alice_ep: &Endpoint,
    bob_ep: &Endpoint,
) -> Result<usize> {
    if !registry.is_odd(block) {
        return Err(ReconError::ParityMatch);
    }
    let mut alice = Alice {
        x,
        registry: registry.clone(),
    };
    let mut node = NodeRef::root(block);
    while !registry.is_leaf(node) {
        let left = node.left();
        let a = match alice.registry.alice_parity(left) {
            Some(a) => a,
            None => {
                bob_ep.send(MessageKind::RevealRequest, encode_nodes(&[left]))?;
                alice.answer(alice_ep)?;
                let reply = bob_ep.expect(MessageKind::ParityBatch)?;
                reply.payload.get(0)
            }
        };
        let b = y.parity_of(registry.positions(left));
        node = if a != b { left } else { node.right() };
    }
    let pos = registry.positions(node)[0] as usize;
    y.flip(pos);
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit_bsc, ChannelParams};
    use crate::session::{replay_leak, LatencyModel, Session};

    fn single_block(x: &BitFrame, y: &BitFrame) -> BlockRegistry {
        let n = x.len();
        let mut r = BlockRegistry::new(n);
        r.add_iteration((0..n as u32).collect(), &[n as u32], Some(y));
        r.learn(NodeRef::root(0), x.parity());
        r
    }

    #[test]
    fn block_sizes_are_powers_of_two() {
        let cfg = CascadeConfig::default();
        let n = 1 << 16;
        for q in [0.01, 0.02, 0.04, 0.06, 0.1] {
            for i in 0..cfg.iterations {
                let k = cfg.block_size(i, q, n);
                assert!(k.is_power_of_two() && k <= n);
            }
        }
        assert_eq!(cfg.first_block_size(1e-9, 1000), 512);
        let c = CascadeConfig {
            block_constant: 0.73,
            ..CascadeConfig::default()
        };
        // 0.73 / 0.02 = 36.5 -> 32
        assert_eq!(c.first_block_size(0.02, n), 32);
        assert_eq!(c.block_size(1, 0.02, n), 64);
        assert_eq!(c.block_size(2, 0.02, n), 512);
    }

    #[test]
    fn binary_search_single_error_in_32() {
        let x = BitFrame::random(32, 1, 0);
        let mut y = x.clone();
        y.flip(19);
        let reg = single_block(&x, &y);
        let (s, a, b) = Session::open(LatencyModel::default());
        let pos = binary_search_block(&reg, 0, &x, &mut y, &a, &b).unwrap();
        assert_eq!(pos, 19);
        assert_eq!(x, y);
        // five halvings, one parity each
        assert_eq!(s.ledger().leaked_bits, 5);
    }

    #[test]
    fn binary_search_length_one() {
        let x = BitFrame::parse("1").unwrap();
        let mut y = BitFrame::parse("0").unwrap();
        let reg = single_block(&x, &y);
        let (s, a, b) = Session::open(LatencyModel::default());
        assert_eq!(binary_search_block(&reg, 0, &x, &mut y, &a, &b).unwrap(), 0);
        assert_eq!(s.ledger().leaked_bits, 0);
        assert_eq!(s.ledger().messages, 0);
    }

    #[test]
    fn binary_search_rejects_even_block() {
        let x = BitFrame::random(16, 1, 0);
        let mut y = x.clone();
        y.flip(1);
        y.flip(2);
        let reg = single_block(&x, &y);
        let (_, a, b) = Session::open(LatencyModel::default());
        assert_eq!(
            binary_search_block(&reg, 0, &x, &mut y, &a, &b),
            Err(ReconError::ParityMatch)
        );
    }

    #[test]
    fn binary_search_three_errors_finds_a_true_error() {
        for seed in 0..50u64 {
            let x = BitFrame::random(64, seed, 0);
            let mut y = x.clone();
            let mut errs: Vec<usize> = Vec::new();
            let mut r = rng::stream(seed, Purpose::Misc, 0);
            while errs.len() < 3 {
                let p = rand::Rng::gen_range(&mut r, 0..64);
                if !errs.contains(&p) {
                    errs.push(p);
                    y.flip(p);
                }
            }
            let reg = single_block(&x, &y);
            let (_, a, b) = Session::open(LatencyModel::default());
            let pos = binary_search_block(&reg, 0, &x, &mut y, &a, &b).unwrap();
            assert!(errs.contains(&pos), "seed {seed}: {pos} not in {errs:?}");
            assert_eq!(x.hamming_distance(&y).unwrap(), 2);
        }
    }

    #[test]
    fn error_free_frame_costs_only_top_level_parities() {
        let n = 4096;
        let x = BitFrame::random(n, 3, 0);
        let cfg = CascadeConfig::default();
        let (s, a, b) = Session::open(LatencyModel::default());
        let (rep, out) = cascade_reconcile(&a, &b, &x, &x, 0.02, 0.02, &cfg).unwrap();
        assert_eq!(out, x);
        assert_eq!(rep.residual_errors, 0);
        let expected: usize = (0..cfg.iterations)
            .map(|i| {
                if i == 1 {
                    // no corrections: every bit is low-confidence
                    let (k_low, _) = cfg.split_block_sizes(0.02, n);
                    n.div_ceil(k_low)
                } else {
                    n.div_ceil(cfg.block_size(i, 0.02, n))
                }
            })
            .sum();
        assert_eq!(rep.leak_ir as usize, expected);
        // one announcement per iteration, acks in between plus a final one
        assert_eq!(rep.messages as usize, 2 * cfg.iterations);
        assert_eq!(s.ledger().leaked_bits, rep.leak_ir);
    }

    #[test]
    fn corrects_moderate_noise_and_ledger_replays() {
        let n = 1 << 14;
        let cfg = CascadeConfig {
            seed: 5,
            ..CascadeConfig::default()
        };
        for idx in 0..4 {
            let x = BitFrame::random(n, 9, idx);
            let y = transmit_bsc(&x, &ChannelParams::new(0.03, 10).unwrap());
            let (s, a, b) = Session::open(LatencyModel::default());
            let (rep, out) = cascade_reconcile(&a, &b, &x, &y, 0.03, 0.03, &cfg).unwrap();
            assert_eq!(rep.residual_errors, x.hamming_distance(&out).unwrap());
            assert_eq!(replay_leak(&s.transcript()), rep.leak_ir);
            assert!(rep.f > 1.0 && rep.f < 1.5, "f = {}", rep.f);
            if rep.success {
                assert_eq!(out, x);
            }
        }
    }

    #[test]
    fn deterministic_transcript() {
        let n = 1 << 12;
        let x = BitFrame::random(n, 1, 2);
        let y = transmit_bsc(&x, &ChannelParams::new(0.05, 4).unwrap());
        let cfg = CascadeConfig::default();
        let run = || {
            let (s, a, b) = Session::open(LatencyModel::default());
            let (_, out) = cascade_reconcile(&a, &b, &x, &y, 0.05, 0.05, &cfg).unwrap();
            (s.transcript(), out)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (_, a, b) = Session::open(LatencyModel::default());
        let x = BitFrame::zeros(8);
        let cfg = CascadeConfig::default();
        assert!(cascade_reconcile(&a, &b, &x, &BitFrame::zeros(9), 0.1, 0.1, &cfg).is_err());
        assert!(cascade_reconcile(&a, &b, &x, &x, 0.0, 0.1, &cfg).is_err());
        let bad = CascadeConfig {
            iterations: 1,
            ..cfg
        };
        assert!(cascade_reconcile(&a, &b, &x, &x, 0.1, 0.1, &bad).is_err());
    }
}
