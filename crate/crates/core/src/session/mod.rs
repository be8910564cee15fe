//! Simulated two-party classical channel.
//!
//! A [`Session`] hands out one [`Endpoint`] per party. Every message goes
//! through a shared [`LeakLedger`] that meters disclosed key information,
//! message and flush counts, and bytes on the wire, while a simulated clock
//! charges one one-way latency per flush. A flush is a maximal run of
//! consecutive messages in the same direction.

mod wire;

use std::collections::VecDeque;
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bits::BitFrame;
use crate::error::{ReconError, Result};

pub use wire::{decode_frame, encode_frame, read_frame, write_frame, HEADER_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

impl Direction {
    pub fn code(self) -> u8 {
        match self {
            Direction::AliceToBob => 0,
            Direction::BobToAlice => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Direction::AliceToBob),
            1 => Ok(Direction::BobToAlice),
            c => Err(ReconError::Wire(format!("unknown direction {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    ParityBatch,
    Syndrome,
    RevealRequest,
    RevealValues,
    VerifyTag,
    Ack,
}

impl MessageKind {
    /// Whether the payload discloses information about the key.
    pub fn carries_key_information(self) -> bool {
        matches!(
            self,
            MessageKind::ParityBatch
                | MessageKind::Syndrome
                | MessageKind::RevealValues
                | MessageKind::VerifyTag
        )
    }

    pub fn code(self) -> u8 {
        match self {
            MessageKind::ParityBatch => 1,
            MessageKind::Syndrome => 2,
            MessageKind::RevealRequest => 3,
            MessageKind::RevealValues => 4,
            MessageKind::VerifyTag => 5,
            MessageKind::Ack => 6,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => MessageKind::ParityBatch,
            2 => MessageKind::Syndrome,
            3 => MessageKind::RevealRequest,
            4 => MessageKind::RevealValues,
            5 => MessageKind::VerifyTag,
            6 => MessageKind::Ack,
            c => return Err(ReconError::Wire(format!("unknown message kind {c}"))),
        })
    }
}

/// One logical flush of data in one direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub direction: Direction,
    pub kind: MessageKind,
    pub payload: BitFrame,
}

impl Message {
    pub fn payload_bits(&self) -> usize {
        self.payload.len()
    }

    pub fn leaked_bits(&self) -> u64 {
        if self.kind.carries_key_information() {
            self.payload.len() as u64
        } else {
            0
        }
    }

    /// Serialized size including framing.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len().div_ceil(8) + 1
    }
}

/// Per-session accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakLedger {
    pub leaked_bits: u64,
    pub messages: u64,
    /// Number of flushes, i.e. direction runs on the critical path.
    pub rounds: u64,
    pub bytes_on_wire: u64,
}

impl LeakLedger {
    /// Activity booked after `earlier` was taken.
    pub fn since(self, earlier: LeakLedger) -> LeakLedger {
        LeakLedger {
            leaked_bits: self.leaked_bits - earlier.leaked_bits,
            messages: self.messages - earlier.messages,
            rounds: self.rounds - earlier.rounds,
            bytes_on_wire: self.bytes_on_wire - earlier.bytes_on_wire,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    /// Seconds.
    pub one_way_latency: f64,
    /// Bits per second; `None` means unlimited.
    pub bandwidth_bps: Option<f64>,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            one_way_latency: 0.0,
            bandwidth_bps: None,
        }
    }
}

impl LatencyModel {
    pub fn new(one_way_latency: f64, bandwidth_bps: Option<f64>) -> Result<Self> {
        if !(one_way_latency >= 0.0) || !one_way_latency.is_finite() {
            return Err(ReconError::InvalidParameter(format!(
                "one-way latency must be >= 0, got {one_way_latency}"
            )));
        }
        if let Some(b) = bandwidth_bps {
            if !(b > 0.0) {
                return Err(ReconError::InvalidParameter(format!(
                    "bandwidth must be positive, got {b}"
                )));
            }
        }
        Ok(LatencyModel {
            one_way_latency,
            bandwidth_bps,
        })
    }

    pub fn from_millis(ms: f64) -> Result<Self> {
        Self::new(ms / 1000.0, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    fn outgoing(self) -> Direction {
        match self {
            Role::Alice => Direction::AliceToBob,
            Role::Bob => Direction::BobToAlice,
        }
    }
}

enum Transport {
    Memory {
        to_alice: VecDeque<Message>,
        to_bob: VecDeque<Message>,
    },
    Tcp {
        alice: TcpStream,
        bob: TcpStream,
    },
}

struct Inner {
    latency: LatencyModel,
    ledger: LeakLedger,
    transcript: Vec<Message>,
    clock: f64,
    last_direction: Option<Direction>,
    closed: bool,
    transport: Transport,
}

/// A single two-party conversation.
#[derive(Clone)]
pub struct Session {
    inner: Arc<Mutex<Inner>>,
}

/// One party's handle on a session. Each endpoint must be driven by exactly
/// one actor.
pub struct Endpoint {
    role: Role,
    session: Session,
}

impl Session {
    fn with_transport(latency: LatencyModel, transport: Transport) -> (Session, Endpoint, Endpoint) {
        let session = Session {
            inner: Arc::new(Mutex::new(Inner {
                latency,
                ledger: LeakLedger::default(),
                transcript: Vec::new(),
                clock: 0.0,
                last_direction: None,
                closed: false,
                transport,
            })),
        };
        let alice = Endpoint {
            role: Role::Alice,
            session: session.clone(),
        };
        let bob = Endpoint {
            role: Role::Bob,
            session: session.clone(),
        };
        (session, alice, bob)
    }

    /// In-memory session: returns the session handle plus Alice's and Bob's
    /// endpoints.
    pub fn open(latency: LatencyModel) -> (Session, Endpoint, Endpoint) {
        Self::with_transport(
            latency,
            Transport::Memory {
                to_alice: VecDeque::new(),
                to_bob: VecDeque::new(),
            },
        )
    }

    /// Session whose messages travel as length-prefixed frames over a
    /// loopback TCP connection.
    pub fn open_tcp(latency: LatencyModel) -> Result<(Session, Endpoint, Endpoint)> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let alice = TcpStream::connect(listener.local_addr()?)?;
        let (bob, _) = listener.accept()?;
        alice.set_nodelay(true)?;
        bob.set_nodelay(true)?;
        Ok(Self::with_transport(latency, Transport::Tcp { alice, bob }))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn ledger(&self) -> LeakLedger {
        self.lock().ledger
    }

    /// Simulated elapsed time in seconds.
    pub fn clock(&self) -> f64 {
        self.lock().clock
    }

    pub fn transcript(&self) -> Vec<Message> {
        self.lock().transcript.clone()
    }

    pub fn close(&self) {
        self.lock().closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }
}

impl Endpoint {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Sends `payload` to the peer, updating the ledger and the clock.
    pub fn send(&self, kind: MessageKind, payload: BitFrame) -> Result<()> {
        let msg = Message {
            direction: self.role.outgoing(),
            kind,
            payload,
        };
        let mut inner = self.session.lock();
        if inner.closed {
            return Err(ReconError::SessionClosed);
        }
        let wire_len = msg.wire_len() as u64;
        inner.ledger.messages += 1;
        inner.ledger.leaked_bits += msg.leaked_bits();
        inner.ledger.bytes_on_wire += wire_len;
        if inner.last_direction != Some(msg.direction) {
            inner.ledger.rounds += 1;
            inner.clock += inner.latency.one_way_latency;
            inner.last_direction = Some(msg.direction);
        }
        if let Some(bw) = inner.latency.bandwidth_bps {
            inner.clock += (wire_len * 8) as f64 / bw;
        }
        match &mut inner.transport {
            Transport::Memory { to_alice, to_bob } => match self.role {
                Role::Alice => to_bob.push_back(msg.clone()),
                Role::Bob => to_alice.push_back(msg.clone()),
            },
            Transport::Tcp { alice, bob } => {
                let stream = match self.role {
                    Role::Alice => alice,
                    Role::Bob => bob,
                };
                write_frame(stream, &msg)?;
            }
        }
        inner.transcript.push(msg);
        Ok(())
    }

    /// Next message addressed to this endpoint, if any has been sent.
    pub fn recv(&self) -> Result<Option<Message>> {
        let mut inner = self.session.lock();
        match &mut inner.transport {
            Transport::Memory { to_alice, to_bob } => Ok(match self.role {
                Role::Alice => to_alice.pop_front(),
                Role::Bob => to_bob.pop_front(),
            }),
            Transport::Tcp { alice, bob } => {
                let stream = match self.role {
                    Role::Alice => alice,
                    Role::Bob => bob,
                };
                stream.set_read_timeout(Some(Duration::from_millis(250)))?;
                let mut probe = [0u8; 1];
                let ready = match stream.peek(&mut probe) {
                    Ok(n) => n > 0,
                    Err(e)
                        if matches!(
                            e.kind(),
                            std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                        ) =>
                    {
                        false
                    }
                    Err(e) => return Err(e.into()),
                };
                stream.set_read_timeout(None)?;
                if ready {
                    Ok(Some(read_frame(stream)?))
                } else {
                    Ok(None)
                }
            }
        }
    }

    /// Like [`recv`](Self::recv) but fails if nothing is waiting.
    pub fn expect(&self, kind: MessageKind) -> Result<Message> {
        let msg = self
            .recv()?
            .ok_or_else(|| ReconError::Wire(format!("expected {kind:?}, queue empty")))?;
        if msg.kind != kind {
            return Err(ReconError::Wire(format!(
                "expected {kind:?}, got {:?}",
                msg.kind
            )));
        }
        Ok(msg)
    }
}

/// Recomputes the leakage of a transcript from scratch.
pub fn replay_leak(transcript: &[Message]) -> u64 {
    transcript
        .iter()
        .filter(|m| m.kind.carries_key_information())
        .map(|m| m.payload.len() as u64)
        .sum()
}

/// Serial-execution throughput in bits per second:
/// `n / (compute_time + rounds * one_way_latency)`.
pub fn throughput(n: usize, rounds: u64, latency: &LatencyModel, compute_time: f64) -> f64 {
    n as f64 / (compute_time + rounds as f64 * latency.one_way_latency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(n: usize) -> BitFrame {
        BitFrame::zeros(n)
    }

    #[test]
    fn zero_latency_keeps_clock_at_zero() {
        let (s, a, b) = Session::open(LatencyModel::default());
        for _ in 0..5 {
            a.send(MessageKind::ParityBatch, bits(3)).unwrap();
            b.send(MessageKind::Ack, bits(0)).unwrap();
        }
        assert_eq!(s.clock(), 0.0);
        assert_eq!(s.ledger().messages, 10);
    }

    #[test]
    fn alternating_messages_accumulate_latency() {
        let (s, a, b) = Session::open(LatencyModel::from_millis(5.0).unwrap());
        a.send(MessageKind::ParityBatch, bits(1)).unwrap();
        b.send(MessageKind::RevealRequest, bits(1)).unwrap();
        a.send(MessageKind::ParityBatch, bits(1)).unwrap();
        assert!((s.clock() - 0.015).abs() < 1e-12);
        assert_eq!(s.ledger().rounds, 3);
    }

    #[test]
    fn same_direction_messages_share_a_flush() {
        let (s, a, _b) = Session::open(LatencyModel::from_millis(1.0).unwrap());
        a.send(MessageKind::ParityBatch, bits(4)).unwrap();
        a.send(MessageKind::Syndrome, bits(4)).unwrap();
        let l = s.ledger();
        assert_eq!(l.messages, 2);
        assert_eq!(l.rounds, 1);
        assert!((s.clock() - 0.001).abs() < 1e-12);
    }

    #[test]
    fn leakage_by_kind() {
        let (s, a, b) = Session::open(LatencyModel::default());
        a.send(MessageKind::ParityBatch, bits(512)).unwrap();
        assert_eq!(s.ledger().leaked_bits, 512);
        b.send(MessageKind::RevealRequest, bits(64)).unwrap();
        assert_eq!(s.ledger().leaked_bits, 512);
        a.send(MessageKind::Syndrome, bits(100)).unwrap();
        assert_eq!(s.ledger().leaked_bits, 612);
        b.send(MessageKind::Ack, bits(0)).unwrap();
        let l = s.ledger();
        assert_eq!(l.leaked_bits, 612);
        assert_eq!(l.messages, 4);
        assert_eq!(replay_leak(&s.transcript()), l.leaked_bits);
        assert!(l.leaked_bits <= l.bytes_on_wire * 8);
    }

    #[test]
    fn closed_session_rejects_send() {
        let (s, a, _) = Session::open(LatencyModel::default());
        s.close();
        assert_eq!(
            a.send(MessageKind::Ack, bits(0)),
            Err(ReconError::SessionClosed)
        );
    }

    #[test]
    fn messages_are_delivered_in_order() {
        let (_, a, b) = Session::open(LatencyModel::default());
        a.send(MessageKind::Syndrome, BitFrame::parse("101").unwrap())
            .unwrap();
        a.send(MessageKind::ParityBatch, BitFrame::parse("1").unwrap())
            .unwrap();
        assert_eq!(b.expect(MessageKind::Syndrome).unwrap().payload.len(), 3);
        assert_eq!(b.recv().unwrap().unwrap().kind, MessageKind::ParityBatch);
        assert!(b.recv().unwrap().is_none());
        assert!(a.recv().unwrap().is_none());
    }

    #[test]
    fn bandwidth_adds_transfer_time() {
        let lat = LatencyModel::new(0.0, Some(8000.0)).unwrap();
        let (s, a, _) = Session::open(lat);
        a.send(MessageKind::Syndrome, bits(8 * 93)).unwrap();
        // 6 header bytes + 93 payload bytes + 1 tail byte
        assert!((s.clock() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn throughput_model() {
        let lat0 = LatencyModel::default();
        assert_eq!(throughput(1000, 40, &lat0, 0.5), 2000.0);
        let lat = LatencyModel::from_millis(10.0).unwrap();
        assert_eq!(throughput(1000, 0, &lat, 0.5), 2000.0);
        let one = throughput(1000, 100, &lat, 0.0);
        let two = throughput(1000, 200, &lat, 0.0);
        assert!((one / two - 2.0).abs() < 1e-12);
        assert!(LatencyModel::from_millis(-1.0).is_err());
    }
}
