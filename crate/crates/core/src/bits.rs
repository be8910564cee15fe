//! Packed binary frames.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::rng::{self, Purpose};

const WORD: usize = 64;

/// Fixed-length binary key material.
///
/// Bits are packed least-significant-first into `u64` words, so bit `i` lives
/// in word `i / 64` at position `i % 64`. Unused high bits of the last word are
/// always zero.
#[derive(Clone, Serialize, Deserialize)]
pub struct BitFrame {
    words: Vec<u64>,
    len: usize,
    frame_index: u64,
}

impl BitFrame {
    pub fn zeros(len: usize) -> Self {
        BitFrame {
            words: vec![0; len.div_ceil(WORD)],
            len,
            frame_index: 0,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut frame = BitFrame::zeros(0);
        for b in bits {
            frame.push(b);
        }
        frame
    }

    /// Parses a string of `'0'`/`'1'` characters; anything else is an error.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ReconError::InvalidParameter(format!(
                    "not a binary digit: {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitFrame::from_bools)
    }

    /// Uniform random frame drawn from the `Key` stream of `seed`.
    pub fn random(len: usize, seed: u64, frame_index: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Key, frame_index);
        let mut words: Vec<u64> = (0..len.div_ceil(WORD)).map(|_| rng.gen()).collect();
        if len % WORD != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % WORD)) - 1;
            }
        }
        BitFrame {
            words,
            len,
            frame_index,
        }
    }

    pub fn with_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if v {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn push(&mut self, v: bool) {
        if self.len % WORD == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Parity of the whole frame.
    pub fn parity(&self) -> bool {
        self.words.iter().fold(0u32, |acc, w| acc ^ w.count_ones()) & 1 == 1
    }

    /// Parity of the bits at the given positions.
    pub fn parity_of(&self, positions: &[u32]) -> bool {
        positions
            .iter()
            .fold(false, |acc, &p| acc ^ self.get(p as usize))
    }

    pub fn xor(&self, other: &BitFrame) -> Result<BitFrame> {
        check_same_len(self, other)?;
        Ok(BitFrame {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
            frame_index: self.frame_index,
        })
    }

    pub fn hamming_distance(&self, other: &BitFrame) -> Result<usize> {
        check_same_len(self, other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Positions where the two frames differ.
    pub fn diff_positions(&self, other: &BitFrame) -> Result<Vec<usize>> {
        check_same_len(self, other)?;
        let mut out = Vec::new();
        for (w, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let mut d = a ^ b;
            while d != 0 {
                out.push(w * WORD + d.trailing_zeros() as usize);
                d &= d - 1;
            }
        }
        Ok(out)
    }

    /// Gathers the bits at `positions` into a new frame.
    pub fn select(&self, positions: &[usize]) -> BitFrame {
        BitFrame::from_bools(positions.iter().map(|&p| self.get(p)))
    }

    pub fn gather(&self, positions: &[u32]) -> BitFrame {
        BitFrame::from_bools(positions.iter().map(|&p| self.get(p as usize)))
    }

    /// Packs into bytes, bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(ReconError::InvalidParameter(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let mut frame = BitFrame::zeros(len);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            frame.words[i] = u64::from_le_bytes(buf);
        }
        if len % WORD != 0 {
            if let Some(last) = frame.words.last_mut() {
                *last &= (1u64 << (len % WORD)) - 1;
            }
        }
        Ok(frame)
    }

    /// Appends the low `width` bits of `value`, least significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for b in 0..width {
            self.push((value >> b) & 1 == 1);
        }
    }

    pub fn read_uint(&self, offset: usize, width: u32) -> u64 {
        (0..width as usize).fold(0u64, |acc, b| acc | (u64::from(self.get(offset + b)) << b))
    }
}

/// Equality compares bits only; the frame index is bookkeeping.
impl PartialEq for BitFrame {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.words == other.words
    }
}

impl Eq for BitFrame {}

impl std::hash::Hash for BitFrame {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.len.hash(state);
        self.words.hash(state);
    }
}

pub(crate) fn check_same_len(a: &BitFrame, b: &BitFrame) -> Result<()> {
    if a.len() != b.len() {
        return Err(ReconError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

impl fmt::Debug for BitFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitFrame#{}[{}; ", self.frame_index, self.len)?;
        for b in self.iter().take(64) {
            f.write_str(if b { "1" } else { "0" })?;
        }
        if self.len > 64 {
            f.write_str("...")?;
        }
        f.write_str("]")
    }
}

impl fmt::Display for BitFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
