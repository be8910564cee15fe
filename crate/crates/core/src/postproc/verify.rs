use rand::Rng as _;

use crate::bits::BitFrame;
use crate::error::{ReconError, Result};
use crate::rng::{self, Purpose};
use crate::session::{Endpoint, MessageKind};

use super::VerificationParams;

/// Carry-less product of two polynomials of degree < 64.
fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut b = b;
    let a = u128::from(a);
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

fn degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u128, m: u128) -> u128 {
    let dm = degree(m);
    while a != 0 && degree(a) >= dm {
        a ^= m << (degree(a) - dm);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Ben-Or irreducibility test for a polynomial of degree `t`.
fn is_irreducible(f: u128) -> bool {
    let t = degree(f);
    let x = 0b10u128;
    let mut u = x;
    for _ in 0..t / 2 {
        let s = u as u64;
        u = poly_mod(clmul(s, s), f);
        if poly_gcd(f, u ^ x) != 1 {
            return false;
        }
    }
    true
}

/// Lexicographically smallest irreducible polynomial of degree `t`, with
/// the leading term included.
pub fn irreducible_polynomial(t: u32) -> u128 {
    assert!((1..=63).contains(&t));
    let top = 1u128 << t;
    (1..top)
        .step_by(2)
        .map(|low| top | low)
        .find(|&f| t == 1 || is_irreducible(f))
        .expect("irreducible polynomials exist in every degree")
}

/// Polynomial evaluation hash over GF(2^t).
///
/// The message is cut into `t`-bit blocks `b_1 .. b_L` followed by its
/// length; the tag is `sum b_i r^(L + 2 - i)` at the secret point `r`. Two
/// distinct messages of at most `L` blocks collide with probability at most
/// `(L + 1) / 2^t`; a single flipped bit collides only when `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolyHash {
    t: u32,
    modulus: u128,
    point: u64,
}

impl PolyHash {
    pub fn new(t: u32, point: u64) -> Result<Self> {
        if !(1..=63).contains(&t) {
            return Err(ReconError::InvalidParameter(format!(
                "tag length {t} outside 1..=63"
            )));
        }
        Ok(PolyHash {
            t,
            modulus: irreducible_polynomial(t),
            point: point & ((1u64 << t) - 1),
        })
    }

    /// Point drawn from the `Hash` stream of `(seed, index)`.
    pub fn seeded(t: u32, seed: u64, index: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, Purpose::Hash, index);
        Self::new(t, rng.gen())
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        poly_mod(clmul(a, b), self.modulus) as u64
    }

    pub fn tag(&self, frames: &[BitFrame]) -> u64 {
        let t = self.t as usize;
        let mut acc = 0u64;
        let mut total = 0u64;
        let mut block = 0u64;
        let mut fill = 0usize;
        for frame in frames {
            total += frame.len() as u64;
            for bit in frame.iter() {
                block |= u64::from(bit) << fill;
                fill += 1;
                if fill == t {
                    acc = self.mul(acc ^ block, self.point);
                    block = 0;
                    fill = 0;
                }
            }
        }
        if fill > 0 {
            acc = self.mul(acc ^ block, self.point);
        }
        let len = total & ((1u64 << t) - 1);
        self.mul(acc ^ len, self.point)
    }
}

/// Outcome of one verification exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub pass: bool,
    pub leak_ev: u64,
}

/// Alice sends the tag of her cluster; Bob compares it with his own.
pub fn verify_cluster(
    alice_ep: &Endpoint,
    bob_ep: &Endpoint,
    alice_frames: &[BitFrame],
    bob_frames: &[BitFrame],
    params: &VerificationParams,
    hash: &PolyHash,
) -> Result<Verification> {
    params.validate()?;
    if alice_frames.is_empty() || bob_frames.is_empty() {
        return Err(ReconError::EmptyFrame);
    }
    if alice_frames.len() != bob_frames.len() {
        return Err(ReconError::LengthMismatch {
            left: alice_frames.len(),
            right: bob_frames.len(),
        });
    }
    for (a, b) in alice_frames.iter().zip(bob_frames) {
        crate::bits::check_same_len(a, b)?;
    }
    if hash.t() != params.t {
        return Err(ReconError::InvalidParameter(
            "hash and parameters disagree on the tag length".into(),
        ));
    }
    let mut payload = BitFrame::zeros(0);
    payload.push_uint(hash.tag(alice_frames), params.t);
    alice_ep.send(MessageKind::VerifyTag, payload)?;
    let received = bob_ep.expect(MessageKind::VerifyTag)?.payload;
    let theirs = received.read_uint(0, params.t);
    Ok(Verification {
        pass: theirs == hash.tag(bob_frames),
        leak_ev: received.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{LatencyModel, Session};

    #[test]
    fn known_irreducible_polynomials() {
        // AES field polynomial
        assert_eq!(irreducible_polynomial(8), 0x11b);
        assert_eq!(irreducible_polynomial(2), 0b111);
        assert_eq!(irreducible_polynomial(3), 0b1011);
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2
        assert!(!is_irreducible(0b10101));
        for t in [13, 31, 50, 63] {
            assert_eq!(degree(irreducible_polynomial(t)), t as i32);
        }
    }

    #[test]
    fn field_multiplication_has_inverses() {
        let h = PolyHash::new(8, 0).unwrap();
        for a in 1..256u64 {
            assert_eq!((1..256u64).filter(|&b| h.mul(a, b) == 1).count(), 1);
        }
    }

    #[test]
    fn identical_clusters_pass_and_cost_t() {
        let frames: Vec<BitFrame> = (0..3).map(|i| BitFrame::random(1000, 1, i)).collect();
        let (s, a, b) = Session::open(LatencyModel::default());
        let p = VerificationParams::default();
        let hash = PolyHash::seeded(p.t, 7, 0).unwrap();
        let v = verify_cluster(&a, &b, &frames, &frames, &p, &hash).unwrap();
        assert_eq!(v, Verification { pass: true, leak_ev: 50 });
        assert_eq!(s.ledger().leaked_bits, 50);
        assert_eq!(
            verify_cluster(&a, &b, &[], &[], &p, &hash),
            Err(ReconError::EmptyFrame)
        );
    }

    #[test]
    fn flipped_bit_escapes_only_at_the_zero_point() {
        let frames = vec![BitFrame::random(300, 2, 0)];
        let mut bad = frames.clone();
        bad[0].flip(123);
        for r in 0..256u64 {
            let h = PolyHash::new(8, r).unwrap();
            assert_eq!(h.tag(&frames) == h.tag(&bad), r == 0);
        }
    }

    #[test]
    fn flipped_bit_detection_rate_at_t8() {
        let frames = vec![BitFrame::random(500, 3, 0)];
        let trials = 20_000u64;
        let mut missed = 0;
        for i in 0..trials {
            let mut bad = frames.clone();
            bad[0].flip((i % 500) as usize);
            let h = PolyHash::seeded(8, 11, i).unwrap();
            missed += u64::from(h.tag(&frames) == h.tag(&bad));
        }
        // Binomial(20000, 1/256): mean 78, sd 8.8.
        assert!(missed < 78 + 4 * 9, "{missed} undetected");
    }

    #[test]
    fn length_is_bound_into_the_tag() {
        let h = PolyHash::new(16, 12345).unwrap();
        let a = vec![BitFrame::parse("101").unwrap()];
        let b = vec![BitFrame::parse("1010").unwrap()];
        assert_ne!(h.tag(&a), h.tag(&b));
    }
}
