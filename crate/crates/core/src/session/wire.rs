//! Length-prefixed binary framing.
//!
//! ```text
//! +----------------+------+-----------+-----------------+-----------+
//! | length: u32 BE | kind | direction | payload (packed) | bits % 8 |
//! +----------------+------+-----------+-----------------+-----------+
//! ```
//!
//! `length` counts every byte after the prefix. Payload bits are packed
//! least-significant-first. The tail byte is the payload bit count modulo 8,
//! which recovers the exact bit length.

use std::io::{Read, Write};

use super::{Direction, Message, MessageKind};
use crate::bits::BitFrame;
use crate::error::{ReconError, Result};

/// Length prefix, kind and direction bytes.
pub const HEADER_LEN: usize = 6;

pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let payload = msg.payload.to_bytes();
    let body_len = 2 + payload.len() + 1;
    let mut out = Vec::with_capacity(4 + body_len);
    out.extend_from_slice(&(body_len as u32).to_be_bytes());
    out.push(msg.kind.code());
    out.push(msg.direction.code());
    out.extend_from_slice(&payload);
    out.push((msg.payload.len() % 8) as u8);
    out
}

/// Decodes one frame from the front of `buf`, returning the message and the
/// number of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Message, usize)> {
    if buf.len() < 4 {
        return Err(ReconError::Wire("truncated length prefix".into()));
    }
    let body_len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if body_len < 3 {
        return Err(ReconError::Wire(format!("body length {body_len} too short")));
    }
    let body = buf
        .get(4..4 + body_len)
        .ok_or_else(|| ReconError::Wire("truncated body".into()))?;
    Ok((decode_body(body)?, 4 + body_len))
}

fn decode_body(body: &[u8]) -> Result<Message> {
    let kind = MessageKind::from_code(body[0])?;
    let direction = Direction::from_code(body[1])?;
    let payload = &body[2..body.len() - 1];
    let tail = body[body.len() - 1];
    if tail >= 8 || (payload.is_empty() && tail != 0) {
        return Err(ReconError::Wire(format!("invalid bit-count byte {tail}")));
    }
    let bits = if tail == 0 {
        payload.len() * 8
    } else {
        (payload.len() - 1) * 8 + tail as usize
    };
    Ok(Message {
        direction,
        kind,
        payload: BitFrame::from_bytes(payload, bits)?,
    })
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Message> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let body_len = u32::from_be_bytes(len) as usize;
    if body_len < 3 {
        return Err(ReconError::Wire(format!("body length {body_len} too short")));
    }
    let mut body = vec![0u8; body_len];
    r.read_exact(&mut body)?;
    decode_body(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encoding() {
        let msg = Message {
            direction: Direction::BobToAlice,
            kind: MessageKind::Syndrome,
            payload: BitFrame::parse("1101000001").unwrap(),
        };
        let bytes = encode_frame(&msg);
        assert_eq!(bytes, vec![0, 0, 0, 5, 2, 1, 0b0000_1011, 0b10, 2]);
        assert_eq!(bytes.len(), msg.wire_len());
    }

    #[test]
    fn empty_payload() {
        let msg = Message {
            direction: Direction::AliceToBob,
            kind: MessageKind::Ack,
            payload: BitFrame::zeros(0),
        };
        let bytes = encode_frame(&msg);
        assert_eq!(bytes, vec![0, 0, 0, 3, 6, 0, 0]);
        assert_eq!(decode_frame(&bytes).unwrap(), (msg, 7));
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_frame(&[0, 0, 0, 3, 9, 0, 0]).is_err());
        assert!(decode_frame(&[0, 0, 0, 3, 1, 7, 0]).is_err());
        assert!(decode_frame(&[0, 0, 0, 4, 1, 0, 1]).is_err());
        assert!(decode_frame(&[0, 0, 0, 3, 1, 0, 5]).is_err());
    }

    proptest! {
        #[test]
        fn frames_round_trip(
            bits in proptest::collection::vec(any::<bool>(), 0..300),
            kind in 1u8..=6,
            dir in 0u8..=1,
        ) {
            let msg = Message {
                direction: Direction::from_code(dir).unwrap(),
                kind: MessageKind::from_code(kind).unwrap(),
                payload: BitFrame::from_bools(bits),
            };
            let bytes = encode_frame(&msg);
            let (back, used) = decode_frame(&bytes).unwrap();
            prop_assert_eq!(used, bytes.len());
            let mut cursor = std::io::Cursor::new(bytes);
            prop_assert_eq!(read_frame(&mut cursor).unwrap(), msg.clone());
            prop_assert_eq!(back, msg);
        }
    }
}
