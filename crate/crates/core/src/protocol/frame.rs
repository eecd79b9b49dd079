//! Byte framing of what travels inside the mixnet.
//!
//! Plain messages are `u16 len ‖ m ‖ 0…` up to a fixed size so every row has
//! the same width. In the trap variant a row carries either a trap
//! `gid ‖ nonce ‖ 'T'` or an inner ciphertext `ict ‖ 'M'`, both zero-padded
//! before the tag to one common frame length.

use rand::RngCore;

use crate::codec::{Reader, Wire};
use crate::crypto::{commit, Commitment, InnerCiphertext};
use crate::group::PrimeGroup;
use crate::grouping::GroupId;

pub const TAG_TRAP: u8 = b'T';
pub const TAG_INNER: u8 = b'M';
pub const NONCE_LEN: usize = 16;
/// `gid ‖ nonce`, without the tag.
pub const TRAP_BODY_LEN: usize = 4 + NONCE_LEN;

/// Fixed-size plain payload for messages of at most `max_len` bytes.
pub fn encode_plain(m: &[u8], max_len: usize) -> Option<Vec<u8>> {
    if m.len() > max_len || max_len > usize::from(u16::MAX) {
        return None;
    }
    let mut out = Vec::with_capacity(max_len + 2);
    out.extend_from_slice(&(m.len() as u16).to_be_bytes());
    out.extend_from_slice(m);
    out.resize(max_len + 2, 0);
    Some(out)
}

pub fn decode_plain(payload: &[u8]) -> Option<Vec<u8>> {
    let (len, rest) = payload.split_first_chunk::<2>()?;
    let len = usize::from(u16::from_be_bytes(*len));
    if len > rest.len() || rest[len..].iter().any(|&b| b != 0) {
        return None;
    }
    Some(rest[..len].to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrapMessage {
    pub gid: GroupId,
    pub nonce: [u8; NONCE_LEN],
}

impl TrapMessage {
    pub fn random<R: RngCore + ?Sized>(gid: GroupId, rng: &mut R) -> Self {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        Self { gid, nonce }
    }

    /// `gid ‖ nonce ‖ 'T'`, the committed form.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.gid.to_be_bytes().to_vec();
        out.extend_from_slice(&self.nonce);
        out.push(TAG_TRAP);
        out
    }

    pub fn commitment(&self) -> Commitment {
        commit(&self.to_bytes())
    }
}

/// Frame length shared by traps and inner ciphertexts for `msg_len`-byte
/// messages.
pub fn frame_len<G: PrimeGroup>(msg_len: usize) -> usize {
    InnerCiphertext::<G>::encoded_len(msg_len + 2).max(TRAP_BODY_LEN) + 1
}

fn frame(body: &[u8], tag: u8, len: usize) -> Vec<u8> {
    debug_assert!(body.len() < len);
    let mut out = body.to_vec();
    out.resize(len - 1, 0);
    out.push(tag);
    out
}

pub fn frame_trap(trap: &TrapMessage, len: usize) -> Vec<u8> {
    frame(&trap.to_bytes()[..TRAP_BODY_LEN], TAG_TRAP, len)
}

pub fn frame_inner<G: PrimeGroup>(ict: &InnerCiphertext<G>, len: usize) -> Vec<u8> {
    frame(&ict.to_bytes(), TAG_INNER, len)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Framed {
    Trap(TrapMessage),
    /// Exact inner-ciphertext bytes, tag and padding removed.
    Inner(Vec<u8>),
    Malformed,
}

pub fn parse_frame<G: PrimeGroup>(bytes: &[u8]) -> Framed {
    let Some((&tag, body)) = bytes.split_last() else {
        return Framed::Malformed;
    };
    match tag {
        TAG_TRAP if body.len() >= TRAP_BODY_LEN && body[TRAP_BODY_LEN..].iter().all(|&b| b == 0) => {
            let gid = GroupId::from_be_bytes(body[..4].try_into().expect("4 bytes"));
            let nonce = body[4..TRAP_BODY_LEN].try_into().expect("nonce length");
            Framed::Trap(TrapMessage { gid, nonce })
        }
        TAG_INNER => {
            let mut r = Reader::new(body);
            if InnerCiphertext::<G>::decode(&mut r).is_err() {
                return Framed::Malformed;
            }
            let used = body.len() - r.remaining();
            if body[used..].iter().any(|&b| b != 0) {
                return Framed::Malformed;
            }
            Framed::Inner(body[..used].to_vec())
        }
        _ => Framed::Malformed,
    }
}

/// Seeded polynomial hash over GF(2^64), reduced modulo the group count.
/// The key is public and fixed per round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouteKey(pub u64);

/// Carry-less multiplication modulo `x^64 + x^4 + x^3 + x + 1`.
fn gf_mul(mut a: u64, mut b: u64) -> u64 {
    let mut acc = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        let carry = a >> 63;
        a <<= 1;
        if carry == 1 {
            a ^= 0x1b;
        }
    }
    acc
}

impl RouteKey {
    pub fn hash(&self, bytes: &[u8]) -> u64 {
        let key = self.0 | 1;
        let mut acc = bytes.len() as u64;
        for chunk in bytes.chunks(8) {
            let mut block = [0u8; 8];
            block[..chunk.len()].copy_from_slice(chunk);
            acc = gf_mul(acc ^ u64::from_be_bytes(block), key);
        }
        acc
    }

    pub fn route(&self, bytes: &[u8], groups: usize) -> GroupId {
        (self.hash(bytes) % groups as u64) as GroupId
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{cca2_enc, keygen};
    use crate::group::P256;
    use crate::rng;

    #[test]
    fn plain_payload_round_trip() {
        let p = encode_plain(b"hello", 16).unwrap();
        assert_eq!(p.len(), 18);
        assert_eq!(decode_plain(&p).unwrap(), b"hello");
        assert!(encode_plain(&[0; 17], 16).is_none());
        assert_eq!(decode_plain(&encode_plain(b"", 4).unwrap()).unwrap(), b"");
        let mut bad = p.clone();
        bad[17] = 1;
        assert!(decode_plain(&bad).is_none());
    }

    #[test]
    fn traps_and_inner_frames_share_a_length() {
        let mut r = rng::seeded(1);
        let kp = keygen::<P256, _>(&mut r);
        let len = frame_len::<P256>(160);
        let trap = TrapMessage::random(3, &mut r);
        let ict = cca2_enc::<P256, _>(&kp.public, &encode_plain(b"msg", 160).unwrap(), &mut r);
        let (ft, fi) = (frame_trap(&trap, len), frame_inner(&ict, len));
        assert_eq!(ft.len(), fi.len());
        assert_eq!(parse_frame::<P256>(&ft), Framed::Trap(trap));
        assert_eq!(parse_frame::<P256>(&fi), Framed::Inner(ict.to_bytes()));
        assert_eq!(trap.to_bytes().len(), 21);
    }

    #[test]
    fn malformed_frames() {
        let len = frame_len::<P256>(16);
        let mut r = rng::seeded(2);
        let mut ft = frame_trap(&TrapMessage::random(1, &mut r), len);
        *ft.last_mut().unwrap() = b'X';
        assert_eq!(parse_frame::<P256>(&ft), Framed::Malformed);
        let mut ft = frame_trap(&TrapMessage::random(1, &mut r), len);
        ft[TRAP_BODY_LEN] = 1;
        assert_eq!(parse_frame::<P256>(&ft), Framed::Malformed);
        assert_eq!(parse_frame::<P256>(&[]), Framed::Malformed);
        assert_eq!(parse_frame::<P256>(&[0, 0, TAG_INNER]), Framed::Malformed);
    }

    #[test]
    fn hash_routing_is_balanced() {
        let key = RouteKey(0x9e37_79b9_7f4a_7c15);
        let mut r = rng::seeded(3);
        let mut counts = [0f64; 4];
        for _ in 0..1000 {
            let mut b = vec![0u8; 64];
            r.fill_bytes(&mut b);
            counts[key.route(&b, 4) as usize] += 1.0;
        }
        let sigma = (1000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c - 250.0).abs() < 3.0 * sigma, "{counts:?}");
        }
        assert_eq!(key.route(b"same", 4), key.route(b"same", 4));
    }

    #[test]
    fn gf_multiplication_laws() {
        assert_eq!(gf_mul(1, 0xdead), 0xdead);
        assert_eq!(gf_mul(0x1234, 0x5678), gf_mul(0x5678, 0x1234));
        // x^63 * x = x^64 = x^4 + x^3 + x + 1
        assert_eq!(gf_mul(1 << 63, 2), 0x1b);
    }
}
