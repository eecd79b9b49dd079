//! SHA3-256 hash commitments. Inputs are high-entropy, so no blinding nonce.

use sha3::{Digest, Sha3_256};

use crate::codec::{DecodeError, Reader, Wire, Writer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Commitment(pub [u8; 32]);

pub fn commit(data: &[u8]) -> Commitment {
    Commitment(Sha3_256::digest(data).into())
}

pub fn verify_commit(data: &[u8], cm: &Commitment) -> bool {
    commit(data) == *cm
}

impl Wire for Commitment {
    fn encode(&self, w: &mut Writer) {
        w.raw(&self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self(r.take(32)?.try_into().expect("32 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    #[test]
    fn deterministic_and_binding() {
        let d = b"trap message";
        assert_eq!(commit(d), commit(d));
        assert!(verify_commit(d, &commit(d)));
        let mut e = d.to_vec();
        e[3] ^= 1;
        assert!(!verify_commit(&e, &commit(d)));
        assert!(!verify_commit(&d[..11], &commit(d)));
    }

    #[test]
    fn ten_thousand_traps_do_not_collide() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut seen = HashSet::new();
        for gid in 0..10_000u32 {
            let mut trap = gid.to_be_bytes().to_vec();
            let mut nonce = [0u8; 16];
            rng.fill_bytes(&mut nonce);
            trap.extend_from_slice(&nonce);
            trap.push(b'T');
            assert!(seen.insert(commit(&trap)));
        }
    }

    #[test]
    fn known_digest() {
        // SHA3-256 of the empty string
        assert_eq!(hex::encode(commit(b"").0), "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a");
    }
}
