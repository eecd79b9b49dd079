//! Seeded randomness. Every actor draws from its own ChaCha20 stream keyed by
//! `(seed, round, actor)`, so adding an actor never shifts another's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha3::{Digest, Sha3_256};

pub use rand_chacha::ChaCha20Rng as Rng;

pub fn stream(seed: u64, round: u64, actor: &str) -> ChaCha20Rng {
    let mut h = Sha3_256::new();
    h.update(b"atom/rng/");
    h.update(seed.to_be_bytes());
    h.update(round.to_be_bytes());
    h.update(actor.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

pub fn seeded(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_independent_and_reproducible() {
        assert_eq!(stream(1, 0, "s1").next_u64(), stream(1, 0, "s1").next_u64());
        assert_ne!(stream(1, 0, "s1").next_u64(), stream(1, 0, "s2").next_u64());
        assert_ne!(stream(1, 0, "s1").next_u64(), stream(1, 1, "s1").next_u64());
    }
}
