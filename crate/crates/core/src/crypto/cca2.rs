//! KEM/DEM inner encryption: `k = X^r`, then XSalsa20-Poly1305 under a key
//! hashed from `(R, k)`.
//!
//! Layout: `R (element) ‖ u32 len ‖ sealed bytes`. The nonce is fixed at zero
//! because every symmetric key is used for exactly one message.

use crypto_secretbox::aead::{Aead, KeyInit};
use crypto_secretbox::{Key, Nonce, XSalsa20Poly1305};
use rand::RngCore;
use sha3::{Digest, Sha3_256};

use super::CryptoError;
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::group::{ElementOps, PrimeGroup};

/// Poly1305 tag overhead of the sealed body.
pub const TAG_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InnerCiphertext<G: PrimeGroup> {
    pub r: G::Element,
    pub body: Vec<u8>,
}

impl<G: PrimeGroup> InnerCiphertext<G> {
    /// Encoded length for a plaintext of `msg_len` bytes.
    pub fn encoded_len(msg_len: usize) -> usize {
        G::ELEMENT_LEN + 4 + msg_len + TAG_LEN
    }
}

impl<G: PrimeGroup> Wire for InnerCiphertext<G> {
    fn encode(&self, w: &mut Writer) {
        w.element::<G>(&self.r).bytes(&self.body);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self { r: r.element::<G>()?, body: r.bytes()? })
    }
}

fn dem_key<G: PrimeGroup>(r: &G::Element, shared: &G::Element) -> XSalsa20Poly1305 {
    let mut h = Sha3_256::new();
    h.update(b"atom/kem/");
    h.update(G::NAME.as_bytes());
    h.update(G::element_bytes(r));
    h.update(G::element_bytes(shared));
    let key: [u8; 32] = h.finalize().into();
    XSalsa20Poly1305::new(Key::from_slice(&key))
}

pub fn cca2_enc<G: PrimeGroup, R: RngCore + ?Sized>(pk: &G::Element, m: &[u8], rng: &mut R) -> InnerCiphertext<G> {
    let r = G::random_scalar(rng);
    let big_r = G::pow_g(&r);
    let body =
        dem_key::<G>(&big_r, &pk.pow(&r)).encrypt(&Nonce::default(), m).expect("in-memory encryption cannot fail");
    InnerCiphertext { r: big_r, body }
}

/// Opens with an externally computed shared secret `R^x`, for keys that are
/// split across several holders.
pub fn cca2_open<G: PrimeGroup>(shared: &G::Element, ict: &InnerCiphertext<G>) -> Result<Vec<u8>, CryptoError> {
    dem_key::<G>(&ict.r, shared).decrypt(&Nonce::default(), ict.body.as_slice()).map_err(|_| CryptoError::AuthFailure)
}

pub fn cca2_dec<G: PrimeGroup>(sk: &G::Scalar, ict: &InnerCiphertext<G>) -> Result<Vec<u8>, CryptoError> {
    cca2_open(&ict.r.pow(sk), ict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;
    use crate::group::{TestGroup, P256};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trip_160_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = keygen::<P256, _>(&mut rng);
        let mut m = vec![0u8; 160];
        rng.fill_bytes(&mut m);
        let ict = cca2_enc::<P256, _>(&kp.public, &m, &mut rng);
        assert_eq!(cca2_dec(&kp.secret, &ict).unwrap(), m);
        let bytes = ict.to_bytes();
        assert_eq!(bytes.len(), InnerCiphertext::<P256>::encoded_len(160));
        assert_eq!(InnerCiphertext::<P256>::from_bytes(&bytes).unwrap(), ict);
    }

    #[test]
    fn wrong_key_is_an_auth_failure() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = keygen::<P256, _>(&mut rng);
        let other = keygen::<P256, _>(&mut rng);
        let ict = cca2_enc::<P256, _>(&kp.public, b"hello", &mut rng);
        assert_eq!(cca2_dec(&other.secret, &ict), Err(CryptoError::AuthFailure));
    }

    #[test]
    fn every_single_bit_flip_of_body_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = keygen::<TestGroup, _>(&mut rng);
        let ict = cca2_enc::<TestGroup, _>(&kp.public, b"twenty byte message!", &mut rng);
        for bit in 0..ict.body.len() * 8 {
            let mut t = ict.clone();
            t.body[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(cca2_dec(&kp.secret, &t), Err(CryptoError::AuthFailure), "bit {bit}");
        }
    }

    #[test]
    fn every_single_bit_flip_of_encoding_fails() {
        // Flips in R either break decoding or change the KEM secret.
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = keygen::<P256, _>(&mut rng);
        let ict = cca2_enc::<P256, _>(&kp.public, b"short", &mut rng);
        let bytes = ict.to_bytes();
        for bit in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            if let Ok(t) = InnerCiphertext::<P256>::from_bytes(&b) {
                assert!(cca2_dec(&kp.secret, &t).is_err(), "bit {bit}");
            }
        }
    }
}
