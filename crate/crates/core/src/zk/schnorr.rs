//! Schnorr signatures in `(e, z)` form for signed protocol records.

use rand::RngCore;

use super::transcript::Transcript;
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::group::{ElementOps, PrimeGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature<G: PrimeGroup> {
    pub e: G::Scalar,
    pub z: G::Scalar,
}

impl<G: PrimeGroup> Wire for Signature<G> {
    fn encode(&self, w: &mut Writer) {
        w.scalar::<G>(&self.e).scalar::<G>(&self.z);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self { e: r.scalar::<G>()?, z: r.scalar::<G>()? })
    }
}

fn challenge<G: PrimeGroup>(pk: &G::Element, a: &G::Element, msg: &[u8]) -> G::Scalar {
    let mut t = Transcript::new("atom/schnorr");
    t.append(b"group", G::NAME.as_bytes());
    t.append_element::<G>(b"pk", pk);
    t.append_element::<G>(b"a", a);
    t.append(b"msg", msg);
    t.challenge::<G>(b"e")
}

pub fn sign<G: PrimeGroup, R: RngCore + ?Sized>(sk: &G::Scalar, msg: &[u8], rng: &mut R) -> Signature<G> {
    let k = G::random_scalar(rng);
    let e = challenge::<G>(&G::pow_g(sk), &G::pow_g(&k), msg);
    Signature { e, z: k + e * *sk }
}

pub fn verify_signature<G: PrimeGroup>(pk: &G::Element, msg: &[u8], sig: &Signature<G>) -> bool {
    let a = G::pow_g(&sig.z) / pk.pow(&sig.e);
    challenge::<G>(pk, &a, msg) == sig.e
}
