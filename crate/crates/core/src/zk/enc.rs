//! Proof of knowledge of the encryption randomness `r` behind `R = g^r`,
//! bound to the ciphertext, the key and a caller-chosen context.
//!
//! Prover: `A = g^s`, `t = H(X, R, c, A, binding)`, `u = s + t·r`.
//! Verifier: `g^u = A · R^t`.

use rand::RngCore;

use super::transcript::Transcript;
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::crypto::{enc_with, Ciphertext};
use crate::group::{ElementOps, PrimeGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncProof<G: PrimeGroup> {
    pub a: G::Element,
    pub u: G::Scalar,
}

impl<G: PrimeGroup> Wire for EncProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.element::<G>(&self.a).scalar::<G>(&self.u);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self { a: r.element::<G>()?, u: r.scalar::<G>()? })
    }
}

fn challenge<G: PrimeGroup>(pk: &G::Element, ct: &Ciphertext<G>, a: &G::Element, binding: &[u8]) -> G::Scalar {
    let mut t = Transcript::new("atom/enc-proof");
    t.append(b"group", G::NAME.as_bytes());
    t.append_element::<G>(b"X", pk);
    t.append_element::<G>(b"R", &ct.r);
    t.append_element::<G>(b"c", &ct.c);
    t.append_element::<G>(b"A", a);
    t.append(b"binding", binding);
    t.challenge::<G>(b"t")
}

/// Proves knowledge of `r` for an existing ciphertext. With a wrong `r` the
/// result is a proof that does not verify.
pub fn enc_proof_with<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    ct: &Ciphertext<G>,
    r: &G::Scalar,
    binding: &[u8],
    rng: &mut R,
) -> EncProof<G> {
    let s = G::random_scalar(rng);
    let a = G::pow_g(&s);
    let t = challenge(pk, ct, &a, binding);
    EncProof { a, u: s + t * *r }
}

pub fn enc_proof<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    m: &G::Element,
    binding: &[u8],
    rng: &mut R,
) -> (Ciphertext<G>, EncProof<G>) {
    let r = G::random_scalar(rng);
    let ct = enc_with(pk, m, &r);
    let proof = enc_proof_with(pk, &ct, &r, binding, rng);
    (ct, proof)
}

pub fn verify_enc_proof<G: PrimeGroup>(
    pk: &G::Element,
    ct: &Ciphertext<G>,
    proof: &EncProof<G>,
    binding: &[u8],
) -> bool {
    if ct.y.is_some() {
        return false;
    }
    let t = challenge(pk, ct, &proof.a, binding);
    G::pow_g(&proof.u) == proof.a * ct.r.pow(&t)
}

fn component_binding(binding: &[u8], index: usize) -> Vec<u8> {
    let mut b = binding.to_vec();
    b.extend_from_slice(&(index as u32).to_be_bytes());
    b
}

/// Encrypts a multi-element message, one proof per component. Component
/// proofs are bound to their position so a row cannot be reordered.
pub fn enc_row_proof<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    ms: &[G::Element],
    binding: &[u8],
    rng: &mut R,
) -> (Vec<Ciphertext<G>>, Vec<EncProof<G>>) {
    ms.iter().enumerate().map(|(i, m)| enc_proof(pk, m, &component_binding(binding, i), rng)).unzip()
}

pub fn verify_enc_row_proof<G: PrimeGroup>(
    pk: &G::Element,
    cts: &[Ciphertext<G>],
    proofs: &[EncProof<G>],
    binding: &[u8],
) -> bool {
    cts.len() == proofs.len()
        && cts
            .iter()
            .zip(proofs)
            .enumerate()
            .all(|(i, (ct, p))| verify_enc_proof(pk, ct, p, &component_binding(binding, i)))
}
