//! Proof that a peel-and-reblind step was computed honestly.
//!
//! The prover publishes the intermediate `c_tmp = c / Y^x` and two
//! Chaum–Pedersen equalities:
//!
//! * `log_g(X) = log_Y(c / c_tmp)`: the peel used the registered key;
//! * `log_g(R' / R) = log_{X'}(c' / c_tmp)`: the same fresh exponent blinds
//!   both halves under the next key.
//!
//! With no next key the output must equal `(R, c_tmp)` exactly.

use rand::RngCore;

use super::transcript::Transcript;
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::crypto::{reenc_with, Ciphertext};
use crate::group::{ElementOps, PrimeGroup};

/// One equality-of-discrete-logs transcript: `a1 = g^w`, `a2 = base^w`,
/// `z = w + e·secret`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DleqProof<G: PrimeGroup> {
    pub a1: G::Element,
    pub a2: G::Element,
    pub z: G::Scalar,
}

impl<G: PrimeGroup> Wire for DleqProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.element::<G>(&self.a1).element::<G>(&self.a2).scalar::<G>(&self.z);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self { a1: r.element::<G>()?, a2: r.element::<G>()?, z: r.scalar::<G>()? })
    }
}

/// Statement `h1 = g^x ∧ h2 = base^x`.
pub struct Dleq<'a, G: PrimeGroup> {
    pub base: &'a G::Element,
    pub h1: &'a G::Element,
    pub h2: &'a G::Element,
}

impl<G: PrimeGroup> Dleq<'_, G> {
    fn absorb(&self, t: &mut Transcript, a1: &G::Element, a2: &G::Element) {
        t.append_element::<G>(b"base", self.base);
        t.append_element::<G>(b"h1", self.h1);
        t.append_element::<G>(b"h2", self.h2);
        t.append_element::<G>(b"a1", a1);
        t.append_element::<G>(b"a2", a2);
    }

    pub fn prove<R: RngCore + ?Sized>(&self, x: &G::Scalar, t: &mut Transcript, rng: &mut R) -> DleqProof<G> {
        let w = G::random_scalar(rng);
        let (a1, a2) = (G::pow_g(&w), self.base.pow(&w));
        self.absorb(t, &a1, &a2);
        let e = t.challenge::<G>(b"e");
        DleqProof { a1, a2, z: w + e * *x }
    }

    pub fn verify(&self, p: &DleqProof<G>, t: &mut Transcript) -> bool {
        self.absorb(t, &p.a1, &p.a2);
        let e = t.challenge::<G>(b"e");
        G::pow_g(&p.z) == p.a1 * self.h1.pow(&e) && self.base.pow(&p.z) == p.a2 * self.h2.pow(&e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReencProof<G: PrimeGroup> {
    pub peeled: G::Element,
    pub peel: DleqProof<G>,
    /// Absent exactly when there is no next key.
    pub blind: Option<DleqProof<G>>,
}

impl<G: PrimeGroup> Wire for ReencProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.element::<G>(&self.peeled).item(&self.peel);
        match &self.blind {
            None => {
                w.u8(0);
            }
            Some(b) => {
                w.u8(1).item(b);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let peeled = r.element::<G>()?;
        let peel = r.item()?;
        let blind = match r.u8()? {
            0 => None,
            1 => Some(r.item()?),
            _ => return Err(DecodeError::Invalid("null sentinel")),
        };
        Ok(Self { peeled, peel, blind })
    }
}

fn transcript<G: PrimeGroup>(
    prover_pk: &G::Element,
    next_pk: Option<&G::Element>,
    ct_in: &Ciphertext<G>,
    ct_out: &Ciphertext<G>,
    peeled: &G::Element,
) -> Transcript {
    let mut t = Transcript::new("atom/reenc-proof");
    t.append(b"group", G::NAME.as_bytes());
    t.append_element::<G>(b"prover", prover_pk);
    match next_pk {
        Some(pk) => t.append_element::<G>(b"next", pk),
        None => t.append(b"next", &[]),
    }
    t.append_elements::<G>(b"in", [&ct_in.r, &ct_in.c]);
    t.append(b"in.y", &ct_in.y.map(|y| G::element_bytes(&y)).unwrap_or_default());
    t.append_elements::<G>(b"out", [&ct_out.r, &ct_out.c]);
    t.append_element::<G>(b"peeled", peeled);
    t
}

/// Proves a step computed with known randomness `r`.
pub fn reenc_proof_with<G: PrimeGroup, R: RngCore + ?Sized>(
    sk: &G::Scalar,
    next_pk: Option<&G::Element>,
    ct: &Ciphertext<G>,
    r: &G::Scalar,
    rng: &mut R,
) -> (Ciphertext<G>, ReencProof<G>) {
    let step = reenc_with(sk, next_pk, ct, r);
    let prover_pk = G::pow_g(sk);
    let (y, r_in) = ct.peel_view();
    let mut t = transcript(&prover_pk, next_pk, ct, &step.output, &step.peeled);
    let removed = ct.c / step.peeled;
    let peel = Dleq::<G> { base: &y, h1: &prover_pk, h2: &removed }.prove(sk, &mut t, rng);
    let blind = next_pk.map(|pk| {
        let h1 = step.output.r / r_in;
        let h2 = step.output.c / step.peeled;
        Dleq::<G> { base: pk, h1: &h1, h2: &h2 }.prove(r, &mut t, rng)
    });
    (step.output, ReencProof { peeled: step.peeled, peel, blind })
}

pub fn reenc_proof<G: PrimeGroup, R: RngCore + ?Sized>(
    sk: &G::Scalar,
    next_pk: Option<&G::Element>,
    ct: &Ciphertext<G>,
    rng: &mut R,
) -> (Ciphertext<G>, ReencProof<G>) {
    let r = G::random_scalar(rng);
    reenc_proof_with(sk, next_pk, ct, &r, rng)
}

/// Accepts `ct_out` with `Y` either carried forward or already cleared at a
/// group boundary.
pub fn verify_reenc_proof<G: PrimeGroup>(
    prover_pk: &G::Element,
    next_pk: Option<&G::Element>,
    ct_in: &Ciphertext<G>,
    ct_out: &Ciphertext<G>,
    proof: &ReencProof<G>,
) -> bool {
    let (y, r_in) = ct_in.peel_view();
    if ct_out.y.is_some_and(|yo| yo != y) {
        return false;
    }
    let mut t = transcript(prover_pk, next_pk, ct_in, ct_out, &proof.peeled);
    let removed = ct_in.c / proof.peeled;
    if !(Dleq::<G> { base: &y, h1: prover_pk, h2: &removed }).verify(&proof.peel, &mut t) {
        return false;
    }
    match (next_pk, &proof.blind) {
        (Some(pk), Some(b)) => {
            let h1 = ct_out.r / r_in;
            let h2 = ct_out.c / proof.peeled;
            Dleq::<G> { base: pk, h1: &h1, h2: &h2 }.verify(b, &mut t)
        }
        (None, None) => ct_out.r == r_in && ct_out.c == proof.peeled,
        _ => false,
    }
}
