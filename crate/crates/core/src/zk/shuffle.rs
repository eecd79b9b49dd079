//! Commitment-consistent proof of a shuffle of ciphertext rows.
//!
//! The prover commits to the permutation matrix with independent generators
//! `h_i`, then shows in zero knowledge that (1) the commitment opens to a
//! permutation, via a product chain over Fiat–Shamir challenges `u`, and (2)
//! the outputs, weighted by the permuted challenges, equal the inputs weighted
//! by `u` up to re-encryption under `pk`. Rows of width `L` share one
//! permutation; each column carries its own re-encryption response.
//!
//! Honest proofs are `4N + 3L + 5` elements and scalars in total.

use rand::RngCore;

use super::transcript::Transcript;
use super::ZkError;
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::crypto::{shuffle_rows, Ciphertext, CryptoError, Rows, ShuffleWitness};
use crate::group::{ElementOps, PrimeGroup};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShuffleProof<G: PrimeGroup> {
    /// Permutation commitment, indexed by input position.
    pub commitments: Vec<G::Element>,
    /// Product chain `ĉ_1 … ĉ_N`.
    pub chain: Vec<G::Element>,
    pub t1: G::Element,
    pub t2: G::Element,
    pub t3: G::Element,
    /// Per column: `(t4 on c, t4 on R)`.
    pub t4: Vec<(G::Element, G::Element)>,
    pub t_hat: Vec<G::Element>,
    pub s1: G::Scalar,
    pub s2: G::Scalar,
    pub s3: G::Scalar,
    pub s4: Vec<G::Scalar>,
    pub s_hat: Vec<G::Scalar>,
    pub s_prime: Vec<G::Scalar>,
}

impl<G: PrimeGroup> Wire for ShuffleProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.elements::<G>(&self.commitments).elements::<G>(&self.chain);
        w.element::<G>(&self.t1).element::<G>(&self.t2).element::<G>(&self.t3);
        w.u32(self.t4.len() as u32);
        for (a, b) in &self.t4 {
            w.element::<G>(a).element::<G>(b);
        }
        w.elements::<G>(&self.t_hat);
        w.scalar::<G>(&self.s1).scalar::<G>(&self.s2).scalar::<G>(&self.s3);
        w.scalars::<G>(&self.s4).scalars::<G>(&self.s_hat).scalars::<G>(&self.s_prime);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let commitments = r.elements::<G>()?;
        let chain = r.elements::<G>()?;
        let (t1, t2, t3) = (r.element::<G>()?, r.element::<G>()?, r.element::<G>()?);
        let width = r.u32()? as usize;
        if width.saturating_mul(2 * G::ELEMENT_LEN) > r.remaining() {
            return Err(DecodeError::Truncated);
        }
        let t4 = (0..width).map(|_| Ok((r.element::<G>()?, r.element::<G>()?))).collect::<Result<_, DecodeError>>()?;
        Ok(Self {
            commitments,
            chain,
            t1,
            t2,
            t3,
            t4,
            t_hat: r.elements::<G>()?,
            s1: r.scalar::<G>()?,
            s2: r.scalar::<G>()?,
            s3: r.scalar::<G>()?,
            s4: r.scalars::<G>()?,
            s_hat: r.scalars::<G>()?,
            s_prime: r.scalars::<G>()?,
        })
    }
}

struct Generators<G: PrimeGroup> {
    h: G::Element,
    hs: Vec<G::Element>,
}

fn generators<G: PrimeGroup>(n: usize) -> Generators<G> {
    Generators {
        h: G::hash_to_element(b"atom/shuffle/h"),
        hs: (0..n as u64)
            .map(|i| {
                let mut l = b"atom/shuffle/h/".to_vec();
                l.extend_from_slice(&i.to_be_bytes());
                G::hash_to_element(&l)
            })
            .collect(),
    }
}

/// Checks shape and returns `(N, L)`.
fn shape<G: PrimeGroup>(
    inputs: &[Vec<Ciphertext<G>>],
    outputs: &[Vec<Ciphertext<G>>],
) -> Result<(usize, usize), ZkError> {
    if inputs.len() != outputs.len() {
        return Err(ZkError::LengthMismatch);
    }
    let width = inputs.first().ok_or(ZkError::EmptyBatch)?.len();
    if width == 0 {
        return Err(ZkError::EmptyBatch);
    }
    if inputs.iter().chain(outputs).any(|row| row.len() != width) {
        return Err(ZkError::LengthMismatch);
    }
    Ok((inputs.len(), width))
}

fn statement<G: PrimeGroup>(
    pk: &G::Element,
    inputs: &[Vec<Ciphertext<G>>],
    outputs: &[Vec<Ciphertext<G>>],
    commitments: &[G::Element],
) -> Transcript {
    let mut t = Transcript::new("atom/shuffle-proof");
    t.append(b"group", G::NAME.as_bytes());
    t.append_element::<G>(b"pk", pk);
    t.append_u64(b"n", inputs.len() as u64);
    for (label, rows) in [(&b"in"[..], inputs), (&b"out"[..], outputs)] {
        t.append_elements::<G>(label, rows.iter().flatten().flat_map(|ct| [&ct.r, &ct.c]));
    }
    t.append_elements::<G>(b"commitments", commitments);
    t
}

fn absorb_commit<G: PrimeGroup>(t: &mut Transcript, p: &ShuffleProof<G>) -> G::Scalar {
    t.append_elements::<G>(b"chain", &p.chain);
    t.append_elements::<G>(b"t123", [&p.t1, &p.t2, &p.t3]);
    t.append_elements::<G>(b"t4", p.t4.iter().flat_map(|(a, b)| [a, b]));
    t.append_elements::<G>(b"t_hat", &p.t_hat);
    t.challenge::<G>(b"c")
}

fn prod<G: PrimeGroup>(it: impl Iterator<Item = G::Element>) -> G::Element {
    it.fold(G::identity(), |acc, e| acc * e)
}

fn sum<G: PrimeGroup>(it: impl Iterator<Item = G::Scalar>) -> G::Scalar {
    it.fold(G::scalar_zero(), |acc, s| acc + s)
}

/// Proves that `outputs` is the shuffle of `inputs` described by `witness`.
pub fn prove_shuffle<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    inputs: &[Vec<Ciphertext<G>>],
    outputs: &[Vec<Ciphertext<G>>],
    witness: &ShuffleWitness<G>,
    rng: &mut R,
) -> Result<ShuffleProof<G>, ZkError> {
    let (n, width) = shape(inputs, outputs)?;
    if witness.permutation.len() != n || witness.randomizers.len() != n {
        return Err(ZkError::LengthMismatch);
    }
    let gens = generators::<G>(n);
    let psi = |i: usize| witness.permutation.source(i);

    let r: Vec<G::Scalar> = (0..n).map(|_| G::random_scalar(rng)).collect();
    let mut commitments = vec![G::identity(); n];
    for i in 0..n {
        commitments[psi(i)] = G::pow_g(&r[psi(i)]) * gens.hs[i];
    }

    let mut t = statement(pk, inputs, outputs, &commitments);
    let u: Vec<G::Scalar> = (0..n as u64).map(|j| t.challenge_indexed::<G>(b"u", j)).collect();
    let u_perm: Vec<G::Scalar> = (0..n).map(|i| u[psi(i)]).collect();

    let r_hat: Vec<G::Scalar> = (0..n).map(|_| G::random_scalar(rng)).collect();
    let mut chain = Vec::with_capacity(n);
    let mut prev = gens.h;
    for i in 0..n {
        prev = G::pow_g(&r_hat[i]) * prev.pow(&u_perm[i]);
        chain.push(prev);
    }

    let (w1, w2, w3) = (G::random_scalar(rng), G::random_scalar(rng), G::random_scalar(rng));
    let w4: Vec<G::Scalar> = (0..width).map(|_| G::random_scalar(rng)).collect();
    let w_hat: Vec<G::Scalar> = (0..n).map(|_| G::random_scalar(rng)).collect();
    let w_prime: Vec<G::Scalar> = (0..n).map(|_| G::random_scalar(rng)).collect();

    let t3 = G::pow_g(&w3) * prod::<G>((0..n).map(|i| gens.hs[i].pow(&w_prime[i])));
    let t4 = (0..width)
        .map(|l| {
            let a = pk.pow(&-w4[l]) * prod::<G>((0..n).map(|i| outputs[i][l].c.pow(&w_prime[i])));
            let b = G::pow_g(&-w4[l]) * prod::<G>((0..n).map(|i| outputs[i][l].r.pow(&w_prime[i])));
            (a, b)
        })
        .collect();
    let t_hat = (0..n)
        .map(|i| {
            let prev = if i == 0 { gens.h } else { chain[i - 1] };
            G::pow_g(&w_hat[i]) * prev.pow(&w_prime[i])
        })
        .collect();

    let mut proof = ShuffleProof {
        commitments,
        chain,
        t1: G::pow_g(&w1),
        t2: G::pow_g(&w2),
        t3,
        t4,
        t_hat,
        s1: G::scalar_zero(),
        s2: G::scalar_zero(),
        s3: G::scalar_zero(),
        s4: Vec::new(),
        s_hat: Vec::new(),
        s_prime: Vec::new(),
    };
    let c = absorb_commit(&mut t, &proof);

    // v_i = product of u'_k for k > i
    let mut v = vec![G::scalar_one(); n];
    for i in (1..n).rev() {
        v[i - 1] = u_perm[i] * v[i];
    }
    let r_bar = sum::<G>(r.iter().copied());
    let r_hat_sum = sum::<G>((0..n).map(|i| r_hat[i] * v[i]));
    let r_tilde = sum::<G>((0..n).map(|j| r[j] * u[j]));
    proof.s1 = w1 - c * r_bar;
    proof.s2 = w2 - c * r_hat_sum;
    proof.s3 = w3 - c * r_tilde;
    proof.s4 = (0..width)
        .map(|l| {
            let r_prime = sum::<G>((0..n).map(|i| witness.randomizers[i][l] * u_perm[i]));
            w4[l] - c * r_prime
        })
        .collect();
    proof.s_hat = (0..n).map(|i| w_hat[i] - c * r_hat[i]).collect();
    proof.s_prime = (0..n).map(|i| w_prime[i] - c * u_perm[i]).collect();
    Ok(proof)
}

/// Shuffles `rows` under `pk` and proves it.
pub fn shuffle_proof<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    rows: &[Vec<Ciphertext<G>>],
    rng: &mut R,
) -> Result<(Rows<G>, ShuffleProof<G>), ZkError> {
    let (out, witness) = shuffle_rows(pk, rows, rng).map_err(|e| match e {
        CryptoError::NonNullY => ZkError::NonNullY,
        _ => ZkError::LengthMismatch,
    })?;
    let proof = prove_shuffle(pk, rows, &out, &witness, rng)?;
    Ok((out, proof))
}

/// `Err` only for batches of the wrong shape; every other failure is `Ok(false)`.
pub fn verify_shuffle_proof<G: PrimeGroup>(
    pk: &G::Element,
    inputs: &[Vec<Ciphertext<G>>],
    outputs: &[Vec<Ciphertext<G>>],
    proof: &ShuffleProof<G>,
) -> Result<bool, ZkError> {
    let (n, width) = shape(inputs, outputs)?;
    if inputs.iter().chain(outputs).flatten().any(|ct| ct.y.is_some()) {
        return Ok(false);
    }
    let p = proof;
    if p.commitments.len() != n
        || p.chain.len() != n
        || p.t_hat.len() != n
        || p.s_hat.len() != n
        || p.s_prime.len() != n
        || p.t4.len() != width
        || p.s4.len() != width
    {
        return Ok(false);
    }
    let gens = generators::<G>(n);
    let mut t = statement(pk, inputs, outputs, &p.commitments);
    let u: Vec<G::Scalar> = (0..n as u64).map(|j| t.challenge_indexed::<G>(b"u", j)).collect();
    let c = absorb_commit(&mut t, p);

    let c_bar = prod::<G>(p.commitments.iter().copied()) / prod::<G>(gens.hs.iter().copied());
    let u_prod = u.iter().fold(G::scalar_one(), |acc, x| acc * *x);
    let c_hat = p.chain[n - 1] / gens.h.pow(&u_prod);
    let c_tilde = prod::<G>((0..n).map(|j| p.commitments[j].pow(&u[j])));

    let t1 = c_bar.pow(&c) * G::pow_g(&p.s1);
    let t2 = c_hat.pow(&c) * G::pow_g(&p.s2);
    let t3 = c_tilde.pow(&c) * G::pow_g(&p.s3) * prod::<G>((0..n).map(|i| gens.hs[i].pow(&p.s_prime[i])));
    if t1 != p.t1 || t2 != p.t2 || t3 != p.t3 {
        return Ok(false);
    }
    for l in 0..width {
        let a_in = prod::<G>((0..n).map(|j| inputs[j][l].c.pow(&u[j])));
        let b_in = prod::<G>((0..n).map(|j| inputs[j][l].r.pow(&u[j])));
        let a = a_in.pow(&c) * pk.pow(&-p.s4[l]) * prod::<G>((0..n).map(|i| outputs[i][l].c.pow(&p.s_prime[i])));
        let b = b_in.pow(&c) * G::pow_g(&-p.s4[l]) * prod::<G>((0..n).map(|i| outputs[i][l].r.pow(&p.s_prime[i])));
        if (a, b) != p.t4[l] {
            return Ok(false);
        }
    }
    for i in 0..n {
        let prev = if i == 0 { gens.h } else { p.chain[i - 1] };
        if p.chain[i].pow(&c) * G::pow_g(&p.s_hat[i]) * prev.pow(&p.s_prime[i]) != p.t_hat[i] {
            return Ok(false);
        }
    }
    Ok(true)
}
