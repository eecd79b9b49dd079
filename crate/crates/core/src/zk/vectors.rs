//! Proof test vectors, one JSON object per line.
//!
//! Each vector carries a hex statement, a hex proof and the expected verdict.
//! Statement layouts:
//!
//! * `enc`: `pk ‖ ciphertext ‖ bytes(binding)`
//! * `reenc`: `prover_pk ‖ opt(next_pk) ‖ ct_in ‖ ct_out`
//! * `shuffle`: `pk ‖ rows(in) ‖ rows(out)`, where `rows` is
//!   `u32 count ‖ u32 width ‖ ciphertexts`

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    enc_proof, reenc_proof, shuffle_proof, verify_enc_proof, verify_reenc_proof, verify_shuffle_proof, EncProof,
    ReencProof, ShuffleProof,
};
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::crypto::{enc, keygen, Ciphertext};
use crate::group::PrimeGroup;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProofKind {
    Enc,
    Reenc,
    Shuffle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVector {
    pub kind: ProofKind,
    pub group: String,
    pub note: String,
    pub statement: String,
    pub proof: String,
    pub expected: bool,
}

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("vector is for group {0}")]
    WrongGroup(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn write_rows<G: PrimeGroup>(w: &mut Writer, rows: &[Vec<Ciphertext<G>>]) {
    w.u32(rows.len() as u32);
    w.u32(rows.first().map_or(0, Vec::len) as u32);
    for ct in rows.iter().flatten() {
        w.item(ct);
    }
}

pub fn read_rows<G: PrimeGroup>(r: &mut Reader<'_>) -> Result<Vec<Vec<Ciphertext<G>>>, DecodeError> {
    let (n, width) = (r.u32()? as usize, r.u32()? as usize);
    if n.saturating_mul(width).saturating_mul(2 * G::ELEMENT_LEN) > r.remaining() {
        return Err(DecodeError::Truncated);
    }
    (0..n).map(|_| (0..width).map(|_| r.item()).collect()).collect()
}

fn opt_element<G: PrimeGroup>(w: &mut Writer, e: Option<&G::Element>) {
    match e {
        None => {
            w.u8(0);
        }
        Some(e) => {
            w.u8(1).element::<G>(e);
        }
    }
}

impl TestVector {
    /// Runs the verifier; `Ok(verdict)` is compared against `expected` by
    /// [`TestVector::passes`].
    pub fn verdict<G: PrimeGroup>(&self) -> Result<bool, VectorError> {
        if self.group != G::NAME {
            return Err(VectorError::WrongGroup(self.group.clone()));
        }
        let stmt = hex::decode(&self.statement).map_err(|e| DecodeError::Hex(e.to_string()))?;
        let mut r = Reader::new(&stmt);
        let ok = match self.kind {
            ProofKind::Enc => {
                let pk = r.element::<G>()?;
                let ct: Ciphertext<G> = r.item()?;
                let binding = r.bytes()?;
                r.finish()?;
                verify_enc_proof(&pk, &ct, &EncProof::<G>::from_hex(&self.proof)?, &binding)
            }
            ProofKind::Reenc => {
                let pk = r.element::<G>()?;
                let next = match r.u8()? {
                    0 => None,
                    1 => Some(r.element::<G>()?),
                    _ => return Err(DecodeError::Invalid("null sentinel").into()),
                };
                let (ct_in, ct_out): (Ciphertext<G>, Ciphertext<G>) = (r.item()?, r.item()?);
                r.finish()?;
                let proof = ReencProof::<G>::from_hex(&self.proof)?;
                verify_reenc_proof(&pk, next.as_ref(), &ct_in, &ct_out, &proof)
            }
            ProofKind::Shuffle => {
                let pk = r.element::<G>()?;
                let rows_in = read_rows::<G>(&mut r)?;
                let rows_out = read_rows::<G>(&mut r)?;
                r.finish()?;
                let proof = ShuffleProof::<G>::from_hex(&self.proof)?;
                verify_shuffle_proof(&pk, &rows_in, &rows_out, &proof).unwrap_or(false)
            }
        };
        Ok(ok)
    }

    pub fn passes<G: PrimeGroup>(&self) -> bool {
        self.verdict::<G>().map(|v| v == self.expected).unwrap_or(!self.expected)
    }
}

pub fn to_jsonl(vectors: &[TestVector]) -> String {
    vectors.iter().map(|v| serde_json::to_string(v).expect("plain struct serializes") + "\n").collect()
}

pub fn from_jsonl(text: &str) -> Result<Vec<TestVector>, VectorError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| VectorError::Json { line: i + 1, source }))
        .collect()
}

fn vector(kind: ProofKind, group: &str, note: &str, stmt: Vec<u8>, proof: Vec<u8>, expected: bool) -> TestVector {
    TestVector {
        kind,
        group: group.to_string(),
        note: note.to_string(),
        statement: hex::encode(stmt),
        proof: hex::encode(proof),
        expected,
    }
}

/// An honest and a tampered vector for every proof type.
pub fn generate<G: PrimeGroup, R: RngCore + ?Sized>(rng: &mut R) -> Vec<TestVector> {
    let mut out = Vec::new();
    let kp = keygen::<G, _>(rng);
    let next = keygen::<G, _>(rng);

    let (ct, p) = enc_proof::<G, _>(&kp.public, &G::random_element(rng), b"round-1/group-0", rng);
    for (binding, expected, note) in
        [(&b"round-1/group-0"[..], true, "honest"), (b"round-1/group-1", false, "replayed binding")]
    {
        let mut w = Writer::new();
        w.element::<G>(&kp.public).item(&ct).bytes(binding);
        out.push(vector(ProofKind::Enc, G::NAME, note, w.finish(), p.to_bytes(), expected));
    }

    let ct = enc::<G, _>(&kp.public, &G::random_element(rng), rng);
    let (ct_out, p) = reenc_proof(&kp.secret, Some(&next.public), &ct, rng);
    let mut tampered = ct_out;
    tampered.c = tampered.c * G::generator();
    for (o, expected, note) in [(ct_out, true, "honest"), (tampered, false, "scaled c")] {
        let mut w = Writer::new();
        w.element::<G>(&kp.public);
        opt_element::<G>(&mut w, Some(&next.public));
        w.item(&ct).item(&o);
        out.push(vector(ProofKind::Reenc, G::NAME, note, w.finish(), p.to_bytes(), expected));
    }

    let rows: Vec<Vec<Ciphertext<G>>> =
        (0..4).map(|_| vec![enc::<G, _>(&kp.public, &G::random_element(rng), rng)]).collect();
    let (shuffled, p) = shuffle_proof(&kp.public, &rows, rng).expect("well-formed batch");
    let mut dup = shuffled.clone();
    dup[1] = dup[0].clone();
    for (o, expected, note) in [(shuffled, true, "honest"), (dup, false, "duplicated output")] {
        let mut w = Writer::new();
        w.element::<G>(&kp.public);
        write_rows(&mut w, &rows);
        write_rows(&mut w, &o);
        out.push(vector(ProofKind::Shuffle, G::NAME, note, w.finish(), p.to_bytes(), expected));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{TestGroup, P256};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn generated_vectors_round_trip_and_pass() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let vs = generate::<P256, _>(&mut rng);
        assert_eq!(vs.len(), 6);
        let parsed = from_jsonl(&to_jsonl(&vs)).unwrap();
        assert_eq!(parsed, vs);
        for v in &parsed {
            assert!(v.passes::<P256>(), "{} {}", v.note, v.expected);
        }
        assert!(matches!(vs[0].verdict::<TestGroup>(), Err(VectorError::WrongGroup(_))));
    }

    #[test]
    fn flipped_expectation_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut v = generate::<TestGroup, _>(&mut rng).remove(0);
        v.expected = false;
        assert!(!v.passes::<TestGroup>());
    }
}
