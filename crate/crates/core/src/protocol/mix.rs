//! The mixing pipeline inside one group for one vertex.
//!
//! Members shuffle in pipeline order, the batch is cut into `β` pieces, then
//! members peel their layer in the same order while blinding each piece for
//! the group that receives it. The last member clears `Y`. With proofs on,
//! every step is checked by the other members before the next one starts and
//! any failure aborts the round naming the prover.

use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use super::{ProtocolError, Row};
use crate::codec::Writer;
use crate::crypto::{reenc_with, rerandomize, shuffle_rows};
use crate::group::PrimeGroup;
use crate::grouping::{GroupId, ServerId};
use crate::topology::divide_batches;
use crate::zk::{
    prove_shuffle, reenc_proof_with, sign, verify_reenc_proof, verify_shuffle_proof, ReencProof, ShuffleProof,
    Signature,
};

/// One vertex's output pieces, one per successor.
pub type Batches<G> = Vec<Vec<Row<G>>>;

/// A scheduled member and the exponent it peels with.
#[derive(Clone, Debug)]
pub struct Member<G: PrimeGroup> {
    pub server: ServerId,
    /// Position in the group descriptor.
    pub position: usize,
    pub peel: G::Scalar,
    /// `g^peel`, what the member's re-encryption proofs are checked against.
    pub proof_pk: G::Element,
}

/// The members that run one vertex, in pipeline order.
#[derive(Clone, Debug)]
pub struct Stage<G: PrimeGroup> {
    pub gid: GroupId,
    pub pk: G::Element,
    pub members: Vec<Member<G>>,
}

/// A deviation an adversarial member applies to its own step.
#[derive(Clone, Debug)]
pub enum Tamper<G: PrimeGroup> {
    /// Removes one output row; a backfill row takes its slot when given.
    Drop { backfill: Option<Row<G>> },
    /// Overwrites one output row.
    Replace(Row<G>),
    /// Copies one output row over another.
    Duplicate,
    /// Re-randomizes one output row under a key other than the group's.
    BadShuffle,
    /// Multiplies one re-encrypted element by a random element.
    BadReenc,
}

impl<G: PrimeGroup> Tamper<G> {
    fn on_shuffle<R: RngCore + ?Sized>(&self, rows: &mut Vec<Row<G>>, rng: &mut R) {
        if rows.is_empty() {
            return;
        }
        let i = rng.gen_range(0..rows.len());
        match self {
            Self::Drop { backfill: Some(row) } | Self::Replace(row) => rows[i] = row.clone(),
            Self::Drop { backfill: None } => {
                rows.remove(i);
            }
            Self::Duplicate if rows.len() > 1 => {
                let j = (i + 1 + rng.gen_range(0..rows.len() - 1)) % rows.len();
                rows[j] = rows[i].clone();
            }
            Self::BadShuffle => {
                let wrong = G::random_element(rng);
                rows[i] = rows[i].iter().map(|ct| rerandomize(&wrong, ct, rng).expect("Y is clear")).collect();
            }
            Self::Duplicate | Self::BadReenc => {}
        }
    }

    fn on_reenc<R: RngCore + ?Sized>(&self, batches: &mut [Vec<Row<G>>], rng: &mut R) {
        if !matches!(self, Self::BadReenc) {
            return;
        }
        let rows: Vec<(usize, usize)> =
            batches.iter().enumerate().flat_map(|(b, rows)| (0..rows.len()).map(move |r| (b, r))).collect();
        if rows.is_empty() {
            return;
        }
        let (b, r) = rows[rng.gen_range(0..rows.len())];
        let row = &mut batches[b][r];
        let col = rng.gen_range(0..row.len());
        row[col].c = row[col].c * G::random_element(rng);
    }
}

#[derive(Clone, Debug)]
pub struct ShuffleOutput<G: PrimeGroup> {
    pub input: Vec<Row<G>>,
    pub output: Vec<Row<G>>,
    pub proof: Option<ShuffleProof<G>>,
}

pub fn do_shuffle<G: PrimeGroup, R: RngCore + ?Sized>(
    stage: &Stage<G>,
    rows: Vec<Row<G>>,
    prove: bool,
    tamper: Option<&Tamper<G>>,
    rng: &mut R,
) -> Result<ShuffleOutput<G>, ProtocolError> {
    let (mut output, witness) = shuffle_rows(&stage.pk, &rows, rng)?;
    let proof = if prove { Some(prove_shuffle(&stage.pk, &rows, &output, &witness, rng)?) } else { None };
    if let Some(t) = tamper {
        t.on_shuffle(&mut output, rng);
    }
    Ok(ShuffleOutput { input: rows, output, proof })
}

/// What an honest member checks before accepting a shuffle.
pub fn check_shuffle<G: PrimeGroup>(pk: &G::Element, step: &ShuffleOutput<G>) -> bool {
    step.proof.as_ref().is_some_and(|p| matches!(verify_shuffle_proof(pk, &step.input, &step.output, p), Ok(true)))
}

#[derive(Clone, Debug)]
pub struct ReencOutput<G: PrimeGroup> {
    pub input: Batches<G>,
    pub output: Batches<G>,
    /// `proofs[batch][row][col]`.
    pub proofs: Option<Vec<Vec<Vec<ReencProof<G>>>>>,
}

/// Peels `member`'s layer from every batch and blinds batch `b` for
/// `next_pks[b]`. `last` clears `Y` on the way out.
pub fn do_reenc<G: PrimeGroup, R: RngCore + ?Sized>(
    member: &Member<G>,
    batches: Batches<G>,
    next_pks: &[Option<G::Element>],
    last: bool,
    prove: bool,
    tamper: Option<&Tamper<G>>,
    rng: &mut R,
) -> ReencOutput<G> {
    let mut output = Vec::with_capacity(batches.len());
    let mut proofs = Vec::with_capacity(batches.len());
    for (b, batch) in batches.iter().enumerate() {
        let next = next_pks.get(b).copied().flatten();
        let mut rows_out = Vec::with_capacity(batch.len());
        let mut rows_proofs = Vec::with_capacity(batch.len());
        for row in batch {
            let mut cts = Vec::with_capacity(row.len());
            let mut ps = Vec::with_capacity(row.len());
            for ct in row {
                let r = G::random_scalar(rng);
                let out = if prove {
                    let (out, p) = reenc_proof_with(&member.peel, next.as_ref(), ct, &r, rng);
                    ps.push(p);
                    out
                } else {
                    reenc_with(&member.peel, next.as_ref(), ct, &r).output
                };
                cts.push(if last { out.cleared() } else { out });
            }
            rows_out.push(cts);
            rows_proofs.push(ps);
        }
        output.push(rows_out);
        proofs.push(rows_proofs);
    }
    if let Some(t) = tamper {
        t.on_reenc(&mut output, rng);
    }
    ReencOutput { input: batches, output, proofs: prove.then_some(proofs) }
}

pub fn check_reenc<G: PrimeGroup>(
    member_pk: &G::Element,
    next_pks: &[Option<G::Element>],
    step: &ReencOutput<G>,
) -> bool {
    let Some(proofs) = &step.proofs else { return false };
    let same_shape = |a: &[Vec<Row<G>>]| {
        a.len() == step.input.len()
            && a.iter()
                .zip(&step.input)
                .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.len() == q.len()))
    };
    if !same_shape(&step.output) || proofs.len() != step.input.len() {
        return false;
    }
    step.input.iter().zip(&step.output).zip(proofs).enumerate().all(|(b, ((bin, bout), bp))| {
        let next = next_pks.get(b).copied().flatten();
        bp.len() == bin.len()
            && bin.iter().zip(bout).zip(bp).all(|((rin, rout), rp)| {
                rp.len() == rin.len()
                    && rin
                        .iter()
                        .zip(rout)
                        .zip(rp)
                        .all(|((i, o), p)| verify_reenc_proof(member_pk, next.as_ref(), i, o, p))
            })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Entry,
    Shuffle,
    Reenc,
    Report,
}

/// A failed check: who is blamed and at which step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abort {
    pub gid: GroupId,
    pub accused: ServerId,
    pub step: Step,
}

/// An abort signed by the member that detected it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbortRecord<G: PrimeGroup> {
    pub round: u64,
    pub abort: Abort,
    pub reporter: ServerId,
    pub signature: Signature<G>,
}

fn abort_message(round: u64, a: &Abort, reporter: ServerId) -> Vec<u8> {
    let step = match a.step {
        Step::Entry => 0,
        Step::Shuffle => 1,
        Step::Reenc => 2,
        Step::Report => 3,
    };
    let mut w = Writer::new();
    w.raw(b"atom/abort").u64(round).u32(a.gid).u32(a.accused).u8(step).u32(reporter);
    w.finish()
}

impl<G: PrimeGroup> AbortRecord<G> {
    pub fn sign<R: RngCore + ?Sized>(
        round: u64,
        abort: Abort,
        reporter: ServerId,
        sk: &G::Scalar,
        rng: &mut R,
    ) -> Self {
        let signature = sign::<G, _>(sk, &abort_message(round, &abort, reporter), rng);
        Self { round, abort, reporter, signature }
    }

    pub fn verify(&self, reporter_pk: &G::Element) -> bool {
        crate::zk::verify_signature::<G>(
            reporter_pk,
            &abort_message(self.round, &self.abort, self.reporter),
            &self.signature,
        )
    }
}

/// Unproven pipeline: every member shuffles, the batch is divided into `β`
/// pieces and every member re-encrypts.
pub fn group_step_basic<G: PrimeGroup, R: RngCore + ?Sized>(
    stage: &Stage<G>,
    rows: Vec<Row<G>>,
    next_pks: &[Option<G::Element>],
    rng: &mut R,
) -> Result<Batches<G>, ProtocolError> {
    let mut rows = rows;
    for _ in &stage.members {
        rows = do_shuffle(stage, rows, false, None, rng)?.output;
    }
    let mut batches = divide_batches(&rows, next_pks.len())?;
    let last = stage.members.len() - 1;
    for (i, m) in stage.members.iter().enumerate() {
        batches = do_reenc(m, batches, next_pks, i == last, false, None, rng).output;
    }
    Ok(batches)
}

/// Proven pipeline. `tamper` lets a member deviate at a step; the other
/// members catch it through the proofs.
pub fn group_step_nizk<G: PrimeGroup, R: RngCore + ?Sized>(
    stage: &Stage<G>,
    rows: Vec<Row<G>>,
    next_pks: &[Option<G::Element>],
    tamper: &dyn Fn(ServerId, Step) -> Option<Tamper<G>>,
    rng: &mut R,
) -> Result<Result<Batches<G>, Abort>, ProtocolError> {
    let abort = |m: &Member<G>, step| Abort { gid: stage.gid, accused: m.server, step };
    let mut rows = rows;
    for m in &stage.members {
        let out = do_shuffle(stage, rows, true, tamper(m.server, Step::Shuffle).as_ref(), rng)?;
        if !check_shuffle(&stage.pk, &out) {
            return Ok(Err(abort(m, Step::Shuffle)));
        }
        rows = out.output;
    }
    let mut batches = divide_batches(&rows, next_pks.len())?;
    let last = stage.members.len() - 1;
    for (i, m) in stage.members.iter().enumerate() {
        let out = do_reenc(m, batches, next_pks, i == last, true, tamper(m.server, Step::Reenc).as_ref(), rng);
        if !check_reenc(&m.proof_pk, next_pks, &out) {
            return Ok(Err(abort(m, Step::Reenc)));
        }
        batches = out.output;
    }
    Ok(Ok(batches))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{dec, enc, keygen, KeyPair};
    use crate::group::TestGroup;
    use crate::rng;
    use rand_chacha::ChaCha20Rng;

    type G = TestGroup;

    fn stage(k: usize, r: &mut ChaCha20Rng) -> (Stage<G>, Vec<KeyPair<G>>) {
        let kps: Vec<KeyPair<G>> = (0..k).map(|_| keygen::<G, _>(r)).collect();
        let pk = kps.iter().fold(G::identity(), |a, k| a * k.public);
        let members = kps
            .iter()
            .enumerate()
            .map(|(i, kp)| Member { server: i as u32 + 10, position: i, peel: kp.secret, proof_pk: kp.public })
            .collect();
        (Stage { gid: 0, pk, members }, kps)
    }

    fn rows(
        pk: &<G as PrimeGroup>::Element,
        n: usize,
        width: usize,
        r: &mut ChaCha20Rng,
    ) -> (Vec<Row<G>>, Vec<Vec<<G as PrimeGroup>::Element>>) {
        let ms: Vec<Vec<_>> = (0..n).map(|_| (0..width).map(|_| G::random_element(r)).collect()).collect();
        let cts = ms.iter().map(|row| row.iter().map(|m| enc::<G, _>(pk, m, r)).collect()).collect();
        (cts, ms)
    }

    #[test]
    fn basic_step_delivers_each_message_to_some_next_group() {
        let mut r = rng::seeded(1);
        let (st, _) = stage(3, &mut r);
        let next: Vec<KeyPair<G>> = (0..2).map(|_| keygen::<G, _>(&mut r)).collect();
        let next_pks: Vec<_> = next.iter().map(|k| Some(k.public)).collect();
        let (cts, ms) = rows(&st.pk, 4, 2, &mut r);
        let out = group_step_basic(&st, cts, &next_pks, &mut r).unwrap();
        assert_eq!(out.len(), 2);
        let mut got = Vec::new();
        for (b, batch) in out.iter().enumerate() {
            for row in batch {
                assert!(row.iter().all(|ct| ct.y.is_none()));
                got.push(row.iter().map(|ct| dec::<G>(&next[b].secret, ct).unwrap()).collect::<Vec<_>>());
            }
        }
        let mut want = ms.clone();
        want.sort_by_key(|r| format!("{r:?}"));
        got.sort_by_key(|r| format!("{r:?}"));
        assert_eq!(got, want);
    }

    #[test]
    fn final_layer_yields_plaintexts() {
        let mut r = rng::seeded(2);
        let (st, _) = stage(2, &mut r);
        let (cts, ms) = rows(&st.pk, 3, 1, &mut r);
        let out = group_step_nizk(&st, cts, &[None], &|_, _| None, &mut r).unwrap().unwrap();
        let mut got: Vec<_> = out[0].iter().map(|row| row[0].c).collect();
        let mut want: Vec<_> = ms.iter().map(|row| row[0]).collect();
        got.sort_by_key(|e| format!("{e:?}"));
        want.sort_by_key(|e| format!("{e:?}"));
        assert_eq!(got, want);
    }

    #[test]
    fn every_tamper_is_caught_and_attributed() {
        let mut r = rng::seeded(3);
        let (st, _) = stage(3, &mut r);
        let next = keygen::<G, _>(&mut r);
        let cases: Vec<(Tamper<G>, Step)> = vec![
            (Tamper::Drop { backfill: None }, Step::Shuffle),
            (Tamper::Replace(rows(&st.pk, 1, 2, &mut r).0.remove(0)), Step::Shuffle),
            (Tamper::Duplicate, Step::Shuffle),
            (Tamper::BadShuffle, Step::Shuffle),
            (Tamper::BadReenc, Step::Reenc),
        ];
        for (tamper, step) in cases {
            for bad in [10u32, 11, 12] {
                let (cts, _) = rows(&st.pk, 4, 2, &mut r);
                let t = tamper.clone();
                let hook = move |s: ServerId, at: Step| (s == bad && at == step).then(|| t.clone());
                let res = group_step_nizk(&st, cts, &[Some(next.public), Some(next.public)], &hook, &mut r).unwrap();
                assert_eq!(res, Err(Abort { gid: 0, accused: bad, step }), "{tamper:?}");
            }
        }
    }

    #[test]
    fn honest_steps_pass_checks() {
        let mut r = rng::seeded(4);
        let (st, _) = stage(2, &mut r);
        let (cts, _) = rows(&st.pk, 5, 3, &mut r);
        let out = do_shuffle(&st, cts, true, None, &mut r).unwrap();
        assert!(check_shuffle(&st.pk, &out));
        let unproven = ShuffleOutput { proof: None, ..out.clone() };
        assert!(!check_shuffle(&st.pk, &unproven));
        let batches = vec![out.output];
        let re = do_reenc(&st.members[0], batches, &[None], false, true, None, &mut r);
        assert!(check_reenc(&st.members[0].proof_pk, &[None], &re));
        assert!(!check_reenc(&st.members[1].proof_pk, &[None], &re));
    }

    #[test]
    fn abort_records_are_signed() {
        let mut r = rng::seeded(5);
        let kp = keygen::<G, _>(&mut r);
        let a = Abort { gid: 2, accused: 7, step: Step::Reenc };
        let rec = AbortRecord::<G>::sign(4, a, 3, &kp.secret, &mut r);
        assert!(rec.verify(&kp.public));
        let forged = AbortRecord { abort: Abort { accused: 8, ..a }, ..rec.clone() };
        assert!(!forged.verify(&kp.public));
    }
}
