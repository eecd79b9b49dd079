use rand::RngCore;

use super::frame::{encode_plain, frame_inner, frame_len, frame_trap, TrapMessage};
use super::{ProtocolError, RoundContext, Row, UserId, Variant};
use crate::crypto::{cca2_enc, elements_for, embed, Commitment, InnerCiphertext};
use crate::group::PrimeGroup;
use crate::grouping::GroupId;
use crate::zk::{enc_row_proof, verify_enc_row_proof, EncProof};

/// An encrypted row plus one plaintext-knowledge proof per component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sealed<G: PrimeGroup> {
    pub row: Row<G>,
    pub proofs: Vec<EncProof<G>>,
}

/// What a client hands its entry group. NIZK submissions carry one row;
/// trap submissions carry a trap and an inner ciphertext in random order
/// plus a commitment to the trap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Submission<G: PrimeGroup> {
    pub user: UserId,
    pub gid: GroupId,
    pub round: u64,
    pub sealed: Vec<Sealed<G>>,
    pub commitment: Option<Commitment>,
}

/// Proofs bind to the round and the entry group, so a submission cannot be
/// replayed elsewhere.
pub fn submission_binding(round: u64, gid: GroupId) -> Vec<u8> {
    let mut b = b"atom/submit/".to_vec();
    b.extend_from_slice(&round.to_be_bytes());
    b.extend_from_slice(&gid.to_be_bytes());
    b
}

/// Elements per row for a round.
pub fn row_width<G: PrimeGroup>(ctx: &RoundContext) -> usize {
    match ctx.variant {
        Variant::Nizk => elements_for::<G>(ctx.msg_len + 2),
        Variant::Trap => elements_for::<G>(frame_len::<G>(ctx.msg_len)),
    }
}

fn seal<G: PrimeGroup, R: RngCore + ?Sized>(
    ctx: &RoundContext,
    gid: GroupId,
    pk: &G::Element,
    payload: &[u8],
    rng: &mut R,
) -> Result<Sealed<G>, ProtocolError> {
    let ms = embed::<G>(payload)?;
    let (row, proofs) = enc_row_proof(pk, &ms, &submission_binding(ctx.round, gid), rng);
    Ok(Sealed { row, proofs })
}

fn check_len(ctx: &RoundContext, m: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    encode_plain(m, ctx.msg_len).ok_or(ProtocolError::MessageTooLong { len: m.len(), max: ctx.msg_len })
}

pub fn client_submit_nizk<G: PrimeGroup, R: RngCore + ?Sized>(
    ctx: &RoundContext,
    user: UserId,
    gid: GroupId,
    group_pk: &G::Element,
    m: &[u8],
    rng: &mut R,
) -> Result<Submission<G>, ProtocolError> {
    let payload = check_len(ctx, m)?;
    let sealed = seal(ctx, gid, group_pk, &payload, rng)?;
    Ok(Submission { user, gid, round: ctx.round, sealed: vec![sealed], commitment: None })
}

/// Returns the submission and the trap so callers can keep it for blame.
pub fn client_submit_trap<G: PrimeGroup, R: RngCore + ?Sized>(
    ctx: &RoundContext,
    user: UserId,
    gid: GroupId,
    group_pk: &G::Element,
    trustee_pk: &G::Element,
    m: &[u8],
    rng: &mut R,
) -> Result<(Submission<G>, TrapMessage), ProtocolError> {
    let payload = check_len(ctx, m)?;
    let inner = cca2_enc::<G, _>(trustee_pk, &payload, rng);
    client_submit_trap_inner(ctx, user, gid, group_pk, &inner, rng)
}

/// Seals an already encrypted inner ciphertext next to a fresh trap. Honest
/// clients go through [`client_submit_trap`]; colluding clients use this to
/// submit the same inner bytes twice.
pub fn client_submit_trap_inner<G: PrimeGroup, R: RngCore + ?Sized>(
    ctx: &RoundContext,
    user: UserId,
    gid: GroupId,
    group_pk: &G::Element,
    inner: &InnerCiphertext<G>,
    rng: &mut R,
) -> Result<(Submission<G>, TrapMessage), ProtocolError> {
    let len = frame_len::<G>(ctx.msg_len);
    let inner = frame_inner(inner, len);
    let trap = TrapMessage::random(gid, rng);
    let mut pair = [seal(ctx, gid, group_pk, &frame_trap(&trap, len), rng)?, seal(ctx, gid, group_pk, &inner, rng)?];
    if rng.next_u32() & 1 == 1 {
        pair.swap(0, 1);
    }
    let sub = Submission { user, gid, round: ctx.round, sealed: pair.to_vec(), commitment: Some(trap.commitment()) };
    Ok((sub, trap))
}

/// Checks shape, round, entry group and every component proof.
pub fn verify_submission<G: PrimeGroup>(
    ctx: &RoundContext,
    gid: GroupId,
    group_pk: &G::Element,
    sub: &Submission<G>,
) -> Result<(), ProtocolError> {
    if sub.round != ctx.round {
        return Err(ProtocolError::Rejected("wrong round"));
    }
    if sub.gid != gid {
        return Err(ProtocolError::Rejected("wrong entry group"));
    }
    let expected = match ctx.variant {
        Variant::Nizk => (1, false),
        Variant::Trap => (2, true),
    };
    if (sub.sealed.len(), sub.commitment.is_some()) != expected {
        return Err(ProtocolError::Rejected("wrong shape for variant"));
    }
    let width = row_width::<G>(ctx);
    let binding = submission_binding(ctx.round, gid);
    for s in &sub.sealed {
        if s.row.len() != width {
            return Err(ProtocolError::Rejected("wrong row width"));
        }
        if !verify_enc_row_proof(group_pk, &s.row, &s.proofs, &binding) {
            return Err(ProtocolError::Rejected("invalid plaintext-knowledge proof"));
        }
    }
    Ok(())
}
