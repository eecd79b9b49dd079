//! Trap-variant exit: unpacking the last layer's plaintexts, per-group
//! reports and the trustees' release decision.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::frame::{decode_plain, parse_frame, Framed, TrapMessage};
use super::{ProtocolError, RoundContext, Row};
use crate::codec::{Wire, Writer};
use crate::crypto::{cca2_dec, commit, unembed, Commitment, InnerCiphertext};
use crate::group::PrimeGroup;
use crate::grouping::{GroupId, ServerId};
use crate::zk::{sign, verify_signature, Signature};

/// What one exit vertex sends onward.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExitForward {
    /// Each trap goes back to the group named inside it.
    pub traps: Vec<TrapMessage>,
    /// Inner ciphertexts with the group their hash selects.
    pub inners: Vec<(GroupId, Vec<u8>)>,
    /// Rows that decoded to neither a trap nor an inner ciphertext, or a trap
    /// naming a group that does not exist.
    pub malformed: usize,
}

/// Unpacks fully peeled rows. After the last layer a row's `c` components
/// are the embedded frame.
pub fn exit_process_trap<G: PrimeGroup>(ctx: &RoundContext, rows: &[Row<G>]) -> ExitForward {
    let mut fwd = ExitForward::default();
    for row in rows {
        let elems: Vec<G::Element> = row.iter().map(|ct| ct.c).collect();
        let parsed = unembed::<G>(&elems).map(|b| parse_frame::<G>(&b)).unwrap_or(Framed::Malformed);
        match parsed {
            Framed::Trap(t) if (t.gid as usize) < ctx.groups => fwd.traps.push(t),
            Framed::Inner(bytes) => fwd.inners.push((ctx.route_key.route(&bytes, ctx.groups), bytes)),
            Framed::Trap(_) | Framed::Malformed => fwd.malformed += 1,
        }
    }
    fwd
}

/// One server's account of what its group received at exit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitReport {
    pub gid: GroupId,
    pub reporter: ServerId,
    /// Received traps match, as a multiset, the commitments of the users who
    /// entered through this group.
    pub traps_match: bool,
    /// Every inner ciphertext hashes here, none repeats, and the group saw no
    /// malformed row while unpacking its own exit vertices.
    pub inner_ok: bool,
    pub traps: u64,
    pub inners: u64,
    pub inner_digests: Vec<[u8; 32]>,
}

pub fn build_exit_report(
    ctx: &RoundContext,
    gid: GroupId,
    reporter: ServerId,
    expected: &[Commitment],
    traps: &[TrapMessage],
    inners: &[Vec<u8>],
    malformed_seen: usize,
) -> ExitReport {
    let mut want: Vec<Commitment> = expected.to_vec();
    let mut got: Vec<Commitment> = traps.iter().map(TrapMessage::commitment).collect();
    want.sort_unstable();
    got.sort_unstable();
    let traps_match = want == got && traps.iter().all(|t| t.gid == gid);
    let digests: Vec<[u8; 32]> = inners.iter().map(|b| commit(b).0).collect();
    let unique: BTreeSet<&[u8; 32]> = digests.iter().collect();
    let inner_ok = malformed_seen == 0
        && unique.len() == digests.len()
        && inners.iter().all(|b| ctx.route_key.route(b, ctx.groups) == gid);
    ExitReport {
        gid,
        reporter,
        traps_match,
        inner_ok,
        traps: traps.len() as u64,
        inners: inners.len() as u64,
        inner_digests: digests,
    }
}

/// Trustee-signed list of padding messages, identified by the digest of
/// their plaintext. Only accounting uses it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest<G: PrimeGroup> {
    pub round: u64,
    pub dummies: Vec<[u8; 32]>,
    pub signatures: Vec<(ServerId, Signature<G>)>,
}

impl<G: PrimeGroup> Manifest<G> {
    fn message(round: u64, dummies: &[[u8; 32]]) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(b"atom/manifest").u64(round).u32(dummies.len() as u32);
        for d in dummies {
            w.raw(d);
        }
        w.finish()
    }

    pub fn sign<R: RngCore + ?Sized>(
        round: u64,
        dummies: Vec<[u8; 32]>,
        trustees: &[(ServerId, G::Scalar)],
        rng: &mut R,
    ) -> Self {
        let msg = Self::message(round, &dummies);
        let signatures = trustees.iter().map(|(id, sk)| (*id, sign::<G, _>(sk, &msg, rng))).collect();
        Self { round, dummies, signatures }
    }

    /// Every trustee must have signed.
    pub fn verify(&self, trustees: &[(ServerId, G::Element)]) -> bool {
        let msg = Self::message(self.round, &self.dummies);
        trustees
            .iter()
            .all(|(id, pk)| self.signatures.iter().any(|(s, sig)| s == id && verify_signature::<G>(pk, &msg, sig)))
    }

    pub fn len(&self) -> usize {
        self.dummies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dummies.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DestroyReason {
    BadManifest,
    MissingReport { gid: GroupId, server: ServerId },
    TrapMismatch { gid: GroupId, server: ServerId },
    InnerViolation { gid: GroupId, server: ServerId },
    Inconsistent { gid: GroupId },
    CountMismatch { traps: u64, inners: u64, dummies: u64 },
    GlobalDuplicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TrusteeVerdict {
    Release,
    Destroy(DestroyReason),
}

/// Release only if every expected server reported, every bit is set, the
/// members of each group agree, traps and non-dummy inner ciphertexts are
/// equal in number, and no inner ciphertext appears twice anywhere.
pub fn trustee_decide<G: PrimeGroup>(
    reports: &[ExitReport],
    expected: &[(GroupId, ServerId)],
    manifest: &Manifest<G>,
    trustees: &[(ServerId, G::Element)],
) -> TrusteeVerdict {
    if !manifest.verify(trustees) {
        return TrusteeVerdict::Destroy(DestroyReason::BadManifest);
    }
    decide_reports(reports, expected, manifest.len() as u64)
}

/// The decision given an already verified dummy count; transcript replay
/// calls this directly.
pub fn decide_reports(reports: &[ExitReport], expected: &[(GroupId, ServerId)], dummies: u64) -> TrusteeVerdict {
    use DestroyReason::*;
    let destroy = TrusteeVerdict::Destroy;
    let mut per_group: BTreeMap<GroupId, &ExitReport> = BTreeMap::new();
    for &(gid, server) in expected {
        let Some(rep) = reports.iter().find(|r| r.gid == gid && r.reporter == server) else {
            return destroy(MissingReport { gid, server });
        };
        if !rep.traps_match {
            return destroy(TrapMismatch { gid, server });
        }
        if !rep.inner_ok {
            return destroy(InnerViolation { gid, server });
        }
        match per_group.get(&gid) {
            Some(first)
                if (first.traps, first.inners, &first.inner_digests) != (rep.traps, rep.inners, &rep.inner_digests) =>
            {
                return destroy(Inconsistent { gid });
            }
            Some(_) => {}
            None => {
                per_group.insert(gid, rep);
            }
        }
    }
    let traps: u64 = per_group.values().map(|r| r.traps).sum();
    let inners: u64 = per_group.values().map(|r| r.inners).sum();
    if inners.checked_sub(dummies) != Some(traps) {
        return destroy(CountMismatch { traps, inners, dummies });
    }
    let mut seen = BTreeSet::new();
    if !per_group.values().flat_map(|r| &r.inner_digests).all(|d| seen.insert(d)) {
        return destroy(GlobalDuplicate);
    }
    TrusteeVerdict::Release
}

/// After release: opens every inner ciphertext with the trustees' combined
/// key and drops the manifest's padding.
pub fn release_outputs<G: PrimeGroup>(
    trustee_secret: &G::Scalar,
    inners: &[Vec<u8>],
    manifest: &Manifest<G>,
) -> Result<Vec<Vec<u8>>, ProtocolError> {
    let mut dummies: BTreeMap<[u8; 32], usize> = BTreeMap::new();
    for d in &manifest.dummies {
        *dummies.entry(*d).or_default() += 1;
    }
    let mut out = Vec::with_capacity(inners.len());
    for bytes in inners {
        let ict =
            InnerCiphertext::<G>::from_bytes(bytes).map_err(|_| ProtocolError::Rejected("bad inner ciphertext"))?;
        let payload = cca2_dec(trustee_secret, &ict)?;
        let m = decode_plain(&payload).ok_or(ProtocolError::Rejected("bad inner payload"))?;
        match dummies.get_mut(&commit(&m).0) {
            Some(n) if *n > 0 => *n -= 1,
            _ => out.push(m),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{cca2_enc, embed, keygen, Ciphertext};
    use crate::group::{PrimeGroup, P256};
    use crate::protocol::frame::{encode_plain, frame_inner, frame_len, frame_trap, RouteKey};
    use crate::protocol::Variant;
    use crate::rng;

    type G = P256;

    fn ctx() -> RoundContext {
        RoundContext { round: 1, variant: Variant::Trap, msg_len: 16, groups: 2, route_key: RouteKey(99) }
    }

    fn plain_row(bytes: &[u8]) -> Row<G> {
        embed::<G>(bytes).unwrap().into_iter().map(|m| Ciphertext::new(G::identity(), m)).collect()
    }

    #[test]
    fn exit_unpacks_and_routes() {
        let c = ctx();
        let mut r = rng::seeded(1);
        let trustee = keygen::<G, _>(&mut r);
        let len = frame_len::<G>(c.msg_len);
        let trap = TrapMessage::random(1, &mut r);
        let ict = cca2_enc::<G, _>(&trustee.public, &encode_plain(b"x", 16).unwrap(), &mut r);
        let bogus = TrapMessage::random(7, &mut r);
        let mut junk = frame_trap(&trap, len);
        junk[len - 1] = b'?';
        let rows = vec![
            plain_row(&frame_trap(&trap, len)),
            plain_row(&frame_inner(&ict, len)),
            plain_row(&frame_trap(&bogus, len)),
            plain_row(&junk),
        ];
        let fwd = exit_process_trap::<G>(&c, &rows);
        assert_eq!(fwd.traps, vec![trap]);
        assert_eq!(fwd.inners, vec![(c.route_key.route(&ict.to_bytes(), 2), ict.to_bytes())]);
        assert_eq!(fwd.malformed, 2);
    }

    fn setup(r: &mut rand_chacha::ChaCha20Rng) -> (Vec<(ServerId, <G as PrimeGroup>::Element)>, Manifest<G>) {
        let kp = keygen::<G, _>(r);
        let m = Manifest::<G>::sign(1, vec![], &[(100, kp.secret)], r);
        (vec![(100, kp.public)], m)
    }

    fn report(gid: GroupId, reporter: ServerId, traps: u64, inners: u64) -> ExitReport {
        ExitReport {
            gid,
            reporter,
            traps_match: true,
            inner_ok: true,
            traps,
            inners,
            inner_digests: (0..inners).map(|i| [gid as u8 * 16 + i as u8; 32]).collect(),
        }
    }

    #[test]
    fn trustees_release_only_on_clean_reports() {
        let mut r = rng::seeded(2);
        let (trustees, manifest) = setup(&mut r);
        let expected = [(0, 1), (0, 2), (1, 3), (1, 4)];
        let good = vec![report(0, 1, 2, 1), report(0, 2, 2, 1), report(1, 3, 1, 2), report(1, 4, 1, 2)];
        assert_eq!(trustee_decide(&good, &expected, &manifest, &trustees), TrusteeVerdict::Release);

        let missing = &good[..3];
        assert_eq!(
            trustee_decide(missing, &expected, &manifest, &trustees),
            TrusteeVerdict::Destroy(DestroyReason::MissingReport { gid: 1, server: 4 })
        );

        let mut flagged = good.clone();
        flagged[2].traps_match = false;
        assert_eq!(
            trustee_decide(&flagged, &expected, &manifest, &trustees),
            TrusteeVerdict::Destroy(DestroyReason::TrapMismatch { gid: 1, server: 3 })
        );

        let mut counts = good.clone();
        counts[2].inners = 3;
        counts[3].inners = 3;
        counts[2].inner_digests.push([9; 32]);
        counts[3].inner_digests.push([9; 32]);
        assert_eq!(
            trustee_decide(&counts, &expected, &manifest, &trustees),
            TrusteeVerdict::Destroy(DestroyReason::CountMismatch { traps: 3, inners: 4, dummies: 0 })
        );

        let mut disagree = good.clone();
        disagree[1].traps = 1;
        assert_eq!(
            trustee_decide(&disagree, &expected, &manifest, &trustees),
            TrusteeVerdict::Destroy(DestroyReason::Inconsistent { gid: 0 })
        );

        let mut dup = good.clone();
        for rep in &mut dup[2..] {
            rep.inner_digests[0] = good[0].inner_digests[0];
        }
        assert_eq!(
            trustee_decide(&dup, &expected, &manifest, &trustees),
            TrusteeVerdict::Destroy(DestroyReason::GlobalDuplicate)
        );
    }

    #[test]
    fn dummies_offset_the_count_and_need_every_signature() {
        let mut r = rng::seeded(3);
        let (a, b) = (keygen::<G, _>(&mut r), keygen::<G, _>(&mut r));
        let trustees = [(100, a.public), (101, b.public)];
        let manifest = Manifest::<G>::sign(1, vec![[1; 32]], &[(100, a.secret), (101, b.secret)], &mut r);
        let reps = vec![report(0, 1, 2, 3)];
        assert_eq!(trustee_decide(&reps, &[(0, 1)], &manifest, &trustees), TrusteeVerdict::Release);
        let half = Manifest::<G>::sign(1, vec![[1; 32]], &[(100, a.secret)], &mut r);
        assert_eq!(
            trustee_decide(&reps, &[(0, 1)], &half, &trustees),
            TrusteeVerdict::Destroy(DestroyReason::BadManifest)
        );
    }

    #[test]
    fn report_bits() {
        let c = ctx();
        let mut r = rng::seeded(4);
        let t1 = TrapMessage::random(0, &mut r);
        let t2 = TrapMessage::random(0, &mut r);
        let expected = [t1.commitment(), t2.commitment()];
        let mine: Vec<Vec<u8>> =
            (0u8..50).map(|i| vec![i; 40]).filter(|b| c.route_key.route(b, 2) == 0).take(2).collect();
        let rep = build_exit_report(&c, 0, 5, &expected, &[t2, t1], &mine, 0);
        assert!(rep.traps_match && rep.inner_ok);
        assert_eq!((rep.traps, rep.inners), (2, 2));
        assert!(!build_exit_report(&c, 0, 5, &expected, &[t1], &mine, 0).traps_match);
        assert!(!build_exit_report(&c, 0, 5, &expected, &[t1, t1], &mine, 0).traps_match);
        let dup = vec![mine[0].clone(), mine[0].clone()];
        assert!(!build_exit_report(&c, 0, 5, &expected, &[t1, t2], &dup, 0).inner_ok);
        assert!(!build_exit_report(&c, 0, 5, &expected, &[t1, t2], &mine, 1).inner_ok);
        let theirs: Vec<Vec<u8>> =
            (0u8..50).map(|i| vec![i; 40]).filter(|b| c.route_key.route(b, 2) == 1).take(1).collect();
        assert!(!build_exit_report(&c, 0, 5, &expected, &[t1, t2], &theirs, 0).inner_ok);
    }

    #[test]
    fn release_strips_dummies() {
        let mut r = rng::seeded(5);
        let trustee = keygen::<G, _>(&mut r);
        let real = [b"alpha".to_vec(), b"beta".to_vec()];
        let dummy = b"pad".to_vec();
        let inners: Vec<Vec<u8>> = real
            .iter()
            .chain([&dummy])
            .map(|m| cca2_enc::<G, _>(&trustee.public, &encode_plain(m, 16).unwrap(), &mut r).to_bytes())
            .collect();
        let manifest = Manifest::<G>::sign(1, vec![commit(&dummy).0], &[], &mut r);
        let out = release_outputs(&trustee.secret, &inners, &manifest).unwrap();
        assert_eq!(out, real.to_vec());
    }
}
