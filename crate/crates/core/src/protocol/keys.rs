//! Per-round key material and member scheduling.
//!
//! Servers keep a long-term signing key from the registry and draw a fresh
//! round key each round, so group keys never repeat across rounds. Anytrust
//! groups multiply member round keys; groups with `h > 1` run a DKG and any
//! `k − (h − 1)` members can peel. Each member's secret is escrowed to every
//! buddy group so a replacement server can take over a crashed position.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::mix::{Member, Stage};
use super::ProtocolError;
use crate::crypto::{compose_group_key, keygen, KeyPair};
use crate::group::PrimeGroup;
use crate::grouping::{GroupDescriptor, GroupId, GroupKey, ServerId};
use crate::rng;
use crate::threshold::{
    dkg, escrow, interpolate, recover_share, weighted_share, weighted_verification, EscrowPacket, Share,
};

#[derive(Clone, Debug)]
pub struct ServerKeys<G: PrimeGroup> {
    pub id: ServerId,
    pub signing: KeyPair<G>,
    pub round: KeyPair<G>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error(
    "group {gid} cannot schedule {need} members: {missing} positions lost with no buddy group able to restore them"
)]
pub struct Unrecoverable {
    pub gid: GroupId,
    pub need: usize,
    pub missing: usize,
}

#[derive(Clone, Debug)]
pub struct RoundKeys<G: PrimeGroup> {
    pub round: u64,
    pub servers: BTreeMap<ServerId, ServerKeys<G>>,
    /// Descriptors with `key` replaced by this round's key.
    pub groups: Vec<GroupDescriptor<G>>,
    /// `shares[gid][pos]`, index `pos + 1`. For anytrust groups the value is
    /// the member's round secret.
    shares: Vec<Vec<Share<G>>>,
    escrows: Escrows<G>,
}

/// `(gid, pos) → [(buddy, packet)]`.
type Escrows<G> = BTreeMap<(GroupId, usize), Vec<(GroupId, EscrowPacket<G>)>>;

impl<G: PrimeGroup> RoundKeys<G> {
    pub fn setup(
        signing: &BTreeMap<ServerId, KeyPair<G>>,
        groups: &[GroupDescriptor<G>],
        round: u64,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        let servers: BTreeMap<ServerId, ServerKeys<G>> = signing
            .iter()
            .map(|(&id, kp)| {
                let mut r = rng::stream(seed, round, &format!("server/{id}/round-key"));
                (id, ServerKeys { id, signing: *kp, round: keygen::<G, _>(&mut r) })
            })
            .collect();
        let mut out_groups = Vec::with_capacity(groups.len());
        let mut shares = Vec::with_capacity(groups.len());
        for g in groups {
            let mut desc = g.clone();
            let k = g.members.len();
            if g.h <= 1 {
                let mut pks = Vec::with_capacity(k);
                let mut ss = Vec::with_capacity(k);
                for (pos, id) in g.members.iter().enumerate() {
                    let keys = servers.get(id).ok_or(ProtocolError::MissingKey(*id))?;
                    pks.push(keys.round.public);
                    ss.push(Share { index: pos as u32 + 1, value: keys.round.secret });
                }
                desc.key = GroupKey::Anytrust(compose_group_key::<G>(&pks)?);
                shares.push(ss);
            } else {
                let t = k.saturating_sub(g.h - 1).max(1);
                let mut r = rng::stream(seed, round, &format!("group/{}/dkg", g.gid));
                let tk = dkg::<G, _>(k, t, &mut r)?;
                desc.key = GroupKey::Threshold { pk: tk.pk, threshold: t, verification: tk.verification.clone() };
                shares.push(tk.shares);
            }
            out_groups.push(desc);
        }
        let mut escrows: Escrows<G> = BTreeMap::new();
        for g in &out_groups {
            let mut r = rng::stream(seed, round, &format!("group/{}/escrow", g.gid));
            for (pos, share) in shares[g.gid as usize].iter().enumerate() {
                for &b in &g.buddies {
                    let buddy = out_groups.get(b as usize).ok_or(ProtocolError::UnknownGroup(b))?;
                    let packet = escrow::<G, _>(share, buddy.k(), buddy.threshold(), &mut r)?;
                    escrows.entry((g.gid, pos)).or_default().push((b, packet));
                }
            }
        }
        Ok(Self { round, servers, groups: out_groups, shares, escrows })
    }

    pub fn group(&self, gid: GroupId) -> Result<&GroupDescriptor<G>, ProtocolError> {
        self.groups.get(gid as usize).ok_or(ProtocolError::UnknownGroup(gid))
    }

    pub fn pk(&self, gid: GroupId) -> Result<G::Element, ProtocolError> {
        Ok(*self.group(gid)?.key.pk())
    }

    /// The group's full secret. Only blame and tests use this; it stands for
    /// the entry group revealing its keys.
    pub fn group_secret(&self, gid: GroupId) -> Result<G::Scalar, ProtocolError> {
        let g = self.group(gid)?;
        let shares = &self.shares[gid as usize];
        Ok(match g.key {
            GroupKey::Anytrust(_) => shares.iter().fold(G::scalar_zero(), |acc, s| acc + s.value),
            GroupKey::Threshold { threshold, .. } => interpolate(&shares[..threshold]),
        })
    }

    /// Picks who peels for `gid` given which servers are up. Missing
    /// positions are restored from a buddy group with enough live members;
    /// the restored position is run by the lowest-id live server outside the
    /// group. Returns the stage and how many positions were restored.
    pub fn schedule(&self, gid: GroupId, alive: &BTreeSet<ServerId>) -> Result<(Stage<G>, usize), Unrecoverable> {
        let g = &self.groups[gid as usize];
        let need = g.threshold();
        let mut holders: Vec<(usize, ServerId, Share<G>)> = g
            .members
            .iter()
            .enumerate()
            .filter(|(_, id)| alive.contains(id))
            .map(|(pos, id)| (pos, *id, self.shares[gid as usize][pos]))
            .take(need)
            .collect();
        let mut restored = 0;
        if holders.len() < need {
            let mut spare = alive.iter().filter(|id| !g.members.contains(id)).copied();
            for pos in 0..g.k() {
                if holders.len() == need {
                    break;
                }
                if holders.iter().any(|(p, ..)| *p == pos) || alive.contains(&g.members[pos]) {
                    continue;
                }
                let Some(share) = self.restore(gid, pos, alive) else { continue };
                let Some(server) = spare.next() else { break };
                holders.push((pos, server, share));
                restored += 1;
            }
        }
        if holders.len() < need {
            return Err(Unrecoverable { gid, need, missing: need - holders.len() });
        }
        holders.sort_by_key(|(pos, ..)| *pos);
        let members = match &g.key {
            GroupKey::Anytrust(_) => holders
                .iter()
                .map(|(pos, server, s)| Member {
                    server: *server,
                    position: *pos,
                    peel: s.value,
                    proof_pk: G::pow_g(&s.value),
                })
                .collect(),
            GroupKey::Threshold { verification, .. } => {
                let idx: Vec<u32> = holders.iter().map(|(_, _, s)| s.index).collect();
                holders
                    .iter()
                    .map(|(pos, server, s)| Member {
                        server: *server,
                        position: *pos,
                        peel: weighted_share(s, &idx).expect("distinct indices"),
                        proof_pk: weighted_verification::<G>(verification, s.index, &idx).expect("index in range"),
                    })
                    .collect()
            }
        };
        Ok((Stage { gid, pk: *g.key.pk(), members }, restored))
    }

    fn restore(&self, gid: GroupId, pos: usize, alive: &BTreeSet<ServerId>) -> Option<Share<G>> {
        self.escrows.get(&(gid, pos))?.iter().find_map(|(b, packet)| {
            let buddy = &self.groups[*b as usize];
            let subs: Vec<Share<G>> = buddy
                .members
                .iter()
                .zip(&packet.sub_shares)
                .filter(|(id, _)| alive.contains(id))
                .map(|(_, s)| *s)
                .collect();
            recover_share(packet, &subs).ok()
        })
    }
}
