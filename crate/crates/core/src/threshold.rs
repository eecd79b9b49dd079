//! Threshold ElGamal for many-trust groups.
//!
//! Keys come from a dealer-less DKG: every member deals a Feldman-verifiable
//! Shamir sharing of a random secret, and each member's key share is the sum
//! of what it received. Member `j` (0-based) holds the share at `x = j + 1`.
//! Shares can be escrowed to a buddy group as Feldman sub-sharings and
//! reconstructed there when the member disappears.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::crypto::Ciphertext;
use crate::group::{lagrange_at_zero, ElementOps, PrimeGroup};
use crate::zk::reenc::{Dleq, DleqProof};
use crate::zk::Transcript;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThresholdError {
    #[error("dealer {dealer} sent a share that fails its commitments")]
    ComplaintAbort { dealer: u32 },
    #[error("{have} shares available, {need} required")]
    InsufficientShares { have: usize, need: usize },
    #[error("partial decryption from member {index} is invalid")]
    InvalidPartial { index: u32 },
    #[error("sub-share {index} does not match the escrow commitments")]
    InvalidSubShare { index: u32 },
    #[error("threshold {t} is not within 1..={n}")]
    BadParameters { t: usize, n: usize },
    #[error("unexpected message from member {0}")]
    UnexpectedMessage(u32),
}

/// A Shamir share `f(index)` with 1-based `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share<G: PrimeGroup> {
    pub index: u32,
    pub value: G::Scalar,
}

/// Feldman commitments `g^{a_0}, …, g^{a_{t-1}}` to a sharing polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commitments<G: PrimeGroup>(pub Vec<G::Element>);

impl<G: PrimeGroup> Commitments<G> {
    /// `g^{f(x)}` computed from the commitments alone.
    pub fn evaluate(&self, x: u32) -> G::Element {
        let x = G::scalar_from_u64(u64::from(x));
        let mut acc = G::identity();
        for c in self.0.iter().rev() {
            acc = acc.pow(&x) * *c;
        }
        acc
    }

    pub fn verify(&self, share: &Share<G>) -> bool {
        G::pow_g(&share.value) == self.evaluate(share.index)
    }

    pub fn constant(&self) -> G::Element {
        self.0[0]
    }
}

fn eval_poly<G: PrimeGroup>(coeffs: &[G::Scalar], x: u32) -> G::Scalar {
    let x = G::scalar_from_u64(u64::from(x));
    coeffs.iter().rev().fold(G::scalar_zero(), |acc, a| acc * x + *a)
}

/// Feldman sharing of `secret` into `n` shares with threshold `t`.
pub fn deal<G: PrimeGroup, R: RngCore + ?Sized>(
    secret: &G::Scalar,
    t: usize,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Share<G>>, Commitments<G>), ThresholdError> {
    if t == 0 || t > n {
        return Err(ThresholdError::BadParameters { t, n });
    }
    let mut coeffs = vec![*secret];
    coeffs.extend((1..t).map(|_| G::random_scalar(rng)));
    let shares = (1..=n as u32).map(|i| Share { index: i, value: eval_poly::<G>(&coeffs, i) }).collect();
    Ok((shares, Commitments(coeffs.iter().map(G::pow_g).collect())))
}

/// Lagrange interpolation of the shared secret at zero.
pub fn interpolate<G: PrimeGroup>(shares: &[Share<G>]) -> G::Scalar {
    let idx: Vec<u32> = shares.iter().map(|s| s.index).collect();
    shares.iter().fold(G::scalar_zero(), |acc, s| {
        acc + lagrange_at_zero::<G>(s.index, &idx).expect("distinct indices") * s.value
    })
}

/// One member's view of a finished DKG.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemberKey<G: PrimeGroup> {
    pub share: Share<G>,
    pub pk: G::Element,
    pub threshold: usize,
    /// `g^{share_j}` for every member position `j`.
    pub verification: Vec<G::Element>,
}

/// Public outcome of a DKG plus every member's share. A deployment never
/// gathers the shares in one place; the simulator does so for bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdKey<G: PrimeGroup> {
    pub pk: G::Element,
    pub threshold: usize,
    pub verification: Vec<G::Element>,
    pub shares: Vec<Share<G>>,
}

impl<G: PrimeGroup> ThresholdKey<G> {
    pub fn member(&self, position: usize) -> MemberKey<G> {
        MemberKey {
            share: self.shares[position],
            pk: self.pk,
            threshold: self.threshold,
            verification: self.verification.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DkgMessage<G: PrimeGroup> {
    /// Point-to-point: `dealer`'s share for `to`, with its commitments.
    Deal { dealer: u32, to: u32, commitments: Commitments<G>, share: Share<G> },
    /// Broadcast: `from` rejects `dealer`'s share.
    Complaint { from: u32, dealer: u32 },
    /// Broadcast: `from` holds valid shares from every dealer.
    Ack { from: u32 },
}

impl<G: PrimeGroup> DkgMessage<G> {
    /// `None` for broadcasts.
    pub fn recipient(&self) -> Option<u32> {
        match self {
            Self::Deal { to, .. } => Some(*to),
            _ => None,
        }
    }
}

impl<G: PrimeGroup> Wire for DkgMessage<G> {
    fn encode(&self, w: &mut Writer) {
        match self {
            Self::Deal { dealer, to, commitments, share } => {
                w.u8(0).u32(*dealer).u32(*to).elements::<G>(&commitments.0);
                w.u32(share.index).scalar::<G>(&share.value);
            }
            Self::Complaint { from, dealer } => {
                w.u8(1).u32(*from).u32(*dealer);
            }
            Self::Ack { from } => {
                w.u8(2).u32(*from);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            0 => Self::Deal {
                dealer: r.u32()?,
                to: r.u32()?,
                commitments: Commitments(r.elements::<G>()?),
                share: Share { index: r.u32()?, value: r.scalar::<G>()? },
            },
            1 => Self::Complaint { from: r.u32()?, dealer: r.u32()? },
            2 => Self::Ack { from: r.u32()? },
            _ => return Err(DecodeError::Invalid("dkg message tag")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Phase<G: PrimeGroup> {
    Dealing,
    Acked,
    Done(MemberKey<G>),
    Aborted(u32),
}

/// One member's DKG state machine. Members are numbered `0..n`.
#[derive(Clone, Debug)]
pub struct DkgMember<G: PrimeGroup> {
    index: u32,
    n: usize,
    t: usize,
    received: BTreeMap<u32, (Commitments<G>, Share<G>)>,
    acks: BTreeSet<u32>,
    phase: Phase<G>,
}

impl<G: PrimeGroup> DkgMember<G> {
    /// Starts the protocol and returns this member's deals, one per member
    /// including itself.
    pub fn start<R: RngCore + ?Sized>(
        index: u32,
        n: usize,
        t: usize,
        rng: &mut R,
    ) -> Result<(Self, Vec<DkgMessage<G>>), ThresholdError> {
        let (shares, commitments) = deal::<G, _>(&G::random_scalar(rng), t, n, rng)?;
        let deals = shares
            .into_iter()
            .enumerate()
            .map(|(to, share)| DkgMessage::Deal {
                dealer: index,
                to: to as u32,
                commitments: commitments.clone(),
                share,
            })
            .collect();
        let me = Self { index, n, t, received: BTreeMap::new(), acks: BTreeSet::new(), phase: Phase::Dealing };
        Ok((me, deals))
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn key(&self) -> Option<&MemberKey<G>> {
        match &self.phase {
            Phase::Done(k) => Some(k),
            _ => None,
        }
    }

    /// Feeds one message; returns the broadcasts it triggers.
    pub fn deliver(&mut self, msg: &DkgMessage<G>) -> Result<Vec<DkgMessage<G>>, ThresholdError> {
        if let Phase::Aborted(dealer) = self.phase {
            return Err(ThresholdError::ComplaintAbort { dealer });
        }
        match msg {
            DkgMessage::Deal { dealer, to, commitments, share } => {
                if *to != self.index || *dealer as usize >= self.n || self.received.contains_key(dealer) {
                    return Err(ThresholdError::UnexpectedMessage(*dealer));
                }
                let well_formed = commitments.0.len() == self.t && share.index == self.index + 1;
                if !well_formed || !commitments.verify(share) {
                    self.phase = Phase::Aborted(*dealer);
                    return Ok(vec![DkgMessage::Complaint { from: self.index, dealer: *dealer }]);
                }
                self.received.insert(*dealer, (commitments.clone(), *share));
                if self.received.len() == self.n {
                    self.phase = Phase::Acked;
                    return Ok(vec![DkgMessage::Ack { from: self.index }]);
                }
                Ok(Vec::new())
            }
            DkgMessage::Complaint { dealer, .. } => {
                self.phase = Phase::Aborted(*dealer);
                Err(ThresholdError::ComplaintAbort { dealer: *dealer })
            }
            DkgMessage::Ack { from } => {
                if *from as usize >= self.n {
                    return Err(ThresholdError::UnexpectedMessage(*from));
                }
                self.acks.insert(*from);
                if self.acks.len() == self.n && self.phase == Phase::Acked {
                    self.phase = Phase::Done(self.finish());
                }
                Ok(Vec::new())
            }
        }
    }

    fn finish(&self) -> MemberKey<G> {
        let value = self.received.values().fold(G::scalar_zero(), |acc, (_, s)| acc + s.value);
        let pk = self.received.values().fold(G::identity(), |acc, (c, _)| acc * c.constant());
        let verification = (1..=self.n as u32)
            .map(|x| self.received.values().fold(G::identity(), |acc, (c, _)| acc * c.evaluate(x)))
            .collect();
        MemberKey { share: Share { index: self.index + 1, value }, pk, threshold: self.t, verification }
    }
}

/// Test hook: rewrites one dealt share before delivery.
pub type DealTamper<'a, G> = &'a dyn Fn(&mut DkgMessage<G>);

/// Drives `n` members to completion over a reliable in-order channel.
pub fn dkg<G: PrimeGroup, R: RngCore + ?Sized>(
    n: usize,
    t: usize,
    rng: &mut R,
) -> Result<ThresholdKey<G>, ThresholdError> {
    dkg_with_tamper(n, t, rng, &|_| {})
}

pub fn dkg_with_tamper<G: PrimeGroup, R: RngCore + ?Sized>(
    n: usize,
    t: usize,
    rng: &mut R,
    tamper: DealTamper<'_, G>,
) -> Result<ThresholdKey<G>, ThresholdError> {
    let mut members = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    for i in 0..n as u32 {
        let (m, deals) = DkgMember::<G>::start(i, n, t, rng)?;
        members.push(m);
        queue.extend(deals);
    }
    while let Some(mut msg) = queue.pop_front() {
        tamper(&mut msg);
        match msg.recipient() {
            Some(to) => queue.extend(members[to as usize].deliver(&msg)?),
            None => {
                for m in &mut members {
                    queue.extend(m.deliver(&msg)?);
                }
            }
        }
    }
    let keys: Vec<MemberKey<G>> = members.iter().map(|m| m.key().cloned().expect("all members finished")).collect();
    Ok(ThresholdKey {
        pk: keys[0].pk,
        threshold: t,
        verification: keys[0].verification.clone(),
        shares: keys.iter().map(|k| k.share).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartialDecryption<G: PrimeGroup> {
    pub index: u32,
    /// `R^{share}`.
    pub value: G::Element,
    pub proof: DleqProof<G>,
}

fn partial_transcript<G: PrimeGroup>(index: u32, r: &G::Element) -> Transcript {
    let mut t = Transcript::new("atom/partial-decryption");
    t.append(b"group", G::NAME.as_bytes());
    t.append_u64(b"index", u64::from(index));
    t.append_element::<G>(b"R", r);
    t
}

pub fn partial_decrypt<G: PrimeGroup, R: RngCore + ?Sized>(
    share: &Share<G>,
    ct: &Ciphertext<G>,
    rng: &mut R,
) -> PartialDecryption<G> {
    let value = ct.r.pow(&share.value);
    let vk = G::pow_g(&share.value);
    let mut t = partial_transcript::<G>(share.index, &ct.r);
    let proof = Dleq::<G> { base: &ct.r, h1: &vk, h2: &value }.prove(&share.value, &mut t, rng);
    PartialDecryption { index: share.index, value, proof }
}

pub fn verify_partial<G: PrimeGroup>(
    verification: &[G::Element],
    ct: &Ciphertext<G>,
    p: &PartialDecryption<G>,
) -> bool {
    let Some(vk) = (p.index as usize).checked_sub(1).and_then(|j| verification.get(j)) else {
        return false;
    };
    let mut t = partial_transcript::<G>(p.index, &ct.r);
    Dleq::<G> { base: &ct.r, h1: vk, h2: &p.value }.verify(&p.proof, &mut t)
}

/// Verifies every partial and combines the first `threshold` distinct ones.
pub fn combine<G: PrimeGroup>(
    verification: &[G::Element],
    threshold: usize,
    partials: &[PartialDecryption<G>],
    ct: &Ciphertext<G>,
) -> Result<G::Element, ThresholdError> {
    let mut chosen: BTreeMap<u32, G::Element> = BTreeMap::new();
    for p in partials {
        if !verify_partial(verification, ct, p) {
            return Err(ThresholdError::InvalidPartial { index: p.index });
        }
        chosen.entry(p.index).or_insert(p.value);
    }
    if chosen.len() < threshold {
        return Err(ThresholdError::InsufficientShares { have: chosen.len(), need: threshold });
    }
    let idx: Vec<u32> = chosen.keys().copied().take(threshold).collect();
    let shared = idx
        .iter()
        .fold(G::identity(), |acc, i| acc * chosen[i].pow(&lagrange_at_zero::<G>(*i, &idx).expect("distinct indices")));
    Ok(ct.c / shared)
}

/// Exponent a scheduled member peels with so that the `scheduled` set
/// jointly removes the whole group key: `λ_j · share_j`.
pub fn weighted_share<G: PrimeGroup>(share: &Share<G>, scheduled: &[u32]) -> Option<G::Scalar> {
    lagrange_at_zero::<G>(share.index, scheduled).map(|l| l * share.value)
}

/// Public key matching [`weighted_share`]: `VK_j^{λ_j}`.
pub fn weighted_verification<G: PrimeGroup>(
    verification: &[G::Element],
    index: u32,
    scheduled: &[u32],
) -> Option<G::Element> {
    let vk = verification.get((index as usize).checked_sub(1)?)?;
    lagrange_at_zero::<G>(index, scheduled).map(|l| vk.pow(&l))
}

/// A member share split among the members of a buddy group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EscrowPacket<G: PrimeGroup> {
    /// Index of the escrowed share in its own group.
    pub owner: u32,
    pub threshold: usize,
    /// `sub_shares[i]` goes to buddy member `i`.
    pub sub_shares: Vec<Share<G>>,
    pub commitments: Commitments<G>,
}

pub fn escrow<G: PrimeGroup, R: RngCore + ?Sized>(
    share: &Share<G>,
    buddy_members: usize,
    t_b: usize,
    rng: &mut R,
) -> Result<EscrowPacket<G>, ThresholdError> {
    let (sub_shares, commitments) = deal::<G, _>(&share.value, t_b, buddy_members, rng)?;
    Ok(EscrowPacket { owner: share.index, threshold: t_b, sub_shares, commitments })
}

/// Rebuilds the escrowed share from buddy sub-shares, checking each against
/// the packet's commitments.
pub fn recover_share<G: PrimeGroup>(
    packet: &EscrowPacket<G>,
    sub_shares: &[Share<G>],
) -> Result<Share<G>, ThresholdError> {
    let mut distinct: BTreeMap<u32, Share<G>> = BTreeMap::new();
    for s in sub_shares {
        if !packet.commitments.verify(s) {
            return Err(ThresholdError::InvalidSubShare { index: s.index });
        }
        distinct.insert(s.index, *s);
    }
    if distinct.len() < packet.threshold {
        return Err(ThresholdError::InsufficientShares { have: distinct.len(), need: packet.threshold });
    }
    let chosen: Vec<Share<G>> = distinct.into_values().take(packet.threshold).collect();
    Ok(Share { index: packet.owner, value: interpolate(&chosen) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{enc, reenc};
    use crate::group::{TestGroup, P256};
    use crate::rng;

    fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == size)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
            .collect()
    }

    #[test]
    fn five_members_any_four_decrypt() {
        let mut r = rng::seeded(1);
        let key = dkg::<P256, _>(5, 4, &mut r).unwrap();
        let m = P256::random_element(&mut r);
        let ct = enc::<P256, _>(&key.pk, &m, &mut r);
        for set in subsets(5, 4) {
            let partials: Vec<_> = set.iter().map(|&j| partial_decrypt(&key.shares[j], &ct, &mut r)).collect();
            assert_eq!(combine(&key.verification, 4, &partials, &ct).unwrap(), m);
        }
        let three: Vec<_> = (0..3).map(|j| partial_decrypt(&key.shares[j], &ct, &mut r)).collect();
        assert_eq!(
            combine(&key.verification, 4, &three, &ct),
            Err(ThresholdError::InsufficientShares { have: 3, need: 4 })
        );
    }

    #[test]
    fn single_member_degenerates_to_keygen() {
        let mut r = rng::seeded(2);
        let key = dkg::<P256, _>(1, 1, &mut r).unwrap();
        assert_eq!(key.pk, P256::pow_g(&key.shares[0].value));
        let m = P256::random_element(&mut r);
        let ct = enc::<P256, _>(&key.pk, &m, &mut r);
        assert_eq!(crate::crypto::dec(&key.shares[0].value, &ct).unwrap(), m);
    }

    #[test]
    fn inconsistent_deal_names_the_dealer() {
        let mut r = rng::seeded(3);
        let tamper = |msg: &mut DkgMessage<P256>| {
            if let DkgMessage::Deal { dealer: 2, to: 0, share, .. } = msg {
                share.value += P256::scalar_one();
            }
        };
        assert_eq!(
            dkg_with_tamper::<P256, _>(4, 3, &mut r, &tamper),
            Err(ThresholdError::ComplaintAbort { dealer: 2 })
        );
    }

    #[test]
    fn verification_keys_match_shares_and_no_member_knows_the_secret() {
        let mut r = rng::seeded(4);
        let key = dkg::<TestGroup, _>(4, 3, &mut r).unwrap();
        for (j, s) in key.shares.iter().enumerate() {
            assert_eq!(key.verification[j], TestGroup::pow_g(&s.value));
            assert_ne!(TestGroup::pow_g(&s.value), key.pk);
        }
        assert_eq!(TestGroup::pow_g(&interpolate(&key.shares[..3])), key.pk);
    }

    #[test]
    fn exhaustive_threshold_exactness() {
        let mut r = rng::seeded(5);
        for k in 1..=6usize {
            for t in 1..=k {
                let key = dkg::<TestGroup, _>(k, t, &mut r).unwrap();
                let m = TestGroup::random_element(&mut r);
                let ct = enc::<TestGroup, _>(&key.pk, &m, &mut r);
                let partials: Vec<_> = key.shares.iter().map(|s| partial_decrypt(s, &ct, &mut r)).collect();
                for set in subsets(k, t) {
                    let ps: Vec<_> = set.iter().map(|&j| partials[j]).collect();
                    assert_eq!(combine(&key.verification, t, &ps, &ct).unwrap(), m, "k={k} t={t} {set:?}");
                }
                if t > 1 {
                    for set in subsets(k, t - 1) {
                        let ps: Vec<_> = set.iter().map(|&j| partials[j]).collect();
                        assert!(combine(&key.verification, t, &ps, &ct).is_err());
                        // colluders interpolating their own shares miss the secret
                        let shares: Vec<_> = set.iter().map(|&j| key.shares[j]).collect();
                        assert_ne!(TestGroup::pow_g(&interpolate(&shares)), key.pk, "k={k} t={t} {set:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn corrupted_partial_is_identified() {
        let mut r = rng::seeded(6);
        let key = dkg::<P256, _>(5, 4, &mut r).unwrap();
        let ct = enc::<P256, _>(&key.pk, &P256::random_element(&mut r), &mut r);
        let mut partials: Vec<_> = (0..4).map(|j| partial_decrypt(&key.shares[j], &ct, &mut r)).collect();
        partials[2].value = partials[2].value * P256::generator();
        assert_eq!(combine(&key.verification, 4, &partials, &ct), Err(ThresholdError::InvalidPartial { index: 3 }));
    }

    #[test]
    fn scheduled_members_peel_with_lagrange_weights() {
        let mut r = rng::seeded(7);
        let key = dkg::<P256, _>(5, 4, &mut r).unwrap();
        let next = crate::crypto::keygen::<P256, _>(&mut r);
        let m = P256::random_element(&mut r);
        let ct = enc::<P256, _>(&key.pk, &m, &mut r);
        let scheduled = [1u32, 3, 4, 5];
        let mut cur = ct;
        for &i in &scheduled {
            let x = weighted_share(&key.shares[i as usize - 1], &scheduled).unwrap();
            assert_eq!(P256::pow_g(&x), weighted_verification::<P256>(&key.verification, i, &scheduled).unwrap());
            cur = reenc(&x, Some(&next.public), &cur, &mut r);
        }
        assert_eq!(crate::crypto::dec(&next.secret, &cur.cleared()).unwrap(), m);
    }

    #[test]
    fn escrow_round_trip_and_use() {
        let mut r = rng::seeded(8);
        let key = dkg::<P256, _>(3, 2, &mut r).unwrap();
        let packet = escrow(&key.shares[1], 3, 2, &mut r).unwrap();
        for set in subsets(3, 2) {
            let subs: Vec<_> = set.iter().map(|&i| packet.sub_shares[i]).collect();
            assert_eq!(recover_share(&packet, &subs).unwrap(), key.shares[1]);
        }
        assert_eq!(
            recover_share(&packet, &packet.sub_shares[..1]),
            Err(ThresholdError::InsufficientShares { have: 1, need: 2 })
        );
        let recovered = recover_share(&packet, &packet.sub_shares[1..]).unwrap();
        let m = P256::random_element(&mut r);
        let ct = enc::<P256, _>(&key.pk, &m, &mut r);
        let ps = vec![partial_decrypt(&key.shares[0], &ct, &mut r), partial_decrypt(&recovered, &ct, &mut r)];
        assert_eq!(combine(&key.verification, 2, &ps, &ct).unwrap(), m);
    }

    #[test]
    fn mixed_escrows_fail_commitment_checks() {
        let mut r = rng::seeded(9);
        let key = dkg::<P256, _>(3, 2, &mut r).unwrap();
        let a = escrow(&key.shares[0], 3, 2, &mut r).unwrap();
        let b = escrow(&key.shares[1], 3, 2, &mut r).unwrap();
        let mixed = vec![a.sub_shares[0], b.sub_shares[1]];
        assert_eq!(recover_share(&a, &mixed), Err(ThresholdError::InvalidSubShare { index: 2 }));
    }

    #[test]
    fn dkg_messages_round_trip() {
        let mut r = rng::seeded(10);
        let (_, deals) = DkgMember::<P256>::start(0, 3, 2, &mut r).unwrap();
        for msg in deals.into_iter().chain([DkgMessage::Complaint { from: 1, dealer: 2 }, DkgMessage::Ack { from: 1 }])
        {
            assert_eq!(DkgMessage::<P256>::from_bytes(&msg.to_bytes()).unwrap(), msg);
        }
    }

    #[test]
    fn bad_parameters() {
        let mut r = rng::seeded(11);
        assert_eq!(dkg::<TestGroup, _>(3, 4, &mut r), Err(ThresholdError::BadParameters { t: 4, n: 3 }));
        assert_eq!(dkg::<TestGroup, _>(3, 0, &mut r), Err(ThresholdError::BadParameters { t: 0, n: 3 }));
    }
}
