//! Identifying misbehaving users after a destroyed round.
//!
//! Entry groups reveal their round keys and every accepted submission is
//! opened. A user is blamed when the pair is not exactly one trap matching
//! its commitment and entry group plus one inner ciphertext, or when its
//! inner ciphertext also appears in another user's submission. Every user
//! sharing a duplicate is blamed: opened submissions cannot tell the author
//! from the copier.

use std::collections::{BTreeMap, BTreeSet};

use super::frame::{parse_frame, Framed};
use super::submit::Submission;
use super::UserId;
use crate::crypto::{dec, unembed};
use crate::group::PrimeGroup;
use crate::grouping::GroupId;

pub struct BlameInput<'a, G: PrimeGroup> {
    pub submissions: &'a [Submission<G>],
    /// Revealed entry-group secrets.
    pub group_secrets: &'a BTreeMap<GroupId, G::Scalar>,
}

fn open<G: PrimeGroup>(sk: &G::Scalar, sub: &Submission<G>) -> Option<Vec<Framed>> {
    sub.sealed
        .iter()
        .map(|s| {
            let ms = s.row.iter().map(|ct| dec::<G>(sk, ct).ok()).collect::<Option<Vec<_>>>()?;
            Some(unembed::<G>(&ms).map(|b| parse_frame::<G>(&b)).unwrap_or(Framed::Malformed))
        })
        .collect()
}

/// Blamed users, ascending.
pub fn blame<G: PrimeGroup>(input: &BlameInput<'_, G>) -> Vec<UserId> {
    let mut blamed = BTreeSet::new();
    let mut senders: BTreeMap<Vec<u8>, BTreeSet<UserId>> = BTreeMap::new();
    for sub in input.submissions {
        let Some(frames) = input.group_secrets.get(&sub.gid).and_then(|sk| open(sk, sub)) else {
            blamed.insert(sub.user);
            continue;
        };
        let traps: Vec<_> =
            frames.iter().filter_map(|f| if let Framed::Trap(t) = f { Some(*t) } else { None }).collect();
        let inners: Vec<_> =
            frames.iter().filter_map(|f| if let Framed::Inner(b) = f { Some(b) } else { None }).collect();
        let trap_ok = matches!(traps[..], [t] if t.gid == sub.gid && sub.commitment == Some(t.commitment()));
        if !trap_ok || inners.len() != 1 {
            blamed.insert(sub.user);
        }
        for inner in inners {
            senders.entry(inner.clone()).or_default().insert(sub.user);
        }
    }
    for users in senders.values().filter(|u| u.len() > 1) {
        blamed.extend(users);
    }
    blamed.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, rerandomize};
    use crate::group::P256;
    use crate::protocol::frame::RouteKey;
    use crate::protocol::submit::{client_submit_trap, Sealed};
    use crate::protocol::{RoundContext, Variant};
    use crate::rng;

    type G = P256;

    #[test]
    fn honest_users_are_never_blamed_and_cheaters_are() {
        let mut r = rng::seeded(1);
        let ctx = RoundContext { round: 0, variant: Variant::Trap, msg_len: 8, groups: 2, route_key: RouteKey(1) };
        let (g0, g1, trustee) = (keygen::<G, _>(&mut r), keygen::<G, _>(&mut r), keygen::<G, _>(&mut r));
        let mut subs = Vec::new();
        for u in 0..4 {
            let (gid, pk) = if u % 2 == 0 { (0, g0.public) } else { (1, g1.public) };
            subs.push(client_submit_trap::<G, _>(&ctx, u, gid, &pk, &trustee.public, b"hey", &mut r).unwrap().0);
        }
        let secrets: BTreeMap<GroupId, _> = [(0, g0.secret), (1, g1.secret)].into();
        assert!(blame(&BlameInput { submissions: &subs, group_secrets: &secrets }).is_empty());

        // user 4 sends two inner ciphertexts: its trap slot holds a copy of user 0's inner
        let (mut bad, _) = client_submit_trap::<G, _>(&ctx, 4, 0, &g0.public, &trustee.public, b"x", &mut r).unwrap();
        let victim_inner = subs[0]
            .sealed
            .iter()
            .find(|s| {
                matches!(
                    open(&g0.secret, &Submission { sealed: vec![(*s).clone()], ..subs[0].clone() }).unwrap()[0],
                    Framed::Inner(_)
                )
            })
            .unwrap()
            .clone();
        let copied = Sealed {
            row: victim_inner.row.iter().map(|ct| rerandomize::<G, _>(&g0.public, ct, &mut r).unwrap()).collect(),
            proofs: victim_inner.proofs.clone(),
        };
        bad.sealed[0] = copied.clone();
        // user 5 copies the victim's inner and keeps a valid trap
        let (mut copier, _) =
            client_submit_trap::<G, _>(&ctx, 5, 0, &g0.public, &trustee.public, b"y", &mut r).unwrap();
        let idx = copier
            .sealed
            .iter()
            .position(|s| {
                matches!(
                    open(&g0.secret, &Submission { sealed: vec![s.clone()], ..copier.clone() }).unwrap()[0],
                    Framed::Inner(_)
                )
            })
            .unwrap();
        copier.sealed[idx] = copied;
        subs.push(bad);
        subs.push(copier);
        // the victim cannot be told apart from its copiers
        assert_eq!(blame(&BlameInput { submissions: &subs, group_secrets: &secrets }), vec![0, 4, 5]);
    }
}
