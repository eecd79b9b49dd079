//! Whole rounds through the public API.

use atom_core::apps::{self, BulletinBoard};
use atom_core::crypto::{keygen, KeyPair, Permutation};
use atom_core::protocol::{Outcome, RoundTranscript, Variant};
use atom_core::rng;
use atom_core::simnet::{run_round, sample_messages, SimConfig};
use atom_core::topology::{build_square_network, route_of};
use atom_core::{TestGroup, P256};
use proptest::prelude::*;

fn sorted(mut v: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
    v.sort();
    v
}

#[test]
fn p256_rounds_publish_exactly_the_inputs() {
    let msgs = sample_messages(9, 40, 1);
    for variant in [Variant::Nizk, Variant::Trap] {
        let cfg =
            SimConfig { variant, messages: 9, groups: 3, k: 2, iterations: 2, msg_len: 40, ..SimConfig::default() };
        let res = run_round::<P256>(cfg, &msgs).unwrap();
        let want = if variant == Variant::Nizk { Outcome::Delivered } else { Outcome::Released };
        assert_eq!(res.outcome, want);
        assert_eq!(sorted(res.outputs.clone()), sorted(msgs.clone()));
        assert_eq!(BulletinBoard::publish(0, &res).unwrap().len(), 9);
    }
}

#[test]
fn outputs_do_not_follow_input_order() {
    let msgs = sample_messages(16, 16, 2);
    let cfg = SimConfig { messages: 16, groups: 4, iterations: 3, msg_len: 16, ..SimConfig::default() };
    let res = run_round::<TestGroup>(cfg, &msgs).unwrap();
    assert_eq!(sorted(res.outputs.clone()), sorted(msgs.clone()));
    assert_ne!(res.outputs, msgs);
}

#[test]
fn saved_transcript_replays_to_the_same_outcome() {
    let cfg = SimConfig { messages: 8, groups: 2, iterations: 2, msg_len: 16, ..SimConfig::default() };
    let res = run_round::<TestGroup>(cfg, &sample_messages(8, 16, 3)).unwrap();
    let back = RoundTranscript::from_jsonl(&res.transcript.to_jsonl()).unwrap();
    assert_eq!(back.replay().unwrap(), res.outcome);
    assert_eq!(back.head(), res.transcript.head());
}

#[test]
fn dialing_through_a_round_connects_every_pair() {
    let n = 6;
    let round = 4;
    let mut r = rng::seeded(4);
    let users: Vec<KeyPair<TestGroup>> = (0..n).map(|_| keygen(&mut r)).collect();
    let (posts, keys): (Vec<_>, Vec<_>) =
        (0..n).map(|i| apps::dial(&users[i], &users[(i + 1) % n].public, round, &mut r)).unzip();
    let cfg = SimConfig {
        messages: n,
        groups: 2,
        iterations: 2,
        round,
        msg_len: apps::dial_len::<TestGroup>(),
        ..SimConfig::default()
    };
    let res = run_round::<TestGroup>(cfg, &posts).unwrap();
    let board = BulletinBoard::publish(round, &res).unwrap();
    let boxes = apps::deliver(&board.posts, 3).unwrap();
    for (i, alice) in users.iter().enumerate() {
        let bob = &users[(i + 1) % n];
        let contacts = apps::open_mailbox(bob, &boxes, round);
        let found = contacts.iter().find(|c| c.peer == alice.public).expect("dial arrives");
        assert_eq!(found.key, keys[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn routing_is_a_bijection(w in 2usize..6, t in 1usize..5, seed in any::<u64>()) {
        let topo = build_square_network(w * w, w, t).unwrap();
        let mut r = rng::seeded(seed);
        let perms: Vec<Vec<Permutation>> =
            (0..t).map(|_| (0..w).map(|_| Permutation::random(w, &mut r)).collect()).collect();
        let mut ends: Vec<usize> = (0..w * w).map(|m| route_of(m, &perms, &topo).1).collect();
        ends.sort_unstable();
        prop_assert_eq!(ends, (0..w * w).collect::<Vec<_>>());
    }
}
