//! Core of a horizontally scaling anonymous messaging system: servers form
//! small groups, groups form a square mixing network, and each group
//! shuffles and re-encrypts its batch before splitting it to the next layer.
//!
//! The modules build on each other in this order: [`group`] and [`crypto`]
//! (ElGamal with out-of-order peeling), [`zk`] (proofs), [`grouping`],
//! [`topology`] and [`threshold`], then [`protocol`] (one group step, the
//! NIZK and trap variants, blame), [`simnet`] (a deterministic whole-round
//! simulator) and [`apps`].

pub mod apps;
pub mod codec;
pub mod crypto;
pub mod group;
pub mod grouping;
pub mod protocol;
pub mod rng;
pub mod simnet;
pub mod threshold;
pub mod topology;
pub mod zk;

pub use crate::crypto::{Ciphertext, Commitment, KeyPair};
pub use crate::group::{PrimeGroup, TestGroup, TinyGroup, P256};
pub use crate::grouping::{GroupDescriptor, GroupId, ServerId};
pub use crate::protocol::{Outcome, RoundTranscript, Submission, Variant};
pub use crate::simnet::{RoundMetrics, RoundResult, SimConfig};
pub use crate::topology::Topology;
