//! Deterministic discrete-event simulation of whole rounds.
//!
//! Every actor runs the real protocol code from [`crate::protocol`]; simulated
//! time comes from a per-operation cost table and a two-cluster latency
//! model, not from the host clock. A round is a pure function of its
//! [`SimConfig`] and submissions.

mod engine;
mod round;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{keygen, KeyPair};
use crate::group::PrimeGroup;
use crate::grouping::{
    assign_buddies, form_groups, groups_from_members, stagger_positions, GroupId, GroupingError, ServerId,
    ServerRecord, ServerRegistry,
};
use crate::protocol::{
    client_submit_nizk, client_submit_trap, AbortRecord, Outcome, ProtocolError, RoundContext, RoundKeys,
    RoundTranscript, RouteKey, Submission, UserId, Variant,
};
use crate::rng;
use crate::topology::{build_square_network, Topology, TopologyError, VertexId};

pub use self::engine::{micros, Links, Micros, Queue, Servers};
pub use self::sweep::{compare_variants, scaling_sweep, SweepRow, VariantComparison};

/// Seconds per operation. Batch operations are quoted per 1,024 elements;
/// everything scales linearly with the number of group elements touched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub enc: f64,
    pub reenc: f64,
    pub shuffle_1024: f64,
    pub enc_proof_prove: f64,
    pub enc_proof_verify: f64,
    pub reenc_proof_prove: f64,
    pub reenc_proof_verify: f64,
    pub shuf_proof_prove_1024: f64,
    pub shuf_proof_verify_1024: f64,
    /// Opening one inner ciphertext after release: one exponentiation, so
    /// priced like `enc`.
    pub inner_dec: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            enc: 1.40e-4,
            reenc: 3.35e-4,
            shuffle_1024: 1.07e-1,
            enc_proof_prove: 1.62e-4,
            enc_proof_verify: 1.39e-4,
            reenc_proof_prove: 6.55e-4,
            reenc_proof_verify: 4.46e-4,
            shuf_proof_prove_1024: 7.57e-1,
            shuf_proof_verify_1024: 1.41,
            inner_dec: 1.40e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub intra_ms: f64,
    pub inter_min_ms: f64,
    pub inter_max_ms: f64,
    pub clusters: u32,
    /// How long a member waits for a missing report before accusing the
    /// server that withheld it.
    pub report_timeout_ms: f64,
    pub costs: CostModel,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            intra_ms: 40.0,
            inter_min_ms: 80.0,
            inter_max_ms: 160.0,
            clusters: 2,
            report_timeout_ms: 5_000.0,
            costs: CostModel::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    DropCt,
    ReplaceCt,
    DuplicateCt,
    BadShuffle,
    BadReenc,
    Crash,
    WithholdReport,
}

impl std::str::FromStr for Behavior {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown behavior `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryEntry {
    pub server: ServerId,
    pub behavior: Behavior,
    /// Layers the behavior fires on; every layer when absent.
    #[serde(default)]
    pub layers: Option<Vec<usize>>,
    /// Vertex indices within those layers; every vertex when absent.
    #[serde(default)]
    pub vertices: Option<Vec<usize>>,
}

impl AdversaryEntry {
    pub fn new(server: ServerId, behavior: Behavior) -> Self {
        Self { server, behavior, layers: None, vertices: None }
    }

    pub fn on_layers(mut self, layers: Vec<usize>) -> Self {
        self.layers = Some(layers);
        self
    }

    fn fires(&self, v: VertexId) -> bool {
        self.layers.as_ref().is_none_or(|l| l.contains(&v.layer))
            && self.vertices.as_ref().is_none_or(|i| i.contains(&v.index))
    }
}

/// Either `servers = N` draws `groups` groups of `k` from `N` servers using
/// the beacon seed, or, when absent, group `g` is servers `g·k .. (g+1)·k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub variant: Variant,
    /// Users, one message each.
    pub messages: usize,
    pub groups: usize,
    pub k: usize,
    pub h: usize,
    pub iterations: usize,
    /// Assumed adversarial fraction; scripts may not corrupt more servers.
    pub f: f64,
    pub msg_len: usize,
    pub seed: u64,
    pub round: u64,
    pub buddies: usize,
    pub trustees: usize,
    pub servers: Option<usize>,
    pub crashed: Vec<ServerId>,
    pub net: NetConfig,
    pub adversary: Vec<AdversaryEntry>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Trap,
            messages: 16,
            groups: 4,
            k: 2,
            h: 1,
            iterations: 10,
            f: 0.2,
            msg_len: 32,
            seed: 1,
            round: 0,
            buddies: 1,
            trustees: 3,
            servers: None,
            crashed: Vec::new(),
            net: NetConfig::default(),
            adversary: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn server_count(&self) -> usize {
        self.servers.unwrap_or(self.groups * self.k)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.messages == 0 || self.groups == 0 || self.k == 0 || self.iterations == 0 || self.trustees == 0 {
            return bad("messages, groups, k, iterations and trustees must be positive".into());
        }
        if self.h == 0 || self.h > self.k {
            return bad(format!("h = {} must lie in 1..={}", self.h, self.k));
        }
        if self.server_count() < self.k {
            return bad(format!("{} servers cannot fill groups of {}", self.server_count(), self.k));
        }
        if self.buddies >= self.groups && self.buddies > 0 {
            return bad(format!("{} buddies need more than {} groups", self.buddies, self.groups));
        }
        if !(0.0..1.0).contains(&self.f) {
            return bad(format!("f = {} must lie in [0, 1)", self.f));
        }
        let n = self.server_count() as u32;
        if let Some(e) = self.adversary.iter().find(|e| e.server >= n) {
            return bad(format!("adversary names unknown server {}", e.server));
        }
        if let Some(s) = self.crashed.iter().find(|s| **s >= n) {
            return bad(format!("crash schedule names unknown server {s}"));
        }
        let corrupt: BTreeSet<ServerId> =
            self.adversary.iter().filter(|e| e.behavior != Behavior::Crash).map(|e| e.server).collect();
        if corrupt.len() as f64 > self.f * f64::from(n) {
            return bad(format!("{} adversarial servers exceed f = {} of {n}", corrupt.len(), self.f));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub outcome: String,
    /// First entry receipt to last output, in simulated seconds.
    pub latency_s: f64,
    /// Ciphertext rows entering the network, padding included.
    pub rows: usize,
    pub row_width: usize,
    /// Rows each group shuffled over the round.
    pub touches: Vec<usize>,
    pub bytes: u64,
    pub mean_idle_s: f64,
    pub max_busy_s: f64,
    pub recovered_positions: usize,
    pub rejected: usize,
    pub dummies: usize,
    pub events: u64,
}

#[derive(Clone, Debug)]
pub struct RoundResult<G: PrimeGroup> {
    pub outcome: Outcome,
    pub transcript: RoundTranscript,
    pub metrics: RoundMetrics,
    /// Published plaintexts, padding removed. Empty unless the round
    /// delivered or released.
    pub outputs: Vec<Vec<u8>>,
    /// Users flagged by blame after a destroyed round.
    pub blamed: Vec<UserId>,
    pub aborts: Vec<AbortRecord<G>>,
}

/// A configured round: registry, groups, keys and topology, ready for
/// submissions.
pub struct Simulation<G: PrimeGroup> {
    pub config: SimConfig,
    pub ctx: RoundContext,
    pub topology: Topology,
    pub keys: RoundKeys<G>,
    pub registry: ServerRegistry<G>,
    trustees: Vec<(ServerId, KeyPair<G>)>,
    trustee_pk: G::Element,
    /// Layer-0 vertex index per user.
    entry: Vec<usize>,
    alive: BTreeSet<ServerId>,
}

impl<G: PrimeGroup> Simulation<G> {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let (seed, round) = (config.seed, config.round);
        let n = config.server_count() as u32;
        let signing: BTreeMap<ServerId, KeyPair<G>> =
            (0..n).map(|id| (id, keygen::<G, _>(&mut rng::stream(seed, 0, &format!("server/{id}/signing"))))).collect();
        let registry = ServerRegistry::new(
            signing.iter().map(|(&id, kp)| ServerRecord { id, pk: kp.public, capacity: 1 }).collect(),
        )?;
        let mut groups = match config.servers {
            None => {
                let members: Vec<Vec<ServerId>> = (0..config.groups as u32)
                    .map(|g| (g * config.k as u32..(g + 1) * config.k as u32).collect())
                    .collect();
                groups_from_members(&registry, &members)?
            }
            Some(_) => stagger_positions(form_groups(&registry, seed, config.k, config.groups)?),
        };
        for g in &mut groups {
            g.h = config.h;
        }
        let groups = assign_buddies(groups, seed, config.buddies)?;
        let keys = RoundKeys::setup(&signing, &groups, round, seed)?;

        let trustees: Vec<(ServerId, KeyPair<G>)> = (n..n + config.trustees as u32)
            .map(|id| (id, keygen::<G, _>(&mut rng::stream(seed, round, &format!("trustee/{id}")))))
            .collect();
        let trustee_pk = trustees.iter().fold(G::identity(), |acc, (_, kp)| acc * kp.public);

        let per_user = match config.variant {
            Variant::Nizk => 1,
            Variant::Trap => 2,
        };
        let mut width = crate::topology::ceil_sqrt(config.messages * per_user).max(per_user).max(2);
        while width * (width / per_user) < config.messages {
            width += 1;
        }
        let mut topology = build_square_network(width * width, config.groups, config.iterations)?;
        topology.messages = config.messages * per_user;
        let entry = (0..config.messages).map(|u| u % width).collect();

        let ctx = RoundContext {
            round,
            variant: config.variant,
            msg_len: config.msg_len,
            groups: config.groups,
            route_key: RouteKey(rng::stream(seed, round, "route-key").next_u64()),
        };
        let down: BTreeSet<ServerId> = config
            .crashed
            .iter()
            .copied()
            .chain(config.adversary.iter().filter(|e| e.behavior == Behavior::Crash).map(|e| e.server))
            .collect();
        let alive = (0..n).filter(|id| !down.contains(id)).collect();
        Ok(Self { config, ctx, topology, keys, registry, trustees, trustee_pk, entry, alive })
    }

    pub fn entry_group(&self, user: UserId) -> GroupId {
        let index = self.entry[user as usize];
        self.topology.group_of(VertexId { layer: 0, index })
    }

    pub fn group_pk(&self, gid: GroupId) -> Result<G::Element, SimError> {
        Ok(self.keys.pk(gid)?)
    }

    pub fn trustee_pk(&self) -> G::Element {
        self.trustee_pk
    }

    /// The honest client for `user`, with its own deterministic randomness.
    pub fn submit(&self, user: UserId, m: &[u8]) -> Result<Submission<G>, SimError> {
        let mut r = rng::stream(self.config.seed, self.config.round, &format!("user/{user}"));
        let gid = self.entry_group(user);
        let pk = self.group_pk(gid)?;
        Ok(match self.config.variant {
            Variant::Nizk => client_submit_nizk(&self.ctx, user, gid, &pk, m, &mut r)?,
            Variant::Trap => client_submit_trap(&self.ctx, user, gid, &pk, &self.trustee_pk, m, &mut r)?.0,
        })
    }

    pub fn run(&self, submissions: Vec<Submission<G>>) -> Result<RoundResult<G>, SimError> {
        round::execute(self, submissions)
    }
}

/// Builds the round, has every user submit honestly and runs it.
pub fn run_round<G: PrimeGroup>(config: SimConfig, messages: &[Vec<u8>]) -> Result<RoundResult<G>, SimError> {
    if messages.len() != config.messages {
        return Err(SimError::Config(format!("{} messages for {} users", messages.len(), config.messages)));
    }
    let sim = Simulation::<G>::new(config)?;
    let subs = messages.iter().enumerate().map(|(u, m)| sim.submit(u as UserId, m)).collect::<Result<Vec<_>, _>>()?;
    sim.run(subs)
}

/// `count` distinct printable messages, handy for tests and the CLI.
pub fn sample_messages(count: usize, len: usize, seed: u64) -> Vec<Vec<u8>> {
    (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, 0, &format!("message/{i}"));
            let mut m = format!("msg-{i:05}-").into_bytes();
            while m.len() < len {
                m.push(b'a' + (r.next_u32() % 26) as u8);
            }
            m.truncate(len);
            m
        })
        .collect()
}
