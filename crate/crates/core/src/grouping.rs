//! Server registry, group formation and the group-size calculator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::index::sample;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::compose_group_key;
use crate::group::PrimeGroup;
use crate::rng;

pub type ServerId = u32;
pub type GroupId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupingError {
    #[error("fraction must lie strictly between 0 and 1")]
    InvalidFraction,
    #[error("group size {k} exceeds the {n} registered servers")]
    RegistryTooSmall { k: usize, n: usize },
    #[error("{groups} groups cannot each have {buddies} distinct buddies")]
    NotEnoughGroups { groups: usize, buddies: usize },
    #[error("duplicate server id {0}")]
    DuplicateId(ServerId),
    #[error("registry line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no group size up to {0} meets the bound")]
    NoSolution(u32),
}

/// An exact fraction `num / den` in lowest terms, `0 < num < den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self, GroupingError> {
        if num == 0 || num >= den {
            return Err(GroupingError::InvalidFraction);
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl FromStr for Fraction {
    type Err = GroupingError;

    /// Accepts `a/b` or a plain decimal such as `0.2`, read exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| GroupingError::InvalidFraction)?;
            let b = b.trim().parse().map_err(|_| GroupingError::InvalidFraction)?;
            return Self::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(GroupingError::InvalidFraction);
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| GroupingError::InvalidFraction)? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| GroupingError::InvalidFraction)? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac_v)).ok_or(GroupingError::InvalidFraction)?;
        Self::new(num, den)
    }
}

fn binomial(n: u32, k: u32) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

/// `groups · Σ_{i<h} C(k,i)(1−f)^i f^(k−i)` scaled by `den^k`, i.e. the exact
/// numerator of the probability that some group has fewer than `h` honest
/// members.
fn failure_numerator(f: Fraction, groups: u64, h: u32, k: u32) -> BigUint {
    let a = BigUint::from(f.num);
    let b_minus_a = BigUint::from(f.den - f.num);
    let sum = (0..h.min(k + 1)).fold(BigUint::zero(), |acc, i| acc + binomial(k, i) * b_minus_a.pow(i) * a.pow(k - i));
    sum * BigUint::from(groups)
}

/// Whether `groups · P[fewer than h honest of k] < 2^eps_log2`, exactly.
pub fn meets_bound(f: Fraction, groups: u64, h: u32, k: u32, eps_log2: i32) -> bool {
    let mut lhs = failure_numerator(f, groups, h, k);
    let mut rhs = BigUint::from(f.den).pow(k);
    if eps_log2 < 0 {
        lhs <<= eps_log2.unsigned_abs() as usize;
    } else {
        rhs <<= eps_log2 as usize;
    }
    lhs < rhs
}

/// `log2` of the failure probability, for reporting only.
pub fn failure_log2(f: Fraction, groups: u64, h: u32, k: u32) -> f64 {
    let num = failure_numerator(f, groups, h, k);
    if num.is_zero() {
        return f64::NEG_INFINITY;
    }
    let den = BigUint::from(f.den).pow(k);
    let bits = |x: &BigUint| -> f64 {
        let shift = x.bits().saturating_sub(64);
        let top = (x >> shift).to_u64_digits().first().copied().unwrap_or(0);
        (top as f64).log2() + shift as f64
    };
    bits(&num) - bits(&den)
}

const MAX_GROUP_SIZE: u32 = 100_000;

/// Smallest `k` with `groups · Σ_{i<h} C(k,i)(1−f)^i f^(k−i) < 2^eps_log2`.
pub fn required_group_size(f: Fraction, groups: u64, h: u32, eps_log2: i32) -> Result<u32, GroupingError> {
    (h.max(1)..=MAX_GROUP_SIZE)
        .find(|&k| meets_bound(f, groups, h, k, eps_log2))
        .ok_or(GroupingError::NoSolution(MAX_GROUP_SIZE))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerRecord<G: PrimeGroup> {
    pub id: ServerId,
    pub pk: G::Element,
    pub capacity: u32,
}

/// The agreed set of servers for a round, ordered by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerRegistry<G: PrimeGroup> {
    servers: Vec<ServerRecord<G>>,
}

impl<G: PrimeGroup> ServerRegistry<G> {
    pub fn new(mut servers: Vec<ServerRecord<G>>) -> Result<Self, GroupingError> {
        servers.sort_by_key(|s| s.id);
        if let Some(w) = servers.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(GroupingError::DuplicateId(w[0].id));
        }
        Ok(Self { servers })
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    pub fn servers(&self) -> &[ServerRecord<G>] {
        &self.servers
    }

    pub fn get(&self, id: ServerId) -> Option<&ServerRecord<G>> {
        self.servers.binary_search_by_key(&id, |s| s.id).ok().map(|i| &self.servers[i])
    }

    pub fn ids(&self) -> Vec<ServerId> {
        self.servers.iter().map(|s| s.id).collect()
    }

    /// One record per line: `id pk_hex capacity`. Blank lines and `#`
    /// comments are ignored.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.servers {
            let _ = writeln!(out, "{} {} {}", s.id, hex::encode(G::element_bytes(&s.pk)), s.capacity);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GroupingError> {
        let mut servers = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| GroupingError::Parse { line: i + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [id, pk, cap] = fields[..] else {
                return Err(err("expected `id pk_hex capacity`"));
            };
            let pk = hex::decode(pk).map_err(|_| err("bad hex"))?;
            servers.push(ServerRecord {
                id: id.parse().map_err(|_| err("bad id"))?,
                pk: G::decode_element(&pk).ok_or_else(|| err("bad public key"))?,
                capacity: cap.parse().map_err(|_| err("bad capacity"))?,
            });
        }
        Self::new(servers)
    }
}

/// How a group's public key was produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKey<G: PrimeGroup> {
    /// Product of all member keys; every member must peel.
    Anytrust(G::Element),
    /// Shared key from distributed key generation; any `threshold` members
    /// peel. `verification[j]` is `g^{share_j}` for member position `j`.
    Threshold { pk: G::Element, threshold: usize, verification: Vec<G::Element> },
}

impl<G: PrimeGroup> GroupKey<G> {
    pub fn pk(&self) -> &G::Element {
        match self {
            Self::Anytrust(pk) | Self::Threshold { pk, .. } => pk,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupDescriptor<G: PrimeGroup> {
    pub gid: GroupId,
    /// Pipeline order.
    pub members: Vec<ServerId>,
    pub key: GroupKey<G>,
    /// Minimum number of honest members assumed.
    pub h: usize,
    pub buddies: Vec<GroupId>,
}

impl<G: PrimeGroup> GroupDescriptor<G> {
    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Members needed to peel a layer: `k − (h − 1)`.
    pub fn threshold(&self) -> usize {
        match &self.key {
            GroupKey::Anytrust(_) => self.members.len(),
            GroupKey::Threshold { threshold, .. } => *threshold,
        }
    }

    pub fn position_of(&self, id: ServerId) -> Option<usize> {
        self.members.iter().position(|&m| m == id)
    }
}

fn anytrust_key<G: PrimeGroup>(registry: &ServerRegistry<G>, members: &[ServerId]) -> GroupKey<G> {
    let pks: Vec<G::Element> = members.iter().map(|id| registry.get(*id).expect("member is registered").pk).collect();
    GroupKey::Anytrust(compose_group_key::<G>(&pks).expect("groups are non-empty"))
}

/// Samples `groups` groups of `k` distinct servers each from the beacon
/// `seed`. Servers may appear in several groups. Members are listed in
/// ascending id order; [`stagger_positions`] sets the pipeline order.
pub fn form_groups<G: PrimeGroup>(
    registry: &ServerRegistry<G>,
    seed: u64,
    k: usize,
    groups: usize,
) -> Result<Vec<GroupDescriptor<G>>, GroupingError> {
    let n = registry.len();
    if k == 0 || k > n {
        return Err(GroupingError::RegistryTooSmall { k, n });
    }
    let mut stream = rng::stream(seed, 0, "beacon/groups");
    let ids = registry.ids();
    Ok((0..groups)
        .map(|gid| {
            let mut members: Vec<ServerId> = sample(&mut stream, n, k).into_iter().map(|i| ids[i]).collect();
            members.sort_unstable();
            GroupDescriptor {
                gid: gid as GroupId,
                key: anytrust_key(registry, &members),
                members,
                h: 1,
                buddies: Vec::new(),
            }
        })
        .collect())
}

/// Groups with explicit membership, for fixed test layouts.
pub fn groups_from_members<G: PrimeGroup>(
    registry: &ServerRegistry<G>,
    members: &[Vec<ServerId>],
) -> Result<Vec<GroupDescriptor<G>>, GroupingError> {
    members
        .iter()
        .enumerate()
        .map(|(gid, m)| {
            if m.is_empty() {
                return Err(GroupingError::RegistryTooSmall { k: 0, n: registry.len() });
            }
            if let Some(id) = m.iter().find(|id| registry.get(**id).is_none()) {
                return Err(GroupingError::Parse { line: gid, msg: format!("unknown server {id}") });
            }
            if m.iter().collect::<BTreeSet<_>>().len() != m.len() {
                return Err(GroupingError::DuplicateId(m[0]));
            }
            Ok(GroupDescriptor {
                gid: gid as GroupId,
                key: anytrust_key(registry, m),
                members: m.clone(),
                h: 1,
                buddies: Vec::new(),
            })
        })
        .collect()
}

/// Rotates each group's member order so that servers in several groups sit
/// at different pipeline positions. Groups are processed in gid order; each
/// picks the rotation that gives the most members a position they have not
/// held before, preferring the offset equal to the number of earlier
/// appearances of its first member.
pub fn stagger_positions<G: PrimeGroup>(mut groups: Vec<GroupDescriptor<G>>) -> Vec<GroupDescriptor<G>> {
    let mut held: BTreeMap<ServerId, BTreeSet<usize>> = BTreeMap::new();
    for g in &mut groups {
        let k = g.members.len();
        let preferred = held.get(&g.members[0]).map_or(0, BTreeSet::len) % k;
        let fresh = |rot: usize| {
            g.members
                .iter()
                .enumerate()
                .filter(|(i, id)| !held.get(id).is_some_and(|p| p.contains(&((i + k - rot) % k))))
                .count()
        };
        let best = (0..k)
            .map(|d| (preferred + d) % k)
            .max_by_key(|&rot| (fresh(rot), std::cmp::Reverse((rot + k - preferred) % k)))
            .unwrap_or(0);
        g.members.rotate_left(best);
        for (pos, id) in g.members.iter().enumerate() {
            held.entry(*id).or_default().insert(pos);
        }
    }
    groups
}

/// Gives every group `b` distinct buddy groups other than itself.
pub fn assign_buddies<G: PrimeGroup>(
    mut groups: Vec<GroupDescriptor<G>>,
    seed: u64,
    b: usize,
) -> Result<Vec<GroupDescriptor<G>>, GroupingError> {
    let n = groups.len();
    if b > 0 && n < b + 1 {
        return Err(GroupingError::NotEnoughGroups { groups: n, buddies: b });
    }
    let mut stream = rng::stream(seed, 0, "beacon/buddies");
    for (i, g) in groups.iter_mut().enumerate() {
        let others: Vec<GroupId> = (0..n).filter(|&j| j != i).map(|j| j as GroupId).collect();
        g.buddies = sample(&mut stream, others.len(), b).into_iter().map(|j| others[j]).collect();
    }
    Ok(groups)
}

#[derive(Serialize)]
struct PlanEntry<'a> {
    gid: GroupId,
    members: &'a [ServerId],
    buddies: &'a [GroupId],
    threshold: usize,
    pk: String,
}

/// JSON list of `gid → members` for audit.
pub fn export_plan<G: PrimeGroup>(groups: &[GroupDescriptor<G>]) -> String {
    let entries: Vec<PlanEntry<'_>> = groups
        .iter()
        .map(|g| PlanEntry {
            gid: g.gid,
            members: &g.members,
            buddies: &g.buddies,
            threshold: g.threshold(),
            pk: hex::encode(G::element_bytes(g.key.pk())),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("plain data serializes")
}
