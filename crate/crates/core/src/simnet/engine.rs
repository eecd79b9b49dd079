//! Event queue, link latencies and per-server busy time.
//!
//! Time is integer microseconds. Events fire in `(time, actor, seq)` order,
//! so equal-time events resolve the same way on every run.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::Rng as _;

use super::NetConfig;
use crate::grouping::ServerId;
use crate::rng;

pub type Micros = u64;

pub fn micros(seconds: f64) -> Micros {
    (seconds * 1e6).round().max(0.0) as Micros
}

pub struct Queue<E> {
    heap: BinaryHeap<Reverse<(Micros, ServerId, u64)>>,
    payloads: HashMap<u64, E>,
    seq: u64,
}

impl<E> Default for Queue<E> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), payloads: HashMap::new(), seq: 0 }
    }
}

impl<E> Queue<E> {
    pub fn push(&mut self, at: Micros, actor: ServerId, event: E) {
        self.heap.push(Reverse((at, actor, self.seq)));
        self.payloads.insert(self.seq, event);
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Micros, ServerId, E)> {
        let Reverse((at, actor, seq)) = self.heap.pop()?;
        Some((at, actor, self.payloads.remove(&seq).expect("payload stored with key")))
    }

    pub fn clear(&mut self) {
        self.heap.clear();
        self.payloads.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Two-cluster latency model. Cluster of a server is `id mod clusters`;
/// cross-cluster links draw a fixed latency per unordered pair.
pub struct Links {
    seed: u64,
    intra: Micros,
    inter: (f64, f64),
    clusters: u32,
    cache: HashMap<(ServerId, ServerId), Micros>,
}

impl Links {
    pub fn new(net: &NetConfig, seed: u64) -> Self {
        Self {
            seed,
            intra: micros(net.intra_ms / 1e3),
            inter: (net.inter_min_ms, net.inter_max_ms),
            clusters: net.clusters.max(1),
            cache: HashMap::new(),
        }
    }

    pub fn latency(&mut self, a: ServerId, b: ServerId) -> Micros {
        if a == b {
            return 0;
        }
        if a % self.clusters == b % self.clusters {
            return self.intra;
        }
        let key = (a.min(b), a.max(b));
        let (seed, (lo, hi)) = (self.seed, self.inter);
        *self.cache.entry(key).or_insert_with(|| {
            let ms = if hi > lo {
                rng::stream(seed, 0, &format!("net/link/{}/{}", key.0, key.1)).gen_range(lo..hi)
            } else {
                lo
            };
            micros(ms / 1e3)
        })
    }
}

/// Each server runs one task at a time, in the order tasks are handed to it.
#[derive(Default)]
pub struct Servers {
    busy_until: BTreeMap<ServerId, Micros>,
    busy_total: BTreeMap<ServerId, Micros>,
}

impl Servers {
    /// Runs a task of `cost` that may start at `ready`; returns its finish time.
    pub fn work(&mut self, server: ServerId, ready: Micros, cost: Micros) -> Micros {
        let free = self.busy_until.entry(server).or_default();
        let done = (*free).max(ready) + cost;
        *free = done;
        *self.busy_total.entry(server).or_default() += cost;
        done
    }

    pub fn hold_until(&mut self, server: ServerId, until: Micros) {
        let free = self.busy_until.entry(server).or_default();
        *free = (*free).max(until);
    }

    pub fn busy_total(&self) -> &BTreeMap<ServerId, Micros> {
        &self.busy_total
    }
}
