//! Square permutation network.
//!
//! `M` messages sit in a `w × w` matrix, `w = √M`. Each of the `T` layers has
//! `w` vertices; a vertex shuffles its `w` messages, cuts the result into
//! `β = w` batches and sends batch `j` to vertex `j` of the next layer. After
//! the last layer the same transpose sorts outputs into `w` exit buckets, so a
//! message's final position is `bucket · w + vertex`.
//!
//! Vertex `v` of layer `t` belongs to group `(t·w + v) mod G`. With fewer
//! groups than vertices per layer, a group emulates several vertices.

use serde::Serialize;
use thiserror::Error;

use crate::crypto::Permutation;
use crate::grouping::GroupId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("cannot build a network for {messages} messages, {groups} groups and {iterations} iterations")]
    BadShape { messages: usize, groups: usize, iterations: usize },
    #[error("{len} items do not split into {beta} equal batches")]
    NotDivisible { len: usize, beta: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VertexId {
    pub layer: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    /// Real messages requested.
    pub messages: usize,
    pub width: usize,
    pub iterations: usize,
    pub groups: usize,
}

impl Topology {
    /// Padded message count `w²`.
    pub fn capacity(&self) -> usize {
        self.width * self.width
    }

    pub fn padding(&self) -> usize {
        self.capacity() - self.messages
    }

    pub fn beta(&self) -> usize {
        self.width
    }

    /// Messages each vertex shuffles per layer.
    pub fn batch_size(&self) -> usize {
        self.width
    }

    pub fn group_of(&self, v: VertexId) -> GroupId {
        ((v.layer * self.width + v.index) % self.groups) as GroupId
    }

    pub fn layer(&self, t: usize) -> Vec<VertexId> {
        (0..self.width).map(|index| VertexId { layer: t, index }).collect()
    }

    /// Successors of `v` in batch order, empty on the last layer.
    pub fn successors(&self, v: VertexId) -> Vec<VertexId> {
        if v.layer + 1 >= self.iterations {
            Vec::new()
        } else {
            self.layer(v.layer + 1)
        }
    }

    /// Vertices owned by `gid` in layer `t`.
    pub fn vertices_of(&self, gid: GroupId, t: usize) -> Vec<VertexId> {
        self.layer(t).into_iter().filter(|v| self.group_of(*v) == gid).collect()
    }

    /// Ciphertext rows each group shuffles over the whole round.
    pub fn touches_per_group(&self) -> Vec<usize> {
        let mut touches = vec![0; self.groups];
        for t in 0..self.iterations {
            for v in self.layer(t) {
                touches[self.group_of(v) as usize] += self.batch_size();
            }
        }
        touches
    }

    /// Reassembles the inputs of every vertex in the next layer from the
    /// batches of the current one: vertex `j` receives batch `j` of vertex
    /// 0, then of vertex 1, and so on.
    pub fn transpose<T: Clone>(&self, batches: &[Vec<Vec<T>>]) -> Vec<Vec<T>> {
        (0..self.width).map(|j| batches.iter().flat_map(|per_vertex| per_vertex[j].iter().cloned()).collect()).collect()
    }

    /// Layer-by-layer listing for audits.
    pub fn export(&self) -> String {
        #[derive(Serialize)]
        struct Vertex {
            id: VertexId,
            group: GroupId,
            successors: Vec<VertexId>,
        }
        #[derive(Serialize)]
        struct Export {
            messages: usize,
            capacity: usize,
            width: usize,
            beta: usize,
            iterations: usize,
            groups: usize,
            layers: Vec<Vec<Vertex>>,
        }
        let layers = (0..self.iterations)
            .map(|t| {
                self.layer(t)
                    .into_iter()
                    .map(|v| Vertex { id: v, group: self.group_of(v), successors: self.successors(v) })
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&Export {
            messages: self.messages,
            capacity: self.capacity(),
            width: self.width,
            beta: self.beta(),
            iterations: self.iterations,
            groups: self.groups,
            layers,
        })
        .expect("plain data serializes")
    }
}

/// Smallest `w` with `w² ≥ messages`.
pub fn ceil_sqrt(messages: usize) -> usize {
    let mut w = (messages as f64).sqrt() as usize;
    while w * w < messages {
        w += 1;
    }
    while w > 0 && (w - 1) * (w - 1) >= messages {
        w -= 1;
    }
    w
}

/// Pads `messages` up to the next square and lays out `iterations` layers.
pub fn build_square_network(messages: usize, groups: usize, iterations: usize) -> Result<Topology, TopologyError> {
    let width = ceil_sqrt(messages);
    if messages == 0 || groups == 0 || iterations == 0 || width < 2 {
        return Err(TopologyError::BadShape { messages, groups, iterations });
    }
    Ok(Topology { messages, width, iterations, groups })
}

/// Cuts `items` into `beta` contiguous equal batches.
pub fn divide_batches<T: Clone>(items: &[T], beta: usize) -> Result<Vec<Vec<T>>, TopologyError> {
    if beta == 0 || !items.len().is_multiple_of(beta) {
        return Err(TopologyError::NotDivisible { len: items.len(), beta });
    }
    Ok(items.chunks(items.len() / beta).map(<[T]>::to_vec).collect())
}

/// Path of the message starting at global position `message` (vertex
/// `message / w`, slot `message % w` of layer 0). `perms[t][v]` is the
/// shuffle applied by vertex `v` of layer `t`. Returns the `T` vertices
/// visited followed by the exit bucket, and the final global position.
pub fn route_of(message: usize, perms: &[Vec<Permutation>], topo: &Topology) -> (Vec<VertexId>, usize) {
    let w = topo.width;
    let batch = topo.batch_size() / topo.beta();
    let (mut v, mut slot) = (message / w, message % w);
    let mut path = Vec::with_capacity(topo.iterations + 1);
    for (t, layer) in perms.iter().enumerate().take(topo.iterations) {
        path.push(VertexId { layer: t, index: v });
        let out = layer[v].position_of(slot);
        let (j, within) = (out / batch, out % batch);
        // vertex j of the next layer lists batch j of vertex 0, then 1, ...
        slot = v * batch + within;
        v = j;
    }
    path.push(VertexId { layer: topo.iterations, index: v });
    (path, v * w + slot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn sixteen_messages_four_groups() {
        let t = build_square_network(16, 4, 10).unwrap();
        assert_eq!((t.width, t.beta(), t.batch_size()), (4, 4, 4));
        for layer in 0..10 {
            for g in 0..4 {
                assert_eq!(t.vertices_of(g, layer).len(), 1);
            }
        }
        assert_eq!(t.successors(VertexId { layer: 0, index: 2 }).len(), 4);
        assert!(t.successors(VertexId { layer: 9, index: 2 }).is_empty());
    }

    #[test]
    fn smallest_square() {
        let t = build_square_network(4, 2, 1).unwrap();
        assert_eq!((t.width, t.beta()), (2, 2));
        assert_eq!(t.padding(), 0);
    }

    #[test]
    fn fewer_groups_than_columns_are_emulated() {
        let t = build_square_network(16, 2, 3).unwrap();
        for layer in 0..3 {
            assert_eq!(t.vertices_of(0, layer).len(), 2);
            assert_eq!(t.vertices_of(1, layer).len(), 2);
        }
    }

    #[test]
    fn non_square_counts_are_padded() {
        let t = build_square_network(10, 3, 2).unwrap();
        assert_eq!((t.width, t.capacity(), t.padding()), (4, 16, 6));
        assert!(build_square_network(0, 1, 1).is_err());
        assert!(build_square_network(1, 1, 1).is_err());
        assert!(build_square_network(4, 0, 1).is_err());
        assert!(build_square_network(4, 1, 0).is_err());
    }

    #[test]
    fn work_is_balanced() {
        let t = build_square_network(64, 4, 10).unwrap();
        assert!(t.touches_per_group().iter().all(|&n| n == 10 * 64 / 4));
        let t = build_square_network(1024, 16, 10).unwrap();
        assert!(t.touches_per_group().iter().all(|&n| n == 10 * 1024 / 16));
    }

    #[test]
    fn batches() {
        let items: Vec<u32> = (0..8).collect();
        let b = divide_batches(&items, 4).unwrap();
        assert_eq!(b, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        assert_eq!(b.concat(), items);
        assert_eq!(divide_batches(&items, 1).unwrap(), vec![items.clone()]);
        assert_eq!(divide_batches(&items, 3), Err(TopologyError::NotDivisible { len: 8, beta: 3 }));
    }

    #[test]
    fn transpose_sends_batch_j_to_vertex_j() {
        let t = build_square_network(4, 2, 2).unwrap();
        let batches = vec![vec![vec!['a'], vec!['b']], vec![vec!['c'], vec!['d']]];
        assert_eq!(t.transpose(&batches), vec![vec!['a', 'c'], vec!['b', 'd']]);
    }

    /// Moves concrete items through the network and returns the final order.
    fn simulate(perms: &[Vec<Permutation>], topo: &Topology) -> Vec<usize> {
        let w = topo.width;
        let mut inputs: Vec<Vec<usize>> = (0..w).map(|v| (v * w..(v + 1) * w).collect()).collect();
        for layer in perms {
            let batches: Vec<Vec<Vec<usize>>> = inputs
                .iter()
                .zip(layer)
                .map(|(items, p)| divide_batches(&p.apply(items), topo.beta()).unwrap())
                .collect();
            inputs = topo.transpose(&batches);
        }
        inputs.concat()
    }

    fn random_perms(topo: &Topology, r: &mut rng::Rng) -> Vec<Vec<Permutation>> {
        (0..topo.iterations).map(|_| (0..topo.width).map(|_| Permutation::random(topo.width, r)).collect()).collect()
    }

    #[test]
    fn route_agrees_with_item_simulation() {
        let topo = build_square_network(16, 4, 3).unwrap();
        let mut r = rng::seeded(3);
        for _ in 0..20 {
            let perms = random_perms(&topo, &mut r);
            let order = simulate(&perms, &topo);
            for m in 0..16 {
                let (path, pos) = route_of(m, &perms, &topo);
                assert_eq!(path.len(), topo.iterations + 1);
                assert_eq!(order[pos], m);
                assert_eq!(route_of(m, &perms, &topo), (path, pos));
            }
        }
    }

    #[test]
    fn identity_permutations_transpose_the_matrix() {
        let topo = build_square_network(9, 3, 1).unwrap();
        let perms = vec![vec![Permutation::identity(3); 3]];
        // one transpose: message at (row v, slot s) lands in bucket s, slot v
        for m in 0..9 {
            let (path, pos) = route_of(m, &perms, &topo);
            assert_eq!(path[0].index, m / 3);
            assert_eq!(pos, (m % 3) * 3 + m / 3);
        }
        let perms2 = vec![vec![Permutation::identity(3); 3]; 2];
        for m in 0..9 {
            assert_eq!(route_of(m, &perms2, &build_square_network(9, 3, 2).unwrap()).1, m);
        }
    }

    #[test]
    fn sixteen_message_output_is_uniform() {
        let topo = build_square_network(16, 4, 10).unwrap();
        let mut r = rng::seeded(4);
        let trials = 20_000;
        let mut counts = [0f64; 16];
        for _ in 0..trials {
            let perms = random_perms(&topo, &mut r);
            counts[route_of(5, &perms, &topo).1] += 1.0;
        }
        let expected = trials as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    /// Exact distribution of the final position of `message`, propagating
    /// probability mass through uniformly random vertex shuffles.
    fn exact_output_distribution(message: usize, topo: &Topology) -> Vec<f64> {
        let w = topo.width;
        let batch = topo.batch_size() / topo.beta();
        let mut dist = vec![0.0; w * w];
        dist[message] = 1.0;
        for _ in 0..topo.iterations {
            let mut next = vec![0.0; w * w];
            for (pos, &p) in dist.iter().enumerate() {
                let v = pos / w;
                for out in 0..w {
                    let (j, within) = (out / batch, out % batch);
                    next[j * w + v * batch + within] += p / w as f64;
                }
            }
            dist = next;
        }
        dist
    }

    #[test]
    fn nine_message_total_variation_is_small() {
        for t in 2..=10 {
            let topo = build_square_network(9, 3, t).unwrap();
            let dist = exact_output_distribution(4, &topo);
            let tv: f64 = dist.iter().map(|p| (p - 1.0 / 9.0).abs()).sum::<f64>() / 2.0;
            assert!(tv < 0.05, "T={t}: tv={tv}");
        }
        // one iteration cannot leave the starting row
        let one = exact_output_distribution(4, &build_square_network(9, 3, 1).unwrap());
        assert!(one.iter().filter(|&&p| p > 0.0).count() == 3);
    }

    #[test]
    fn export_lists_every_vertex() {
        let topo = build_square_network(4, 2, 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&topo.export()).unwrap();
        assert_eq!(v["layers"].as_array().unwrap().len(), 2);
        assert_eq!(v["layers"][0][1]["successors"].as_array().unwrap().len(), 2);
        assert_eq!(v["layers"][1][0]["group"], 0);
    }
}
