//! Seeded random fixtures: connected networks, attachments and perturbation
//! families.
//!
//! Networks are a uniformly random labelled spanning tree (decoded from a
//! random Prüfer sequence) plus independent extra edges, with conductances
//! uniform in `[0.5, 2]`. Generation uses ChaCha8, so a seed reproduces the
//! same network on every platform.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::funspace::{inner_product, FunctionOnV, Weight};
use crate::network::{validate_network, NetworkSpec, RawNetwork};
use crate::vertex_addition::VertexAttachment;

pub type FixtureRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one benchmark trial; depends only on its four arguments.
pub fn trial_seed(seed: u64, n: usize, m: usize, trial: usize) -> u64 {
    mix(mix(mix(mix(seed) ^ n as u64) ^ m as u64) ^ trial as u64)
}

#[derive(Debug, Clone, Copy)]
pub struct NetworkConfig {
    /// Probability of each non-tree pair becoming an edge.
    pub extra_edge_prob: f64,
    pub conductance_range: (f64, f64),
    /// Draw weight entries uniformly in `[0.5, 1.5]` before normalizing;
    /// otherwise use the uniform weight.
    pub random_weight: bool,
    pub lambda: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            extra_edge_prob: 0.3,
            conductance_range: (0.5, 2.0),
            random_weight: true,
            lambda: 0.0,
        }
    }
}

/// Edges of the labelled tree encoded by `code` (entries in `0..code.len()+2`).
pub fn prufer_tree(code: &[usize]) -> Vec<(usize, usize)> {
    let n = code.len() + 2;
    let mut degree = vec![1usize; n];
    for &c in code {
        degree[c] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in code {
        let Reverse(leaf) = leaves.pop().expect("a tree always has a leaf");
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.push(Reverse(c));
        }
    }
    let Reverse(a) = leaves.pop().expect("two vertices remain");
    let Reverse(b) = leaves.pop().expect("two vertices remain");
    edges.push((a, b));
    edges
}

/// Random connected network on vertices labelled `0..n`.
pub fn random_network<R: Rng>(rng: &mut R, n: usize, config: &NetworkConfig) -> NetworkSpec {
    assert!(n >= 1, "network needs a vertex");
    let (lo, hi) = config.conductance_range;
    let mut tree = match n {
        1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
            prufer_tree(&code)
        }
    };
    let mut present = vec![false; n * n];
    for &(u, v) in &tree {
        present[u * n + v] = true;
        present[v * n + u] = true;
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if !present[u * n + v] && rng.random_bool(config.extra_edge_prob) {
                tree.push((u, v));
            }
        }
    }
    let mut raw = RawNetwork::new((0..n).map(|i| i.to_string())).lambda(config.lambda);
    for (u, v) in tree {
        raw = raw.edge(u.to_string(), v.to_string(), rng.random_range(lo..=hi));
    }
    if config.random_weight {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        raw = raw.weight(w).normalize(true);
    }
    validate_network(raw).expect("generated network is valid")
}

/// Attachment of a fresh vertex `"new"` to `m` distinct random anchors with
/// conductances in `[0.5, 2]` and weight value in `[0.3, 1.5]`.
pub fn random_attachment<R: Rng>(rng: &mut R, spec: &NetworkSpec, m: usize) -> VertexAttachment {
    let n = spec.order();
    assert!((1..=n).contains(&m), "need 1 <= m <= n");
    let labels = spec.vertices().labels();
    let anchors = sample(rng, n, m)
        .into_iter()
        .map(|i| (labels[i].clone(), rng.random_range(0.5..=2.0)))
        .collect();
    VertexAttachment {
        new_vertex: "new".into(),
        new_weight: rng.random_range(0.3..1.5),
        anchors,
    }
}

pub fn random_function<R: Rng>(rng: &mut R, n: usize) -> FunctionOnV {
    FunctionOnV::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite")
}

/// Random function with its `omega` component removed.
pub fn random_orthogonal<R: Rng>(rng: &mut R, omega: &Weight) -> FunctionOnV {
    let f = random_function(rng, omega.len());
    let c = inner_product(&f, omega.as_function()).expect("same length");
    FunctionOnV::from_vector(f.as_vector() - omega.as_vector() * c).expect("finite")
}

/// Random function guaranteed to have `|<f, omega>| >= 0.1`.
pub fn random_non_orthogonal<R: Rng>(rng: &mut R, omega: &Weight) -> FunctionOnV {
    loop {
        let f = random_function(rng, omega.len());
        if inner_product(&f, omega.as_function())
            .expect("same length")
            .abs()
            >= 0.1
        {
            return f;
        }
    }
}
