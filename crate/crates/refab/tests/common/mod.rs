//! Brute-force oracles shared by the integration tests. Nothing here calls into the
//! library's own checkers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use refab::exactdecomp::Decomposition;
use refab::{Iid, MultiHypergraph, Refiner, Vertex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm_of_binomials(q: u64, r: u64) -> u64 {
    (0..r).map(|i| choose(q - i, r - i)).fold(1, |acc, b| acc / gcd(acc, b) * b)
}

/// Degree of every nonempty-or-empty i-set (i < r) that occurs in some edge.
pub fn subset_degrees<'a>(edges: impl IntoIterator<Item = &'a [Vertex]>, r: usize) -> HashMap<Vec<Vertex>, usize> {
    let mut out = HashMap::new();
    for e in edges {
        for i in 0..r {
            for s in e.iter().copied().combinations(i) {
                *out.entry(s).or_insert(0) += 1;
            }
        }
    }
    out
}

pub fn divisible_oracle<'a>(edges: impl IntoIterator<Item = &'a [Vertex]>, r: usize, q: usize) -> bool {
    let edges: Vec<&[Vertex]> = edges.into_iter().collect();
    if edges.is_empty() {
        return true;
    }
    subset_degrees(edges, r)
        .iter()
        .all(|(s, &d)| (d as u64).is_multiple_of(choose((q - s.len()) as u64, (r - s.len()) as u64)))
}

pub fn graph_divisible(g: &MultiHypergraph, q: usize) -> bool {
    divisible_oracle(g.instances().map(|(_, v)| v), g.r(), q)
}

pub fn instances_divisible(universe: &MultiHypergraph, iids: &BTreeSet<Iid>, q: usize) -> bool {
    let edges: Vec<&[Vertex]> = iids.iter().map(|&i| universe.get(i).expect("instance in universe")).collect();
    divisible_oracle(edges, universe.r(), q)
}

/// Exact partition of `target` into cliques, checked from scratch.
pub fn decomposition_oracle(g: &MultiHypergraph, q: usize, d: &Decomposition, target: &BTreeSet<Iid>) -> bool {
    let r = g.r();
    let assigned: BTreeSet<Iid> = d.assignment.keys().copied().collect();
    if assigned != *target {
        return false;
    }
    let mut per: BTreeMap<usize, Vec<Vec<Vertex>>> = BTreeMap::new();
    for (&iid, &c) in &d.assignment {
        match g.get(iid) {
            Some(e) => per.entry(c).or_default().push(e.to_vec()),
            None => return false,
        }
    }
    if per.len() != d.cliques.len() {
        return false;
    }
    per.into_iter().all(|(c, mut edges)| {
        let clique: BTreeSet<Vertex> = d.cliques[c].iter().copied().collect();
        if clique.len() != q {
            return false;
        }
        edges.sort();
        let expected: Vec<Vec<Vertex>> = clique.iter().copied().combinations(r).collect();
        edges == expected
    })
}

pub fn max_vertex_degree(g: &MultiHypergraph) -> usize {
    let mut d: HashMap<Vertex, usize> = HashMap::new();
    for (_, e) in g.instances() {
        for &v in e {
            *d.entry(v).or_insert(0) += 1;
        }
    }
    d.into_values().max().unwrap_or(0)
}

/// Max over (r−1)-sets of the number of family members whose vertex set contains it.
pub fn family_degree(rf: &Refiner) -> usize {
    let k = rf.r() - 1;
    let mut counts: HashMap<Vec<Vertex>, usize> = HashMap::new();
    for m in rf.family().members() {
        let verts: BTreeSet<Vertex> =
            m.iter().flat_map(|&i| rf.universe().get(i).expect("member instance").iter().copied()).collect();
        for s in verts.into_iter().combinations(k) {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    counts.into_values().max().unwrap_or(0)
}

/// Every subset of X that passes the divisibility oracle.
pub fn divisible_subsets(x: &MultiHypergraph, q: usize) -> Vec<BTreeSet<Iid>> {
    let ids: Vec<Iid> = x.iids().collect();
    assert!(ids.len() <= 20);
    (0u32..1 << ids.len())
        .map(|mask| ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &id)| id).collect())
        .filter(|l: &BTreeSet<Iid>| instances_divisible(x, l, q))
        .collect()
}

pub fn random_simple_graph(rng: &mut ChaCha8Rng, n: u32, edges: usize) -> MultiHypergraph {
    let mut pairs: Vec<[Vertex; 2]> = (0..n).flat_map(|a| (a + 1..n).map(move |b| [a, b])).collect();
    pairs.shuffle(rng);
    pairs.truncate(edges);
    MultiHypergraph::from_supports(n, 2, pairs).unwrap()
}

/// Union of random K_q^r copies as a multigraph on n vertices.
pub fn random_clique_union(rng: &mut ChaCha8Rng, n: u32, r: usize, q: usize, cliques: usize) -> MultiHypergraph {
    let verts: Vec<Vertex> = (0..n).collect();
    let mut supports = Vec::new();
    for _ in 0..cliques {
        let mut c: Vec<Vertex> = verts.choose_multiple(rng, q).copied().collect();
        c.sort_unstable();
        supports.extend(c.into_iter().combinations(r));
    }
    MultiHypergraph::from_supports(n, r, supports).unwrap()
}

pub fn random_multigraph(rng: &mut ChaCha8Rng, n: u32, r: usize, edges: usize) -> MultiHypergraph {
    let verts: Vec<Vertex> = (0..n).collect();
    let supports: Vec<Vec<Vertex>> = (0..edges)
        .map(|_| {
            let mut e: Vec<Vertex> = verts.choose_multiple(rng, r).copied().collect();
            e.sort_unstable();
            e
        })
        .collect();
    MultiHypergraph::from_supports(n, r, supports).unwrap()
}
