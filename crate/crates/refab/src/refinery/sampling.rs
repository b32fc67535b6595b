//! Enumerating and sampling divisible sub-multigraphs of X.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::divisibility::binomial;
use crate::hypercore::{Iid, MultiHypergraph, Vertex};
use crate::rng::StageRng;

use super::model::is_divisible_instances;

/// Divisible subsets of X's instances, by size and then lexicographically by id.
pub fn exhaustive_divisible(x: &MultiHypergraph, q: usize) -> Vec<BTreeSet<Iid>> {
    let ids: Vec<Iid> = x.iids().collect();
    let mut out = Vec::new();
    for k in 0..=ids.len() {
        for combo in ids.iter().copied().combinations(k) {
            let l: BTreeSet<Iid> = combo.into_iter().collect();
            if is_divisible_instances(x, &l, q) {
                out.push(l);
            }
        }
    }
    out
}

/// At least `count` distinct divisible L when that many can be found, always containing ∅
/// and a large divisible L found greedily.
pub fn sample_divisible(x: &MultiHypergraph, q: usize, count: usize, rng: &mut StageRng) -> Vec<BTreeSet<Iid>> {
    let mut seen: BTreeSet<Vec<Iid>> = BTreeSet::new();
    let mut out = Vec::new();
    let mut keep = |l: BTreeSet<Iid>, out: &mut Vec<BTreeSet<Iid>>| {
        if seen.insert(l.iter().copied().collect()) {
            out.push(l);
        }
    };
    keep(BTreeSet::new(), &mut out);
    if let Some(big) = large_divisible(x, q) {
        keep(big, &mut out);
    }
    let attempts = count * 40;
    let sampler = CycleSampler::new(x);
    for _ in 0..attempts {
        if out.len() >= count {
            break;
        }
        let cand = match (x.r(), q) {
            (1, _) => random_multiple(x, q, rng),
            (2, 3) => sampler.sample(rng),
            _ => random_subset(x, rng),
        };
        if is_divisible_instances(x, &cand, q) {
            keep(cand, &mut out);
        }
    }
    out
}

fn random_multiple(x: &MultiHypergraph, q: usize, rng: &mut StageRng) -> BTreeSet<Iid> {
    let mut ids: Vec<Iid> = x.iids().collect();
    ids.shuffle(rng);
    let k = rng.gen_range(0..=ids.len() / q) * q;
    ids.into_iter().take(k).collect()
}

fn random_subset(x: &MultiHypergraph, rng: &mut StageRng) -> BTreeSet<Iid> {
    x.iids().filter(|_| rng.gen_bool(0.5)).collect()
}

/// Uniform elements of the cycle space of a multigraph, via fundamental cycles.
struct CycleSampler {
    ids: Vec<Iid>,
    cycles: Vec<Vec<usize>>,
}

impl CycleSampler {
    fn new(x: &MultiHypergraph) -> Self {
        let ids: Vec<Iid> = x.iids().collect();
        if x.r() != 2 {
            return Self { ids, cycles: Vec::new() };
        }
        let pos: BTreeMap<Iid, usize> = ids.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let forest = SpanningForest::new(x);
        let cycles = x
            .instances()
            .filter(|(i, _)| !forest.tree.contains(i))
            .map(|(i, e)| {
                let mut c: Vec<usize> = forest.path(e[0], e[1]).iter().map(|t| pos[t]).collect();
                c.push(pos[&i]);
                c
            })
            .collect();
        Self { ids, cycles }
    }

    fn sample(&self, rng: &mut StageRng) -> BTreeSet<Iid> {
        let mut acc = vec![false; self.ids.len()];
        for c in &self.cycles {
            if rng.gen_bool(0.5) {
                for &p in c {
                    acc[p] = !acc[p];
                }
            }
        }
        acc.iter().zip(&self.ids).filter(|(b, _)| **b).map(|(_, &i)| i).collect()
    }

    fn cycle_set(&self, c: usize) -> BTreeSet<Iid> {
        self.cycles[c].iter().map(|&p| self.ids[p]).collect()
    }
}

struct SpanningForest {
    tree: BTreeSet<Iid>,
    parent: BTreeMap<Vertex, (Vertex, Iid)>,
    depth: BTreeMap<Vertex, usize>,
}

impl SpanningForest {
    fn new(x: &MultiHypergraph) -> Self {
        let mut adj: BTreeMap<Vertex, Vec<(Vertex, Iid)>> = BTreeMap::new();
        for (i, e) in x.instances() {
            adj.entry(e[0]).or_default().push((e[1], i));
            adj.entry(e[1]).or_default().push((e[0], i));
        }
        let mut tree = BTreeSet::new();
        let mut parent = BTreeMap::new();
        let mut depth = BTreeMap::new();
        for &root in adj.keys() {
            if depth.contains_key(&root) {
                continue;
            }
            depth.insert(root, 0);
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &(w, i) in &adj[&u] {
                    if !depth.contains_key(&w) {
                        depth.insert(w, depth[&u] + 1);
                        parent.insert(w, (u, i));
                        tree.insert(i);
                        queue.push_back(w);
                    }
                }
            }
        }
        Self { tree, parent, depth }
    }

    fn path(&self, mut a: Vertex, mut b: Vertex) -> BTreeSet<Iid> {
        let mut out = BTreeSet::new();
        while a != b {
            if self.depth[&a] >= self.depth[&b] {
                let (p, i) = self.parent[&a];
                out.insert(i);
                a = p;
            } else {
                let (p, i) = self.parent[&b];
                out.insert(i);
                b = p;
            }
        }
        out
    }

    fn same_tree(&self, a: Vertex, b: Vertex) -> bool {
        let root = |mut v: Vertex| {
            while let Some(&(p, _)) = self.parent.get(&v) {
                v = p;
            }
            v
        };
        root(a) == root(b)
    }
}

/// A large divisible L: X itself when divisible, otherwise an even subgraph trimmed to the
/// right size (graphs with q = 3) or a largest multiple of q singletons (r = 1).
pub fn large_divisible(x: &MultiHypergraph, q: usize) -> Option<BTreeSet<Iid>> {
    let all = x.iid_set();
    if is_divisible_instances(x, &all, q) {
        return Some(all);
    }
    match (x.r(), q) {
        (1, _) => {
            let k = x.e() / q * q;
            Some(x.iids().take(k).collect())
        }
        (2, 3) => {
            let forest = SpanningForest::new(x);
            let mut odd: Vec<Vertex> =
                x.degree_table(1).into_iter().filter(|(_, d)| d % 2 == 1).map(|(s, _)| s[0]).collect();
            let mut even = all.clone();
            while let Some(a) = odd.pop() {
                let pos = odd.iter().position(|&b| forest.same_tree(a, b)).expect("odd vertices pair up in each tree");
                let b = odd.remove(pos);
                even = even.symmetric_difference(&forest.path(a, b)).copied().collect();
            }
            let modulus = binomial(3, 2) as usize;
            if even.len().is_multiple_of(modulus) {
                return Some(even);
            }
            let sampler = CycleSampler::new(x);
            let cycles: Vec<BTreeSet<Iid>> = (0..sampler.cycles.len().min(64)).map(|c| sampler.cycle_set(c)).collect();
            let mut best: Option<BTreeSet<Iid>> = None;
            let mut consider = |c: BTreeSet<Iid>| {
                if c.len().is_multiple_of(modulus) && best.as_ref().is_none_or(|b| c.len() > b.len()) {
                    best = Some(c);
                }
            };
            for (i, ci) in cycles.iter().enumerate() {
                let once: BTreeSet<Iid> = even.symmetric_difference(ci).copied().collect();
                for cj in &cycles[i + 1..] {
                    consider(once.symmetric_difference(cj).copied().collect());
                }
                consider(once);
            }
            best.or(Some(BTreeSet::new()))
        }
        _ => None,
    }
}
