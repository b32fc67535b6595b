//! Quasi-random vertex partitions, edge-free q-sets in non-uniform hypergraphs, and the
//! special sets assigned to r-multi-subsets of parts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use itertools::Itertools;
use rand::Rng;
use serde::Serialize;

use crate::divisibility::binomial;
use crate::hypercore::{MultiHypergraph, Vertex};
use crate::rng::retry_rng;

use super::RefineError;

/// The first `size`-subset of `candidates` in lexicographic order such that no subset of
/// at most `max_forbidden_size` of its vertices is `banned`. Subsets are checked when their
/// largest element is added, so each is tested once per branch.
pub fn free_set_scan(
    candidates: &[Vertex],
    size: usize,
    max_forbidden_size: usize,
    node_budget: u64,
    banned: impl Fn(&[Vertex]) -> bool,
) -> Option<Vec<Vertex>> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        start: usize,
        chosen: &mut Vec<Vertex>,
        candidates: &[Vertex],
        size: usize,
        cap: usize,
        nodes: &mut u64,
        budget: u64,
        banned: &dyn Fn(&[Vertex]) -> bool,
    ) -> bool {
        if chosen.len() == size {
            return true;
        }
        let need = size - chosen.len();
        for idx in start..candidates.len() {
            if candidates.len() - idx < need {
                break;
            }
            *nodes += 1;
            if *nodes > budget {
                return false;
            }
            let v = candidates[idx];
            let fresh_ok = (0..cap.min(chosen.len() + 1)).all(|k| {
                chosen.iter().copied().combinations(k).all(|mut sub| {
                    sub.push(v);
                    !banned(&sub)
                })
            });
            if !fresh_ok {
                continue;
            }
            chosen.push(v);
            if go(idx + 1, chosen, candidates, size, cap, nodes, budget, banned) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    if size == 0 {
        return (!banned(&[])).then(Vec::new);
    }
    let mut chosen = Vec::with_capacity(size);
    let mut nodes = 0;
    go(0, &mut chosen, candidates, size, max_forbidden_size, &mut nodes, node_budget, &banned).then_some(chosen)
}

/// A non-uniform hypergraph with edges of size at most some bound, over `vertices`.
#[derive(Clone, Debug, Default)]
pub struct BoundedHypergraph {
    pub vertices: Vec<Vertex>,
    pub edges: BTreeSet<Vec<Vertex>>,
}

impl BoundedHypergraph {
    pub fn new(vertices: impl IntoIterator<Item = Vertex>) -> Self {
        Self { vertices: vertices.into_iter().sorted().dedup().collect(), edges: BTreeSet::new() }
    }

    pub fn add(&mut self, e: impl IntoIterator<Item = Vertex>) {
        self.edges.insert(e.into_iter().sorted().collect());
    }

    /// α = Σ_i α_i·binom(q, i) with α_i the density of i-edges.
    pub fn alpha(&self, q: usize) -> f64 {
        let v = self.vertices.len();
        let mut by_size: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &self.edges {
            *by_size.entry(e.len()).or_insert(0) += 1;
        }
        by_size
            .into_iter()
            .filter(|&(i, _)| i >= 1 && i <= q)
            .map(|(i, c)| c as f64 / binomial(v, i).max(1) as f64 * binomial(q, i) as f64)
            .sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TuranResult {
    pub set: Vec<Vertex>,
    pub alpha: f64,
}

/// A q-set of V(Z) spanning no edge of Z, from a lexicographic scan. The counting bound
/// guarantees one when α < 1; otherwise the scan still runs and absence is an error.
pub fn turan_free_qset(z: &BoundedHypergraph, q: usize, node_budget: u64) -> Result<TuranResult, RefineError> {
    let alpha = z.alpha(q);
    let cap = z.edges.iter().map(Vec::len).max().unwrap_or(0);
    let edges: HashSet<&[Vertex]> = z.edges.iter().map(Vec::as_slice).collect();
    let found = if z.vertices.len() >= q {
        free_set_scan(&z.vertices, q, cap, node_budget, |s| {
            let sorted: Vec<Vertex> = s.iter().copied().sorted().collect();
            edges.contains(sorted.as_slice())
        })
    } else {
        None
    };
    found.map(|set| TuranResult { set, alpha }).ok_or(RefineError::Turan {
        size: q,
        candidates: z.vertices.len(),
        alpha,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub k: usize,
    /// Part of each vertex 0..n.
    pub part_of: Vec<usize>,
    pub attempts: usize,
    pub worst_part: usize,
    pub part_cap: usize,
    pub worst_link: usize,
    pub link_cap: usize,
    /// Δ(X) ≥ 3k(log 2k + (r − 1) log v(X)) fails for this instance.
    pub below_threshold: bool,
}

impl Partition {
    pub fn parts(&self) -> Vec<Vec<Vertex>> {
        let mut out = vec![Vec::new(); self.k];
        for (v, &p) in self.part_of.iter().enumerate() {
            out[p].push(v as Vertex);
        }
        out
    }

    /// φ(U): the multiset of parts of U, sorted.
    pub fn signature(&self, u: &[Vertex]) -> Vec<usize> {
        u.iter().map(|&v| self.part_of[v as usize]).sorted().collect()
    }
}

fn partition_bounds(x: &MultiHypergraph, part_of: &[usize], k: usize) -> (usize, usize) {
    let mut sizes = vec![0usize; k];
    for &p in part_of {
        sizes[p] += 1;
    }
    let mut link: HashMap<(Vec<Vertex>, usize), usize> = HashMap::new();
    for (_, e) in x.instances() {
        for (skip, &v) in e.iter().enumerate() {
            let s: Vec<Vertex> = e.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &u)| u).collect();
            *link.entry((s, part_of[v as usize])).or_insert(0) += 1;
        }
    }
    (sizes.into_iter().max().unwrap_or(0), link.into_values().max().unwrap_or(0))
}

/// Uniform i.i.d. assignment of V(X) to k parts, resampled until every part has at most
/// 2v(X)/k vertices and every link meets every part in at most 2Δ(X)/k vertices.
pub fn quasirandom_partition(
    x: &MultiHypergraph,
    k: usize,
    seed: u64,
    retries: usize,
) -> Result<Partition, RefineError> {
    let n = x.n() as usize;
    let r = x.r();
    if k == 0 {
        return Err(RefineError::Unsupported("k must be positive".into()));
    }
    let delta = x.delta();
    let part_cap = (2.0 * n as f64 / k as f64).floor() as usize;
    let link_cap = (2.0 * delta as f64 / k as f64).floor() as usize;
    let need = 3.0 * k as f64 * ((2.0 * k as f64).ln() + (r as f64 - 1.0) * (n.max(1) as f64).ln());
    let below_threshold = (delta as f64) < need;
    let mut worst = (usize::MAX, usize::MAX);
    for attempt in 0..retries.max(1) {
        let part_of: Vec<usize> = if k == 1 {
            vec![0; n]
        } else {
            let mut rng = retry_rng(seed, "partition", attempt as u64);
            (0..n).map(|_| rng.gen_range(0..k)).collect()
        };
        let (wp, wl) = partition_bounds(x, &part_of, k);
        if k == 1 || (wp <= part_cap && wl <= link_cap) {
            return Ok(Partition {
                k,
                part_of,
                attempts: attempt + 1,
                worst_part: wp,
                part_cap,
                worst_link: wl,
                link_cap,
                below_threshold,
            });
        }
        if (wp.saturating_sub(part_cap), wl.saturating_sub(link_cap))
            < (worst.0.saturating_sub(part_cap), worst.1.saturating_sub(link_cap))
        {
            worst = (wp, wl);
        }
    }
    Err(RefineError::Partition {
        attempts: retries.max(1),
        worst_part: worst.0,
        part_cap,
        worst_link: worst.1,
        link_cap,
    })
}

/// The bounds a partition must meet, recomputed from scratch.
pub fn audit_partition(x: &MultiHypergraph, p: &Partition) -> bool {
    if p.part_of.len() != x.n() as usize || p.part_of.iter().any(|&i| i >= p.k) {
        return false;
    }
    if p.k == 1 {
        return true;
    }
    let (wp, wl) = partition_bounds(x, &p.part_of, p.k);
    wp <= p.part_cap && wl <= p.link_cap
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecialSets {
    pub k: usize,
    pub q: usize,
    pub r: usize,
    /// S_I per sorted r-multi-subset I of [k].
    pub sets: BTreeMap<Vec<usize>, Vec<Vertex>>,
    /// m_ℓ = ⌈C·k^{ℓ+1}/v^ℓ⌉ for ℓ = 0..r−2.
    pub caps: Vec<usize>,
    /// Largest α met by the greedy.
    pub worst_alpha: f64,
}

/// All r-multi-subsets of 0..k as sorted vectors.
pub fn multisets(k: usize, r: usize) -> Vec<Vec<usize>> {
    (0..k).combinations_with_replacement(r).collect()
}

fn sub_multisets(i: &[usize], size: usize) -> BTreeSet<Vec<usize>> {
    i.iter().copied().combinations(size).collect()
}

fn cap_for(c: f64, k: usize, v: usize, t: usize) -> usize {
    (c * (k as f64).powi(t as i32 + 1) / (v as f64).powi(t as i32)).ceil().max(1.0) as usize
}

/// One (q − r)-set S_I ⊆ Y ∖ ⋃_{i∈I} V_i per r-multi-subset I, by maximal extension: each
/// new S_I avoids every (r−1)-subset of an earlier set and every ℓ-set T whose load
/// d(J, T) for some J ⊆ I with |J| = r − 1 − ℓ has reached m_ℓ.
pub fn special_sets(
    x: &MultiHypergraph,
    partition: &Partition,
    y: &BTreeSet<Vertex>,
    q: usize,
    c: f64,
    node_budget: u64,
) -> Result<SpecialSets, RefineError> {
    let r = x.r();
    let k = partition.k;
    let v = x.n() as usize;
    let caps: Vec<usize> = (0..r.saturating_sub(1)).map(|l| cap_for(c, k, v, l)).collect();
    let mut sets: BTreeMap<Vec<usize>, Vec<Vertex>> = BTreeMap::new();
    let mut used_r1: BTreeSet<Vec<Vertex>> = BTreeSet::new();
    let mut load: HashMap<(Vec<usize>, Vec<Vertex>), usize> = HashMap::new();
    let mut worst_alpha: f64 = 0.0;
    for i in multisets(k, r) {
        let blocked: BTreeSet<usize> = i.iter().copied().collect();
        let y_prime: Vec<Vertex> =
            y.iter().copied().filter(|&u| !blocked.contains(&partition.part_of[u as usize])).collect();
        let yset: BTreeSet<Vertex> = y_prime.iter().copied().collect();
        let mut z = BoundedHypergraph::new(y_prime.iter().copied());
        if r >= 2 {
            for s in &used_r1 {
                if s.iter().all(|u| yset.contains(u)) {
                    z.add(s.iter().copied());
                }
            }
        }
        #[allow(clippy::needless_range_loop)]
        for ell in 1..r.saturating_sub(1) {
            for j in sub_multisets(&i, r - 1 - ell) {
                for ((jj, t), &d) in &load {
                    if *jj == j && t.len() == ell && d >= caps[ell] && t.iter().all(|u| yset.contains(u)) {
                        z.add(t.iter().copied());
                    }
                }
            }
        }
        let size = q - r;
        let found = if size == 0 {
            Ok(TuranResult { set: Vec::new(), alpha: 0.0 })
        } else {
            turan_free_qset(&z, size, node_budget)
        };
        let TuranResult { set, alpha } = found.map_err(|_| RefineError::SpecialSets { blocking: i.clone() })?;
        worst_alpha = worst_alpha.max(alpha);
        if r >= 2 {
            for s in set.iter().copied().combinations(r - 1) {
                used_r1.insert(s);
            }
        }
        for jl in 1..r {
            for j in sub_multisets(&i, jl) {
                for t in set.iter().copied().combinations(r - 1 - jl) {
                    *load.entry((j.clone(), t)).or_insert(0) += 1;
                }
            }
        }
        sets.insert(i, set);
    }
    Ok(SpecialSets { k, q, r, sets, caps, worst_alpha })
}

/// Properties (1)–(3) of a special-set collection, recomputed from the sets alone.
pub fn audit_special_sets(
    ss: &SpecialSets,
    partition: &Partition,
    y: &BTreeSet<Vertex>,
    v: usize,
    c: f64,
) -> Result<(), String> {
    let (q, r, k) = (ss.q, ss.r, ss.k);
    for (i, s) in &ss.sets {
        if s.len() != q - r {
            return Err(format!("S_{i:?} has size {}", s.len()));
        }
        if let Some(u) = s.iter().find(|u| !y.contains(u) || i.contains(&partition.part_of[**u as usize])) {
            return Err(format!("S_{i:?} contains {u}, outside Y or inside a part of I"));
        }
    }
    for ((i1, s1), (i2, s2)) in ss.sets.iter().tuple_combinations() {
        let meet = s1.iter().filter(|u| s2.contains(u)).count();
        if meet + 2 > r {
            return Err(format!("S_{i1:?} and S_{i2:?} share {meet} vertices"));
        }
    }
    for jl in 1..r {
        let tl = r - 1 - jl;
        let cap = cap_for(c, k, v, tl);
        let mut counts: HashMap<(Vec<usize>, Vec<Vertex>), usize> = HashMap::new();
        for (i, s) in &ss.sets {
            for j in sub_multisets(i, jl) {
                for t in s.iter().copied().combinations(tl) {
                    *counts.entry((j.clone(), t)).or_insert(0) += 1;
                }
            }
        }
        if let Some(((j, t), d)) = counts.into_iter().find(|&(_, d)| d > cap) {
            return Err(format!("J = {j:?}, T = {t:?} lies in {d} special sets, cap {cap}"));
        }
    }
    Ok(())
}

/// The largest k ≤ v^{(r−1)/r} for which the counting bound of the greedy stays below 1 at
/// every step with the given partition part sizes: (q − r)·(|I| − 1)·binom(q − r, r − 1)
/// blocked (r−1)-sets against binom(|Y′|, r − 1) for the smallest Y′.
pub fn max_admissible_parts(
    x: &MultiHypergraph,
    y: &BTreeSet<Vertex>,
    q: usize,
    seed: u64,
    retries: usize,
) -> Option<(usize, Partition)> {
    let r = x.r();
    let v = x.n() as f64;
    let top = v.powf((r as f64 - 1.0) / r as f64).floor() as usize;
    for k in (1..=top.max(1)).rev() {
        let Ok(p) = quasirandom_partition(x, k, seed, retries) else { continue };
        let count = multisets(k, r).len();
        let worst_y = multisets(k, r)
            .into_iter()
            .map(|i| {
                let b: BTreeSet<usize> = i.into_iter().collect();
                y.iter().filter(|&&u| !b.contains(&p.part_of[u as usize])).count()
            })
            .min()
            .unwrap_or(0);
        let blocked = binomial(q - r, r - 1) as f64 * (count.saturating_sub(1)) as f64;
        let alpha = blocked / binomial(worst_y, r - 1).max(1) as f64 * binomial(q - r, r - 1) as f64;
        if worst_y >= q - r && alpha < 1.0 {
            return Some((k, p));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    #[test]
    fn scan_free_set() {
        let cands: Vec<Vertex> = (0..6).collect();
        let got = free_set_scan(&cands, 3, 2, 1000, |s| s == [1] || s == [0, 2]).unwrap();
        assert_eq!(got, vec![0, 3, 4]);
        assert!(free_set_scan(&cands, 6, 1, 1000, |s| s == [5]).is_none());
    }

    #[test]
    fn turan_trivial_cases() {
        let z = BoundedHypergraph::new(0..5);
        assert_eq!(turan_free_qset(&z, 3, 100).unwrap().set, vec![0, 1, 2]);
        let mut z = BoundedHypergraph::new(0..4);
        z.add([0, 1, 2]);
        let got = turan_free_qset(&z, 3, 100).unwrap().set;
        assert_ne!(got, vec![0, 1, 2]);
    }

    #[test]
    fn turan_random_sparse() {
        let mut rng = retry_rng(3, "turan", 0);
        for _ in 0..20 {
            let mut z = BoundedHypergraph::new(0..20);
            for _ in 0..6 {
                let mut vs: Vec<Vertex> = (0..20).collect();
                vs.shuffle(&mut rng);
                let size = rng.gen_range(1..=3);
                z.add(vs[..size].iter().copied());
            }
            let res = turan_free_qset(&z, 4, 1_000_000).unwrap();
            assert!(res.alpha < 1.0 || res.set.len() == 4);
            let s: BTreeSet<Vertex> = res.set.iter().copied().collect();
            assert!(z.edges.iter().all(|e| !e.iter().all(|u| s.contains(u))));
        }
    }

    #[test]
    fn partition_k30() {
        let x = MultiHypergraph::complete(30, 2);
        let p = quasirandom_partition(&x, 3, 11, 100).unwrap();
        assert!(audit_partition(&x, &p));
        let one = quasirandom_partition(&x, 1, 0, 1).unwrap();
        assert!(one.part_of.iter().all(|&i| i == 0));
    }

    #[test]
    fn partition_failure() {
        let x = MultiHypergraph::from_supports(5, 2, [[0, 1], [2, 3]]).unwrap();
        assert!(matches!(quasirandom_partition(&x, 10, 1, 20), Err(RefineError::Partition { .. })));
    }

    #[test]
    fn special_sets_single_part() {
        let x = MultiHypergraph::complete(8, 2);
        let p = quasirandom_partition(&x, 1, 0, 1).unwrap();
        let y: BTreeSet<Vertex> = (0..8).collect();
        assert_eq!(multisets(1, 2), vec![vec![0, 0]]);
        let err = special_sets(&x, &p, &y, 3, 4.0, 1000).unwrap_err();
        assert!(matches!(err, RefineError::SpecialSets { blocking } if blocking == vec![0, 0]));
    }
}
