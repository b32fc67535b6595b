//! The robustly matchable hypergraph H on y_1..y_{(q+1)m} with y_{(q+1)i} = x_i, its
//! closed-form matchings, and the 1-uniform omni-absorber built from it.
//!
//! Positions are 1-based throughout, matching the index formulas.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};
use crate::refinery::{OmniAbsorber, RefineError, RefinementFamily, Refiner};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RmhError {
    #[error("q must be at least 1")]
    BadQ,
    #[error("position {0} is not an X position")]
    NotInX(usize),
    #[error("block {0:?} of the matching formula is not an edge")]
    NonEdge(Vec<usize>),
    #[error("{m} inputs exceed the brute-force cap {cap}")]
    CapExceeded { m: usize, cap: usize },
    #[error("no vertex of the target set avoids the conflicts of position {0}")]
    Embedding(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct RmhInstance {
    pub q: usize,
    pub m: usize,
    /// Label of position p at index p − 1.
    pub labels: Vec<Vertex>,
    /// Edges as sorted position lists.
    pub edges: Vec<Vec<usize>>,
    #[serde(skip)]
    index: HashMap<Vec<usize>, usize>,
}

impl RmhInstance {
    /// The instance on positions alone, labelled by position.
    pub fn on_positions(m: usize, q: usize) -> Result<Self, RmhError> {
        if q == 0 {
            return Err(RmhError::BadQ);
        }
        let v = (q + 1) * m;
        let mut edges: Vec<Vec<usize>> = Vec::new();
        let mut index = HashMap::new();
        let mut add = |e: Vec<usize>, edges: &mut Vec<Vec<usize>>| {
            if !index.contains_key(&e) {
                index.insert(e.clone(), edges.len());
                edges.push(e);
            }
        };
        if v >= q {
            for i in 1..=v + 1 - q {
                add((0..q).map(|j| i + j).collect(), &mut edges);
            }
        }
        if v > q {
            for i in (1..=v - q).filter(|i| i % (q + 1) != 0) {
                add((0..=q).map(|j| i + j).filter(|p| p % (q + 1) != 0).collect(), &mut edges);
            }
        }
        Ok(Self { q, m, labels: (1..=v as Vertex).collect(), edges, index })
    }

    pub fn vertex_count(&self) -> usize {
        (self.q + 1) * self.m
    }

    pub fn is_x(&self, p: usize) -> bool {
        p.is_multiple_of(self.q + 1)
    }

    pub fn x_positions(&self) -> impl Iterator<Item = usize> {
        let step = self.q + 1;
        (1..=self.m).map(move |i| i * step)
    }

    pub fn r_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.vertex_count()).filter(|&p| !self.is_x(p))
    }

    /// X′ = {y_1, …, y_{q−1}}.
    pub fn xprime_positions(&self) -> impl Iterator<Item = usize> {
        let top = if self.m == 0 { 0 } else { self.q - 1 };
        1..=top
    }

    pub fn label(&self, p: usize) -> Vertex {
        self.labels[p - 1]
    }

    pub fn edge_index(&self, e: &[usize]) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.vertex_count() + 1];
        for e in &self.edges {
            for &p in e {
                deg[p] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn labelled_edges(&self) -> Vec<Vec<Vertex>> {
        self.edges.iter().map(|e| e.iter().map(|&p| self.label(p)).collect()).collect()
    }

    pub fn role(&self, p: usize) -> &'static str {
        if self.is_x(p) {
            "X"
        } else if self.m > 0 && p < self.q {
            "X'"
        } else {
            "R"
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let vertices: Vec<_> = (1..=self.vertex_count())
            .map(|p| serde_json::json!({ "position": p, "label": self.label(p), "role": self.role(p) }))
            .collect();
        serde_json::json!({
            "q": self.q,
            "m": self.m,
            "vertices": vertices,
            "edges": self.labelled_edges(),
            "max_degree": self.max_degree(),
        })
    }

    /// Removes one edge; only meant for mutation tests.
    pub fn delete_edge(&mut self, idx: usize) {
        self.edges.remove(idx);
        self.index = self.edges.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
    }
}

/// H over the inputs `xs`, with R vertices labelled `first_fresh, first_fresh + 1, …` in
/// position order.
pub fn build_rmh(xs: &[Vertex], q: usize, first_fresh: Vertex) -> Result<RmhInstance, RmhError> {
    let mut inst = RmhInstance::on_positions(xs.len(), q)?;
    let mut fresh = first_fresh;
    for p in 1..=inst.vertex_count() {
        inst.labels[p - 1] = if inst.is_x(p) {
            xs[p / (q + 1) - 1]
        } else {
            fresh += 1;
            fresh - 1
        };
    }
    Ok(inst)
}

/// M_L as edge indices: sort L ∪ R as s_1 < … < s_N and take the blocks
/// {s_{N−qi−j} : 0 ≤ j < q} for 0 ≤ i < ⌊N/q⌋.
pub fn rmh_matching_positions(inst: &RmhInstance, l: &BTreeSet<usize>) -> Result<Vec<usize>, RmhError> {
    if let Some(&bad) = l.iter().find(|&&p| p == 0 || p > inst.vertex_count() || !inst.is_x(p)) {
        return Err(RmhError::NotInX(bad));
    }
    let s: Vec<usize> = inst.r_positions().chain(l.iter().copied()).sorted().collect();
    let n = s.len();
    let q = inst.q;
    (0..n / q)
        .map(|i| {
            let mut block: Vec<usize> = (0..q).map(|j| s[n - q * i - j - 1]).collect();
            block.sort_unstable();
            inst.edge_index(&block).ok_or(RmhError::NonEdge(block))
        })
        .collect()
}

/// M_L over labels, for L a subset of the input vertices.
pub fn rmh_matching(inst: &RmhInstance, l: &[Vertex]) -> Result<Vec<Vec<Vertex>>, RmhError> {
    let by_label: BTreeMap<Vertex, usize> = inst.x_positions().map(|p| (inst.label(p), p)).collect();
    let mut pos = BTreeSet::new();
    for v in l {
        let &p = by_label.get(v).ok_or(RmhError::NotInX(*v as usize))?;
        pos.insert(p);
    }
    Ok(rmh_matching_positions(inst, &pos)?.into_iter().map(|e| inst.labelled_edges()[e].clone()).collect())
}

/// Checks (L ∪ R) ∖ X′ ⊆ V(M_L) ⊆ L ∪ R, disjointness and edge membership for every L ⊆ X.
pub fn verify_rmh(inst: &RmhInstance, cap: usize) -> Result<bool, RmhError> {
    if inst.m > cap {
        return Err(RmhError::CapExceeded { m: inst.m, cap });
    }
    let xs: Vec<usize> = inst.x_positions().collect();
    let xprime: BTreeSet<usize> = inst.xprime_positions().collect();
    for mask in 0u64..(1u64 << inst.m) {
        let l: BTreeSet<usize> = xs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p).collect();
        let Ok(matching) = rmh_matching_positions(inst, &l) else { return Ok(false) };
        let mut seen = BTreeSet::new();
        for e in &matching {
            for &p in &inst.edges[*e] {
                if !seen.insert(p) {
                    return Ok(false);
                }
            }
        }
        let allowed: BTreeSet<usize> = inst.r_positions().chain(l.iter().copied()).collect();
        if !seen.is_subset(&allowed) || !allowed.difference(&xprime).all(|p| seen.contains(p)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// 1-uniform omni-absorber of X: the RMH on X's instances (each parallel copy its own
/// position), with the R-singletons embedded greedily into `target` so that every block
/// has distinct vertices; each singleton goes to the least used admissible target.
pub fn build_1uniform_omni(
    x: &MultiHypergraph,
    q: usize,
    target: &BTreeSet<Vertex>,
    pool: &mut IidPool,
) -> Result<OmniAbsorber, RefineError> {
    if x.r() != 1 {
        return Err(RefineError::Composition(format!("expected a 1-uniform graph, got r = {}", x.r())));
    }
    let x_ids: Vec<Iid> = x.iids().collect();
    let inst = RmhInstance::on_positions(x_ids.len(), q)?;
    let v = inst.vertex_count();
    let mut vertex_at: Vec<Option<Vertex>> = vec![None; v + 1];
    let mut iid_at: Vec<Iid> = vec![Iid(0); v + 1];
    for (i, p) in inst.x_positions().enumerate() {
        vertex_at[p] = Some(x.get(x_ids[i]).expect("listed id")[0]);
        iid_at[p] = x_ids[i];
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); v + 1];
    for (ei, e) in inst.edges.iter().enumerate() {
        for &p in e {
            incident[p].push(ei);
        }
    }
    let n = target.iter().map(|&t| t + 1).max().unwrap_or(0).max(x.n());
    let mut a = MultiHypergraph::new(n, 1);
    let mut load: BTreeMap<Vertex, usize> = BTreeMap::new();
    for p in inst.r_positions() {
        let blocked: BTreeSet<Vertex> =
            incident[p].iter().flat_map(|&ei| inst.edges[ei].iter()).filter_map(|&o| vertex_at[o]).collect();
        let &y = target
            .iter()
            .filter(|y| !blocked.contains(y))
            .min_by_key(|y| load.get(y).copied().unwrap_or(0))
            .ok_or(RmhError::Embedding(p))?;
        *load.entry(y).or_insert(0) += 1;
        vertex_at[p] = Some(y);
        iid_at[p] = a.push(pool, vec![y])?;
    }
    let mut family = RefinementFamily::new();
    for e in &inst.edges {
        family.push(e.iter().map(|&p| iid_at[p]).collect());
    }
    let x_pos: HashMap<Iid, usize> = inst.x_positions().map(|p| (iid_at[p], p)).collect();
    let inst = Arc::new(inst);
    let refine = Arc::new(move |l: &BTreeSet<Iid>| {
        let pos: BTreeSet<usize> = l.iter().map(|i| x_pos[i]).collect();
        Ok(rmh_matching_positions(&inst, &pos)?)
    });
    let rf = Refiner::new(q, x.clone(), a, family, BTreeSet::new(), refine)?;
    OmniAbsorber::new(rf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roles_in_json() {
        let inst = RmhInstance::on_positions(2, 3).unwrap();
        let json = inst.to_json();
        let roles: Vec<&str> =
            json["vertices"].as_array().unwrap().iter().map(|v| v["role"].as_str().unwrap()).collect();
        assert_eq!(roles, ["X'", "X'", "R", "X", "R", "R", "R", "X"]);
    }

    #[test]
    fn small_instance_matches_hand_expansion() {
        let inst = RmhInstance::on_positions(2, 2).unwrap();
        let got: BTreeSet<Vec<usize>> = inst.edges.iter().cloned().collect();
        let want: BTreeSet<Vec<usize>> =
            [vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5], vec![5, 6], vec![2, 4]].into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(inst.xprime_positions().collect::<Vec<_>>(), vec![1]);
        let m = rmh_matching_positions(&inst, &[3].into()).unwrap();
        let blocks: BTreeSet<Vec<usize>> = m.iter().map(|&e| inst.edges[e].clone()).collect();
        assert_eq!(blocks, [vec![4, 5], vec![2, 3]].into_iter().collect());
    }

    #[test]
    fn empty_instance() {
        let inst = RmhInstance::on_positions(0, 3).unwrap();
        assert!(inst.edges.is_empty());
        assert!(verify_rmh(&inst, 14).unwrap());
    }

    #[test]
    fn labelled_build() {
        let inst = build_rmh(&[10, 20], 2, 100).unwrap();
        assert_eq!(inst.labels, vec![100, 101, 10, 102, 103, 20]);
        let m = rmh_matching(&inst, &[10]).unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn deleting_an_edge_breaks_verification() {
        let mut inst = RmhInstance::on_positions(3, 3).unwrap();
        assert!(verify_rmh(&inst, 14).unwrap());
        inst.delete_edge(0);
        assert!(!verify_rmh(&inst, 14).unwrap());
    }
}
