//! Vertex gadgets that imitate the divisibility of a missing or present edge, partial
//! cliques and their edge-disjoint embedding, and absorbers with their certificates.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::divisibility::{binomial, divisible, modulus_m, DivisibilityError};
use crate::exactdecomp::{Decomposition, ExactError};
use crate::hypercore::{HyperError, Iid, IidPool, MultiHypergraph, Vertex};

pub mod absorber;
pub mod embed;

pub use absorber::{
    better_absorber, constructive_absorber, intersection_audit, search_absorber, verify_absorber, AbsorberSearch,
    SearchBudget,
};
pub use embed::{embed_partial_cliques, embed_rooted, EmbedConfig, EmbeddingPlan, Request};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GadgetError {
    #[error("root of size {got} does not fit q = {q}, r = {r}")]
    BadRoot { got: usize, q: usize, r: usize },
    #[error("L is not divisible")]
    NotDivisible,
    #[error("L has {got} vertices, above the search cap {cap}")]
    TooLarge { got: usize, cap: usize },
    #[error("search budget exhausted after {nodes} nodes and {vertices} extra vertices")]
    Indeterminate { nodes: u64, vertices: usize },
    #[error("request {request}: {reason}")]
    Embedding { request: usize, reason: String },
    #[error("embedding bound violated: max degree {got} > {bound}")]
    DegreeBound { got: usize, bound: usize },
    #[error("intersection audit failed at block {block:?}")]
    Intersection { block: Vec<Vertex> },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Divisibility(#[from] DivisibilityError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GadgetKind {
    AntiEdge,
    FakeEdge,
    PartialClique,
    Absorber,
}

/// Q1 decomposes A alone; Q2 decomposes A ∪ L.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificates {
    pub q1: Decomposition,
    pub q2: Decomposition,
}

#[derive(Clone, Debug)]
pub struct Gadget {
    pub kind: GadgetKind,
    pub root: Vec<Vertex>,
    pub new_verts: Vec<Vertex>,
    pub edges: MultiHypergraph,
    pub certificates: Option<Certificates>,
}

#[derive(Serialize)]
struct GadgetJson<'a> {
    kind: GadgetKind,
    root: &'a [Vertex],
    new_vertices: &'a [Vertex],
    edges: Vec<(Iid, &'a [Vertex])>,
    certificates: &'a Option<Certificates>,
}

impl Gadget {
    pub fn vertex_count(&self) -> usize {
        self.root.len() + self.new_verts.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let view = GadgetJson {
            kind: self.kind,
            root: &self.root,
            new_vertices: &self.new_verts,
            edges: self.edges.instances().collect(),
            certificates: &self.certificates,
        };
        serde_json::to_value(view).expect("gadget serializes")
    }
}

fn check_root(root: &[Vertex], q: usize) -> Result<Vec<Vertex>, GadgetError> {
    let r = root.len();
    let set: BTreeSet<Vertex> = root.iter().copied().collect();
    if r == 0 || r >= q || set.len() != r {
        return Err(GadgetError::BadRoot { got: set.len(), q, r });
    }
    Ok(set.into_iter().collect())
}

fn push_anti(g: &mut MultiHypergraph, pool: &mut IidPool, root: &[Vertex], fresh: &[Vertex]) -> Result<(), HyperError> {
    let all: Vec<Vertex> = root.iter().chain(fresh).copied().sorted().collect();
    for e in all.into_iter().combinations(root.len()) {
        if e != root {
            g.push(pool, e)?;
        }
    }
    Ok(())
}

/// q − r new vertices numbered from `first_fresh`, with every r-subset of the union except
/// the root itself.
pub fn anti_edge(root: &[Vertex], q: usize, first_fresh: Vertex) -> Result<Gadget, GadgetError> {
    let root = check_root(root, q)?;
    let r = root.len();
    if root.iter().any(|&v| v >= first_fresh) {
        return Err(HyperError::VertexOutOfRange { vertex: *root.last().expect("nonempty"), n: first_fresh }.into());
    }
    let fresh: Vec<Vertex> = (first_fresh..first_fresh + (q - r) as Vertex).collect();
    let mut g = MultiHypergraph::new(first_fresh + (q - r) as Vertex, r);
    push_anti(&mut g, &mut IidPool::new(), &root, &fresh)?;
    Ok(Gadget { kind: GadgetKind::AntiEdge, root, new_verts: fresh, edges: g, certificates: None })
}

/// A hub of q − r new vertices and an anti-edge with its own fresh vertices on every other
/// r-subset of root ∪ hub.
pub fn fake_edge(root: &[Vertex], q: usize, first_fresh: Vertex) -> Result<Gadget, GadgetError> {
    let root = check_root(root, q)?;
    let r = root.len();
    if root.iter().any(|&v| v >= first_fresh) {
        return Err(HyperError::VertexOutOfRange { vertex: *root.last().expect("nonempty"), n: first_fresh }.into());
    }
    let k = (q - r) as Vertex;
    let hub: Vec<Vertex> = (first_fresh..first_fresh + k).collect();
    let sets: Vec<Vec<Vertex>> =
        root.iter().chain(&hub).copied().sorted().combinations(r).filter(|t| *t != root).collect();
    let total = first_fresh + k + k * sets.len() as Vertex;
    let mut g = MultiHypergraph::new(total, r);
    let mut pool = IidPool::new();
    let mut next = first_fresh + k;
    let mut new_verts = hub;
    for t in sets {
        let fresh: Vec<Vertex> = (next..next + k).collect();
        next += k;
        push_anti(&mut g, &mut pool, &t, &fresh)?;
        new_verts.extend(fresh);
    }
    Ok(Gadget { kind: GadgetKind::FakeEdge, root, new_verts, edges: g, certificates: None })
}

/// d(S′) ≡ −1 (anti-edge) or +1 (fake edge) modulo binom(q − i, r − i) for every S′ ⊊ root.
pub fn check_gadget_congruences(g: &Gadget, q: usize) -> bool {
    let target: i64 = match g.kind {
        GadgetKind::AntiEdge => -1,
        GadgetKind::FakeEdge => 1,
        _ => return false,
    };
    let r = g.root.len();
    (0..r).all(|i| {
        let modulus = binomial(q - i, r - i) as i64;
        g.root.iter().copied().combinations(i).all(|s| (g.edges.degree(&s) as i64 - target).rem_euclid(modulus) == 0)
    })
}

/// M(q, r) edge-disjoint copies of the gadget over one root, each with fresh vertices.
pub fn m_copies(kind: GadgetKind, root: &[Vertex], q: usize) -> Result<MultiHypergraph, GadgetError> {
    let root = check_root(root, q)?;
    let m = modulus_m(q, root.len())? as usize;
    let mut n = root.iter().max().map_or(0, |v| v + 1);
    let mut all = MultiHypergraph::new(n, root.len());
    let mut pool = IidPool::new();
    for _ in 0..m {
        let g = match kind {
            GadgetKind::AntiEdge => anti_edge(&root, q, n)?,
            GadgetKind::FakeEdge => fake_edge(&root, q, n)?,
            other => return Err(GadgetError::Unsupported(format!("{other:?} has no copy construction"))),
        };
        n = g.edges.n();
        all.grow_to(n);
        for (_, e) in g.edges.instances() {
            all.push(&mut pool, e.to_vec())?;
        }
    }
    Ok(all)
}

pub fn m_copies_divisible(kind: GadgetKind, root: &[Vertex], q: usize) -> Result<bool, GadgetError> {
    Ok(divisible(&m_copies(kind, root, q)?, q))
}

/// The partial K_k^r rooted at `root` on `root ∪ others`: every r-subset not inside the root.
pub fn partial_clique_edges(root: &[Vertex], others: &[Vertex], r: usize) -> Vec<Vec<Vertex>> {
    let rs: BTreeSet<Vertex> = root.iter().copied().collect();
    root.iter().chain(others).copied().sorted().combinations(r).filter(|e| !e.iter().all(|v| rs.contains(v))).collect()
}

/// Copies `g` into a host numbering through `map`, giving each edge a fresh id; returns the
/// id translation.
pub fn transplant(
    g: &MultiHypergraph,
    map: &BTreeMap<Vertex, Vertex>,
    into: &mut MultiHypergraph,
    pool: &mut IidPool,
) -> Result<BTreeMap<Iid, Iid>, HyperError> {
    let mut ids = BTreeMap::new();
    for (iid, e) in g.instances() {
        let img: Vec<Vertex> = e.iter().map(|v| map[v]).collect();
        if let Some(&top) = img.iter().max() {
            if top >= into.n() {
                into.grow_to(top + 1);
            }
        }
        ids.insert(iid, into.push(pool, img)?);
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anti_edge_triangle() {
        let g = anti_edge(&[0, 1], 3, 2).unwrap();
        assert_eq!(g.new_verts, vec![2]);
        let sup: Vec<Vec<Vertex>> = g.edges.supports().map(|(s, _)| s.to_vec()).collect();
        assert_eq!(sup, vec![vec![0, 2], vec![1, 2]]);
        assert_eq!(g.edges.degree(&[]), 2);
        assert_eq!(g.edges.degree(&[0]), 1);
        assert!(check_gadget_congruences(&g, 3));
    }

    #[test]
    fn anti_edge_k4() {
        let g = anti_edge(&[0, 1], 4, 2).unwrap();
        assert_eq!(g.new_verts.len(), 2);
        assert_eq!(g.edges.e(), 5);
    }

    #[test]
    fn fake_edge_is_a_path() {
        let g = fake_edge(&[0, 1], 3, 2).unwrap();
        assert_eq!(g.new_verts.len(), 3);
        let sup: BTreeSet<Vec<Vertex>> = g.edges.supports().map(|(s, _)| s.to_vec()).collect();
        let want: BTreeSet<Vec<Vertex>> = [vec![0, 3], vec![2, 3], vec![1, 4], vec![2, 4]].into_iter().collect();
        assert_eq!(sup, want);
        assert_eq!(g.edges.degree(&[]), 4);
        assert!(check_gadget_congruences(&g, 3));
    }

    #[test]
    fn fake_edge_size_bound() {
        for q in 2..=6 {
            for r in 1..q {
                let root: Vec<Vertex> = (0..r as Vertex).collect();
                let g = fake_edge(&root, q, r as Vertex).unwrap();
                assert!(g.new_verts.len() <= (q - r) * binomial(q, r) as usize);
            }
        }
    }

    #[test]
    fn copies_divisible() {
        for kind in [GadgetKind::AntiEdge, GadgetKind::FakeEdge] {
            assert!(m_copies_divisible(kind, &[0, 1], 3).unwrap());
            assert!(m_copies_divisible(kind, &[0, 1, 2], 4).unwrap());
        }
        assert_eq!(m_copies(GadgetKind::AntiEdge, &[0, 1], 3).unwrap().e(), 12);
    }

    #[test]
    fn root_checks() {
        assert!(anti_edge(&[0, 1, 2], 3, 5).is_err());
        assert!(fake_edge(&[0, 0], 3, 5).is_err());
    }
}
