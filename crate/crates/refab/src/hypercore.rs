//! Uniform multi-hypergraphs whose edges carry instance ids.
//!
//! Parallel edges are told apart by their [`Iid`], so edge-disjointness and
//! decomposition certificates are statements about sets of ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vertex = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Iid(pub u64);

impl fmt::Display for Iid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Hands out instance ids that are unique across every graph built from the same pool.
#[derive(Clone, Debug, Default)]
pub struct IidPool {
    next: u64,
}

impl IidPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u64) -> Self {
        Self { next }
    }

    /// Pool whose ids lie above every instance of `graphs`.
    pub fn after<'a>(graphs: impl IntoIterator<Item = &'a MultiHypergraph>) -> Self {
        let next = graphs.into_iter().filter_map(|g| g.max_iid()).map(|i| i.0 + 1).max().unwrap_or(0);
        Self { next }
    }

    pub fn fresh(&mut self) -> Iid {
        let id = Iid(self.next);
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HyperError {
    #[error("edge {verts:?} has {got} vertices, expected {expected}")]
    Arity { verts: Vec<Vertex>, got: usize, expected: usize },
    #[error("edge {0:?} repeats a vertex")]
    RepeatedVertex(Vec<Vertex>),
    #[error("vertex {vertex} outside a universe of {n} vertices")]
    VertexOutOfRange { vertex: Vertex, n: u32 },
    #[error("instance id {0} already present")]
    IidCollision(Iid),
    #[error("unknown instance id {0}")]
    UnknownIid(Iid),
    #[error("link set of size {size} must be smaller than the uniformity {r}")]
    InvalidArity { size: usize, r: usize },
    #[error("join set {set:?} meets edge {edge:?}")]
    InvalidJoin { set: Vec<Vertex>, edge: Vec<Vertex> },
    #[error("uniformities {0} and {1} differ")]
    Incompatible(usize, usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// An r-uniform multi-hypergraph on the vertex universe `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiHypergraph {
    n: u32,
    r: usize,
    edges: BTreeMap<Iid, Vec<Vertex>>,
    support: BTreeMap<Vec<Vertex>, Vec<Iid>>,
}

impl MultiHypergraph {
    pub fn new(n: u32, r: usize) -> Self {
        Self { n, r, edges: BTreeMap::new(), support: BTreeMap::new() }
    }

    /// K_n^r with ids 0.. in lexicographic order of supports.
    pub fn complete(n: u32, r: usize) -> Self {
        let mut g = Self::new(n, r);
        for (i, c) in (0..n).combinations(r).enumerate() {
            g.insert(Iid(i as u64), c).expect("lexicographic combinations are valid edges");
        }
        g
    }

    /// Simple graph with ids 0.. in the given order.
    pub fn from_supports<I, E>(n: u32, r: usize, supports: I) -> Result<Self, HyperError>
    where
        I: IntoIterator<Item = E>,
        E: AsRef<[Vertex]>,
    {
        let mut g = Self::new(n, r);
        for (i, s) in supports.into_iter().enumerate() {
            g.insert(Iid(i as u64), s.as_ref().to_vec())?;
        }
        Ok(g)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of edge instances.
    pub fn e(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Enlarges the vertex universe; never shrinks it.
    pub fn grow_to(&mut self, n: u32) {
        self.n = self.n.max(n);
    }

    pub fn insert(&mut self, iid: Iid, mut verts: Vec<Vertex>) -> Result<(), HyperError> {
        verts.sort_unstable();
        if verts.len() != self.r {
            return Err(HyperError::Arity { got: verts.len(), expected: self.r, verts });
        }
        if verts.windows(2).any(|w| w[0] == w[1]) {
            return Err(HyperError::RepeatedVertex(verts));
        }
        if let Some(&v) = verts.iter().find(|&&v| v >= self.n) {
            return Err(HyperError::VertexOutOfRange { vertex: v, n: self.n });
        }
        if self.edges.contains_key(&iid) {
            return Err(HyperError::IidCollision(iid));
        }
        let ids = self.support.entry(verts.clone()).or_default();
        let at = ids.partition_point(|&x| x < iid);
        ids.insert(at, iid);
        self.edges.insert(iid, verts);
        Ok(())
    }

    /// Inserts with a fresh id from `pool`, growing the universe if needed.
    pub fn push(&mut self, pool: &mut IidPool, verts: Vec<Vertex>) -> Result<Iid, HyperError> {
        if let Some(&m) = verts.iter().max() {
            self.grow_to(m + 1);
        }
        let iid = pool.fresh();
        self.insert(iid, verts)?;
        Ok(iid)
    }

    pub fn remove(&mut self, iid: Iid) -> Option<Vec<Vertex>> {
        let verts = self.edges.remove(&iid)?;
        if let Some(ids) = self.support.get_mut(&verts) {
            ids.retain(|&x| x != iid);
            if ids.is_empty() {
                self.support.remove(&verts);
            }
        }
        Some(verts)
    }

    pub fn get(&self, iid: Iid) -> Option<&[Vertex]> {
        self.edges.get(&iid).map(Vec::as_slice)
    }

    pub fn contains(&self, iid: Iid) -> bool {
        self.edges.contains_key(&iid)
    }

    pub fn instances(&self) -> impl Iterator<Item = (Iid, &[Vertex])> + '_ {
        self.edges.iter().map(|(&i, v)| (i, v.as_slice()))
    }

    pub fn iids(&self) -> impl Iterator<Item = Iid> + '_ {
        self.edges.keys().copied()
    }

    pub fn iid_set(&self) -> BTreeSet<Iid> {
        self.edges.keys().copied().collect()
    }

    pub fn max_iid(&self) -> Option<Iid> {
        self.edges.keys().next_back().copied()
    }

    /// Distinct supports with their instance ids, in lexicographic order.
    pub fn supports(&self) -> impl Iterator<Item = (&[Vertex], &[Iid])> + '_ {
        self.support.iter().map(|(s, ids)| (s.as_slice(), ids.as_slice()))
    }

    pub fn support_count(&self) -> usize {
        self.support.len()
    }

    pub fn has_support(&self, s: &[Vertex]) -> bool {
        self.support.contains_key(s)
    }

    pub fn iids_on(&self, s: &[Vertex]) -> &[Iid] {
        self.support.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn multiplicity(&self, s: &[Vertex]) -> usize {
        self.iids_on(s).len()
    }

    pub fn max_multiplicity(&self) -> usize {
        self.support.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_simple(&self) -> bool {
        self.max_multiplicity() <= 1
    }

    /// Vertices that lie in at least one edge.
    pub fn vertices(&self) -> BTreeSet<Vertex> {
        self.support.keys().flatten().copied().collect()
    }

    /// |G(S)|: the number of instances containing `s`.
    pub fn degree(&self, s: &[Vertex]) -> usize {
        let s = sorted(s);
        if s.len() == self.r {
            return self.multiplicity(&s);
        }
        self.support.iter().filter(|(e, _)| is_subset(&s, e)).map(|(_, ids)| ids.len()).sum()
    }

    /// Degrees of every k-set contained in some edge.
    pub fn degree_table(&self, k: usize) -> BTreeMap<Vec<Vertex>, usize> {
        let mut table = BTreeMap::new();
        if k > self.r {
            return table;
        }
        for (e, ids) in &self.support {
            for sub in e.iter().copied().combinations(k) {
                *table.entry(sub).or_insert(0) += ids.len();
            }
        }
        table
    }

    /// Maximum of |G(S)| over k-sets S.
    pub fn max_degree(&self, k: usize) -> usize {
        self.degree_table(k).into_values().max().unwrap_or(0)
    }

    /// Δ(G), the maximum degree of an (r−1)-set.
    pub fn delta(&self) -> usize {
        if self.r == 0 {
            return self.e();
        }
        self.max_degree(self.r - 1)
    }

    /// Link G(S). Output instances keep the id of their source instance.
    pub fn link(&self, s: &[Vertex]) -> Result<MultiHypergraph, HyperError> {
        let s = sorted(s);
        if s.len() >= self.r {
            return Err(HyperError::InvalidArity { size: s.len(), r: self.r });
        }
        let mut out = MultiHypergraph::new(self.n, self.r - s.len());
        for (&iid, e) in &self.edges {
            if is_subset(&s, e) {
                let rest: Vec<Vertex> = e.iter().copied().filter(|v| s.binary_search(v).is_err()).collect();
                out.insert(iid, rest)?;
            }
        }
        Ok(out)
    }

    /// S ⊎ L: every edge e becomes S ∪ e. Ids are kept.
    pub fn join(s: &[Vertex], l: &MultiHypergraph) -> Result<MultiHypergraph, HyperError> {
        let s = sorted(s);
        let n = s.iter().map(|&v| v + 1).max().unwrap_or(0).max(l.n);
        let mut out = MultiHypergraph::new(n, l.r + s.len());
        for (&iid, e) in &l.edges {
            if e.iter().any(|v| s.binary_search(v).is_ok()) {
                return Err(HyperError::InvalidJoin { set: s, edge: e.clone() });
            }
            let mut verts = e.clone();
            verts.extend_from_slice(&s);
            out.insert(iid, verts)?;
        }
        Ok(out)
    }

    /// Sub-multigraph of instances containing `s`.
    pub fn star(&self, s: &[Vertex]) -> MultiHypergraph {
        let s = sorted(s);
        self.filter(|_, e| is_subset(&s, e))
    }

    /// True iff every edge has at most `i` vertices outside `y`.
    pub fn is_flat(&self, y: &BTreeSet<Vertex>, i: usize) -> bool {
        self.support.keys().all(|e| e.iter().filter(|v| !y.contains(v)).count() <= i)
    }

    pub fn filter(&self, mut keep: impl FnMut(Iid, &[Vertex]) -> bool) -> MultiHypergraph {
        let mut out = MultiHypergraph::new(self.n, self.r);
        for (&iid, e) in &self.edges {
            if keep(iid, e) {
                out.insert(iid, e.clone()).expect("subgraph of a valid graph");
            }
        }
        out
    }

    /// Sub-multigraph on the given instance ids; unknown ids are an error.
    pub fn restrict(&self, iids: &BTreeSet<Iid>) -> Result<MultiHypergraph, HyperError> {
        if let Some(&bad) = iids.iter().find(|i| !self.contains(**i)) {
            return Err(HyperError::UnknownIid(bad));
        }
        Ok(self.filter(|i, _| iids.contains(&i)))
    }

    pub fn without(&self, iids: &BTreeSet<Iid>) -> MultiHypergraph {
        self.filter(|i, _| !iids.contains(&i))
    }

    pub fn union(&self, other: &MultiHypergraph) -> Result<MultiHypergraph, HyperError> {
        if self.r != other.r {
            return Err(HyperError::Incompatible(self.r, other.r));
        }
        let mut out = self.clone();
        out.grow_to(other.n);
        for (&iid, e) in &other.edges {
            out.insert(iid, e.clone())?;
        }
        Ok(out)
    }

    pub fn absorb(&mut self, other: &MultiHypergraph) -> Result<(), HyperError> {
        if self.r != other.r {
            return Err(HyperError::Incompatible(self.r, other.r));
        }
        self.grow_to(other.n);
        for (&iid, e) in &other.edges {
            self.insert(iid, e.clone())?;
        }
        Ok(())
    }

    /// Maps every vertex v to `perm[v]`; ids are kept.
    pub fn relabel(&self, perm: &[Vertex]) -> MultiHypergraph {
        let n = perm.iter().map(|&v| v + 1).max().unwrap_or(0).max(self.n);
        let mut out = MultiHypergraph::new(n, self.r);
        for (&iid, e) in &self.edges {
            out.insert(iid, e.iter().map(|&v| perm[v as usize]).collect()).expect("relabelling is injective");
        }
        out
    }

    /// JSON lines: a header `{"n":..,"r":..}` then one `{"iid":..,"verts":[..]}` per instance.
    pub fn serialize(&self) -> String {
        let mut out = serde_json::to_string(&Header { n: self.n, r: self.r }).expect("header serializes");
        out.push('\n');
        for (&iid, verts) in &self.edges {
            let rec = Record { iid, verts: verts.clone() };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<MultiHypergraph, HyperError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(HyperError::Parse { line: 1, msg: "missing header".into() })?;
        let head: Header = serde_json::from_str(head).map_err(|e| HyperError::Parse { line: 1, msg: e.to_string() })?;
        let mut g = MultiHypergraph::new(head.n, head.r);
        for (i, line) in lines {
            let rec: Record =
                serde_json::from_str(line).map_err(|e| HyperError::Parse { line: i + 1, msg: e.to_string() })?;
            g.insert(rec.iid, rec.verts)?;
        }
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    n: u32,
    r: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    iid: Iid,
    verts: Vec<Vertex>,
}

/// No shared instance id.
pub fn are_edge_disjoint(a: &MultiHypergraph, b: &MultiHypergraph) -> bool {
    let (small, big) = if a.e() <= b.e() { (a, b) } else { (b, a) };
    small.iids().all(|i| !big.contains(i))
}

/// No shared support, i.e. disjoint as simple graphs.
pub fn are_support_disjoint(a: &MultiHypergraph, b: &MultiHypergraph) -> bool {
    a.supports().all(|(s, _)| !b.has_support(s))
}

pub fn sorted(s: &[Vertex]) -> Vec<Vertex> {
    let mut v = s.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Both slices sorted ascending.
pub fn is_subset(small: &[Vertex], big: &[Vertex]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_of_complete_three_graph() {
        let g = MultiHypergraph::complete(4, 3);
        let l = g.link(&[0]).unwrap();
        assert_eq!(l.r(), 2);
        let sup: Vec<Vec<u32>> = l.supports().map(|(s, _)| s.to_vec()).collect();
        assert_eq!(sup, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn link_of_codegree_set_counts() {
        let g = MultiHypergraph::complete(7, 3);
        assert_eq!(g.link(&[2, 5]).unwrap().e(), 5);
    }

    #[test]
    fn link_keeps_parallel_instances() {
        let g = MultiHypergraph::from_supports(2, 2, [[0, 1], [0, 1], [0, 1]]).unwrap();
        let l = g.link(&[0]).unwrap();
        assert_eq!(l.multiplicity(&[1]), 3);
        assert_eq!(l.iid_set(), g.iid_set());
    }

    #[test]
    fn link_rejects_large_sets() {
        let g = MultiHypergraph::complete(4, 2);
        assert!(matches!(g.link(&[0, 1]), Err(HyperError::InvalidArity { .. })));
    }

    #[test]
    fn degrees() {
        let g = MultiHypergraph::complete(7, 2);
        assert_eq!(g.degree(&[3]), 6);
        assert_eq!(MultiHypergraph::new(5, 2).delta(), 0);
        let x = MultiHypergraph::from_supports(5, 3, [[0, 1, 2], [0, 1, 3], [0, 1, 4]]).unwrap();
        assert_eq!(x.degree(&[0, 1]), 3);
        assert_eq!(x.delta(), 3);
    }

    #[test]
    fn multiplicity_basics() {
        let g = MultiHypergraph::complete(5, 2);
        assert!(g.supports().all(|(s, _)| g.multiplicity(s) == 1));
        assert_eq!(g.multiplicity(&[0, 9]), 0);
    }

    #[test]
    fn join_examples() {
        let g = MultiHypergraph::complete(4, 3);
        let back = MultiHypergraph::join(&[0], &g.link(&[0]).unwrap()).unwrap();
        assert_eq!(back, g.star(&[0]));
        assert_eq!(MultiHypergraph::join(&[], &g).unwrap(), g);
        let singles = MultiHypergraph::from_supports(3, 1, [[1], [2]]).unwrap();
        let j = MultiHypergraph::join(&[5], &singles).unwrap();
        let sup: Vec<Vec<u32>> = j.supports().map(|(s, _)| s.to_vec()).collect();
        assert_eq!(sup, vec![vec![1, 5], vec![2, 5]]);
        assert!(MultiHypergraph::join(&[1], &singles).is_err());
    }

    #[test]
    fn flatness() {
        let x = MultiHypergraph::from_supports(3, 3, [[0, 1, 2]]).unwrap();
        let y: BTreeSet<u32> = [0, 1].into();
        assert!(x.is_flat(&y, 1));
        assert!(!x.is_flat(&y, 0));
        assert!(x.is_flat(&BTreeSet::new(), 3));
    }

    #[test]
    fn plumbing() {
        assert_eq!(MultiHypergraph::complete(7, 2).e(), 21);
        let mut a = MultiHypergraph::from_supports(6, 2, [[0, 1], [0, 1], [2, 3]]).unwrap();
        assert_eq!(MultiHypergraph::parse(&a.serialize()).unwrap(), a);
        let mut pool = IidPool::after([&a]);
        let mut b = MultiHypergraph::new(6, 2);
        b.push(&mut pool, vec![4, 5]).unwrap();
        b.push(&mut pool, vec![1, 0]).unwrap();
        assert!(are_edge_disjoint(&a, &b));
        assert!(!are_support_disjoint(&a, &b));
        assert_eq!(a.union(&b).unwrap().e(), a.e() + b.e());
        assert!(matches!(a.union(&a), Err(HyperError::IidCollision(_))));
        a.remove(Iid(0));
        assert_eq!(a.multiplicity(&[0, 1]), 1);
    }
}
