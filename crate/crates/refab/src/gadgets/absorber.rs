//! Absorbers for divisible L: a direct transformer construction for triangles, a bounded
//! two-layer search for general q at r = 2, and the composition whose decomposition of
//! A ∪ L meets V(L) only along edges of L.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::divisibility::{divisible, modulus_m};
use crate::exactdecomp::{find_decomposition, verify_decomposition, Decomposition, SearchOutcome};
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};

use super::{partial_clique_edges, Certificates, Gadget, GadgetError, GadgetKind};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    pub max_new: usize,
    pub nodes: u64,
    /// Skip the empty absorber even when L itself decomposes.
    pub avoid_trivial: bool,
    pub vertex_cap: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_new: 12, nodes: 2_000_000, avoid_trivial: false, vertex_cap: 16 }
    }
}

#[derive(Clone, Debug)]
pub struct AbsorberSearch {
    pub gadget: Gadget,
    pub extra_vertices: usize,
    pub nodes: u64,
}

type Block = (Vec<Vertex>, Vec<Iid>);

fn to_decomposition(blocks: &[Block]) -> Decomposition {
    let mut d = Decomposition::empty();
    for (c, (verts, ids)) in blocks.iter().enumerate() {
        d.cliques.push(verts.iter().copied().sorted().collect());
        for &i in ids {
            d.assignment.insert(i, c);
        }
    }
    d
}

fn absorber_gadget(l: &MultiHypergraph, a: MultiHypergraph, q1: &[Block], q2: &[Block]) -> Gadget {
    let root: Vec<Vertex> = l.vertices().into_iter().collect();
    let rs: BTreeSet<Vertex> = root.iter().copied().collect();
    let new_verts: Vec<Vertex> = a.vertices().into_iter().filter(|v| !rs.contains(v)).collect();
    Gadget {
        kind: GadgetKind::Absorber,
        root,
        new_verts,
        edges: a,
        certificates: Some(Certificates { q1: to_decomposition(q1), q2: to_decomposition(q2) }),
    }
}

/// V(L) independent in A, Q1 an exact decomposition of A and Q2 of A ∪ L.
pub fn verify_absorber(l: &MultiHypergraph, g: &Gadget, q: usize) -> bool {
    let Some(cert) = &g.certificates else { return false };
    let vl = l.vertices();
    if g.edges.supports().any(|(s, _)| s.iter().all(|v| vl.contains(v))) {
        return false;
    }
    let Ok(both) = g.edges.union(l) else { return false };
    verify_decomposition(&g.edges, q, &cert.q1, &g.edges.iid_set())
        && verify_decomposition(&both, q, &cert.q2, &both.iid_set())
}

/// Every block of `d` meets V(L) in at most r vertices, with equality only on the support
/// of an edge of L.
pub fn intersection_audit(l: &MultiHypergraph, d: &Decomposition) -> Result<(), GadgetError> {
    let r = l.r();
    let vl = l.vertices();
    for block in &d.cliques {
        let meet: Vec<Vertex> = block.iter().copied().filter(|v| vl.contains(v)).collect();
        if meet.len() > r || (meet.len() == r && !l.has_support(&meet)) {
            return Err(GadgetError::Intersection { block: block.clone() });
        }
    }
    Ok(())
}

fn check_input(l: &MultiHypergraph, q: usize) -> Result<(), GadgetError> {
    if !divisible(l, q) {
        return Err(GadgetError::NotDivisible);
    }
    Ok(())
}

struct Cycle {
    verts: Vec<Vertex>,
    /// edges[i] joins verts[i] and verts[i + 1 mod len].
    edges: Vec<Iid>,
}

struct Transformer<'a> {
    a: MultiHypergraph,
    pool: &'a mut IidPool,
    next: Vertex,
    q1: Vec<Block>,
    q2: Vec<Block>,
}

impl Transformer<'_> {
    fn fresh(&mut self) -> Vertex {
        self.next += 1;
        if self.next > self.a.n() {
            self.a.grow_to(self.next);
        }
        self.next - 1
    }

    fn edge(&mut self, u: Vertex, v: Vertex) -> Iid {
        self.a.push(self.pool, vec![u, v]).expect("transformer edges join distinct vertices")
    }

    /// Two vertex-disjoint cycles become one through a hub joined to a1, a2, b1, b2.
    fn switch(&mut self, x: Cycle, y: Cycle) -> Cycle {
        let (a1, a2, b1, b2) = (x.verts[0], x.verts[1], y.verts[0], y.verts[1]);
        let hub = self.fresh();
        let [ha1, ha2, hb1, hb2] = [a1, a2, b1, b2].map(|v| self.edge(v, hub));
        let f = self.edge(a1, b1);
        let g = self.edge(a2, b2);
        self.q1.push((vec![a1, b1, hub], vec![f, ha1, hb1]));
        self.q1.push((vec![a2, b2, hub], vec![g, ha2, hb2]));
        self.q2.push((vec![a1, a2, hub], vec![x.edges[0], ha1, ha2]));
        self.q2.push((vec![b1, b2, hub], vec![y.edges[0], hb1, hb2]));
        let mut verts: Vec<Vertex> = x.verts[1..].to_vec();
        let mut edges: Vec<Iid> = x.edges[1..].to_vec();
        verts.push(a1);
        edges.push(f);
        verts.push(b1);
        for i in (1..y.verts.len()).rev() {
            edges.push(y.edges[i]);
            verts.push(y.verts[i]);
        }
        edges.push(g);
        Cycle { verts, edges }
    }

    /// Replaces the path c1..c5 by the chord c1c5 using three hubs.
    fn shorten(&mut self, c: Cycle) -> Cycle {
        let p: Vec<Vertex> = c.verts[..5].to_vec();
        let [n0, n1, n2] = [(); 3].map(|_| self.fresh());
        let e10 = self.edge(p[0], n0);
        let e20 = self.edge(p[1], n0);
        let e21 = self.edge(p[1], n1);
        let e31 = self.edge(p[2], n1);
        let e32 = self.edge(p[2], n2);
        let e40 = self.edge(p[3], n0);
        let e42 = self.edge(p[3], n2);
        let e50 = self.edge(p[4], n0);
        let h01 = self.edge(n0, n1);
        let h02 = self.edge(n0, n2);
        let h12 = self.edge(n1, n2);
        let f = self.edge(p[0], p[4]);
        self.q1.push((vec![p[0], p[4], n0], vec![f, e10, e50]));
        self.q1.push((vec![p[1], n0, n1], vec![e20, e21, h01]));
        self.q1.push((vec![p[2], n1, n2], vec![e31, e32, h12]));
        self.q1.push((vec![p[3], n0, n2], vec![e40, e42, h02]));
        self.q2.push((vec![p[0], p[1], n0], vec![c.edges[0], e10, e20]));
        self.q2.push((vec![p[1], p[2], n1], vec![c.edges[1], e21, e31]));
        self.q2.push((vec![p[2], p[3], n2], vec![c.edges[2], e32, e42]));
        self.q2.push((vec![p[3], p[4], n0], vec![c.edges[3], e40, e50]));
        self.q2.push((vec![n0, n1, n2], vec![h01, h02, h12]));
        let mut verts = vec![p[0]];
        verts.extend_from_slice(&c.verts[4..]);
        let mut edges = vec![f];
        edges.extend_from_slice(&c.edges[4..]);
        Cycle { verts, edges }
    }
}

/// Closed trails covering every instance of each component, as (instance, start, end).
fn euler_circuits(l: &MultiHypergraph) -> Vec<Vec<(Iid, Vertex, Vertex)>> {
    let mut adj: BTreeMap<Vertex, Vec<(Iid, Vertex)>> = BTreeMap::new();
    for (i, e) in l.instances() {
        adj.entry(e[0]).or_default().push((i, e[1]));
        adj.entry(e[1]).or_default().push((i, e[0]));
    }
    let mut used: BTreeSet<Iid> = BTreeSet::new();
    let mut ptr: BTreeMap<Vertex, usize> = BTreeMap::new();
    let mut out = Vec::new();
    let starts: Vec<Vertex> = adj.keys().copied().collect();
    for s in starts {
        if adj[&s].iter().all(|(i, _)| used.contains(i)) {
            continue;
        }
        let mut stack: Vec<(Vertex, Option<(Iid, Vertex)>)> = vec![(s, None)];
        let mut trail = Vec::new();
        while let Some(&(v, _)) = stack.last() {
            let p = ptr.entry(v).or_insert(0);
            let list = &adj[&v];
            while *p < list.len() && used.contains(&list[*p].0) {
                *p += 1;
            }
            if *p < list.len() {
                let (i, w) = list[*p];
                used.insert(i);
                stack.push((w, Some((i, v))));
            } else {
                let (w, via) = stack.pop().expect("non-empty stack");
                if let Some((i, from)) = via {
                    trail.push((i, from, w));
                }
            }
        }
        trail.reverse();
        out.push(trail);
    }
    out
}

/// An absorber for a divisible graph L with q = 3: a private vertex x_e per edge, the
/// transition triangles of Euler circuits, and hub gadgets that merge and then shorten the
/// resulting cycles through the x_e down to one triangle. New vertices start at
/// `first_fresh`; ids come from `pool`.
pub fn constructive_absorber(
    l: &MultiHypergraph,
    q: usize,
    first_fresh: Vertex,
    pool: &mut IidPool,
) -> Result<Gadget, GadgetError> {
    if q != 3 || l.r() != 2 {
        return Err(GadgetError::Unsupported("the transformer absorber is built for triangles only".into()));
    }
    check_input(l, q)?;
    if first_fresh < l.n() {
        return Err(GadgetError::Unsupported("fresh vertices must lie above V(L)".into()));
    }
    let circuits = euler_circuits(l);
    if circuits.iter().any(|c| c.len() < 3) {
        return Err(GadgetError::Unsupported("a component is a double edge".into()));
    }
    let mut t = Transformer {
        a: MultiHypergraph::new(first_fresh, 2),
        pool,
        next: first_fresh,
        q1: Vec::new(),
        q2: Vec::new(),
    };
    let mut x: BTreeMap<Iid, Vertex> = BTreeMap::new();
    let mut spoke: BTreeMap<(Iid, Vertex), Iid> = BTreeMap::new();
    for (i, e) in l.instances() {
        let xe = t.fresh();
        x.insert(i, xe);
        let su = t.edge(e[0], xe);
        let sv = t.edge(e[1], xe);
        spoke.insert((i, e[0]), su);
        spoke.insert((i, e[1]), sv);
        t.q2.push((vec![e[0], e[1], xe], vec![i, su, sv]));
    }
    let mut cycles = Vec::new();
    for c in &circuits {
        let len = c.len();
        let mut verts = Vec::with_capacity(len);
        let mut edges = Vec::with_capacity(len);
        for j in 0..len {
            let (ei, _, w) = c[j];
            let (ej, _, _) = c[(j + 1) % len];
            let link = t.edge(x[&ei], x[&ej]);
            t.q1.push((vec![w, x[&ei], x[&ej]], vec![spoke[&(ei, w)], spoke[&(ej, w)], link]));
            verts.push(x[&ei]);
            edges.push(link);
        }
        cycles.push(Cycle { verts, edges });
    }
    let mut merged = cycles.into_iter().reduce(|acc, next| t.switch(acc, next));
    if let Some(mut c) = merged.take() {
        while c.verts.len() > 3 {
            c = t.shorten(c);
        }
        t.q2.push((c.verts.clone(), c.edges.clone()));
    }
    let (q1, q2) = (std::mem::take(&mut t.q1), std::mem::take(&mut t.q2));
    Ok(absorber_gadget(l, t.a, &q1, &q2))
}

struct Searcher<'a> {
    l: &'a MultiHypergraph,
    q: usize,
    lv: BTreeSet<Vertex>,
    new: Vec<Vertex>,
    nodes: u64,
    budget: u64,
    avoid_trivial: bool,
    l_left: BTreeSet<Vec<Vertex>>,
    a_edges: BTreeSet<Vec<Vertex>>,
    q2: Vec<Vec<Vertex>>,
}

enum Found {
    Yes(Vec<Vec<Vertex>>, BTreeSet<Vec<Vertex>>, Vec<Vec<Vertex>>),
    No,
    Out,
}

fn pair(a: Vertex, b: Vertex) -> Vec<Vertex> {
    if a < b {
        vec![a, b]
    } else {
        vec![b, a]
    }
}

impl Searcher<'_> {
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        self.nodes <= self.budget
    }

    /// Layer one: blocks of A ∪ L through each L-edge, made of L-cliques and new vertices.
    fn layer_one(&mut self) -> Found {
        if !self.tick() {
            return Found::Out;
        }
        let Some(e) = self.l_left.iter().next().cloned() else { return self.layer_two_start() };
        let used_new = self.new.iter().filter(|v| self.a_edges.iter().any(|s| s.contains(v))).count();
        let choosable: Vec<Vertex> = self.new[..(used_new + self.q - 2).min(self.new.len())].to_vec();
        let others: Vec<Vertex> = self.lv.iter().copied().filter(|v| !e.contains(v)).collect();
        for w_count in 0..=self.q - 2 {
            for w in others.iter().copied().combinations(w_count) {
                let core: Vec<Vertex> = e.iter().chain(&w).copied().collect();
                if !core.iter().copied().tuple_combinations().all(|(a, b)| self.l_left.contains(&pair(a, b))) {
                    continue;
                }
                for fresh in choosable.iter().copied().combinations(self.q - 2 - w_count) {
                    let mut new_pairs = Vec::new();
                    let mut ok = true;
                    for &f in &fresh {
                        for &c in core.iter().chain(&fresh) {
                            if c < f || (self.lv.contains(&c) && c != f) {
                                if c == f {
                                    continue;
                                }
                                let p = pair(c, f);
                                if self.a_edges.contains(&p) {
                                    ok = false;
                                }
                                new_pairs.push(p);
                            }
                        }
                    }
                    new_pairs.sort();
                    new_pairs.dedup();
                    if !ok {
                        continue;
                    }
                    let l_pairs: Vec<Vec<Vertex>> =
                        core.iter().copied().tuple_combinations().map(|(a, b)| pair(a, b)).collect();
                    for p in &l_pairs {
                        self.l_left.remove(p);
                    }
                    for p in &new_pairs {
                        self.a_edges.insert(p.clone());
                    }
                    self.q2.push(core.iter().chain(&fresh).copied().sorted().collect());
                    let res = self.layer_one();
                    self.q2.pop();
                    for p in &new_pairs {
                        self.a_edges.remove(p);
                    }
                    for p in l_pairs {
                        self.l_left.insert(p);
                    }
                    if !matches!(res, Found::No) {
                        return res;
                    }
                }
            }
        }
        Found::No
    }

    fn layer_two_start(&mut self) -> Found {
        let a1 = self.a_edges.clone();
        let mut left = a1.clone();
        let mut extra = BTreeSet::new();
        let mut q1 = Vec::new();
        self.layer_two(&a1, &mut left, &mut extra, &mut q1)
    }

    /// Layer two: a decomposition of A1 ∪ E where E, the edges it creates, must decompose
    /// on its own.
    fn layer_two(
        &mut self,
        a1: &BTreeSet<Vec<Vertex>>,
        left: &mut BTreeSet<Vec<Vertex>>,
        extra: &mut BTreeSet<Vec<Vertex>>,
        q1: &mut Vec<Vec<Vertex>>,
    ) -> Found {
        if !self.tick() {
            return Found::Out;
        }
        let Some(e) = left.iter().next().cloned() else {
            if self.avoid_trivial && a1.is_empty() && extra.is_empty() {
                return Found::No;
            }
            let g = MultiHypergraph::from_supports(self.l.n() + self.new.len() as Vertex, 2, extra.iter())
                .expect("extra edges are valid");
            return match find_decomposition(&g, self.q, self.budget.saturating_sub(self.nodes)) {
                Ok(SearchOutcome::Found(_)) => Found::Yes(q1.clone(), extra.clone(), self.q2.clone()),
                Ok(SearchOutcome::Indeterminate { .. }) => Found::Out,
                _ => Found::No,
            };
        };
        let pool: Vec<Vertex> = self.new.iter().copied().filter(|v| !e.contains(v)).collect();
        let has_l = e.iter().any(|v| self.lv.contains(v));
        let mut cands: Vec<Vertex> = pool;
        if !has_l {
            cands.extend(self.lv.iter().copied());
        }
        for rest in cands.into_iter().combinations(self.q - 2) {
            let block: Vec<Vertex> = e.iter().chain(&rest).copied().sorted().collect();
            if block.iter().filter(|v| self.lv.contains(v)).count() > 1 {
                continue;
            }
            let pairs: Vec<Vec<Vertex>> = block.iter().copied().tuple_combinations().map(|(a, b)| pair(a, b)).collect();
            let mut from_left = Vec::new();
            let mut created = Vec::new();
            let mut ok = true;
            for p in pairs {
                if left.contains(&p) {
                    from_left.push(p);
                } else if a1.contains(&p) || extra.contains(&p) {
                    ok = false;
                    break;
                } else {
                    created.push(p);
                }
            }
            if !ok {
                continue;
            }
            for p in &from_left {
                left.remove(p);
            }
            for p in &created {
                extra.insert(p.clone());
            }
            q1.push(block);
            let res = self.layer_two(a1, left, extra, q1);
            q1.pop();
            for p in &created {
                extra.remove(p);
            }
            for p in from_left {
                left.insert(p);
            }
            if !matches!(res, Found::No) {
                return res;
            }
        }
        Found::No
    }
}

fn blocks_with_ids(g: &MultiHypergraph, cliques: &[Vec<Vertex>]) -> Vec<Block> {
    cliques
        .iter()
        .map(|c| {
            let ids = c.iter().copied().tuple_combinations().map(|(a, b)| g.iids_on(&pair(a, b))[0]).collect();
            (c.clone(), ids)
        })
        .collect()
}

/// Iterative deepening over the number of new vertices; at each count a DFS places blocks
/// of A ∪ L through the edges of L and then blocks of A, and an exact-cover call settles
/// the edges that appear only in A. Requires a simple L with r = 2.
pub fn search_absorber(l: &MultiHypergraph, q: usize, budget: &SearchBudget) -> Result<AbsorberSearch, GadgetError> {
    if l.r() != 2 || !l.is_simple() {
        return Err(GadgetError::Unsupported("absorber search handles simple graphs".into()));
    }
    check_input(l, q)?;
    let lv = l.vertices();
    if lv.len() > budget.vertex_cap {
        return Err(GadgetError::TooLarge { got: lv.len(), cap: budget.vertex_cap });
    }
    let mut nodes = 0;
    for t in 0..=budget.max_new {
        let new: Vec<Vertex> = (l.n()..l.n() + t as Vertex).collect();
        let mut s = Searcher {
            l,
            q,
            lv: lv.clone(),
            new,
            nodes,
            budget: budget.nodes,
            avoid_trivial: budget.avoid_trivial,
            l_left: l.supports().map(|(s, _)| s.to_vec()).collect(),
            a_edges: BTreeSet::new(),
            q2: Vec::new(),
        };
        let res = s.layer_one();
        nodes = s.nodes;
        match res {
            Found::Yes(q1c, extra, q2c) => {
                let n = l.n() + t as Vertex;
                let mut pool = IidPool::after([l]);
                let mut a = MultiHypergraph::new(n, 2);
                let a1: BTreeSet<Vec<Vertex>> = q2c
                    .iter()
                    .flat_map(|b| b.iter().copied().tuple_combinations().map(|(x, y)| pair(x, y)))
                    .filter(|p| !l.has_support(p))
                    .collect();
                for p in a1.iter().chain(&extra) {
                    a.push(&mut pool, p.clone())?;
                }
                let both = a.union(l)?;
                let eg = a.filter(|_, e| extra.contains(e));
                let Some(rest) = find_decomposition(&eg, q, u64::MAX)?.found() else {
                    return Err(GadgetError::Indeterminate { nodes, vertices: t });
                };
                let q1 = blocks_with_ids(&a, &q1c);
                let mut q2 = blocks_with_ids(&both, &q2c);
                q2.extend(blocks_with_ids(&a, &rest.cliques));
                let gadget = absorber_gadget(l, a, &q1, &q2);
                let extra_vertices = gadget.new_verts.len();
                return Ok(AbsorberSearch { gadget, extra_vertices, nodes });
            }
            Found::Out => return Err(GadgetError::Indeterminate { nodes, vertices: t }),
            Found::No => {}
        }
    }
    Err(GadgetError::Indeterminate { nodes, vertices: budget.max_new })
}

/// Absorber of L from the transformer when q = 3, else from the bounded search; new
/// vertices start at `first_fresh`.
pub fn provide_absorber(
    l: &MultiHypergraph,
    q: usize,
    first_fresh: Vertex,
    pool: &mut IidPool,
    budget: &SearchBudget,
) -> Result<Gadget, GadgetError> {
    if l.is_empty() {
        return Ok(absorber_gadget(l, MultiHypergraph::new(first_fresh, l.r()), &[], &[]));
    }
    if q == 3 && l.r() == 2 {
        if let Ok(g) = constructive_absorber(l, q, first_fresh, pool) {
            return Ok(g);
        }
    }
    let found = search_absorber(l, q, budget)?.gadget;
    relocate(l, &found, first_fresh, pool)
}

/// Moves the new vertices of an absorber to `first_fresh..` and its ids into `pool`.
fn relocate(l: &MultiHypergraph, g: &Gadget, first_fresh: Vertex, pool: &mut IidPool) -> Result<Gadget, GadgetError> {
    let mut map: BTreeMap<Vertex, Vertex> = g.root.iter().map(|&v| (v, v)).collect();
    for (k, &v) in g.new_verts.iter().enumerate() {
        map.insert(v, first_fresh + k as Vertex);
    }
    let mut a = MultiHypergraph::new(first_fresh + g.new_verts.len() as Vertex, g.edges.r());
    let ids = super::transplant(&g.edges, &map, &mut a, pool)?;
    let cert = g.certificates.as_ref().expect("searched absorbers carry certificates");
    let lift = |d: &Decomposition| Decomposition {
        cliques: d.cliques.iter().map(|c| c.iter().map(|v| map[v]).sorted().collect()).collect(),
        assignment: d.assignment.iter().map(|(i, &c)| (*ids.get(i).unwrap_or(i), c)).collect(),
    };
    let root: Vec<Vertex> = l.vertices().into_iter().collect();
    Ok(Gadget {
        kind: GadgetKind::Absorber,
        root,
        new_verts: (first_fresh..first_fresh + g.new_verts.len() as Vertex).collect(),
        edges: a,
        certificates: Some(Certificates { q1: lift(&cert.q1), q2: lift(&cert.q2) }),
    })
}

/// The composed absorber A = L1 ∪ A1 ∪ A2: L1 holds M(q, r) partial cliques on each edge of
/// L, L2 all but the first of them, A1 and A2 absorb L1 and L2. Q2 of the result meets V(L)
/// in at most r vertices, and in exactly r only along an edge of L.
pub fn better_absorber(l: &MultiHypergraph, q: usize, budget: &SearchBudget) -> Result<Gadget, GadgetError> {
    check_input(l, q)?;
    let r = l.r();
    if l.is_empty() {
        return Ok(absorber_gadget(l, MultiHypergraph::new(l.n(), r), &[], &[]));
    }
    let m = modulus_m(q, r)? as usize;
    let mut pool = IidPool::after([l]);
    let mut next = l.n();
    let mut l1 = MultiHypergraph::new(l.n(), r);
    let mut first: Vec<Block> = Vec::new();
    let mut l2_ids = BTreeSet::new();
    for (iid, e) in l.instances() {
        for copy in 0..m {
            let fresh: Vec<Vertex> = (next..next + (q - r) as Vertex).collect();
            next += (q - r) as Vertex;
            l1.grow_to(next);
            let mut ids = Vec::new();
            for s in partial_clique_edges(e, &fresh, r) {
                ids.push(l1.push(&mut pool, s)?);
            }
            if copy == 0 {
                let mut all = ids.clone();
                all.push(iid);
                first.push((e.iter().chain(&fresh).copied().collect(), all));
            } else {
                l2_ids.extend(ids);
            }
        }
    }
    let l2 = l1.restrict(&l2_ids)?;
    let a1 = provide_absorber(&l1, q, next, &mut pool, budget)?;
    next = next.max(a1.edges.n());
    let a2 = provide_absorber(&l2, q, next, &mut pool, budget)?;
    let c1 = a1.certificates.clone().expect("absorbers carry certificates");
    let c2 = a2.certificates.clone().expect("absorbers carry certificates");
    let mut a = l1.clone();
    a.absorb(&a1.edges)?;
    a.absorb(&a2.edges)?;
    let blocks = |d: &Decomposition| -> Vec<Block> {
        d.blocks().into_iter().zip(&d.cliques).map(|(ids, c)| (c.clone(), ids)).collect()
    };
    let q1: Vec<Block> = blocks(&c1.q2).into_iter().chain(blocks(&c2.q1)).collect();
    let q2: Vec<Block> = first.into_iter().chain(blocks(&c1.q1)).chain(blocks(&c2.q2)).collect();
    let g = absorber_gadget(l, a, &q1, &q2);
    intersection_audit(l, &g.certificates.as_ref().expect("just built").q2)?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> MultiHypergraph {
        MultiHypergraph::from_supports(3, 2, [[0, 1], [1, 2], [0, 2]]).unwrap()
    }

    fn cycle(n: u32) -> MultiHypergraph {
        MultiHypergraph::from_supports(n, 2, (0..n).map(|i| [i.min((i + 1) % n), i.max((i + 1) % n)])).unwrap()
    }

    #[test]
    fn transformer_on_cycles() {
        for n in [3, 6, 9, 12] {
            let l = cycle(n);
            let g = constructive_absorber(&l, 3, n, &mut IidPool::after([&l])).unwrap();
            assert!(verify_absorber(&l, &g, 3), "C{n}");
        }
        let l = cycle(6);
        let g = constructive_absorber(&l, 3, 6, &mut IidPool::after([&l])).unwrap();
        assert_eq!((g.new_verts.len(), g.edges.e()), (9, 30));
    }

    #[test]
    fn transformer_merges_components() {
        let l = MultiHypergraph::from_supports(
            9,
            2,
            [[0, 1], [1, 2], [2, 3], [0, 3], [4, 5], [5, 6], [6, 7], [7, 8], [4, 8]],
        )
        .unwrap();
        let g = constructive_absorber(&l, 3, 9, &mut IidPool::after([&l])).unwrap();
        assert!(verify_absorber(&l, &g, 3));
    }

    #[test]
    fn search_trivial_and_nontrivial() {
        let l = triangle();
        let found = search_absorber(&l, 3, &SearchBudget::default()).unwrap();
        assert_eq!(found.extra_vertices, 0);
        assert!(verify_absorber(&l, &found.gadget, 3));
        let strict = SearchBudget { avoid_trivial: true, ..SearchBudget::default() };
        let found = search_absorber(&l, 3, &strict).unwrap();
        assert!(found.extra_vertices > 0 && found.extra_vertices <= 12);
        assert!(verify_absorber(&l, &found.gadget, 3));
    }

    #[test]
    fn search_rejects_non_divisible() {
        let l = MultiHypergraph::from_supports(3, 2, [[0, 1]]).unwrap();
        assert_eq!(search_absorber(&l, 3, &SearchBudget::default()).unwrap_err(), GadgetError::NotDivisible);
    }

    #[test]
    fn empty_l() {
        let l = MultiHypergraph::new(0, 2);
        let g = search_absorber(&l, 3, &SearchBudget::default()).unwrap().gadget;
        assert!(g.edges.is_empty());
        assert!(verify_absorber(&l, &g, 3));
        assert!(better_absorber(&l, 3, &SearchBudget::default()).unwrap().edges.is_empty());
    }

    #[test]
    fn better_absorber_audit() {
        let l = triangle();
        let g = better_absorber(&l, 3, &SearchBudget::default()).unwrap();
        assert!(verify_absorber(&l, &g, 3));
        let cert = g.certificates.clone().unwrap();
        assert!(intersection_audit(&l, &cert.q2).is_ok());
        let mut bad = cert.q2;
        let victim = bad.cliques.iter().position(|c| c.iter().filter(|&&v| v < 3).count() == 2).unwrap();
        let missing = (0..3).find(|v| !bad.cliques[victim].contains(v)).unwrap();
        let pos = bad.cliques[victim].iter().position(|&v| v >= 3).unwrap();
        bad.cliques[victim][pos] = missing;
        bad.cliques[victim].sort_unstable();
        assert!(matches!(intersection_audit(&l, &bad), Err(GadgetError::Intersection { .. })));
    }
}
