//! Exact-cover search for K_q^r decompositions and packings.
//!
//! Items are edge supports carrying a demand (instances that must be covered) and a
//! capacity (instances available); options are q-cliques over present supports. A
//! clique takes one instance from each of its supports, so parallel instances on one
//! support are covered by distinct cliques.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::divisibility::{binomial, is_divisible, DivisibilityError, Violation};
use crate::hypercore::{Iid, MultiHypergraph, Vertex};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("design hypergraph needs a simple graph; support {0:?} is repeated")]
    RequiresSimple(Vec<Vertex>),
    #[error("required instance {0} is not in the host graph")]
    UnknownRequired(Iid),
    #[error("design hypergraph has {got} cliques, above the cap {cap}")]
    TooLarge { got: usize, cap: usize },
    #[error(transparent)]
    Divisibility(#[from] DivisibilityError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub cliques: Vec<Vec<Vertex>>,
    pub assignment: BTreeMap<Iid, usize>,
}

impl Decomposition {
    pub fn empty() -> Self {
        Self { cliques: Vec::new(), assignment: BTreeMap::new() }
    }

    pub fn covered(&self) -> BTreeSet<Iid> {
        self.assignment.keys().copied().collect()
    }

    /// Instance ids of each clique, in clique order.
    pub fn blocks(&self) -> Vec<Vec<Iid>> {
        let mut out = vec![Vec::new(); self.cliques.len()];
        for (&iid, &c) in &self.assignment {
            out[c].push(iid);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Decomposition),
    Infeasible(Infeasibility),
    Indeterminate { nodes: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Infeasibility {
    Divisibility(Violation),
    Exhausted { nodes: u64 },
}

impl SearchOutcome {
    pub fn found(self) -> Option<Decomposition> {
        match self {
            SearchOutcome::Found(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionCount {
    pub count: u64,
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub struct DesignHypergraph {
    pub q: usize,
    pub cliques: Vec<Vec<Vertex>>,
    pub incidence: BTreeMap<Iid, Vec<usize>>,
}

/// Every q-set all of whose r-subsets are in `present`, in lexicographic order.
pub fn clique_sets(present: &BTreeSet<Vec<Vertex>>, r: usize, q: usize) -> Vec<Vec<Vertex>> {
    if r == 1 {
        return present.iter().map(|s| s[0]).combinations(q).collect();
    }
    let mut nbrs: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    for e in present {
        for &a in e {
            for &b in e {
                if a != b {
                    nbrs.entry(a).or_default().insert(b);
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(q);
    for &v in nbrs.keys() {
        cur.push(v);
        extend_clique(present, &nbrs, r, q, &mut cur, &mut out);
        cur.pop();
    }
    out
}

fn extend_clique(
    present: &BTreeSet<Vec<Vertex>>,
    nbrs: &BTreeMap<Vertex, BTreeSet<Vertex>>,
    r: usize,
    q: usize,
    cur: &mut Vec<Vertex>,
    out: &mut Vec<Vec<Vertex>>,
) {
    if cur.len() == q {
        out.push(cur.clone());
        return;
    }
    let last = *cur.last().expect("non-empty prefix");
    let candidates: Vec<Vertex> = nbrs[&cur[0]].range(last + 1..).copied().collect();
    for v in candidates {
        if !cur.iter().all(|u| nbrs[u].contains(&v)) {
            continue;
        }
        let closes = cur.len() + 1 < r
            || cur.iter().copied().combinations(r - 1).all(|mut sub| {
                sub.push(v);
                present.contains(&sub)
            });
        if closes {
            cur.push(v);
            extend_clique(present, nbrs, r, q, cur, out);
            cur.pop();
        }
    }
}

pub fn design_hypergraph(g: &MultiHypergraph, q: usize) -> Result<DesignHypergraph, ExactError> {
    if let Some((s, _)) = g.supports().find(|(_, ids)| ids.len() > 1) {
        return Err(ExactError::RequiresSimple(s.to_vec()));
    }
    let present: BTreeSet<Vec<Vertex>> = g.supports().map(|(s, _)| s.to_vec()).collect();
    let cliques = clique_sets(&present, g.r(), q);
    let mut incidence: BTreeMap<Iid, Vec<usize>> = g.iids().map(|i| (i, Vec::new())).collect();
    for (c, t) in cliques.iter().enumerate() {
        for sub in t.iter().copied().combinations(g.r()) {
            let iid = g.iids_on(&sub)[0];
            incidence.get_mut(&iid).expect("support present").push(c);
        }
    }
    Ok(DesignHypergraph { q, cliques, incidence })
}

struct Problem {
    demand: Vec<u32>,
    capacity: Vec<u32>,
    options: Vec<Vec<usize>>,
    item_options: Vec<Vec<usize>>,
}

struct Search<'a> {
    p: &'a mut Problem,
    nodes: u64,
    budget: u64,
    chosen: Vec<usize>,
    open: usize,
}

enum Step {
    Done,
    Dead,
    Out,
}

impl<'a> Search<'a> {
    fn feasible(&self, o: usize) -> bool {
        self.p.options[o].iter().all(|&i| self.p.capacity[i] > 0)
    }

    fn pick(&self) -> Option<(usize, Vec<usize>)> {
        let mut best: Option<(usize, Vec<usize>)> = None;
        for i in 0..self.p.demand.len() {
            if self.p.demand[i] == 0 {
                continue;
            }
            let opts: Vec<usize> = self.p.item_options[i].iter().copied().filter(|&o| self.feasible(o)).collect();
            if opts.is_empty() {
                return Some((i, opts));
            }
            if best.as_ref().is_none_or(|(_, b)| opts.len() < b.len()) {
                best = Some((i, opts));
            }
        }
        best
    }

    fn apply(&mut self, o: usize) -> Vec<bool> {
        let mut used_demand = Vec::with_capacity(self.p.options[o].len());
        for &i in &self.p.options[o] {
            self.p.capacity[i] -= 1;
            let d = self.p.demand[i] > 0;
            if d {
                self.p.demand[i] -= 1;
                if self.p.demand[i] == 0 {
                    self.open -= 1;
                }
            }
            used_demand.push(d);
        }
        self.chosen.push(o);
        used_demand
    }

    fn undo(&mut self, o: usize, used_demand: &[bool]) {
        for (&i, &d) in self.p.options[o].iter().zip(used_demand) {
            self.p.capacity[i] += 1;
            if d {
                if self.p.demand[i] == 0 {
                    self.open += 1;
                }
                self.p.demand[i] += 1;
            }
        }
        self.chosen.pop();
    }

    fn first(&mut self) -> Step {
        if self.open == 0 {
            return Step::Done;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Step::Out;
        }
        let Some((_, opts)) = self.pick() else { return Step::Done };
        for o in opts {
            let used = self.apply(o);
            match self.first() {
                Step::Dead => self.undo(o, &used),
                other => return other,
            }
        }
        Step::Dead
    }

    fn count(&mut self, cap: u64, found: &mut u64) -> bool {
        if self.open == 0 {
            *found += 1;
            return *found < cap;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let Some((_, opts)) = self.pick() else {
            *found += 1;
            return *found < cap;
        };
        for o in opts {
            let used = self.apply(o);
            let go_on = self.count(cap, found);
            self.undo(o, &used);
            if !go_on {
                return false;
            }
        }
        true
    }
}

struct Built {
    problem: Problem,
    supports: Vec<Vec<Vertex>>,
    cliques: Vec<Vec<Vertex>>,
}

fn build(g: &MultiHypergraph, q: usize, required: &BTreeSet<Iid>) -> Built {
    let r = g.r();
    let mut keyed: Vec<(Iid, Vec<Vertex>, u32, u32)> = g
        .supports()
        .map(|(s, ids)| {
            let need = ids.iter().filter(|i| required.contains(i)).count() as u32;
            let key = ids.iter().copied().find(|i| required.contains(i)).unwrap_or(ids[0]);
            (key, s.to_vec(), need, ids.len() as u32)
        })
        .collect();
    keyed.sort();
    let index: BTreeMap<Vec<Vertex>, usize> = keyed.iter().enumerate().map(|(i, k)| (k.1.clone(), i)).collect();
    let present: BTreeSet<Vec<Vertex>> = index.keys().cloned().collect();
    let cliques = clique_sets(&present, r, q);
    let mut item_options = vec![Vec::new(); keyed.len()];
    let options: Vec<Vec<usize>> = cliques
        .iter()
        .enumerate()
        .map(|(c, t)| {
            let items: Vec<usize> = t.iter().copied().combinations(r).map(|s| index[&s]).collect();
            for &i in &items {
                item_options[i].push(c);
            }
            items
        })
        .collect();
    let problem = Problem {
        demand: keyed.iter().map(|k| k.2).collect(),
        capacity: keyed.iter().map(|k| k.3).collect(),
        options,
        item_options,
    };
    Built { problem, supports: keyed.into_iter().map(|k| k.1).collect(), cliques }
}

fn assign(g: &MultiHypergraph, required: &BTreeSet<Iid>, b: &Built, chosen: &[usize]) -> Decomposition {
    let mut next: BTreeMap<&[Vertex], Vec<Iid>> = BTreeMap::new();
    for s in &b.supports {
        let ids = g.iids_on(s);
        let mut order: Vec<Iid> = ids.iter().copied().filter(|i| required.contains(i)).collect();
        order.extend(ids.iter().copied().filter(|i| !required.contains(i)));
        order.reverse();
        next.insert(s.as_slice(), order);
    }
    let mut sorted_choice = chosen.to_vec();
    sorted_choice.sort_unstable();
    let mut d = Decomposition::empty();
    for (c, &o) in sorted_choice.iter().enumerate() {
        for &item in &b.problem.options[o] {
            let iid = next.get_mut(b.supports[item].as_slice()).and_then(Vec::pop).expect("capacity respected");
            d.assignment.insert(iid, c);
        }
        d.cliques.push(b.cliques[o].clone());
    }
    d
}

fn run(g: &MultiHypergraph, q: usize, required: &BTreeSet<Iid>, budget: u64) -> SearchOutcome {
    let mut b = build(g, q, required);
    let open = b.problem.demand.iter().filter(|&&d| d > 0).count();
    let mut s = Search { p: &mut b.problem, nodes: 0, budget, chosen: Vec::new(), open };
    match s.first() {
        Step::Done => {
            let chosen = s.chosen.clone();
            SearchOutcome::Found(assign(g, required, &b, &chosen))
        }
        Step::Dead => SearchOutcome::Infeasible(Infeasibility::Exhausted { nodes: s.nodes }),
        Step::Out => SearchOutcome::Indeterminate { nodes: s.nodes },
    }
}

/// Exact cover of all instances by q-cliques, with a divisibility pre-screen.
pub fn find_decomposition(g: &MultiHypergraph, q: usize, budget: u64) -> Result<SearchOutcome, ExactError> {
    let rep = is_divisible(g, q)?;
    if let Some(v) = rep.first_violation {
        return Ok(SearchOutcome::Infeasible(Infeasibility::Divisibility(v)));
    }
    Ok(run(g, q, &g.iid_set(), budget))
}

/// Edge-disjoint cliques of `g` covering every instance of `required`.
pub fn find_packing_covering(
    g: &MultiHypergraph,
    q: usize,
    required: &BTreeSet<Iid>,
    budget: u64,
) -> Result<SearchOutcome, ExactError> {
    if let Some(&bad) = required.iter().find(|i| !g.contains(**i)) {
        return Err(ExactError::UnknownRequired(bad));
    }
    Ok(run(g, q, required, budget))
}

/// Number of labelled decompositions of a simple graph, stopping at `cap`.
pub fn count_decompositions(
    g: &MultiHypergraph,
    q: usize,
    cap: u64,
    max_cliques: usize,
) -> Result<DecompositionCount, ExactError> {
    let design = design_hypergraph(g, q)?;
    if design.cliques.len() > max_cliques {
        return Err(ExactError::TooLarge { got: design.cliques.len(), cap: max_cliques });
    }
    if !is_divisible(g, q)?.divisible {
        return Ok(DecompositionCount { count: 0, capped: false });
    }
    let all = g.iid_set();
    let mut b = build(g, q, &all);
    let open = b.problem.demand.iter().filter(|&&d| d > 0).count();
    let mut s = Search { p: &mut b.problem, nodes: 0, budget: u64::MAX, chosen: Vec::new(), open };
    let mut found = 0;
    let finished = s.count(cap, &mut found);
    Ok(DecompositionCount { count: found, capped: !finished })
}

/// Partition-exactness of `d` over `target` plus clique validity of every block.
pub fn verify_decomposition(g: &MultiHypergraph, q: usize, d: &Decomposition, target: &BTreeSet<Iid>) -> bool {
    let r = g.r();
    if d.covered() != *target {
        return false;
    }
    let mut per_clique: Vec<Vec<Vec<Vertex>>> = vec![Vec::new(); d.cliques.len()];
    for (&iid, &c) in &d.assignment {
        let Some(e) = g.get(iid) else { return false };
        let Some(slot) = per_clique.get_mut(c) else { return false };
        slot.push(e.to_vec());
    }
    let want = binomial(q, r) as usize;
    d.cliques.iter().zip(per_clique).all(|(t, mut got)| {
        if t.len() != q || t.windows(2).any(|w| w[0] >= w[1]) || got.len() != want {
            return false;
        }
        got.sort();
        let expected: Vec<Vec<Vertex>> = t.iter().copied().combinations(r).collect();
        got == expected
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_hypergraph_counts() {
        assert_eq!(design_hypergraph(&MultiHypergraph::complete(5, 2), 3).unwrap().cliques.len(), 10);
        let k7 = MultiHypergraph::complete(7, 2);
        let minus = k7.without(&[Iid(0)].into());
        assert_eq!(design_hypergraph(&minus, 3).unwrap().cliques.len(), 30);
        let c4 = MultiHypergraph::from_supports(4, 2, [[0, 1], [1, 2], [2, 3], [0, 3]]).unwrap();
        assert!(design_hypergraph(&c4, 3).unwrap().cliques.is_empty());
        let multi = MultiHypergraph::from_supports(2, 2, [[0, 1], [0, 1]]).unwrap();
        assert!(design_hypergraph(&multi, 3).is_err());
    }

    #[test]
    fn small_complete_graphs() {
        let k7 = MultiHypergraph::complete(7, 2);
        let d = find_decomposition(&k7, 3, DEFAULT_BUDGET).unwrap().found().unwrap();
        assert_eq!(d.cliques.len(), 7);
        assert!(verify_decomposition(&k7, 3, &d, &k7.iid_set()));
        let k5 = MultiHypergraph::complete(5, 2);
        assert!(matches!(
            find_decomposition(&k5, 3, DEFAULT_BUDGET).unwrap(),
            SearchOutcome::Infeasible(Infeasibility::Divisibility(_))
        ));
    }

    #[test]
    fn count_small_cases() {
        let k3 = MultiHypergraph::complete(3, 2);
        assert_eq!(count_decompositions(&k3, 3, 1000, 10_000).unwrap().count, 1);
        let k6 = MultiHypergraph::complete(6, 2);
        assert_eq!(count_decompositions(&k6, 3, 1000, 10_000).unwrap().count, 0);
    }

    #[test]
    fn parallel_triangles() {
        let mut g = MultiHypergraph::complete(3, 2);
        let mut pool = crate::hypercore::IidPool::after([&g]);
        for e in [[0, 1], [1, 2], [0, 2]] {
            g.push(&mut pool, e.to_vec()).unwrap();
        }
        let d = find_decomposition(&g, 3, DEFAULT_BUDGET).unwrap().found().unwrap();
        assert_eq!(d.cliques.len(), 2);
        assert!(verify_decomposition(&g, 3, &d, &g.iid_set()));
    }

    #[test]
    fn packing_cover() {
        let k9 = MultiHypergraph::complete(9, 2);
        let req: BTreeSet<Iid> = k9.instances().filter(|(_, e)| !e.contains(&0)).map(|(i, _)| i).collect();
        let d = find_packing_covering(&k9, 3, &req, DEFAULT_BUDGET).unwrap().found().unwrap();
        let covered = d.covered();
        assert!(req.is_subset(&covered));
        assert!(verify_decomposition(&k9, 3, &d, &covered));
        let empty = find_packing_covering(&k9, 3, &BTreeSet::new(), 10).unwrap().found().unwrap();
        assert!(empty.cliques.is_empty());
    }

    #[test]
    fn verifier_rejects_mutations() {
        let k7 = MultiHypergraph::complete(7, 2);
        let d = find_decomposition(&k7, 3, DEFAULT_BUDGET).unwrap().found().unwrap();
        let all = k7.iid_set();
        let mut missing = d.clone();
        missing.assignment.remove(&Iid(0));
        assert!(!verify_decomposition(&k7, 3, &missing, &all));
        let mut doubled = d.clone();
        let c = doubled.assignment[&Iid(0)];
        let other = (c + 1) % doubled.cliques.len();
        doubled.assignment.insert(Iid(0), other);
        assert!(!verify_decomposition(&k7, 3, &doubled, &all));
    }
}
