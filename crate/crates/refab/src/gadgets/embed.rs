//! Edge-disjoint partial cliques in a dense host, chosen greedily so that no k-set spans a
//! used or missing edge and no small vertex set is overloaded.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use itertools::Itertools;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::hypercore::{IidPool, MultiHypergraph, Vertex};
use crate::refinery::partition::free_set_scan;
use crate::rng::StageRng;

use super::{partial_clique_edges, Gadget, GadgetError, GadgetKind};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Overrides the load threshold m derived from C.
    pub m_threshold: Option<usize>,
    pub node_budget: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { c: 64.0, epsilon: 0.05, gamma: 0.01, m_threshold: None, node_budget: 2_000_000 }
    }
}

/// A block of `extra + |root|` vertices rooted at `root`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Request {
    pub root: Vec<Vertex>,
    pub extra: usize,
}

#[derive(Clone, Debug)]
pub struct EmbeddingPlan {
    pub per_request: Vec<Gadget>,
    pub total: MultiHypergraph,
    /// Δ_{r−1} of the request roots.
    pub request_degree: usize,
    pub threshold: usize,
    /// Hypotheses of the embedding argument that the instance does not meet.
    pub warnings: Vec<String>,
}

/// Δ_{r−1} of the roots viewed as a non-uniform hypergraph.
pub fn request_degree(requests: &[Request], r: usize) -> usize {
    let mut counts: HashMap<Vec<Vertex>, usize> = HashMap::new();
    for q in requests {
        for s in q.root.iter().copied().sorted().combinations(r - 1) {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    counts.into_values().max().unwrap_or(0)
}

fn min_degree(g: &MultiHypergraph) -> usize {
    let r = g.r();
    if r == 0 || g.n() < r as u32 {
        return 0;
    }
    let table = g.degree_table(r - 1);
    (0..g.n()).combinations(r - 1).map(|s| table.get(&s).copied().unwrap_or(0)).min().unwrap_or(0)
}

/// Greedy embedding of one partial clique per request into the simple host `g`: blocks are
/// edge-disjoint, every non-root r-subset of a block is a host edge, and the final maximum
/// (r−1)-degree of the union is checked against C·Δ_{r−1}(requests).
pub fn embed_partial_cliques(
    g: &MultiHypergraph,
    requests: &[Request],
    cfg: &EmbedConfig,
) -> Result<EmbeddingPlan, GadgetError> {
    let r = g.r();
    let n = g.n();
    let mut warnings = Vec::new();
    for (i, q) in requests.iter().enumerate() {
        let set: BTreeSet<Vertex> = q.root.iter().copied().collect();
        if set.len() != q.root.len() || set.len() < r {
            return Err(GadgetError::Embedding {
                request: i,
                reason: format!("root {:?} is not an r-set or larger", q.root),
            });
        }
        if let Some(&v) = set.iter().find(|&&v| v >= n) {
            return Err(GadgetError::Embedding { request: i, reason: format!("root vertex {v} is not in the host") });
        }
    }
    let delta_y = request_degree(requests, r);
    let k_max = requests.iter().map(|q| q.extra).max().unwrap_or(0).max(1);
    let threshold = cfg
        .m_threshold
        .unwrap_or_else(|| ((cfg.c / (k_max as f64 * 2f64.powi(r as i32))) * delta_y as f64).floor() as usize)
        .max(2);
    if (min_degree(g) as f64) < (1.0 - cfg.epsilon) * n as f64 {
        warnings.push(format!("min degree {} below (1 - eps) v(G)", min_degree(g)));
    }
    if delta_y as f64 > cfg.gamma * n as f64 {
        warnings.push(format!("request degree {delta_y} above gamma v(G)"));
    }

    let mut available: HashSet<Vec<Vertex>> = g.supports().map(|(s, _)| s.to_vec()).collect();
    let mut load: HashMap<(Vec<Vertex>, Vec<Vertex>), usize> = HashMap::new();
    let mut total = MultiHypergraph::new(n, r);
    let mut pool = IidPool::new();
    let mut per_request = Vec::with_capacity(requests.len());
    for (idx, q) in requests.iter().enumerate() {
        let root: Vec<Vertex> = q.root.iter().copied().sorted().collect();
        let rs: BTreeSet<Vertex> = root.iter().copied().collect();
        let z: Vec<Vertex> = (0..n).filter(|v| !rs.contains(v)).collect();
        let banned = |u: &[Vertex]| -> bool {
            let l = u.len();
            if l > r {
                return false;
            }
            let missing = root.iter().copied().combinations(r - l).any(|j| {
                let e: Vec<Vertex> = j.iter().chain(u).copied().sorted().collect();
                !available.contains(&e)
            });
            if missing {
                return true;
            }
            l < r
                && root
                    .iter()
                    .copied()
                    .combinations(r - 1 - l)
                    .any(|j| load.get(&(j, u.to_vec())).copied().unwrap_or(0) + 1 >= threshold)
        };
        let found = free_set_scan(&z, q.extra, r, cfg.node_budget, banned);
        let s = found.ok_or_else(|| GadgetError::Embedding {
            request: idx,
            reason: format!("no admissible {}-set outside root {:?}", q.extra, root),
        })?;
        for u_len in 1..r {
            for u in s.iter().copied().combinations(u_len) {
                for j in root.iter().copied().combinations(r - 1 - u_len) {
                    *load.entry((j, u.clone())).or_insert(0) += 1;
                }
            }
        }
        let edges = partial_clique_edges(&root, &s, r);
        let mut block = MultiHypergraph::new(n, r);
        let mut local = IidPool::new();
        for e in edges {
            available.remove(&e);
            total.push(&mut pool, e.clone())?;
            block.push(&mut local, e)?;
        }
        per_request.push(Gadget {
            kind: GadgetKind::PartialClique,
            root,
            new_verts: s,
            edges: block,
            certificates: None,
        });
    }
    let got = total.delta();
    let bound = (cfg.c * delta_y as f64).floor() as usize;
    if got > bound {
        return Err(GadgetError::DegreeBound { got, bound });
    }
    Ok(EmbeddingPlan { per_request, total, request_degree: delta_y, threshold, warnings })
}

/// Checks disjointness, rootedness, host containment and the degree bound of a plan.
pub fn audit_plan(g: &MultiHypergraph, requests: &[Request], plan: &EmbeddingPlan, c: f64) -> Result<(), String> {
    let r = g.r();
    if plan.per_request.len() != requests.len() {
        return Err("one block per request expected".into());
    }
    let mut seen: HashSet<Vec<Vertex>> = HashSet::new();
    for (i, (q, t)) in requests.iter().zip(&plan.per_request).enumerate() {
        let root: Vec<Vertex> = q.root.iter().copied().sorted().collect();
        if t.root != root || t.new_verts.len() != q.extra || t.new_verts.iter().any(|v| root.contains(v)) {
            return Err(format!("block {i} is not rooted at {root:?} with {} new vertices", q.extra));
        }
        let want: BTreeSet<Vec<Vertex>> = partial_clique_edges(&root, &t.new_verts, r).into_iter().collect();
        let got: BTreeSet<Vec<Vertex>> = t.edges.supports().map(|(s, _)| s.to_vec()).collect();
        if want != got {
            return Err(format!("block {i} is not a partial clique"));
        }
        for e in got {
            if !g.has_support(&e) {
                return Err(format!("block {i} uses non-edge {e:?}"));
            }
            if !seen.insert(e.clone()) {
                return Err(format!("edge {e:?} used twice"));
            }
        }
    }
    let bound = (c * request_degree(requests, r) as f64).floor() as usize;
    if plan.total.delta() > bound {
        return Err(format!("max degree {} above {bound}", plan.total.delta()));
    }
    Ok(())
}

/// An injective placement of the non-root vertices of `pattern` into `candidates` such that
/// every pattern edge lands on a supported edge of `available`. `fixed` maps the root.
pub fn embed_rooted(
    pattern: &MultiHypergraph,
    fixed: &BTreeMap<Vertex, Vertex>,
    candidates: &[Vertex],
    available: &HashSet<Vec<Vertex>>,
    rng: &mut StageRng,
    node_budget: u64,
) -> Option<BTreeMap<Vertex, Vertex>> {
    let mut adj: BTreeMap<Vertex, Vec<Vec<Vertex>>> = BTreeMap::new();
    for (_, e) in pattern.instances() {
        for &v in e {
            adj.entry(v).or_default().push(e.to_vec());
        }
    }
    let mut order: Vec<Vertex> = Vec::new();
    let mut placed: BTreeSet<Vertex> = fixed.keys().copied().collect();
    let free: BTreeSet<Vertex> = adj.keys().copied().filter(|v| !fixed.contains_key(v)).collect();
    while order.len() < free.len() {
        let next = free
            .iter()
            .filter(|v| !placed.contains(v))
            .max_by_key(|v| adj[v].iter().filter(|e| e.iter().all(|u| u == *v || placed.contains(u))).count())
            .copied()
            .expect("free vertex left");
        placed.insert(next);
        order.push(next);
    }
    let mut map = fixed.clone();
    let mut used: HashSet<Vertex> = fixed.values().copied().collect();
    let mut pool: Vec<Vertex> = candidates.iter().copied().filter(|v| !used.contains(v)).collect();
    pool.shuffle(rng);
    let mut nodes = 0u64;
    fn fits(e: &[Vertex], map: &BTreeMap<Vertex, Vertex>, available: &HashSet<Vec<Vertex>>) -> bool {
        let img: Vec<Vertex> = e.iter().map(|v| map[v]).sorted().collect();
        available.contains(&img)
    }
    #[allow(clippy::too_many_arguments)]
    fn go(
        depth: usize,
        order: &[Vertex],
        adj: &BTreeMap<Vertex, Vec<Vec<Vertex>>>,
        pool: &[Vertex],
        map: &mut BTreeMap<Vertex, Vertex>,
        used: &mut HashSet<Vertex>,
        available: &HashSet<Vec<Vertex>>,
        nodes: &mut u64,
        budget: u64,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let v = order[depth];
        for &w in pool {
            if used.contains(&w) {
                continue;
            }
            *nodes += 1;
            if *nodes > budget {
                return false;
            }
            map.insert(v, w);
            let ok = adj[&v].iter().filter(|e| e.iter().all(|u| map.contains_key(u))).all(|e| fits(e, map, available));
            if ok {
                used.insert(w);
                if go(depth + 1, order, adj, pool, map, used, available, nodes, budget) {
                    return true;
                }
                used.remove(&w);
            }
            map.remove(&v);
        }
        false
    }
    for e in adj.values().flatten() {
        if e.iter().all(|u| fixed.contains_key(u)) && !fits(e, &map, available) {
            return None;
        }
    }
    go(0, &order, &adj, &pool, &mut map, &mut used, available, &mut nodes, node_budget).then_some(map)
}

/// Removes the supports of `g` from `available`; returns the first one already gone.
pub fn consume(available: &mut HashSet<Vec<Vertex>>, g: &MultiHypergraph) -> Result<(), Vec<Vertex>> {
    for (s, _) in g.supports() {
        if !available.remove(s) {
            return Err(s.to_vec());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stage_rng;

    #[test]
    fn disjoint_pairs_in_k20() {
        let g = MultiHypergraph::complete(20, 2);
        let reqs: Vec<Request> = (0..5).map(|i| Request { root: vec![2 * i, 2 * i + 1], extra: 3 }).collect();
        let plan = embed_partial_cliques(&g, &reqs, &EmbedConfig::default()).unwrap();
        audit_plan(&g, &reqs, &plan, 64.0).unwrap();
        assert_eq!(plan.total.e(), 5 * 9);
    }

    #[test]
    fn empty_requests() {
        let g = MultiHypergraph::complete(6, 2);
        let plan = embed_partial_cliques(&g, &[], &EmbedConfig::default()).unwrap();
        assert!(plan.per_request.is_empty() && plan.total.is_empty());
    }

    #[test]
    fn root_outside_host() {
        let g = MultiHypergraph::complete(6, 2);
        let err = embed_partial_cliques(&g, &[Request { root: vec![1, 9], extra: 1 }], &EmbedConfig::default());
        assert!(matches!(err, Err(GadgetError::Embedding { request: 0, .. })));
    }

    #[test]
    fn rooted_path() {
        let pattern = MultiHypergraph::from_supports(5, 2, [[0, 2], [2, 3], [3, 1]]).unwrap();
        let fixed: BTreeMap<Vertex, Vertex> = [(0, 10), (1, 11)].into_iter().collect();
        let host = MultiHypergraph::complete(16, 2);
        let avail: HashSet<Vec<Vertex>> = host.supports().map(|(s, _)| s.to_vec()).collect();
        let cand: Vec<Vertex> = (0..16).collect();
        let map = embed_rooted(&pattern, &fixed, &cand, &avail, &mut stage_rng(1, "t"), 10_000).unwrap();
        assert_eq!(map[&0], 10);
        assert!(map[&2] != map[&3] && ![10, 11].contains(&map[&2]));
    }
}
