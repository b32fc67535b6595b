//! From a multi-refiner to a simple refiner inside a host: every instance of R is traded
//! for a fake edge on its support, embedded in an edge-disjoint partial clique of G ∖ X.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::divisibility::modulus_m;
use crate::gadgets::{
    anti_edge, check_gadget_congruences, embed_partial_cliques, fake_edge, transplant, EmbedConfig, GadgetKind, Request,
};
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};

use super::model::{is_divisible_instances, RefinementFamily, Refiner};
use super::RefineError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FakeSubConfig {
    pub embed: EmbedConfig,
    /// Replace each class of parallel instances with identical memberships by the fewest
    /// gadgets of the same divisibility, instead of one fake edge per instance.
    pub bundle: bool,
    /// The result must be C-refined for this C.
    pub c: usize,
}

impl Default for FakeSubConfig {
    fn default() -> Self {
        Self { embed: EmbedConfig::default(), bundle: true, c: 4096 }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FakeSubAudit {
    pub classes: usize,
    pub fake_edges: usize,
    pub anti_edges: usize,
    pub dropped_classes: usize,
    pub request_degree: usize,
    pub block_degree: usize,
    pub family_degree: usize,
    pub refinement_constant: usize,
    pub simple: bool,
    pub inside_host: bool,
    pub members_divisible: bool,
    pub congruences: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SimpleRefiner {
    pub refiner: Refiner,
    pub audit: FakeSubAudit,
}

/// Gadgets standing in for k parallel instances: k mod M fake edges, or M − (k mod M)
/// anti-edges when that is fewer.
fn gadget_plan(k: usize, m: usize) -> (GadgetKind, usize) {
    let t = k % m;
    if t <= m - t {
        (GadgetKind::FakeEdge, t)
    } else {
        (GadgetKind::AntiEdge, m - t)
    }
}

/// Substitutes fake edges for the instances of R in `multi`, embedding them into the simple
/// host `g` away from X. Members map through φ(H) = (H ∩ X) ∪ ⋃ U_e and Q is unchanged.
pub fn substitute_fake_edges(
    g: &MultiHypergraph,
    multi: &Refiner,
    cfg: &FakeSubConfig,
) -> Result<SimpleRefiner, RefineError> {
    let q = multi.q();
    let r = multi.r();
    let x = multi.x();
    if g.r() != r || !g.is_simple() {
        return Err(RefineError::Unsupported("host must be a simple graph of the same uniformity".into()));
    }
    if !x.is_simple() {
        return Err(RefineError::Unsupported("X must be simple".into()));
    }
    if let Some((s, _)) = x.supports().find(|(s, _)| !g.has_support(s)) {
        return Err(RefineError::Unsupported(format!("X edge {s:?} is not in the host")));
    }
    let rg = multi.r_graph();
    if let Some(&bad) = multi.remainder().iter().find(|i| rg.contains(**i)) {
        return Err(RefineError::Unsupported(format!("remainder instance {bad} lies in R")));
    }
    if let Some(&v) = rg.vertices().iter().find(|&&v| v >= g.n()) {
        return Err(RefineError::Unsupported(format!("R uses vertex {v} outside the host")));
    }
    let m = modulus_m(q, r)? as usize;
    let family = multi.family();

    let mut grouped: BTreeMap<(Vec<Vertex>, Vec<usize>), Vec<Iid>> = BTreeMap::new();
    let mut classes: Vec<(Vec<Vertex>, Vec<usize>, Vec<Iid>)> = Vec::new();
    for (iid, e) in rg.instances() {
        let mut who = family.memberships(iid).to_vec();
        who.sort_unstable();
        if cfg.bundle {
            grouped.entry((e.to_vec(), who)).or_default().push(iid);
        } else {
            classes.push((e.to_vec(), who, vec![iid]));
        }
    }
    classes.extend(grouped.into_iter().map(|((root, who), ids)| (root, who, ids)));

    let mut audit = FakeSubAudit { classes: classes.len(), congruences: true, ..FakeSubAudit::default() };
    let mut requests = Vec::new();
    let mut templates = Vec::new();
    for (ci, (root, _, ids)) in classes.iter().enumerate() {
        let (kind, count) = if cfg.bundle { gadget_plan(ids.len(), m) } else { (GadgetKind::FakeEdge, 1) };
        if count == 0 {
            audit.dropped_classes += 1;
        }
        for _ in 0..count {
            let gadget = match kind {
                GadgetKind::FakeEdge => {
                    audit.fake_edges += 1;
                    fake_edge(root, q, g.n())?
                }
                _ => {
                    audit.anti_edges += 1;
                    anti_edge(root, q, g.n())?
                }
            };
            audit.congruences &= check_gadget_congruences(&gadget, q);
            requests.push(Request { root: root.clone(), extra: gadget.new_verts.len() });
            templates.push((ci, gadget));
        }
    }

    let host = g.filter(|_, e| !x.has_support(e));
    let plan = embed_partial_cliques(&host, &requests, &cfg.embed).map_err(|e| RefineError::from(e).at("embed"))?;
    audit.request_degree = plan.request_degree;
    audit.block_degree = plan.total.delta();
    audit.warnings = plan.warnings.clone();

    let mut xg = x.clone();
    xg.grow_to(g.n());
    let mut new_r = MultiHypergraph::new(g.n(), r);
    let mut pool = IidPool::after([&xg]);
    let mut class_ids: Vec<Vec<Iid>> = vec![Vec::new(); classes.len()];
    for ((ci, gadget), block) in templates.iter().zip(&plan.per_request) {
        let mut map: BTreeMap<Vertex, Vertex> = gadget.root.iter().map(|&v| (v, v)).collect();
        map.extend(gadget.new_verts.iter().copied().zip(block.new_verts.iter().copied()));
        let ids = transplant(&gadget.edges, &map, &mut new_r, &mut pool)?;
        class_ids[*ci].extend(ids.into_values());
    }

    let mut members: Vec<Vec<Iid>> =
        family.members().iter().map(|h| h.iter().copied().filter(|&i| x.contains(i)).collect()).collect();
    for ((_, who, _), ids) in classes.iter().zip(&class_ids) {
        for &h in who {
            members[h].extend(ids.iter().copied());
        }
    }
    let mut new_family = RefinementFamily::new();
    for h in members {
        new_family.push(h);
    }
    let inner = multi.clone();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| inner.refine(l));
    let refiner = Refiner::new(q, xg, new_r, new_family, multi.remainder().clone(), refine)?;

    audit.simple = refiner.universe().is_simple();
    audit.inside_host = refiner.universe().supports().all(|(s, _)| g.has_support(s));
    audit.members_divisible = refiner
        .family()
        .members()
        .iter()
        .all(|h| is_divisible_instances(refiner.universe(), &h.iter().copied().collect(), q));
    audit.family_degree = refiner.family_max_degree();
    audit.refinement_constant = refiner.refinement_constant();
    if !audit.congruences {
        return Err(RefineError::Audit("a gadget misses its root congruences".into()));
    }
    if !audit.simple || !audit.inside_host {
        return Err(RefineError::Audit("X ∪ R is not a simple subgraph of the host".into()));
    }
    if !audit.members_divisible {
        return Err(RefineError::Audit("some φ(H) is not divisible".into()));
    }
    if audit.refinement_constant > cfg.c {
        return Err(RefineError::Audit(format!(
            "refinement constant {} above C = {}",
            audit.refinement_constant, cfg.c
        )));
    }
    Ok(SimpleRefiner { refiner, audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refinery::multi::{build_multi_refiner, terminal_refiner, MultiConfig};
    use crate::refinery::{multiplicity_reduction, verify_refiner, VerifyConfig};

    #[test]
    fn plan_matches_residues() {
        assert_eq!(gadget_plan(1, 6), (GadgetKind::FakeEdge, 1));
        assert_eq!(gadget_plan(5, 6), (GadgetKind::AntiEdge, 1));
        assert_eq!(gadget_plan(6, 6), (GadgetKind::FakeEdge, 0));
        assert_eq!(gadget_plan(9, 6), (GadgetKind::FakeEdge, 3));
        assert_eq!(gadget_plan(10, 6), (GadgetKind::AntiEdge, 2));
    }

    #[test]
    fn empty_multi_refiner() {
        let g = MultiHypergraph::complete(10, 2);
        let multi = Refiner::empty(3, 2, 10);
        let out = substitute_fake_edges(&g, &multi, &FakeSubConfig::default()).unwrap();
        assert!(out.refiner.r_graph().is_empty() && out.refiner.family().is_empty());
    }

    #[test]
    fn bundled_terminal_shapes() {
        let x = MultiHypergraph::from_supports(30, 2, [[0, 1], [1, 2], [0, 2]]).unwrap();
        let multi = terminal_refiner(&x, 3, &mut IidPool::after([&x])).unwrap();
        let g = MultiHypergraph::complete(30, 2);
        let out = substitute_fake_edges(&g, &multi, &FakeSubConfig::default()).unwrap();
        assert_eq!((out.audit.fake_edges, out.audit.anti_edges), (3, 3));
        let shapes: Vec<(usize, usize)> = (0..out.refiner.family().len())
            .map(|i| (out.refiner.member_vertices(i).len(), out.refiner.family().member(i).len()))
            .collect();
        // R_e is a 6-cycle, e with its anti-edge a triangle, ⋃e* three 4-paths closing a 12-cycle.
        assert_eq!(shapes.iter().filter(|s| **s == (6, 6)).count(), 3);
        assert_eq!(shapes.iter().filter(|s| **s == (3, 3)).count(), 3);
        assert_eq!(shapes.iter().filter(|s| **s == (12, 12)).count(), 1);
        let rep = verify_refiner(&out.refiner, &VerifyConfig::default());
        assert!(rep.ok, "{:?}", rep.witness);
    }

    #[test]
    fn unbundled_is_one_fake_edge_per_instance() {
        let x = MultiHypergraph::from_supports(40, 2, [[0, 1], [2, 3]]).unwrap();
        let multi = terminal_refiner(&x, 3, &mut IidPool::after([&x])).unwrap();
        let g = MultiHypergraph::complete(40, 2);
        let cfg = FakeSubConfig { bundle: false, ..FakeSubConfig::default() };
        let out = substitute_fake_edges(&g, &multi, &cfg).unwrap();
        assert_eq!(out.audit.fake_edges, multi.r_graph().e());
        assert_eq!(out.refiner.r_graph().e(), 4 * multi.r_graph().e());
        assert!(out.audit.members_divisible);
    }

    #[test]
    fn remainder_in_r_rejected() {
        let x = MultiHypergraph::from_supports(20, 2, [[0, 1]]).unwrap();
        let multi = multiplicity_reduction(&x, 3, &mut IidPool::after([&x])).unwrap();
        let g = MultiHypergraph::complete(20, 2);
        assert!(matches!(
            substitute_fake_edges(&g, &multi, &FakeSubConfig::default()),
            Err(RefineError::Unsupported(_))
        ));
    }

    #[test]
    fn sampled_on_k50() {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::stage_rng(5, "fakesub-test");
        let mut pairs: Vec<[Vertex; 2]> = (0..50).flat_map(|a| (a + 1..50).map(move |b| [a, b])).collect();
        pairs.shuffle(&mut rng);
        let mut chosen: Vec<[Vertex; 2]> = pairs[..12].to_vec();
        chosen
            .extend([[47, 48], [48, 49], [47, 49]].iter().filter(|p| !chosen.contains(p)).copied().collect::<Vec<_>>());
        let x = MultiHypergraph::from_supports(50, 2, chosen).unwrap();
        let multi =
            build_multi_refiner(&x, &(0..50).collect(), 3, &MultiConfig::default(), &mut IidPool::after([&x])).unwrap();
        let g = MultiHypergraph::complete(50, 2);
        let out = substitute_fake_edges(&g, &multi.refiner, &FakeSubConfig::default()).unwrap();
        let rep = verify_refiner(&out.refiner, &VerifyConfig { exhaustive_cap: 0, samples: 60, seed: 3 });
        assert!(rep.ok, "{:?}", rep.witness);
        assert!(out.audit.simple && out.audit.inside_host);
    }
}
