//! Refined omni-absorbers inside a host: a simple refiner of X, then a private absorber for
//! every member of its family, embedded edge-disjointly into what the host has left.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exactdecomp::Decomposition;
use crate::gadgets::absorber::provide_absorber;
use crate::gadgets::embed::consume;
use crate::gadgets::{better_absorber, embed_rooted, transplant, SearchBudget};
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};
use crate::rng::retry_rng;

use super::fakesub::{substitute_fake_edges, FakeSubAudit, FakeSubConfig};
use super::model::{OmniAbsorber, RefinementFamily, Refiner};
use super::multi::{build_multi_refiner, MultiAudit, MultiConfig};
use super::RefineError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OmniConfig {
    pub multi: MultiConfig,
    pub fakesub: FakeSubConfig,
    pub absorber: SearchBudget,
    /// Use the composed absorber whose Q2 meets V(H) only along H.
    pub better: bool,
    /// C in Δ(A) ≤ C·Δ(X).
    pub c: f64,
    /// The omni-absorber must be C-refined for this C.
    pub refined_c: usize,
    pub seed: u64,
    pub embed_retries: u64,
    pub embed_nodes: u64,
}

impl Default for OmniConfig {
    fn default() -> Self {
        Self {
            multi: MultiConfig::default(),
            fakesub: FakeSubConfig::default(),
            absorber: SearchBudget::default(),
            better: false,
            c: 64.0,
            refined_c: 4096,
            seed: 1,
            embed_retries: 20,
            embed_nodes: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OmniAudit {
    pub multi: MultiAudit,
    pub fakesub: FakeSubAudit,
    pub refiner_members: usize,
    pub absorber_edges: usize,
    pub largest_absorber: usize,
    pub embed_attempts: u64,
    pub delta_x: usize,
    pub delta_a: usize,
    pub degree_bound: f64,
    pub refinement_constant: usize,
}

#[derive(Clone, Debug)]
pub struct OmniBuild {
    pub omni: OmniAbsorber,
    pub audit: OmniAudit,
}

/// Clique members of a certificate, translated to host ids.
fn certificate_members(d: &Decomposition, ids: &BTreeMap<Iid, Iid>) -> Vec<Vec<Iid>> {
    let mut out = vec![Vec::new(); d.cliques.len()];
    for (iid, &c) in &d.assignment {
        out[c].push(*ids.get(iid).unwrap_or(iid));
    }
    out
}

/// An omni-absorber A ⊆ G ∖ X for the simple graph X with Q_A(L) = ⋃_{H ∈ Q(L)} Q_{2,H} ∪
/// ⋃_{H ∉ Q(L)} Q_{1,H}, where Q is the refiner built from a multi-refiner by fake edges.
pub fn build_omni_absorber(
    g: &MultiHypergraph,
    x: &MultiHypergraph,
    q: usize,
    cfg: &OmniConfig,
) -> Result<OmniBuild, RefineError> {
    let r = x.r();
    if r != 2 || g.r() != 2 {
        return Err(RefineError::Unsupported(format!("omni-absorbers are built for r = 2, got r = {r}")));
    }
    if !x.is_simple() {
        return Err(RefineError::Unsupported("X must be simple".into()));
    }
    let y: BTreeSet<Vertex> = (0..g.n()).collect();
    let mut pool = IidPool::after([x]);
    let multi = build_multi_refiner(x, &y, q, &cfg.multi, &mut pool).map_err(|e| e.at("multi-refiner"))?;
    let simple = substitute_fake_edges(g, &multi.refiner, &cfg.fakesub).map_err(|e| e.at("fake edges"))?;
    let refiner = simple.refiner;

    let mut available: HashSet<Vec<Vertex>> = g.supports().map(|(s, _)| s.to_vec()).collect();
    consume(&mut available, refiner.universe())
        .map_err(|e| RefineError::Audit(format!("refiner edge {e:?} missing from the host")))?;
    let candidates: Vec<Vertex> = (0..g.n()).collect();
    let mut a = refiner.r_graph().clone();
    let mut ids_pool = IidPool::after([refiner.universe()]);
    let mut family = RefinementFamily::new();
    let mut q1_of: Vec<Vec<usize>> = Vec::with_capacity(refiner.family().len());
    let mut q2_of: Vec<Vec<usize>> = Vec::with_capacity(refiner.family().len());
    let mut audit = OmniAudit { refiner_members: refiner.family().len(), ..OmniAudit::default() };
    for member in 0..refiner.family().len() {
        let h = refiner.member_graph(member);
        let gadget = if cfg.better {
            better_absorber(&h, q, &cfg.absorber)
        } else {
            provide_absorber(&h, q, h.n(), &mut IidPool::after([&h]), &cfg.absorber)
        }
        .map_err(|source| RefineError::Absorber { member, source })?;
        let cert = gadget.certificates.clone().expect("absorbers carry certificates");
        let fixed: BTreeMap<Vertex, Vertex> = gadget.root.iter().map(|&v| (v, v)).collect();
        let mut placed = None;
        for attempt in 0..cfg.embed_retries {
            audit.embed_attempts += 1;
            let mut rng = retry_rng(cfg.seed ^ member as u64, "omni-absorber", attempt);
            placed = embed_rooted(&gadget.edges, &fixed, &candidates, &available, &mut rng, cfg.embed_nodes);
            if placed.is_some() {
                break;
            }
        }
        let map = placed.ok_or_else(|| {
            RefineError::Embedding(format!(
                "member {member}: no placement of a {}-vertex absorber after {} attempts",
                gadget.vertex_count(),
                cfg.embed_retries
            ))
        })?;
        let mut image = MultiHypergraph::new(g.n(), r);
        let ids = transplant(&gadget.edges, &map, &mut image, &mut ids_pool)?;
        consume(&mut available, &image)
            .map_err(|e| RefineError::Embedding(format!("member {member}: edge {e:?} reused")))?;
        a.absorb(&image)?;
        audit.absorber_edges += image.e();
        audit.largest_absorber = audit.largest_absorber.max(gadget.vertex_count());
        q1_of.push(certificate_members(&cert.q1, &ids).into_iter().map(|c| family.push(c)).collect());
        q2_of.push(certificate_members(&cert.q2, &ids).into_iter().map(|c| family.push(c)).collect());
    }

    let inner = refiner.clone();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| {
        let chosen: BTreeSet<usize> = inner.refine(l)?.into_iter().collect();
        Ok((0..q1_of.len())
            .flat_map(|h| if chosen.contains(&h) { q2_of[h].clone() } else { q1_of[h].clone() })
            .collect())
    });
    let mut xg = x.clone();
    xg.grow_to(g.n());
    let omni = OmniAbsorber::new(Refiner::new(q, xg, a, family, BTreeSet::new(), refine)?)?;

    audit.multi = multi.audit;
    audit.fakesub = simple.audit;
    audit.delta_x = x.delta();
    audit.delta_a = omni.a().delta();
    audit.degree_bound = cfg.c * audit.delta_x as f64;
    audit.refinement_constant = omni.as_refiner().refinement_constant();
    if audit.delta_a as f64 > audit.degree_bound {
        return Err(RefineError::Audit(format!("Δ(A) = {} above C·Δ(X) = {:.0}", audit.delta_a, audit.degree_bound)));
    }
    if audit.refinement_constant > cfg.refined_c {
        return Err(RefineError::Audit(format!(
            "refinement constant {} above C = {}",
            audit.refinement_constant, cfg.refined_c
        )));
    }
    Ok(OmniBuild { omni, audit })
}
