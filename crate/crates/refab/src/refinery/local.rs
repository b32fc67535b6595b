//! Local refiners for r = 2: a star X at a centre s is refined by lifting a 1-uniform
//! omni-absorber of its link and completing every member to a K_q with stacked pair edges.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::divisibility::modulus_m;
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};
use crate::rmh::build_1uniform_omni;
use crate::rng::stage_rng;

use super::model::{RefinementFamily, Refiner};
use super::sampling::{exhaustive_divisible, sample_divisible};
use super::verify::{check_chain, static_checks, VerifyConfig, VerifyMode, VerifyReport, Witness};
use super::RefineError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalConfig {
    /// C in the degree and remainder caps.
    pub c: f64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self { c: 512.0 }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LocalAudit {
    /// Δ_H({s}) against C·Δ.
    pub center_degree: usize,
    pub center_bound: f64,
    /// Largest Δ_H({t}) over vertices t ≠ s of X.
    pub link_degree: usize,
    /// Largest Δ_H({a}) over the absorber vertices a, reported only.
    pub absorber_degree: usize,
    pub flat: bool,
    pub remainder_avoids_center: bool,
    /// Largest X′-degree at a vertex of X.
    pub remainder_degree: usize,
    /// Largest X′-degree at an absorber vertex, reported only.
    pub remainder_absorber_degree: usize,
}

#[derive(Clone, Debug)]
pub struct LocalRefiner {
    pub center: Vertex,
    pub refiner: Refiner,
    pub audit: LocalAudit,
}

/// Local refiner of the star `x` at `center`, its link inside `y` and the absorber vertices
/// inside `target`.
pub fn local_refiner_r2(
    x: &MultiHypergraph,
    center: Vertex,
    q: usize,
    y: &BTreeSet<Vertex>,
    target: &BTreeSet<Vertex>,
    cfg: &LocalConfig,
    pool: &mut IidPool,
) -> Result<LocalRefiner, RefineError> {
    local_refiner_permuted(x, center, q, y, target, &BTreeMap::new(), cfg, pool)
}

/// As [`local_refiner_r2`], with the absorber vertices moved by `sigma` (a permutation of
/// `target`; vertices it omits stay put).
#[allow(clippy::too_many_arguments)]
pub fn local_refiner_permuted(
    x: &MultiHypergraph,
    center: Vertex,
    q: usize,
    y: &BTreeSet<Vertex>,
    target: &BTreeSet<Vertex>,
    sigma: &BTreeMap<Vertex, Vertex>,
    cfg: &LocalConfig,
    pool: &mut IidPool,
) -> Result<LocalRefiner, RefineError> {
    if x.r() != 2 {
        return Err(RefineError::Unsupported(format!("local refiners are built for r = 2, got r = {}", x.r())));
    }
    if q < 3 {
        return Err(RefineError::Unsupported(format!("q = {q} leaves no room for a link omni-absorber")));
    }
    let m = modulus_m(q, 2)? as usize;
    let link = x.link(&[center])?;
    if link.e() != x.e() {
        return Err(RefineError::Unsupported(format!("X is not a star at {center}")));
    }
    if let Some((_, e)) = link.instances().find(|(_, e)| !y.contains(&e[0])) {
        return Err(RefineError::Unsupported(format!("link vertex {} lies outside Y", e[0])));
    }
    if target.contains(&center) || target.iter().any(|t| y.contains(t)) {
        return Err(RefineError::Unsupported("the absorber target meets Y or the centre".into()));
    }
    let omni = build_1uniform_omni(&link, q - 1, target, pool)?;
    let place = |v: Vertex| sigma.get(&v).copied().unwrap_or(v);
    let top = target.iter().chain(sigma.values()).map(|&v| v + 1).max().unwrap_or(0);
    let n = x.n().max(top).max(center + 1);

    let mut rg = MultiHypergraph::new(n, 2);
    for (iid, a) in omni.a().instances() {
        rg.insert(iid, vec![center, place(a[0])])?;
    }
    let inner = omni.as_refiner();
    let link_vertex = |iid: Iid| -> Vertex {
        let v = inner.universe().get(iid).expect("omni instance")[0];
        if link.contains(iid) {
            v
        } else {
            place(v)
        }
    };
    let base: BTreeSet<usize> = omni.decompose(&BTreeSet::new())?.into_iter().collect();
    let mut family = RefinementFamily::new();
    let mut remainder = BTreeSet::new();
    for (idx, member) in inner.family().members().iter().enumerate() {
        let verts: BTreeSet<Vertex> = member.iter().map(|&i| link_vertex(i)).collect();
        let copies = if base.contains(&idx) { m + 1 } else { m };
        let mut lifted = member.clone();
        for pair in verts.into_iter().combinations(2) {
            for copy in 0..copies {
                let id = rg.push(pool, pair.clone())?;
                remainder.insert(id);
                if copy == 0 {
                    lifted.push(id);
                }
            }
        }
        family.push(lifted);
    }
    let decide = omni.clone();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| decide.decompose(l));
    let refiner = Refiner::new(q, x.clone(), rg, family, remainder, refine)?;
    let audit = audit_local(&refiner, center, y, cfg)?;
    Ok(LocalRefiner { center, refiner, audit })
}

fn audit_local(
    rf: &Refiner,
    center: Vertex,
    y: &BTreeSet<Vertex>,
    cfg: &LocalConfig,
) -> Result<LocalAudit, RefineError> {
    let x = rf.x();
    let v = x.vertices().len().max(1) as f64;
    let delta = (x.delta() as f64).max(v.sqrt() * v.ln());
    let mut per_vertex: BTreeMap<Vertex, usize> = BTreeMap::new();
    for i in 0..rf.family().len() {
        for t in rf.member_vertices(i) {
            *per_vertex.entry(t).or_insert(0) += 1;
        }
    }
    let xv = x.vertices();
    let center_degree = per_vertex.get(&center).copied().unwrap_or(0);
    let link_degree = per_vertex.iter().filter(|(t, _)| **t != center && xv.contains(t)).map(|(_, d)| *d).max();
    let absorber_degree = per_vertex.iter().filter(|(t, _)| !xv.contains(t)).map(|(_, d)| *d).max();
    let link: BTreeSet<Vertex> = x.link(&[center])?.vertices();
    let flat = rf.r_graph().instances().all(|(_, e)| {
        let in_base = e.iter().filter(|v| **v == center || y.contains(v)).count();
        let in_y: Vec<Vertex> = e.iter().copied().filter(|v| y.contains(v)).collect();
        in_base <= 1 && in_y.len() <= 1 && in_y.iter().all(|t| link.contains(t))
    });
    let rem = rf.remainder_graph();
    let rem_deg = rem.degree_table(1);
    let rem_at =
        |inside: bool| rem_deg.iter().filter(|(t, _)| xv.contains(&t[0]) == inside).map(|(_, d)| *d).max().unwrap_or(0);
    let audit = LocalAudit {
        center_degree,
        center_bound: cfg.c * delta,
        link_degree: link_degree.unwrap_or(0),
        absorber_degree: absorber_degree.unwrap_or(0),
        flat,
        remainder_avoids_center: rem.instances().all(|(_, e)| !e.contains(&center)),
        remainder_degree: rem_at(true),
        remainder_absorber_degree: rem_at(false),
    };
    if center_degree as f64 > audit.center_bound {
        return Err(RefineError::Audit(format!("Δ_H(s) = {center_degree} above {:.1}", audit.center_bound)));
    }
    if audit.link_degree as f64 > cfg.c {
        return Err(RefineError::Audit(format!("Δ_H(t) = {} above C at a link vertex", audit.link_degree)));
    }
    if !audit.flat {
        return Err(RefineError::Audit("R is not flat to the link".into()));
    }
    if !audit.remainder_avoids_center {
        return Err(RefineError::Audit("X′ meets the centre".into()));
    }
    if audit.remainder_degree as f64 > cfg.c {
        return Err(RefineError::Audit(format!("Δ(X′) = {} above C", audit.remainder_degree)));
    }
    Ok(audit)
}

/// Checks the local refinement conditions for every L ⊆ X whose link at `center` is
/// K_{q−1}^1-divisible (exhaustive below the cap, sampled otherwise).
pub fn verify_local(rf: &Refiner, center: Vertex, cfg: &VerifyConfig) -> VerifyReport {
    let link = match rf.x().link(&[center]) {
        Ok(l) => l,
        Err(e) => {
            let witness = Some(Witness { l: Vec::new(), reason: e.to_string() });
            return VerifyReport { ok: false, mode: VerifyMode::Exhaustive, checked: 0, witness };
        }
    };
    let q = rf.q() - 1;
    let (mode, family) = if link.e() <= cfg.exhaustive_cap {
        (VerifyMode::Exhaustive, exhaustive_divisible(&link, q))
    } else {
        let mut rng = stage_rng(cfg.seed, "verify-local");
        (VerifyMode::Sampled, sample_divisible(&link, q, cfg.samples, &mut rng))
    };
    if let Err(reason) = static_checks(rf, false) {
        return VerifyReport { ok: false, mode, checked: 0, witness: Some(Witness { l: Vec::new(), reason }) };
    }
    for (n, l) in family.iter().enumerate() {
        if let Err(reason) = check_chain(rf, l, false) {
            let witness = Some(Witness { l: l.iter().copied().collect(), reason });
            return VerifyReport { ok: false, mode, checked: n + 1, witness };
        }
    }
    VerifyReport { ok: true, mode, checked: family.len(), witness: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(center: Vertex, leaves: &[Vertex], n: u32) -> MultiHypergraph {
        MultiHypergraph::from_supports(n, 2, leaves.iter().map(|&l| [center.min(l), center.max(l)])).unwrap()
    }

    #[test]
    fn six_edge_star_exhaustive() {
        let x = star(0, &[1, 2, 3, 4, 5, 6], 20);
        let y: BTreeSet<Vertex> = (1..=6).collect();
        let target: BTreeSet<Vertex> = (10..20).collect();
        let out = local_refiner_r2(&x, 0, 3, &y, &target, &LocalConfig::default(), &mut IidPool::after([&x])).unwrap();
        let rep = verify_local(&out.refiner, 0, &VerifyConfig::default());
        assert!(rep.ok, "{:?}", rep.witness);
        assert_eq!(rep.mode, VerifyMode::Exhaustive);
        // Links of even size among six leaves.
        assert_eq!(rep.checked, 32);
        assert!(out.refiner.family().members().iter().all(|m| m.len() == 3));
    }

    #[test]
    fn parallel_leaves_and_permutation() {
        let x = MultiHypergraph::from_supports(30, 2, [[2, 5], [2, 5], [2, 7], [2, 8]]).unwrap();
        let y: BTreeSet<Vertex> = [5, 7, 8].into_iter().collect();
        let target: BTreeSet<Vertex> = (20..30).collect();
        let sigma: BTreeMap<Vertex, Vertex> = (20..30).map(|v| (v, 49 - v)).collect();
        let out =
            local_refiner_permuted(&x, 2, 4, &y, &target, &sigma, &LocalConfig::default(), &mut IidPool::after([&x]))
                .unwrap();
        assert!(out.refiner.r_graph().vertices().iter().all(|v| *v == 2 || y.contains(v) || target.contains(v)));
        let rep = verify_local(&out.refiner, 2, &VerifyConfig::default());
        assert!(rep.ok, "{:?}", rep.witness);
    }

    #[test]
    fn empty_star() {
        let x = MultiHypergraph::new(10, 2);
        let out = local_refiner_r2(
            &x,
            0,
            3,
            &BTreeSet::new(),
            &(5..10).collect(),
            &LocalConfig::default(),
            &mut IidPool::new(),
        )
        .unwrap();
        assert!(out.refiner.family().is_empty() && out.refiner.r_graph().is_empty());
    }

    #[test]
    fn remainder_misses_center() {
        let x = star(3, &[0, 1, 2, 4], 16);
        let y: BTreeSet<Vertex> = [0, 1, 2, 4].into_iter().collect();
        let out =
            local_refiner_r2(&x, 3, 3, &y, &(8..16).collect(), &LocalConfig::default(), &mut IidPool::after([&x]))
                .unwrap();
        assert!(out.audit.remainder_avoids_center);
        assert!(out.refiner.remainder_graph().instances().all(|(_, e)| !e.contains(&3)));
    }

    #[test]
    fn star_check_rejects_other_edges() {
        let x = MultiHypergraph::from_supports(10, 2, [[0, 1], [1, 2]]).unwrap();
        let err = local_refiner_r2(
            &x,
            0,
            3,
            &(1..3).collect(),
            &(5..10).collect(),
            &LocalConfig::default(),
            &mut IidPool::new(),
        );
        assert!(matches!(err, Err(RefineError::Unsupported(_))));
    }
}
