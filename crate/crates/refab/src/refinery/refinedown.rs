//! Refine-down for r = 2 over a vortex Y_2 ⊆ Y_1 ⊆ Y_0 = Y. The first step completes each
//! support outside Y_1 to a K_q through random vertices of Y_1 ∖ Y_2; the second builds a
//! local refiner at every vertex outside Y_0 with its absorber vertices permuted at random
//! inside Y_0 ∖ Y_1. Multiplicity reduction follows each step.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::divisibility::modulus_m;
use crate::gadgets::partial_clique_edges;
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};
use crate::rng::retry_rng;

use super::local::{local_refiner_permuted, LocalConfig};
use super::model::{RefinementFamily, Refiner};
use super::mrl::multiplicity_reduction;
use super::{concat_all, disjoint_union, RefineError};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineDownConfig {
    /// C in the thresholds of the degree events.
    pub c: f64,
    /// |Y_i| = ⌈|Y_{i−1}| / factor⌉.
    pub factor: usize,
    pub min_y: usize,
    pub seed: u64,
    pub retries: usize,
    pub local: LocalConfig,
}

impl Default for RefineDownConfig {
    fn default() -> Self {
        Self { c: 64.0, factor: 2, min_y: 8, seed: 1, retries: 50, local: LocalConfig::default() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StepAudit {
    pub i: usize,
    pub attempts: usize,
    /// Largest Δ_H(T) over the T the lemma bounds, with its threshold.
    pub worst_degree: usize,
    pub degree_cap: f64,
    /// Largest |X′(T)| − |X(T)| over the same T.
    pub worst_growth: isize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RefineDownAudit {
    /// |Y_0|, |Y_1|, |Y_2|.
    pub vortex: Vec<usize>,
    pub steps: Vec<StepAudit>,
    pub remainder_inside_y: bool,
    pub remainder_multiplicity: usize,
    pub flat: bool,
    pub family_degree: usize,
    /// |Y| ≥ v(X)/3 holds.
    pub hypothesis: bool,
}

#[derive(Clone, Debug)]
pub struct RefinedDown {
    pub refiner: Refiner,
    pub audit: RefineDownAudit,
}

fn vortex(y: &BTreeSet<Vertex>, factor: usize) -> [BTreeSet<Vertex>; 3] {
    let y0: Vec<Vertex> = y.iter().copied().collect();
    let n1 = y0.len().div_ceil(factor);
    let n2 = n1.div_ceil(factor);
    [y0.iter().copied().collect(), y0[..n1].iter().copied().collect(), y0[..n2].iter().copied().collect()]
}

/// Multiplicity reduction on the supports above M, everything else passed through.
fn reduce_excess(x: &MultiHypergraph, q: usize, pool: &mut IidPool) -> Result<Refiner, RefineError> {
    let m = modulus_m(q, x.r())? as usize;
    let high: BTreeSet<Iid> =
        x.supports().filter(|(_, ids)| ids.len() > m).flat_map(|(_, ids)| ids.iter().copied()).collect();
    let rest = x.without(&high);
    if high.is_empty() {
        return Ok(Refiner::identity(q, x.clone()));
    }
    let reduced = multiplicity_reduction(&x.restrict(&high)?, q, pool)?;
    disjoint_union(q, &[reduced], &rest)
}

fn delta_star(x: &MultiHypergraph) -> f64 {
    let v = x.vertices().len().max(2) as f64;
    (x.delta() as f64).max(v.sqrt() * v.ln())
}

/// Members containing each vertex, over the given refiner's family.
fn member_degrees(rf: &Refiner) -> BTreeMap<Vertex, usize> {
    let mut out = BTreeMap::new();
    for i in 0..rf.family().len() {
        for v in rf.member_vertices(i) {
            *out.entry(v).or_insert(0) += 1;
        }
    }
    out
}

/// Events A_T and B_T over the vertices T with |T ∖ Y| < i.
fn step_events(
    rf: &Refiner,
    x: &MultiHypergraph,
    y: &BTreeSet<Vertex>,
    i: usize,
    v: f64,
    delta: f64,
    c: f64,
) -> (bool, usize, isize, f64) {
    let ratio = v / y.len() as f64;
    let cap = c * (ratio.powi(i as i32 - 1) * delta).max(ratio.powi(i.min(1) as i32));
    let watched = |t: &Vertex| (!y.contains(t) as usize) < i;
    let deg = member_degrees(rf);
    let worst_degree = deg.iter().filter(|(t, _)| watched(t)).map(|(_, d)| *d).max().unwrap_or(0);
    let before = x.degree_table(1);
    let after = rf.remainder_graph().degree_table(1);
    let worst_growth = after
        .iter()
        .filter(|(t, _)| watched(&t[0]))
        .map(|(t, d)| *d as isize - before.get(t).copied().unwrap_or(0) as isize)
        .max()
        .unwrap_or(0);
    let ok = worst_degree as f64 <= cap && worst_growth as f64 <= cap;
    (ok, worst_degree, worst_growth, cap)
}

/// Step i = 2: each support with both ends outside `z` is completed to a K_q through a
/// random (q − 2)-set of `z ∖ y`, with M parallel copies of every completion pair.
fn completion_step(
    x: &MultiHypergraph,
    q: usize,
    y: &BTreeSet<Vertex>,
    z: &BTreeSet<Vertex>,
    rng: &mut impl rand::Rng,
    pool: &mut IidPool,
) -> Result<Refiner, RefineError> {
    let m = modulus_m(q, 2)? as usize;
    let pool_verts: Vec<Vertex> = z.difference(y).copied().collect();
    if pool_verts.len() < q - 2 {
        return Err(RefineError::Unsupported(format!("{} vertices in Y_1 ∖ Y_2, need {}", pool_verts.len(), q - 2)));
    }
    let outside = x.filter(|_, e| e.iter().all(|v| !z.contains(v)));
    let rest = x.without(&outside.iid_set());
    let mut rg = MultiHypergraph::new(x.n(), 2);
    let mut family = RefinementFamily::new();
    let mut member_of: BTreeMap<Iid, usize> = BTreeMap::new();
    for (support, ids) in outside.supports() {
        let w: Vec<Vertex> = pool_verts.choose_multiple(rng, q - 2).copied().collect();
        let pairs = partial_clique_edges(support, &w, 2);
        for &iid in ids {
            let mut member = vec![iid];
            for copy in 0..m {
                for t in &pairs {
                    let id = rg.push(pool, t.clone())?;
                    if copy == 0 {
                        member.push(id);
                    }
                }
            }
            member_of.insert(iid, family.push(member));
        }
    }
    let remainder = rg.iid_set();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| Ok(l.iter().filter_map(|i| member_of.get(i).copied()).collect()));
    let done = Refiner::new(q, outside, rg, family, remainder, refine)?;
    disjoint_union(q, &[done], &rest)
}

/// Step i = 1: a local refiner at every vertex outside `z`, absorber vertices placed in
/// `z ∖ y` and moved by an independent random permutation per centre.
#[allow(clippy::too_many_arguments)]
fn local_step(
    x: &MultiHypergraph,
    q: usize,
    y: &BTreeSet<Vertex>,
    z: &BTreeSet<Vertex>,
    cfg: &LocalConfig,
    rng: &mut impl rand::Rng,
    pool: &mut IidPool,
) -> Result<Refiner, RefineError> {
    let target: BTreeSet<Vertex> = z.difference(y).copied().collect();
    let order: Vec<Vertex> = target.iter().copied().collect();
    let centers: BTreeSet<Vertex> = x.vertices().into_iter().filter(|v| !z.contains(v)).collect();
    let mut parts = Vec::new();
    let mut taken = BTreeSet::new();
    for &s in &centers {
        let star = x.star(&[s]);
        if star.is_empty() {
            continue;
        }
        let mut shuffled = order.clone();
        shuffled.shuffle(rng);
        let sigma: BTreeMap<Vertex, Vertex> = order.iter().copied().zip(shuffled).collect();
        let local = local_refiner_permuted(&star, s, q, y, &target, &sigma, cfg, pool)?;
        taken.extend(star.iids());
        parts.push(local.refiner);
    }
    disjoint_union(q, &parts, &x.without(&taken))
}

/// Refiner of X whose remainder lies inside Y with multiplicity at most M(q, 2).
pub fn refine_down_r2(
    x: &MultiHypergraph,
    y: &BTreeSet<Vertex>,
    q: usize,
    cfg: &RefineDownConfig,
    pool: &mut IidPool,
) -> Result<RefinedDown, RefineError> {
    if x.r() != 2 {
        return Err(RefineError::Unsupported(format!("refine-down is built for r = 2, got r = {}", x.r())));
    }
    let m = modulus_m(q, 2)? as usize;
    let v = x.n().max(1) as f64;
    let hypothesis = y.len() as f64 >= v / 3.0;
    let inside = |g: &MultiHypergraph| g.instances().all(|(_, e)| e.iter().all(|u| y.contains(u)));
    if inside(x) && x.max_multiplicity() <= m {
        let audit = RefineDownAudit {
            vortex: vec![y.len()],
            remainder_inside_y: true,
            remainder_multiplicity: x.max_multiplicity(),
            flat: true,
            hypothesis,
            ..RefineDownAudit::default()
        };
        return Ok(RefinedDown { refiner: Refiner::identity(q, x.clone()), audit });
    }
    if y.len() < cfg.min_y || cfg.factor < 2 {
        return Err(RefineError::Unsupported(format!("|Y| = {} below the minimum {}", y.len(), cfg.min_y)));
    }
    let [y0, y1, y2] = vortex(y, cfg.factor);
    let mut chain: Vec<Refiner> = Vec::new();
    let mut steps = Vec::new();
    let mut current = x.clone();
    for i in [2usize, 1] {
        let (yi, zi) = if i == 2 { (&y2, &y1) } else { (&y1, &y0) };
        let delta = delta_star(&current);
        let mut best: Option<(Refiner, IidPool, StepAudit)> = None;
        let mut worst = (0usize, isize::MIN, 0.0f64);
        for attempt in 0..cfg.retries.max(1) {
            let mut rng = retry_rng(cfg.seed, if i == 2 { "refine-down-2" } else { "refine-down-1" }, attempt as u64);
            let mut trial_pool = pool.clone();
            let step = if i == 2 {
                completion_step(&current, q, yi, zi, &mut rng, &mut trial_pool)
            } else {
                local_step(&current, q, yi, zi, &cfg.local, &mut rng, &mut trial_pool)
            }
            .map_err(|e| e.at(if i == 2 { "refine-down completion" } else { "refine-down local" }))?;
            let (ok, deg, growth, cap) = step_events(&step, &current, yi, i, v, delta, cfg.c);
            if deg > worst.0 || growth > worst.1 {
                worst = (deg.max(worst.0), growth.max(worst.1), cap);
            }
            if ok {
                let audit =
                    StepAudit { i, attempts: attempt + 1, worst_degree: deg, degree_cap: cap, worst_growth: growth };
                best = Some((step, trial_pool, audit));
                break;
            }
        }
        let Some((step, trial_pool, audit)) = best else {
            return Err(RefineError::Retries(format!(
                "step i = {i}: worst Δ_H(T) = {}, worst growth {} against cap {:.1}",
                worst.0, worst.1, worst.2
            )));
        };
        *pool = trial_pool;
        let reduced = reduce_excess(&step.remainder_graph(), q, pool)?;
        current = reduced.remainder_graph();
        chain.push(step);
        chain.push(reduced);
        steps.push(audit);
    }
    let refiner = concat_all(&chain)?;
    let rem = refiner.remainder_graph();
    let audit = RefineDownAudit {
        vortex: vec![y0.len(), y1.len(), y2.len()],
        steps,
        remainder_inside_y: inside(&rem),
        remainder_multiplicity: rem.max_multiplicity(),
        flat: refiner.r_graph().is_flat(y, 1),
        family_degree: refiner.family_max_degree(),
        hypothesis,
    };
    if !audit.remainder_inside_y {
        return Err(RefineError::Audit("V(X′) is not inside Y".into()));
    }
    if audit.remainder_multiplicity > m {
        return Err(RefineError::Audit(format!("remainder multiplicity {}", audit.remainder_multiplicity)));
    }
    if !audit.flat {
        return Err(RefineError::Audit("R is not 1-flat to Y".into()));
    }
    Ok(RefinedDown { refiner, audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refinery::{verify_refiner, VerifyConfig};

    fn random_graph(n: u32, e: usize, seed: u64) -> MultiHypergraph {
        let mut rng = retry_rng(seed, "refine-down-test", 0);
        let mut pairs: Vec<[Vertex; 2]> = (0..n).flat_map(|a| (a + 1..n).map(move |b| [a, b])).collect();
        pairs.shuffle(&mut rng);
        MultiHypergraph::from_supports(n, 2, pairs.into_iter().take(e)).unwrap()
    }

    #[test]
    fn forty_vertices_into_fourteen() {
        let x = random_graph(40, 100, 3);
        let y: BTreeSet<Vertex> = (0..14).collect();
        let out = refine_down_r2(&x, &y, 3, &RefineDownConfig::default(), &mut IidPool::after([&x])).unwrap();
        assert!(out.audit.remainder_inside_y && out.audit.flat);
        assert!(out.refiner.remainder_graph().vertices().is_subset(&y));
        let cfg = VerifyConfig { samples: 30, ..VerifyConfig::default() };
        let rep = verify_refiner(&out.refiner, &cfg);
        assert!(rep.ok, "{:?}", rep.witness);
    }

    #[test]
    fn inside_y_is_identity() {
        let x = random_graph(10, 12, 4);
        let y: BTreeSet<Vertex> = (0..10).collect();
        let out = refine_down_r2(&x, &y, 3, &RefineDownConfig::default(), &mut IidPool::after([&x])).unwrap();
        assert!(out.refiner.r_graph().is_empty() && out.refiner.family().is_empty());
        assert_eq!(out.refiner.remainder(), &x.iid_set());
    }

    #[test]
    fn small_instance_exhaustive() {
        let x =
            MultiHypergraph::from_supports(24, 2, [[20, 21], [21, 22], [20, 22], [3, 23], [4, 23], [3, 4]]).unwrap();
        let y: BTreeSet<Vertex> = (0..16).collect();
        let out = refine_down_r2(&x, &y, 3, &RefineDownConfig::default(), &mut IidPool::after([&x])).unwrap();
        let rep = verify_refiner(&out.refiner, &VerifyConfig::default());
        assert!(rep.ok, "{:?}", rep.witness);
        assert!(out.refiner.remainder_graph().vertices().is_subset(&y));
    }

    #[test]
    fn tiny_y_rejected() {
        let x = random_graph(12, 10, 5);
        let y: BTreeSet<Vertex> = (0..3).collect();
        assert!(refine_down_r2(&x, &y, 3, &RefineDownConfig::default(), &mut IidPool::after([&x])).is_err());
    }
}
