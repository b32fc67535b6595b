//! Edge sparsification: each edge e gets M(q,r) parallel completions of e to a clique on
//! e ∪ S_{φ(e)}, so edges with the same part signature share their completion vertices;
//! multiplicity reduction then thins the completions.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::divisibility::modulus_m;
use crate::gadgets::partial_clique_edges;
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};

use super::model::{RefinementFamily, Refiner};
use super::mrl::multiplicity_reduction;
use super::partition::{
    audit_partition, audit_special_sets, max_admissible_parts, quasirandom_partition, special_sets, Partition,
};
use super::{concat, RefineError};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SparsifyConfig {
    /// Number of parts; the largest admissible count when unset.
    pub parts: Option<usize>,
    /// C′ in the caps ⌈C′·k^{ℓ+1}/v^ℓ⌉ of the special sets.
    pub special_c: f64,
    /// C in Δ(H) ≤ C·Δ(X).
    pub c: f64,
    pub seed: u64,
    pub retries: usize,
    pub node_budget: u64,
    /// Fail when Δ(X′) exceeds v(X)^{1−1/r}, not only report it.
    pub enforce_remainder_bound: bool,
}

impl Default for SparsifyConfig {
    fn default() -> Self {
        Self {
            parts: None,
            special_c: 64.0,
            c: 512.0,
            seed: 1,
            retries: 100,
            node_budget: 2_000_000,
            enforce_remainder_bound: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SparsifyAudit {
    pub parts: usize,
    pub family_degree: usize,
    pub family_bound: usize,
    pub flat: bool,
    pub remainder_degree: usize,
    pub remainder_bound: f64,
    pub remainder_multiplicity: usize,
    /// Δ(X) ≥ v(X)^{1−1/r}·log v(X) holds.
    pub hypothesis: bool,
}

#[derive(Clone, Debug)]
pub struct Sparsified {
    pub refiner: Refiner,
    pub partition: Option<Partition>,
    pub audit: SparsifyAudit,
}

/// True iff every edge of `g` has at most `i` vertices outside `y`.
pub fn flat_to(g: &MultiHypergraph, y: &BTreeSet<Vertex>, i: usize) -> bool {
    g.is_flat(y, i)
}

pub fn edge_sparsify(
    x: &MultiHypergraph,
    y: &BTreeSet<Vertex>,
    q: usize,
    cfg: &SparsifyConfig,
    pool: &mut IidPool,
) -> Result<Sparsified, RefineError> {
    let r = x.r();
    let m = modulus_m(q, r)? as usize;
    let v = x.n() as f64;
    let exponent = 1.0 - 1.0 / r as f64;
    let hypothesis = x.delta() as f64 >= v.powf(exponent) * v.max(1.0).ln();
    if x.is_empty() {
        let refiner = Refiner::identity(q, x.clone());
        let audit = SparsifyAudit {
            parts: 0,
            family_degree: 0,
            family_bound: 0,
            flat: true,
            remainder_degree: 0,
            remainder_bound: v.powf(exponent),
            remainder_multiplicity: 0,
            hypothesis,
        };
        return Ok(Sparsified { refiner, partition: None, audit });
    }
    if x.max_multiplicity() > m {
        return Err(RefineError::Unsupported(format!("multiplicity {} above M = {m}", x.max_multiplicity())));
    }
    let partition = match cfg.parts {
        Some(k) => quasirandom_partition(x, k, cfg.seed, cfg.retries)?,
        None => {
            max_admissible_parts(x, y, q, cfg.seed, cfg.retries)
                .ok_or_else(|| RefineError::Unsupported("no admissible number of parts".into()))?
                .1
        }
    };
    if !audit_partition(x, &partition) {
        return Err(RefineError::Audit("partition bounds".into()));
    }
    let ss = special_sets(x, &partition, y, q, cfg.special_c, cfg.node_budget)?;
    audit_special_sets(&ss, &partition, y, x.n() as usize, cfg.special_c).map_err(RefineError::Audit)?;

    let mut rg = MultiHypergraph::new(x.n(), r);
    let mut family = RefinementFamily::new();
    let mut member_of: BTreeMap<Iid, usize> = BTreeMap::new();
    for (iid, e) in x.instances() {
        let s = &ss.sets[&partition.signature(e)];
        let mut first = vec![iid];
        for copy in 0..m {
            for t in partial_clique_edges(e, s, r) {
                let id = rg.push(pool, t)?;
                if copy == 0 {
                    first.push(id);
                }
            }
        }
        member_of.insert(iid, family.push(first));
    }
    let remainder = rg.iid_set();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| Ok(l.iter().map(|i| member_of[i]).collect()));
    let first = Refiner::new(q, x.clone(), rg.clone(), family, remainder, refine)?;
    let reduce = multiplicity_reduction(&rg, q, pool)?;
    let refiner = concat(&first, &reduce)?;

    let family_degree = refiner.family_max_degree();
    let family_bound = (cfg.c * x.delta() as f64).floor() as usize;
    let flat = flat_to(refiner.r_graph(), y, r - 1);
    let rem = refiner.remainder_graph();
    let audit = SparsifyAudit {
        parts: partition.k,
        family_degree,
        family_bound,
        flat,
        remainder_degree: rem.delta(),
        remainder_bound: v.powf(exponent),
        remainder_multiplicity: rem.max_multiplicity(),
        hypothesis,
    };
    if family_degree > family_bound {
        return Err(RefineError::Audit(format!("Δ(H) = {family_degree} above C·Δ(X) = {family_bound}")));
    }
    if !flat {
        return Err(RefineError::Audit("R is not (r−1)-flat to Y".into()));
    }
    if audit.remainder_multiplicity > m {
        return Err(RefineError::Audit(format!("remainder multiplicity {}", audit.remainder_multiplicity)));
    }
    if cfg.enforce_remainder_bound && audit.remainder_degree as f64 > audit.remainder_bound {
        return Err(RefineError::Audit(format!(
            "Δ(X′) = {} above v(X)^(1−1/r) = {:.2}",
            audit.remainder_degree, audit.remainder_bound
        )));
    }
    Ok(Sparsified { refiner, partition: Some(partition), audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refinery::{verify_refiner, VerifyConfig};

    #[test]
    fn empty_x() {
        let x = MultiHypergraph::new(10, 2);
        let y: BTreeSet<Vertex> = (0..10).collect();
        let out = edge_sparsify(&x, &y, 3, &SparsifyConfig::default(), &mut IidPool::new()).unwrap();
        assert!(out.refiner.r_graph().is_empty() && out.refiner.family().is_empty());
    }

    #[test]
    fn small_graph_refines() {
        let x = MultiHypergraph::from_supports(12, 2, [[0, 1], [1, 2], [0, 2], [3, 4], [4, 5], [3, 5]]).unwrap();
        let y: BTreeSet<Vertex> = (0..12).collect();
        let cfg = SparsifyConfig { parts: Some(3), ..SparsifyConfig::default() };
        let out = edge_sparsify(&x, &y, 3, &cfg, &mut IidPool::after([&x])).unwrap();
        assert!(out.audit.flat);
        let rep = verify_refiner(&out.refiner, &VerifyConfig::default());
        assert!(rep.ok, "{:?}", rep.witness);
    }

    #[test]
    fn random_k40_subgraph() {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::stage_rng(7, "sparsify-test");
        let mut pairs: Vec<Vec<Vertex>> = (0..40).flat_map(|a| (a + 1..40).map(move |b| vec![a, b])).collect();
        pairs.shuffle(&mut rng);
        let x = MultiHypergraph::from_supports(40, 2, pairs.into_iter().take(200)).unwrap();
        let y: BTreeSet<Vertex> = (0..40).collect();
        let out = edge_sparsify(&x, &y, 3, &SparsifyConfig::default(), &mut IidPool::after([&x])).unwrap();
        assert!(out.audit.flat && out.audit.family_degree <= out.audit.family_bound);
        assert!(out.audit.remainder_multiplicity <= 6);
        let cfg = VerifyConfig { samples: 40, ..VerifyConfig::default() };
        let rep = verify_refiner(&out.refiner, &cfg);
        assert!(rep.ok, "{:?}", rep.witness);
    }
}
