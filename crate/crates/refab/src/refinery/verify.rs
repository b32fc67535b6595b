use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hypercore::{Iid, MultiHypergraph};
use crate::rng::stage_rng;

use super::model::{is_clique_member, is_divisible_instances, OmniAbsorber, Refiner};
use super::sampling::{exhaustive_divisible, sample_divisible};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub exhaustive_cap: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { exhaustive_cap: 16, samples: 200, seed: 7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerifyMode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub l: Vec<Iid>,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub mode: VerifyMode,
    pub checked: usize,
    pub witness: Option<Witness>,
}

pub(crate) fn static_checks(rf: &Refiner, omni: bool) -> Result<(), String> {
    let q = rf.q();
    let uni = rf.universe();
    let x = rf.x();
    if !is_divisible_instances(uni, &rf.r_graph().iid_set(), q) {
        return Err("R is not divisible".into());
    }
    if omni && !rf.remainder().is_empty() {
        return Err("omni-absorber carries a remainder".into());
    }
    let recount = rf.family().recount_membership();
    for (&iid, &n) in &recount {
        if rf.family().memberships(iid).len() != n {
            return Err(format!("membership index disagrees with recount at {iid}"));
        }
    }
    for (idx, m) in rf.family().members().iter().enumerate() {
        let in_x: Vec<Iid> = m.iter().copied().filter(|&i| x.contains(i)).collect();
        if in_x.len() > 1 {
            return Err(format!("member {idx} holds {} instances of X", in_x.len()));
        }
        if in_x.iter().any(|i| rf.remainder().contains(i)) {
            return Err(format!("member {idx} meets X and the remainder in one instance"));
        }
        let set: BTreeSet<Iid> = m.iter().copied().collect();
        if !is_divisible_instances(uni, &set, q) {
            return Err(format!("member {idx} is not divisible"));
        }
        if omni && !is_clique_member(uni, m, q) {
            return Err(format!("member {idx} is not a clique"));
        }
    }
    Ok(())
}

/// The containment chain (L ∪ R) ∖ X′ ⊆ ⋃Q(L) ⊆ L ∪ R with disjoint members; returns the
/// leftover.
pub fn check_chain(rf: &Refiner, l: &BTreeSet<Iid>, exact: bool) -> Result<BTreeSet<Iid>, String> {
    let chosen = rf.refine(l).map_err(|e| e.to_string())?;
    let mut covered = BTreeSet::new();
    for &c in &chosen {
        if c >= rf.family().len() {
            return Err(format!("member index {c} out of range"));
        }
        for &iid in rf.family().member(c) {
            if !covered.insert(iid) {
                return Err(format!("instance {iid} covered twice"));
            }
        }
    }
    let rg = rf.r_graph();
    if let Some(bad) = covered.iter().find(|i| !l.contains(i) && !rg.contains(**i)) {
        return Err(format!("covered instance {bad} lies outside L ∪ R"));
    }
    let leftover = rf.leftover(l, &chosen);
    if let Some(bad) = leftover.iter().find(|i| !rf.remainder().contains(i)) {
        return Err(format!("instance {bad} of L ∪ R is neither covered nor in the remainder"));
    }
    if exact && !leftover.is_empty() {
        return Err(format!("{} instances of L ∪ A left uncovered", leftover.len()));
    }
    Ok(leftover)
}

/// Checks the refinement conditions for a single L, leftover divisibility included.
pub fn check_one(rf: &Refiner, l: &BTreeSet<Iid>, exact: bool) -> Result<(), String> {
    let leftover = check_chain(rf, l, exact)?;
    if !is_divisible_instances(rf.universe(), &leftover, rf.q()) {
        return Err("leftover is not divisible".into());
    }
    Ok(())
}

/// The divisible L ⊆ X a check runs over: all of them up to the cap, else a seeded sample.
pub fn test_family(x: &MultiHypergraph, q: usize, cfg: &VerifyConfig) -> (VerifyMode, Vec<BTreeSet<Iid>>) {
    if x.e() <= cfg.exhaustive_cap {
        (VerifyMode::Exhaustive, exhaustive_divisible(x, q))
    } else {
        let mut rng = stage_rng(cfg.seed, "verify");
        (VerifyMode::Sampled, sample_divisible(x, q, cfg.samples, &mut rng))
    }
}

fn run(rf: &Refiner, cfg: &VerifyConfig, omni: bool) -> VerifyReport {
    let (mode, family) = test_family(rf.x(), rf.q(), cfg);
    if let Err(reason) = static_checks(rf, omni) {
        return VerifyReport { ok: false, mode, checked: 0, witness: Some(Witness { l: Vec::new(), reason }) };
    }
    if let Some(n) = family.par_iter().position_first(|l| check_one(rf, l, omni).is_err()) {
        let l = &family[n];
        let reason = check_one(rf, l, omni).expect_err("failed in the parallel pass");
        return VerifyReport {
            ok: false,
            mode,
            checked: n + 1,
            witness: Some(Witness { l: l.iter().copied().collect(), reason }),
        };
    }
    VerifyReport { ok: true, mode, checked: family.len(), witness: None }
}

/// Brute-force check of the refiner definition over divisible L ⊆ X: exhaustive when
/// e(X) is at most the cap, otherwise over sampled L including ∅ and a large L.
pub fn verify_refiner(rf: &Refiner, cfg: &VerifyConfig) -> VerifyReport {
    run(rf, cfg, false)
}

/// As [`verify_refiner`], additionally demanding ⋃Q_A(L) = L ∪ A and clique members.
pub fn verify_omni_absorber(oa: &OmniAbsorber, cfg: &VerifyConfig) -> VerifyReport {
    run(oa.as_refiner(), cfg, true)
}
