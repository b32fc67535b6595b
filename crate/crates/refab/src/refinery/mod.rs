//! Refiners and omni-absorbers: the data model, brute-force verification, and the
//! constructions that compose them.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::divisibility::DivisibilityError;
use crate::exactdecomp::ExactError;
use crate::gadgets::GadgetError;
use crate::hypercore::{are_edge_disjoint, HyperError, Iid, MultiHypergraph};
use crate::rmh::RmhError;

pub mod export;
pub mod fakesub;
pub mod local;
pub mod model;
pub mod mrl;
pub mod multi;
pub mod omni;
pub mod partition;
pub mod refinedown;
pub mod sampling;
pub mod sparsify;
pub mod verify;

pub use model::{is_clique_member, OmniAbsorber, RefineFn, RefinementFamily, Refiner};
pub use mrl::multiplicity_reduction;
pub use verify::{verify_omni_absorber, verify_refiner, VerifyConfig, VerifyMode, VerifyReport, Witness};

#[derive(Debug, Error, Clone)]
pub enum RefineError {
    #[error("composition: {0}")]
    Composition(String),
    #[error("instance {0} is not in X")]
    NotInX(Iid),
    #[error("L is not divisible")]
    NotDivisible,
    #[error("partition failed after {attempts} attempts: worst part {worst_part} (cap {part_cap}), worst link {worst_link} (cap {link_cap})")]
    Partition { attempts: usize, worst_part: usize, part_cap: usize, worst_link: usize, link_cap: usize },
    #[error("no edge-free {size}-set among {candidates} vertices (alpha = {alpha:.3})")]
    Turan { size: usize, candidates: usize, alpha: f64 },
    #[error("special set for part multiset {blocking:?} not found")]
    SpecialSets { blocking: Vec<usize> },
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("absorber for member {member}: {source}")]
    Absorber { member: usize, source: GadgetError },
    #[error("audit failed: {0}")]
    Audit(String),
    #[error("retry budget exhausted: {0}")]
    Retries(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: &'static str, source: Box<RefineError> },
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Divisibility(#[from] DivisibilityError),
    #[error(transparent)]
    Rmh(#[from] RmhError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

impl RefineError {
    pub fn at(self, stage: &'static str) -> Self {
        RefineError::Stage { stage, source: Box::new(self) }
    }
}

/// R1 followed by R2 where R2 refines the remainder of R1:
/// Q(L) = Q1(L) ∪ Q2((L ∪ R1) ∖ ⋃Q1(L)).
pub fn concat(r1: &Refiner, r2: &Refiner) -> Result<Refiner, RefineError> {
    if r1.q() != r2.q() || r1.r() != r2.r() {
        return Err(RefineError::Composition("parameters differ".into()));
    }
    if r2.x().iid_set() != *r1.remainder() {
        return Err(RefineError::Composition("second X is not the first remainder".into()));
    }
    for (iid, e) in r2.x().instances() {
        if r1.universe().get(iid) != Some(e) {
            return Err(RefineError::Composition(format!("instance {iid} changed support")));
        }
    }
    if !are_edge_disjoint(r1.universe(), r2.r_graph()) {
        return Err(RefineError::Composition("R2 meets X ∪ R1".into()));
    }
    let rg = r1.r_graph().union(r2.r_graph())?;
    let mut family = r1.family().clone();
    let offset = family.append(r2.family());
    let first = r1.clone();
    let second = r2.clone();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| {
        let q1 = first.refine(l)?;
        let handed: BTreeSet<Iid> = first.leftover(l, &q1);
        let q2 = second.refine(&handed)?;
        Ok(q1.into_iter().chain(q2.into_iter().map(|i| i + offset)).collect())
    });
    Refiner::new(r1.q(), r1.x().clone(), rg, family, r2.remainder().clone(), refine)
}

/// Left-to-right concatenation of a chain.
pub fn concat_all(parts: &[Refiner]) -> Result<Refiner, RefineError> {
    let (head, rest) = parts.split_first().ok_or_else(|| RefineError::Composition("empty chain".into()))?;
    rest.iter().try_fold(head.clone(), |acc, next| concat(&acc, next))
}

/// Refiners of instance-disjoint graphs side by side, plus `rest` passed straight to the
/// remainder: Q(L) = ⋃ Q_i(L ∩ X_i).
pub fn disjoint_union(q: usize, parts: &[Refiner], rest: &MultiHypergraph) -> Result<Refiner, RefineError> {
    let r = rest.r();
    let mut x = rest.clone();
    let mut rg = MultiHypergraph::new(rest.n(), r);
    let mut family = RefinementFamily::new();
    let mut remainder: BTreeSet<Iid> = rest.iid_set();
    let mut offsets = Vec::with_capacity(parts.len());
    for p in parts {
        if p.q() != q || p.r() != r {
            return Err(RefineError::Composition("parameters differ".into()));
        }
        x.absorb(p.x()).map_err(|e| RefineError::Composition(format!("X parts overlap: {e}")))?;
        rg.absorb(p.r_graph()).map_err(|e| RefineError::Composition(format!("R parts overlap: {e}")))?;
        offsets.push(family.append(p.family()));
        remainder.extend(p.remainder().iter().copied());
    }
    rg.grow_to(x.n());
    x.grow_to(rg.n());
    let parts: Vec<(Refiner, usize)> = parts.iter().cloned().zip(offsets).collect();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| {
        let mut out = Vec::new();
        for (p, offset) in &parts {
            let mine: BTreeSet<Iid> = l.iter().copied().filter(|i| p.x().contains(*i)).collect();
            out.extend(p.refine(&mine)?.into_iter().map(|i| i + offset));
        }
        Ok(out)
    });
    Refiner::new(q, x, rg, family, remainder, refine)
}
