//! Multi-refiners: rounds of edge sparsification and refine-down shrink the remainder onto
//! ever smaller vertex sets, and a terminal refiner over all divisible subgraphs of what is
//! left closes the chain with an empty remainder.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::divisibility::modulus_m;
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};

use super::model::{RefinementFamily, Refiner};
use super::refinedown::{refine_down_r2, RefineDownConfig};
use super::sampling::exhaustive_divisible;
use super::sparsify::{edge_sparsify, SparsifyConfig};
use super::{concat_all, RefineError};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiConfig {
    pub sparsify: SparsifyConfig,
    pub refine_down: RefineDownConfig,
    /// The terminal family is emitted once the remainder has at most this many instances.
    pub terminal_edges: usize,
    /// Vertex count of the remainder support at which no further round is attempted.
    pub terminal_size: usize,
    pub max_rounds: usize,
    /// C in Δ(H) ≤ C·Δ(X) for the rounds before the terminal family.
    pub c: f64,
}

impl Default for MultiConfig {
    fn default() -> Self {
        Self {
            sparsify: SparsifyConfig::default(),
            refine_down: RefineDownConfig::default(),
            terminal_edges: 18,
            terminal_size: 6,
            max_rounds: 3,
            c: 4096.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RoundAudit {
    pub edges_in: usize,
    pub delta_in: usize,
    pub y: usize,
    pub edges_out: usize,
    pub delta_out: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MultiAudit {
    pub rounds: Vec<RoundAudit>,
    pub terminal_edges: usize,
    pub terminal_members: usize,
    pub terminal_degree: usize,
    pub terminal_cap: f64,
    pub round_degree: usize,
    pub round_bound: f64,
    pub flat: bool,
}

#[derive(Clone, Debug)]
pub struct MultiRefiner {
    pub refiner: Refiner,
    pub audit: MultiAudit,
}

/// The terminal refiner of a small X: R_e is M(q, r) parallel copies of each instance e,
/// one of them e*, and the members are R_e, e ∪ (R_e − e*) and ⋃_{e ∈ L} e* for every
/// divisible L ⊆ X.
pub fn terminal_refiner(x: &MultiHypergraph, q: usize, pool: &mut IidPool) -> Result<Refiner, RefineError> {
    let m = modulus_m(q, x.r())? as usize;
    let mut rg = MultiHypergraph::new(x.n(), x.r());
    let mut family = RefinementFamily::new();
    let mut star_of: HashMap<Iid, Iid> = HashMap::new();
    let mut own: HashMap<Iid, (usize, usize)> = HashMap::new();
    for (iid, e) in x.instances() {
        let copies: Vec<Iid> = (0..m).map(|_| rg.push(pool, e.to_vec())).collect::<Result<_, _>>()?;
        let whole = family.push(copies.clone());
        let mut with_e = vec![iid];
        with_e.extend_from_slice(&copies[1..]);
        let swapped = family.push(with_e);
        star_of.insert(iid, copies[0]);
        own.insert(iid, (whole, swapped));
    }
    let mut by_subset: HashMap<Vec<Iid>, usize> = HashMap::new();
    for l in exhaustive_divisible(x, q) {
        if l.is_empty() {
            continue;
        }
        let member: Vec<Iid> = l.iter().map(|i| star_of[i]).collect();
        by_subset.insert(l.into_iter().collect(), family.push(member));
    }
    let refine = Arc::new(move |l: &BTreeSet<Iid>| {
        let mut out: Vec<usize> =
            own.iter().map(|(i, &(whole, swapped))| if l.contains(i) { swapped } else { whole }).collect();
        if !l.is_empty() {
            let key: Vec<Iid> = l.iter().copied().collect();
            out.push(*by_subset.get(&key).ok_or(RefineError::NotDivisible)?);
        }
        Ok(out)
    });
    Refiner::new(q, x.clone(), rg, family, BTreeSet::new(), refine)
}

/// A multi-refiner of X with empty remainder.
pub fn build_multi_refiner(
    x: &MultiHypergraph,
    y: &BTreeSet<Vertex>,
    q: usize,
    cfg: &MultiConfig,
    pool: &mut IidPool,
) -> Result<MultiRefiner, RefineError> {
    let r = x.r();
    let m = modulus_m(q, r)? as usize;
    if x.max_multiplicity() > m {
        return Err(RefineError::Unsupported(format!("multiplicity {} above M = {m}", x.max_multiplicity())));
    }
    if r != 2 && x.e() > cfg.terminal_edges {
        return Err(RefineError::Unsupported(format!("rounds are built for r = 2, got r = {r}")));
    }
    let mut chain: Vec<Refiner> = Vec::new();
    let mut audit = MultiAudit::default();
    let mut current = x.clone();
    let mut target: BTreeSet<Vertex> = y.clone();
    while current.e() > cfg.terminal_edges {
        let support = current.vertices().len();
        if audit.rounds.len() >= cfg.max_rounds || support <= cfg.terminal_size {
            return Err(RefineError::Unsupported(format!(
                "remainder of {} instances on {support} vertices after {} rounds exceeds the terminal cap of {} instances",
                current.e(),
                audit.rounds.len(),
                cfg.terminal_edges
            )));
        }
        let next: BTreeSet<Vertex> = target.iter().copied().take(target.len().div_ceil(3)).collect();
        let sparse = edge_sparsify(&current, &target, q, &cfg.sparsify, pool).map_err(|e| e.at("sparsify"))?;
        let rem = sparse.refiner.remainder_graph();
        let down = refine_down_r2(&rem, &next, q, &cfg.refine_down, pool).map_err(|e| e.at("refine-down"))?;
        let out = down.refiner.remainder_graph();
        audit.rounds.push(RoundAudit {
            edges_in: current.e(),
            delta_in: current.delta(),
            y: next.len(),
            edges_out: out.e(),
            delta_out: out.delta(),
        });
        if out.e() >= current.e() {
            return Err(RefineError::Unsupported(format!(
                "round {} grew the remainder from {} to {} instances (Δ {} to {})",
                audit.rounds.len(),
                current.e(),
                out.e(),
                current.delta(),
                out.delta()
            )));
        }
        chain.push(sparse.refiner);
        chain.push(down.refiner);
        current = out;
        target = next;
    }
    let mut rounds_family = 0;
    if !chain.is_empty() {
        let rounds = concat_all(&chain)?;
        audit.round_degree = rounds.family_max_degree();
        rounds_family = rounds.family().len();
    }
    let terminal = terminal_refiner(&current, q, pool).map_err(|e| e.at("terminal"))?;
    audit.terminal_edges = current.e();
    audit.terminal_members = terminal.family().len();
    audit.terminal_degree = terminal.family_max_degree();
    let size = current.vertices().len().max(cfg.terminal_size) as f64;
    audit.terminal_cap = (m as f64 * size.powi(r as i32)).exp2() + 1.0;
    chain.push(terminal);
    let refiner = concat_all(&chain)?;
    audit.round_bound = cfg.c * x.delta() as f64;
    audit.flat = refiner.r_graph().is_flat(y, r - 1);
    if audit.terminal_degree as f64 > audit.terminal_cap {
        return Err(RefineError::Audit(format!(
            "terminal family degree {} above {}",
            audit.terminal_degree, audit.terminal_cap
        )));
    }
    if rounds_family > 0 && audit.round_degree as f64 > audit.round_bound {
        return Err(RefineError::Audit(format!(
            "Δ(H) = {} above C·Δ(X) = {:.0}",
            audit.round_degree, audit.round_bound
        )));
    }
    if !audit.flat {
        return Err(RefineError::Audit("R is not (r−1)-flat to Y".into()));
    }
    Ok(MultiRefiner { refiner, audit })
}
