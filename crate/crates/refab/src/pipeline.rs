//! Reserve, pack, absorb: a random reserve X, an omni-absorber for it, a greedy clique
//! packing of the rest finished through cliques that borrow edges of X, and the absorber
//! decomposing whatever of X is left over.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divisibility::{divisible, is_divisible, DivisibilityError, Violation};
use crate::exactdecomp::{
    clique_sets, design_hypergraph, find_decomposition, find_packing_covering, verify_decomposition, Decomposition,
    ExactError, Infeasibility, SearchOutcome, DEFAULT_BUDGET,
};
use crate::hypercore::{HyperError, Iid, MultiHypergraph, Vertex};
use crate::refinery::omni::{build_omni_absorber, OmniConfig};
use crate::refinery::RefineError;
use crate::rng::retry_rng;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("not divisible: degree {} of {:?} is not a multiple of {}", .0.degree, .0.set, .0.modulus)]
    NotDivisible(Violation),
    #[error("budget exhausted: {}", .trace.join("; "))]
    Budget { trace: Vec<String> },
    #[error("no decomposition exists ({nodes} nodes searched)")]
    NoDecomposition { nodes: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("reservation failed after {attempts} attempts: Δ(X) = {max_degree} (bound {degree_bound:.1}), min extensions {min_extensions:?} (threshold {threshold})")]
    Reservation {
        attempts: usize,
        max_degree: usize,
        degree_bound: f64,
        min_extensions: Option<usize>,
        threshold: usize,
    },
    #[error("matching failed after {attempts} attempts; {} A-vertices left", .residual.len())]
    Matching { attempts: usize, residual: Vec<Iid> },
    #[error("audit failed: {0}")]
    Audit(String),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Parameters(#[from] DivisibilityError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
}

impl PipelineError {
    /// 2 for a divisibility failure, 3 for an exhausted budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::NotDivisible(_) => 2,
            PipelineError::Budget { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ExactOnly,
    ReserveAbsorb,
    Hybrid,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact-only" | "exact" => Ok(Strategy::ExactOnly),
            "reserve-absorb" => Ok(Strategy::ReserveAbsorb),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::ExactOnly => "exact-only",
            Strategy::ReserveAbsorb => "reserve-absorb",
            Strategy::Hybrid => "hybrid",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub q: usize,
    pub r: usize,
    /// Reservation probability, overridden by v(G)^{−σ} when `sigma` is set.
    pub p: f64,
    pub sigma: Option<f64>,
    /// Min-degree slack of the host; δ(J)/v(J) after reservation is compared against 1 − ε.
    pub epsilon: f64,
    /// Nibble parameters, recorded with each run; the greedy matcher does not consult them.
    pub beta: f64,
    pub alpha: f64,
    pub d: usize,
    pub seed: u64,
    pub reserve_retries: usize,
    pub match_retries: usize,
    pub hybrid_attempts: usize,
    pub exact_budget: u64,
    pub reserve_bounds: ReserveBounds,
    /// When the greedy matcher fails, search an exact packing of G ∖ A covering every edge
    /// outside X ∪ A, with the edges of X optional.
    pub exact_matching: bool,
    pub strategy: Strategy,
    pub omni: OmniConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            q: 3,
            r: 2,
            p: 0.1,
            sigma: None,
            epsilon: 0.1,
            beta: 0.1,
            alpha: 0.01,
            d: 0,
            seed: 1,
            reserve_retries: 50,
            match_retries: 200,
            hybrid_attempts: 5,
            exact_budget: DEFAULT_BUDGET,
            reserve_bounds: ReserveBounds::default(),
            exact_matching: true,
            strategy: Strategy::Hybrid,
            omni: OmniConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(PipelineError::Config(format!("p = {} outside (0, 1]", self.p)));
        }
        if self.reserve_retries == 0 || self.match_retries == 0 || self.hybrid_attempts == 0 || self.exact_budget == 0 {
            return Err(PipelineError::Config("retry budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn reservation_p(&self, vertices: u32) -> f64 {
        match self.sigma {
            Some(s) => (vertices as f64).powf(-s).min(1.0),
            None => self.p,
        }
    }
}

/// Desk-scale acceptance bounds for a reserve sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ReserveBounds {
    /// Each edge outside X must lie in at least this many cliques of X ∪ {e}.
    pub extension_threshold: usize,
    /// Δ(X) is compared against max(2p·v(G), floor).
    pub degree_floor: f64,
}

impl Default for ReserveBounds {
    fn default() -> Self {
        Self { extension_threshold: 1, degree_floor: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReservationReport {
    #[serde(skip)]
    pub x: MultiHypergraph,
    pub x_edges: usize,
    pub max_degree: usize,
    pub degree_bound: f64,
    /// Minimum over e ∈ G ∖ X of the cliques of X ∪ {e} through e; None when X = G.
    pub min_extension_count: Option<usize>,
    pub threshold: usize,
    pub degree_ok: bool,
    pub extension_ok: bool,
    pub attempts: usize,
    /// Per edge of G, the cliques of X ∪ {e} containing e.
    #[serde(skip)]
    pub extension_counts: BTreeMap<Iid, usize>,
}

impl ReservationReport {
    pub fn ok(&self) -> bool {
        self.degree_ok && self.extension_ok
    }
}

/// q-sets W ∪ e with every r-subset other than e in X.
pub fn extension_count(x_supports: &HashSet<Vec<Vertex>>, n: u32, e: &[Vertex], q: usize) -> usize {
    let r = e.len();
    let has = |s: Vec<Vertex>| x_supports.contains(&s.into_iter().sorted().collect::<Vec<_>>());
    let candidates: Vec<Vertex> = (0..n)
        .filter(|v| !e.contains(v))
        .filter(|&w| {
            e.iter().copied().combinations(r - 1).all(|mut t| {
                t.push(w);
                has(t)
            })
        })
        .collect();
    candidates
        .into_iter()
        .combinations(q - r)
        .filter(|w| {
            e.iter().chain(w).copied().combinations(r).all(|s| {
                let s: Vec<Vertex> = s.into_iter().sorted().collect();
                s == e || x_supports.contains(&s)
            })
        })
        .count()
}

fn measure(
    g: &MultiHypergraph,
    x: MultiHypergraph,
    q: usize,
    p: f64,
    bounds: ReserveBounds,
    attempts: usize,
) -> ReservationReport {
    let threshold = bounds.extension_threshold;
    let xs: HashSet<Vec<Vertex>> = x.supports().map(|(s, _)| s.to_vec()).collect();
    let extension_counts: BTreeMap<Iid, usize> =
        g.instances().map(|(i, e)| (i, extension_count(&xs, g.n(), e, q))).collect();
    let min_extension_count = extension_counts.iter().filter(|(i, _)| !x.contains(**i)).map(|(_, &c)| c).min();
    let degree_bound = (2.0 * p * g.n() as f64).max(bounds.degree_floor);
    let max_degree = x.delta();
    ReservationReport {
        x_edges: x.e(),
        max_degree,
        degree_bound,
        min_extension_count,
        threshold,
        degree_ok: max_degree as f64 <= degree_bound,
        extension_ok: min_extension_count.is_none_or(|m| m >= threshold),
        attempts,
        extension_counts,
        x,
    }
}

/// Keeps each edge of G with probability p, resampling until Δ(X) ≤ max(2p·v(G), floor)
/// and every edge outside X extends to at least the threshold number of cliques in X. The last sample is returned
/// with its failing bounds flagged when the retries run out.
pub fn reserve_sample(
    g: &MultiHypergraph,
    q: usize,
    p: f64,
    seed: u64,
    retries: usize,
    bounds: ReserveBounds,
) -> Result<ReservationReport, PipelineError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PipelineError::Config(format!("p = {p} outside [0, 1]")));
    }
    if q <= g.r() {
        return Err(PipelineError::Config(format!("q = {q} must exceed r = {}", g.r())));
    }
    let mut last = None;
    for attempt in 0..retries.max(1) {
        let mut rng = retry_rng(seed, "reserve", attempt as u64);
        let x = g.filter(|_, _| rng.gen_bool(p));
        let rep = measure(g, x, q, p, bounds, attempt + 1);
        if rep.ok() {
            return Ok(rep);
        }
        last = Some(rep);
    }
    Ok(last.expect("at least one attempt"))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BoostStats {
    pub edges: usize,
    pub cliques: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    /// max |d(e)/mean − 1| over edges.
    pub deviation: f64,
    /// v(J)^{−(q−r)/3}.
    pub window: f64,
    pub within_window: bool,
}

/// Degree statistics of the design hypergraph of J against the regularity window.
pub fn boost_stats(j: &MultiHypergraph, q: usize) -> Result<BoostStats, PipelineError> {
    if j.is_empty() {
        return Ok(BoostStats { within_window: true, ..BoostStats::default() });
    }
    let design = design_hypergraph(j, q)?;
    let degrees: Vec<usize> = design.incidence.values().map(Vec::len).collect();
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
    let deviation =
        if mean > 0.0 { degrees.iter().map(|&d| (d as f64 / mean - 1.0).abs()).fold(0.0, f64::max) } else { 0.0 };
    let window = (j.vertices().len() as f64).powf(-((q - j.r()) as f64) / 3.0);
    Ok(BoostStats {
        edges: degrees.len(),
        cliques: design.cliques.len(),
        min_degree: degrees.iter().copied().min().unwrap_or(0),
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        mean_degree: mean,
        deviation,
        window,
        within_window: deviation <= window,
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ReserveMatching {
    /// Indices into the G1 edge list.
    pub main: Vec<usize>,
    /// Indices into the G2 edge list.
    pub reserve: Vec<usize>,
    pub attempts: usize,
}

#[derive(Clone, Debug, Default)]
struct AttemptOutcome {
    main: Vec<usize>,
    reserve: Vec<usize>,
    uncovered_after_greedy: usize,
    residual: Vec<Iid>,
}

fn greedy_attempt(
    a: &BTreeSet<Iid>,
    g1: &[Vec<Iid>],
    g2: &[Vec<Iid>],
    by_a: &BTreeMap<Iid, Vec<usize>>,
    rng: &mut crate::rng::StageRng,
) -> AttemptOutcome {
    let mut used: HashSet<Iid> = HashSet::new();
    let mut order: Vec<usize> = (0..g1.len()).collect();
    order.shuffle(rng);
    let mut out = AttemptOutcome::default();
    for i in order {
        if g1[i].iter().all(|v| !used.contains(v)) {
            used.extend(g1[i].iter().copied());
            out.main.push(i);
        }
    }
    let mut open: Vec<Iid> = a.iter().copied().filter(|v| !used.contains(v)).collect();
    out.uncovered_after_greedy = open.len();
    open.shuffle(rng);
    for v in open {
        let mut options = by_a.get(&v).cloned().unwrap_or_default();
        options.shuffle(rng);
        match options.into_iter().find(|&k| g2[k].iter().all(|u| !used.contains(u))) {
            Some(k) => {
                used.extend(g2[k].iter().copied());
                out.reserve.push(k);
            }
            None => out.residual.push(v),
        }
    }
    out
}

fn check_matching_input(
    a: &BTreeSet<Iid>,
    g1: &[Vec<Iid>],
    g2: &[Vec<Iid>],
) -> Result<BTreeMap<Iid, Vec<usize>>, PipelineError> {
    if let Some(e) = g1.iter().find(|e| e.iter().any(|v| !a.contains(v))) {
        return Err(PipelineError::Precondition(format!("G1 edge {e:?} leaves A")));
    }
    let mut by_a: BTreeMap<Iid, Vec<usize>> = BTreeMap::new();
    for (k, e) in g2.iter().enumerate() {
        let inside: Vec<Iid> = e.iter().copied().filter(|v| a.contains(v)).collect();
        if inside.len() != 1 {
            return Err(PipelineError::Precondition(format!("G2 edge {e:?} meets A in {} vertices", inside.len())));
        }
        by_a.entry(inside[0]).or_default().push(k);
    }
    if let Some(v) = a.iter().find(|v| !by_a.contains_key(v)) {
        return Err(PipelineError::Precondition(format!("A-vertex {v} has no G2 edge")));
    }
    Ok(by_a)
}

/// An A-perfect matching of G1 ∪ G2: a random greedy matching of G1, then each uncovered
/// A-vertex takes a G2 edge whose other vertices are untouched; restarts on failure.
pub fn greedy_match_with_reserves(
    a: &BTreeSet<Iid>,
    g1: &[Vec<Iid>],
    g2: &[Vec<Iid>],
    seed: u64,
    retries: usize,
) -> Result<ReserveMatching, PipelineError> {
    let by_a = check_matching_input(a, g1, g2)?;
    let mut best: Option<Vec<Iid>> = None;
    for attempt in 0..retries.max(1) {
        let mut rng = retry_rng(seed, "matching", attempt as u64);
        let out = greedy_attempt(a, g1, g2, &by_a, &mut rng);
        if out.residual.is_empty() {
            return Ok(ReserveMatching { main: out.main, reserve: out.reserve, attempts: attempt + 1 });
        }
        if best.as_ref().is_none_or(|b| out.residual.len() < b.len()) {
            best = Some(out.residual);
        }
    }
    Err(PipelineError::Matching { attempts: retries.max(1), residual: best.unwrap_or_default() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Exact,
    ReserveAbsorb,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AbsorbStats {
    pub seed: u64,
    pub reservation: Option<ReservationReport>,
    pub absorber_edges: usize,
    /// δ(J)/v(J) for J = G ∖ (X ∪ A), against 1 − ε; advisory only.
    pub j_min_degree_ratio: f64,
    pub j_degree_ok: bool,
    pub main_cliques: usize,
    pub reserve_cliques: usize,
    pub leftover_edges: usize,
    pub absorbed_cliques: usize,
    pub matching_attempts: usize,
    /// Why the greedy matcher gave up, when the exact packing took over.
    pub greedy_failure: Option<String>,
    pub exact_matching: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignRun {
    pub decomposition: Decomposition,
    pub route: Route,
    pub strategy: Strategy,
    pub trace: Vec<String>,
    pub absorb: Option<AbsorbStats>,
}

impl DesignRun {
    pub fn blocks(&self) -> &[Vec<Vertex>] {
        &self.decomposition.cliques
    }
}

/// Decomposition of the simple graph `g` from clique vertex sets.
pub fn decomposition_from_cliques(
    g: &MultiHypergraph,
    cliques: &[Vec<Vertex>],
) -> Result<Decomposition, PipelineError> {
    let mut d = Decomposition::empty();
    for (c, t) in cliques.iter().enumerate() {
        let t: Vec<Vertex> = t.iter().copied().sorted().collect();
        for s in t.iter().copied().combinations(g.r()) {
            let &[iid] = g.iids_on(&s) else {
                return Err(PipelineError::Audit(format!("clique {t:?} uses {s:?}, which is not a single host edge")));
            };
            if d.assignment.insert(iid, c).is_some() {
                return Err(PipelineError::Audit(format!("edge {s:?} covered twice")));
            }
        }
        d.cliques.push(t);
    }
    Ok(d)
}

fn exact(g: &MultiHypergraph, q: usize, budget: u64, trace: &mut Vec<String>) -> Result<Decomposition, PipelineError> {
    match find_decomposition(g, q, budget)? {
        SearchOutcome::Found(d) => Ok(d),
        SearchOutcome::Infeasible(Infeasibility::Divisibility(v)) => Err(PipelineError::NotDivisible(v)),
        SearchOutcome::Infeasible(Infeasibility::Exhausted { nodes }) => Err(PipelineError::NoDecomposition { nodes }),
        SearchOutcome::Indeterminate { nodes } => {
            trace.push(format!("exact: budget of {budget} nodes exhausted after {nodes}"));
            Err(PipelineError::Budget { trace: trace.clone() })
        }
    }
}

fn supports_of(g: &MultiHypergraph) -> BTreeSet<Vec<Vertex>> {
    g.supports().map(|(s, _)| s.to_vec()).collect()
}

/// One reserve-then-absorb run with the given seed.
pub fn reserve_absorb(
    g: &MultiHypergraph,
    q: usize,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(Decomposition, AbsorbStats), PipelineError> {
    let r = g.r();
    if r != 2 || !g.is_simple() {
        return Err(PipelineError::Precondition("reserve-absorb needs a simple graph with r = 2".into()));
    }
    let n = g.n();
    let p = cfg.reservation_p(n);
    let rep = reserve_sample(g, q, p, seed, cfg.reserve_retries, cfg.reserve_bounds)?;
    if !rep.ok() {
        return Err(PipelineError::Reservation {
            attempts: rep.attempts,
            max_degree: rep.max_degree,
            degree_bound: rep.degree_bound,
            min_extensions: rep.min_extension_count,
            threshold: rep.threshold,
        });
    }
    let x = rep.x.clone();
    let omni_cfg = OmniConfig { seed, ..cfg.omni.clone() };
    let omni = build_omni_absorber(g, &x, q, &omni_cfg)?.omni;
    let mut stats = AbsorbStats { seed, absorber_edges: omni.a().e(), ..AbsorbStats::default() };

    let xs = supports_of(&x);
    let a_sup = supports_of(omni.a());
    let j = g.filter(|_, e| !xs.contains(e) && !a_sup.contains(e));
    let js = supports_of(&j);
    let j_min = (0..n).map(|v| j.degree(&[v])).min().unwrap_or(0);
    stats.j_min_degree_ratio = j_min as f64 / n.max(1) as f64;
    stats.j_degree_ok = stats.j_min_degree_ratio >= 1.0 - cfg.epsilon;

    let ids_of = |t: &[Vertex]| -> Vec<Iid> { t.iter().copied().combinations(r).map(|s| g.iids_on(&s)[0]).collect() };
    let main: Vec<Vec<Vertex>> = clique_sets(&js, r, q);
    let both: BTreeSet<Vec<Vertex>> = js.union(&xs).cloned().collect();
    let reserve: Vec<Vec<Vertex>> = clique_sets(&both, r, q)
        .into_iter()
        .filter(|t| t.iter().copied().combinations(r).filter(|s| js.contains(s)).count() == 1)
        .collect();
    let g1: Vec<Vec<Iid>> = main.iter().map(|t| ids_of(t)).collect();
    let g2: Vec<Vec<Iid>> = reserve.iter().map(|t| ids_of(t)).collect();
    let a_side = j.iid_set();
    let mut packed: Vec<Vec<Vertex>> = Vec::new();
    let used_x: BTreeSet<Iid> = match greedy_match_with_reserves(&a_side, &g1, &g2, seed, cfg.match_retries) {
        Ok(matching) => {
            stats.matching_attempts = matching.attempts;
            stats.main_cliques = matching.main.len();
            stats.reserve_cliques = matching.reserve.len();
            packed.extend(matching.main.iter().map(|&k| main[k].clone()));
            packed.extend(matching.reserve.iter().map(|&k| reserve[k].clone()));
            matching.reserve.iter().flat_map(|&k| g2[k].iter().copied()).filter(|i| x.contains(*i)).collect()
        }
        Err(e) if cfg.exact_matching => {
            stats.greedy_failure = Some(e.to_string());
            let host = g.filter(|_, e| !a_sup.contains(e));
            let found = match find_packing_covering(&host, q, &a_side, cfg.exact_budget)? {
                SearchOutcome::Found(d) => d,
                SearchOutcome::Indeterminate { nodes } => {
                    return Err(PipelineError::Budget { trace: vec![format!("exact matching: {nodes} nodes")] })
                }
                SearchOutcome::Infeasible(_) => {
                    return Err(PipelineError::Matching { attempts: 1, residual: a_side.iter().copied().collect() })
                }
            };
            stats.exact_matching = true;
            stats.main_cliques = found.cliques.len();
            packed.extend(found.cliques.iter().cloned());
            found.assignment.keys().copied().filter(|i| x.contains(*i)).collect()
        }
        Err(e) => return Err(e),
    };
    let leftover: BTreeSet<Iid> = x.iids().filter(|i| !used_x.contains(i)).collect();
    stats.leftover_edges = leftover.len();
    if !divisible(&x.restrict(&leftover)?, q) {
        return Err(PipelineError::Audit("leftover of X is not divisible".into()));
    }
    let absorbed = omni.decomposition_cliques(&leftover)?;
    stats.absorbed_cliques = absorbed.len();
    packed.extend(absorbed);
    let d = decomposition_from_cliques(g, &packed)?;
    stats.reservation = Some(rep);
    Ok((d, stats))
}

/// A verified K_q^r-decomposition of `g` by the configured strategy. Hybrid tries
/// reserve-absorb with fresh seeds and falls back to exact search.
pub fn decompose(g: &MultiHypergraph, q: usize, cfg: &PipelineConfig) -> Result<DesignRun, PipelineError> {
    cfg.validate()?;
    if let Some(v) = is_divisible(g, q)?.first_violation {
        return Err(PipelineError::NotDivisible(v));
    }
    let mut trace = Vec::new();
    let (decomposition, route, absorb) = match cfg.strategy {
        Strategy::ExactOnly => (exact(g, q, cfg.exact_budget, &mut trace)?, Route::Exact, None),
        Strategy::ReserveAbsorb => {
            let (d, s) = reserve_absorb(g, q, cfg, cfg.seed)?;
            (d, Route::ReserveAbsorb, Some(s))
        }
        Strategy::Hybrid => {
            let mut found = None;
            for k in 0..cfg.hybrid_attempts {
                let seed = cfg.seed.wrapping_add(k as u64);
                match reserve_absorb(g, q, cfg, seed) {
                    Ok(hit) => {
                        found = Some(hit);
                        break;
                    }
                    Err(e) => trace.push(format!("reserve-absorb seed {seed}: {e}")),
                }
            }
            match found {
                Some((d, s)) => (d, Route::ReserveAbsorb, Some(s)),
                None => (exact(g, q, cfg.exact_budget, &mut trace)?, Route::Exact, None),
            }
        }
    };
    if !verify_decomposition(g, q, &decomposition, &g.iid_set()) {
        return Err(PipelineError::Audit("final decomposition does not verify".into()));
    }
    Ok(DesignRun { decomposition, route, strategy: cfg.strategy, trace, absorb })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub n: u32,
    pub q: usize,
    pub p: f64,
    pub reserve_edges: usize,
    pub reserve_ok: bool,
    pub main_cliques: usize,
    pub uncovered_after_greedy: usize,
    pub reserve_cliques: usize,
    pub reserve_used: usize,
    pub residual: usize,
    pub leftover: usize,
    pub leftover_divisible: bool,
    pub attempts: usize,
    pub success: bool,
}

fn run_trial(
    n: u32,
    q: usize,
    r: usize,
    p: f64,
    trial: usize,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<TrialRow, PipelineError> {
    let g = MultiHypergraph::complete(n, r);
    let rep = reserve_sample(&g, q, p, seed, cfg.reserve_retries, cfg.reserve_bounds)?;
    let xs = supports_of(&rep.x);
    let j = g.filter(|_, e| !xs.contains(e));
    let js = supports_of(&j);
    let ids_of = |t: &[Vertex]| -> Vec<Iid> { t.iter().copied().combinations(r).map(|s| g.iids_on(&s)[0]).collect() };
    let g1: Vec<Vec<Iid>> = clique_sets(&js, r, q).iter().map(|t| ids_of(t)).collect();
    let all = supports_of(&g);
    let g2: Vec<Vec<Iid>> = clique_sets(&all, r, q)
        .iter()
        .filter(|t| t.iter().copied().combinations(r).filter(|s| js.contains(s)).count() == 1)
        .map(|t| ids_of(t))
        .collect();
    let a = j.iid_set();
    let mut by_a: BTreeMap<Iid, Vec<usize>> = BTreeMap::new();
    for (k, e) in g2.iter().enumerate() {
        if let Some(&v) = e.iter().find(|v| a.contains(v)) {
            by_a.entry(v).or_default().push(k);
        }
    }
    let mut best = AttemptOutcome {
        residual: a.iter().copied().collect(),
        uncovered_after_greedy: a.len(),
        ..AttemptOutcome::default()
    };
    let mut attempts = 0;
    for attempt in 0..cfg.match_retries.max(1) {
        attempts = attempt + 1;
        let mut rng = retry_rng(seed, "matching", attempt as u64);
        let out = greedy_attempt(&a, &g1, &g2, &by_a, &mut rng);
        let done = out.residual.is_empty();
        if attempt == 0 || out.residual.len() < best.residual.len() {
            best = out;
        }
        if done {
            break;
        }
    }
    let used_x: BTreeSet<Iid> =
        best.reserve.iter().flat_map(|&k| g2[k].iter().copied()).filter(|i| rep.x.contains(*i)).collect();
    let leftover: BTreeSet<Iid> = rep.x.iids().filter(|i| !used_x.contains(i)).collect();
    let success = best.residual.is_empty();
    Ok(TrialRow {
        trial,
        seed,
        n,
        q,
        p,
        reserve_edges: rep.x_edges,
        reserve_ok: rep.ok(),
        main_cliques: best.main.len(),
        uncovered_after_greedy: best.uncovered_after_greedy,
        reserve_cliques: best.reserve.len(),
        reserve_used: used_x.len(),
        residual: best.residual.len(),
        leftover: leftover.len(),
        leftover_divisible: success && divisible(&rep.x.restrict(&leftover)?, q),
        attempts,
        success,
    })
}

/// The pack stage of reserve-absorb on K_n^r, repeated over `trials` seeds: reservation,
/// greedy packing of G ∖ X and completion through X, without building the absorber.
pub fn leftover_experiment(
    n: u32,
    q: usize,
    r: usize,
    p: f64,
    trials: usize,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Vec<TrialRow>, PipelineError> {
    (0..trials).into_par_iter().map(|t| run_trial(n, q, r, p, t, seed.wrapping_add(t as u64), cfg)).collect()
}

pub fn rows_to_csv(rows: &[TrialRow]) -> Result<String, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "trial",
            "seed",
            "n",
            "q",
            "p",
            "reserve_edges",
            "reserve_ok",
            "main_cliques",
            "uncovered_after_greedy",
            "reserve_cliques",
            "reserve_used",
            "residual",
            "leftover",
            "leftover_divisible",
            "attempts",
            "success",
        ])
        .map_err(|e| PipelineError::Audit(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| PipelineError::Audit(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Audit(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn success_rate(rows: &[TrialRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
}
