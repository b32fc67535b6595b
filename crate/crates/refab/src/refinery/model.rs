use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use itertools::Itertools;

use crate::divisibility::{binomial, check_supports};
use crate::hypercore::{are_edge_disjoint, Iid, MultiHypergraph, Vertex};

use super::RefineError;

/// Members of a refinement family, each a set of instance ids, with the reverse index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefinementFamily {
    members: Vec<Vec<Iid>>,
    per_edge: BTreeMap<Iid, Vec<usize>>,
}

impl RefinementFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut member: Vec<Iid>) -> usize {
        member.sort_unstable();
        member.dedup();
        let idx = self.members.len();
        for &iid in &member {
            self.per_edge.entry(iid).or_default().push(idx);
        }
        self.members.push(member);
        idx
    }

    /// Appends every member of `other`; returns the index offset.
    pub fn append(&mut self, other: &RefinementFamily) -> usize {
        let offset = self.members.len();
        for m in &other.members {
            self.push(m.clone());
        }
        offset
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &[Iid] {
        &self.members[i]
    }

    pub fn members(&self) -> &[Vec<Iid>] {
        &self.members
    }

    /// H(e): indices of members containing `iid`.
    pub fn memberships(&self, iid: Iid) -> &[usize] {
        self.per_edge.get(&iid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_membership(&self) -> usize {
        self.per_edge.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Recount of memberships from the member lists, ignoring the stored index.
    pub fn recount_membership(&self) -> BTreeMap<Iid, usize> {
        let mut out = BTreeMap::new();
        for m in &self.members {
            for &iid in m {
                *out.entry(iid).or_insert(0) += 1;
            }
        }
        out
    }
}

pub type RefineFn = Arc<dyn Fn(&BTreeSet<Iid>) -> Result<Vec<usize>, RefineError> + Send + Sync>;

/// A multi-refiner R of X with remainder X′: a family of divisible subgraphs of X ∪ R and a
/// procedure choosing, for each divisible L ⊆ X, disjoint members covering (L ∪ R) ∖ X′.
#[derive(Clone)]
pub struct Refiner {
    q: usize,
    x: Arc<MultiHypergraph>,
    rg: Arc<MultiHypergraph>,
    universe: Arc<MultiHypergraph>,
    family: Arc<RefinementFamily>,
    remainder: Arc<BTreeSet<Iid>>,
    refine_fn: RefineFn,
    memo: Arc<Mutex<HashMap<Vec<Iid>, Vec<usize>>>>,
}

impl fmt::Debug for Refiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Refiner")
            .field("q", &self.q)
            .field("x", &self.x.e())
            .field("r", &self.rg.e())
            .field("family", &self.family.len())
            .field("remainder", &self.remainder.len())
            .finish()
    }
}

impl Refiner {
    pub fn new(
        q: usize,
        x: MultiHypergraph,
        rg: MultiHypergraph,
        family: RefinementFamily,
        remainder: BTreeSet<Iid>,
        refine_fn: RefineFn,
    ) -> Result<Self, RefineError> {
        if x.r() != rg.r() {
            return Err(RefineError::Composition(format!("X is {}-uniform but R is {}-uniform", x.r(), rg.r())));
        }
        if !are_edge_disjoint(&x, &rg) {
            return Err(RefineError::Composition("X and R share an instance".into()));
        }
        let universe = x.union(&rg)?;
        for m in family.members() {
            if let Some(&bad) = m.iter().find(|i| !universe.contains(**i)) {
                return Err(RefineError::Composition(format!("member uses unknown instance {bad}")));
            }
        }
        if let Some(&bad) = remainder.iter().find(|i| !universe.contains(**i)) {
            return Err(RefineError::Composition(format!("remainder uses unknown instance {bad}")));
        }
        Ok(Self {
            q,
            x: Arc::new(x),
            rg: Arc::new(rg),
            universe: Arc::new(universe),
            family: Arc::new(family),
            remainder: Arc::new(remainder),
            refine_fn,
            memo: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// The refiner of an empty X: nothing added, nothing to refine.
    pub fn empty(q: usize, r: usize, n: u32) -> Self {
        Self::identity(q, MultiHypergraph::new(n, r))
    }

    /// R = ∅ and X′ = X, the concatenation identity.
    pub fn identity(q: usize, x: MultiHypergraph) -> Self {
        let r = x.r();
        let n = x.n();
        let remainder = x.iid_set();
        Self::new(q, x, MultiHypergraph::new(n, r), RefinementFamily::new(), remainder, Arc::new(|_| Ok(Vec::new())))
            .expect("identity refiner is consistent")
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.x.r()
    }

    pub fn x(&self) -> &MultiHypergraph {
        &self.x
    }

    pub fn r_graph(&self) -> &MultiHypergraph {
        &self.rg
    }

    pub fn universe(&self) -> &MultiHypergraph {
        &self.universe
    }

    pub fn family(&self) -> &RefinementFamily {
        &self.family
    }

    pub fn remainder(&self) -> &BTreeSet<Iid> {
        &self.remainder
    }

    pub fn remainder_graph(&self) -> MultiHypergraph {
        self.universe.restrict(&self.remainder).expect("remainder inside universe")
    }

    /// Q_R(L) as member indices; memoized per L.
    pub fn refine(&self, l: &BTreeSet<Iid>) -> Result<Vec<usize>, RefineError> {
        if let Some(&bad) = l.iter().find(|i| !self.x.contains(**i)) {
            return Err(RefineError::NotInX(bad));
        }
        let key: Vec<Iid> = l.iter().copied().collect();
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let mut out = (self.refine_fn)(l)?;
        out.sort_unstable();
        self.memo.lock().expect("memo lock").insert(key, out.clone());
        Ok(out)
    }

    /// Instances of ⋃Q_R(L).
    pub fn covered(&self, chosen: &[usize]) -> BTreeSet<Iid> {
        chosen.iter().flat_map(|&i| self.family.member(i).iter().copied()).collect()
    }

    /// The L-leftover (L ∪ R) ∖ ⋃Q_R(L).
    pub fn leftover(&self, l: &BTreeSet<Iid>, chosen: &[usize]) -> BTreeSet<Iid> {
        let covered = self.covered(chosen);
        l.iter().copied().chain(self.rg.iids()).filter(|i| !covered.contains(i)).collect()
    }

    pub fn member_graph(&self, i: usize) -> MultiHypergraph {
        self.universe.restrict(&self.family.member(i).iter().copied().collect()).expect("members live in the universe")
    }

    pub fn member_vertices(&self, i: usize) -> BTreeSet<Vertex> {
        self.family
            .member(i)
            .iter()
            .flat_map(|&iid| self.universe.get(iid).expect("member instance").iter().copied())
            .collect()
    }

    /// Δ_H(S): members whose vertex set contains S.
    pub fn refinement_degree(&self, s: &[Vertex]) -> usize {
        (0..self.family.len())
            .filter(|&i| {
                let v = self.member_vertices(i);
                s.iter().all(|x| v.contains(x))
            })
            .count()
    }

    /// Δ(H): the maximum refinement degree over (r−1)-sets.
    pub fn family_max_degree(&self) -> usize {
        let k = self.r() - 1;
        let mut counts: BTreeMap<Vec<Vertex>, usize> = BTreeMap::new();
        for i in 0..self.family.len() {
            for s in self.member_vertices(i).into_iter().combinations(k) {
                *counts.entry(s).or_insert(0) += 1;
            }
        }
        counts.into_values().max().unwrap_or(0)
    }

    /// max{v(H), e(H)} over members.
    pub fn max_member_size(&self) -> usize {
        (0..self.family.len())
            .map(|i| self.family.member(i).len().max(self.member_vertices(i).len()))
            .max()
            .unwrap_or(0)
    }

    /// The least C for which the family is C-refined.
    pub fn refinement_constant(&self) -> usize {
        self.family.max_membership().max(self.max_member_size())
    }

    pub fn is_c_refined(&self, c: usize) -> bool {
        self.refinement_constant() <= c
    }
}

/// A refiner with empty remainder whose members are all copies of K_q^r.
#[derive(Clone, Debug)]
pub struct OmniAbsorber {
    inner: Refiner,
}

impl OmniAbsorber {
    pub fn new(inner: Refiner) -> Result<Self, RefineError> {
        if !inner.remainder().is_empty() {
            return Err(RefineError::Composition("omni-absorber with a remainder".into()));
        }
        Ok(Self { inner })
    }

    pub fn as_refiner(&self) -> &Refiner {
        &self.inner
    }

    pub fn x(&self) -> &MultiHypergraph {
        self.inner.x()
    }

    /// The absorber graph A.
    pub fn a(&self) -> &MultiHypergraph {
        self.inner.r_graph()
    }

    /// Q_A(L): clique members partitioning L ∪ A.
    pub fn decompose(&self, l: &BTreeSet<Iid>) -> Result<Vec<usize>, RefineError> {
        self.inner.refine(l)
    }

    /// Vertex sets of the cliques in Q_A(L).
    pub fn decomposition_cliques(&self, l: &BTreeSet<Iid>) -> Result<Vec<Vec<Vertex>>, RefineError> {
        Ok(self.decompose(l)?.into_iter().map(|i| self.inner.member_vertices(i).into_iter().collect()).collect())
    }
}

/// True iff the instances form exactly one copy of K_q^r.
pub fn is_clique_member(universe: &MultiHypergraph, member: &[Iid], q: usize) -> bool {
    let r = universe.r();
    if member.len() as u64 != binomial(q, r) {
        return false;
    }
    let Some(mut supports) =
        member.iter().map(|&i| universe.get(i).map(<[Vertex]>::to_vec)).collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    supports.sort();
    let verts: BTreeSet<Vertex> = supports.iter().flatten().copied().collect();
    if verts.len() != q {
        return false;
    }
    let expected: Vec<Vec<Vertex>> = verts.into_iter().combinations(r).collect();
    supports == expected
}

pub fn is_divisible_instances(universe: &MultiHypergraph, iids: &BTreeSet<Iid>, q: usize) -> bool {
    let r = universe.r();
    let supports: Vec<&[Vertex]> = iids.iter().filter_map(|&i| universe.get(i)).collect();
    check_supports(r, q, supports).map(|rep| rep.divisible).unwrap_or(false)
}
