//! Multiplicity reduction: per support S, M(q,r)·|X(S)| new parallel instances split by an
//! RMH with q′ = M(q,r), whose edges become M(q,r)-stacks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::divisibility::modulus_m;
use crate::hypercore::{Iid, IidPool, MultiHypergraph, Vertex};
use crate::rmh::{rmh_matching_positions, RmhInstance};

use super::model::{RefinementFamily, Refiner};
use super::RefineError;

struct SupportBlock {
    x_pos: HashMap<Iid, usize>,
    inst: Arc<RmhInstance>,
    offset: usize,
}

pub fn multiplicity_reduction(x: &MultiHypergraph, q: usize, pool: &mut IidPool) -> Result<Refiner, RefineError> {
    let r = x.r();
    let m = modulus_m(q, r)? as usize;
    let mut rg = MultiHypergraph::new(x.n(), r);
    let mut family = RefinementFamily::new();
    let mut remainder = BTreeSet::new();
    let mut cache: BTreeMap<usize, Arc<RmhInstance>> = BTreeMap::new();
    let mut blocks: BTreeMap<Vec<Vertex>, SupportBlock> = BTreeMap::new();
    for (support, ids) in x.supports() {
        let inst = match cache.get(&ids.len()) {
            Some(i) => i.clone(),
            None => {
                let i = Arc::new(RmhInstance::on_positions(ids.len(), m)?);
                cache.insert(ids.len(), i.clone());
                i
            }
        };
        let mut iid_at = vec![Iid(0); inst.vertex_count() + 1];
        let mut x_pos = HashMap::new();
        for (k, p) in inst.x_positions().enumerate() {
            iid_at[p] = ids[k];
            x_pos.insert(ids[k], p);
        }
        for p in inst.r_positions() {
            iid_at[p] = rg.push(pool, support.to_vec())?;
        }
        remainder.extend(inst.xprime_positions().map(|p| iid_at[p]));
        let offset = family.len();
        for e in &inst.edges {
            family.push(e.iter().map(|&p| iid_at[p]).collect());
        }
        blocks.insert(support.to_vec(), SupportBlock { x_pos, inst, offset });
    }
    let xg = x.clone();
    let refine = Arc::new(move |l: &BTreeSet<Iid>| {
        let mut chosen = Vec::new();
        for (support, b) in &blocks {
            let pos: BTreeSet<usize> =
                xg.iids_on(support).iter().filter(|i| l.contains(i)).map(|i| b.x_pos[i]).collect();
            chosen.extend(rmh_matching_positions(&b.inst, &pos)?.into_iter().map(|e| e + b.offset));
        }
        Ok(chosen)
    });
    Refiner::new(q, x.clone(), rg, family, remainder, refine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refinery::{verify_refiner, VerifyConfig};

    #[test]
    fn single_instance() {
        let x = MultiHypergraph::from_supports(2, 2, [[0, 1]]).unwrap();
        let mut pool = IidPool::after([&x]);
        let rf = multiplicity_reduction(&x, 3, &mut pool).unwrap();
        assert_eq!(rf.r_graph().multiplicity(&[0, 1]), 6);
        assert_eq!(rf.remainder().len(), 5);
        assert!(verify_refiner(&rf, &VerifyConfig::default()).ok);
        assert!(rf.family().max_membership() <= 12);
    }

    #[test]
    fn empty_input() {
        let x = MultiHypergraph::new(3, 2);
        let rf = multiplicity_reduction(&x, 3, &mut IidPool::new()).unwrap();
        assert!(rf.r_graph().is_empty() && rf.family().is_empty());
        assert!(verify_refiner(&rf, &VerifyConfig::default()).ok);
    }
}
