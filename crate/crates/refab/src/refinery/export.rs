//! JSON certificates for refiners and omni-absorbers.

use serde::Serialize;

use crate::hypercore::{Iid, MultiHypergraph, Vertex};

use super::model::Refiner;
use super::verify::{test_family, VerifyConfig, VerifyMode};
use super::RefineError;

#[derive(Clone, Debug, Serialize)]
pub struct Instance {
    pub iid: Iid,
    pub verts: Vec<Vertex>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub l: Vec<Iid>,
    pub members: Vec<usize>,
    pub leftover: Vec<Iid>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinerCertificate {
    pub q: usize,
    pub r: usize,
    pub n: u32,
    pub x: Vec<Instance>,
    pub r_graph: Vec<Instance>,
    pub remainder: Vec<Iid>,
    pub family: Vec<Vec<Iid>>,
    pub family_max_degree: usize,
    pub refinement_constant: usize,
    pub table_mode: VerifyMode,
    pub q_table: Vec<TableRow>,
}

fn instances(g: &MultiHypergraph) -> Vec<Instance> {
    g.instances().map(|(iid, v)| Instance { iid, verts: v.to_vec() }).collect()
}

/// Family members as iid lists and Q(L) for every L the verifier would visit.
pub fn export_refiner(rf: &Refiner, cfg: &VerifyConfig) -> Result<RefinerCertificate, RefineError> {
    let (table_mode, ls) = test_family(rf.x(), rf.q(), cfg);
    let q_table = ls
        .iter()
        .map(|l| {
            let members = rf.refine(l)?;
            let leftover = rf.leftover(l, &members).into_iter().collect();
            Ok(TableRow { l: l.iter().copied().collect(), members, leftover })
        })
        .collect::<Result<_, RefineError>>()?;
    Ok(RefinerCertificate {
        q: rf.q(),
        r: rf.r(),
        n: rf.universe().n(),
        x: instances(rf.x()),
        r_graph: instances(rf.r_graph()),
        remainder: rf.remainder().iter().copied().collect(),
        family: rf.family().members().to_vec(),
        family_max_degree: rf.family_max_degree(),
        refinement_constant: rf.refinement_constant(),
        table_mode,
        q_table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::IidPool;
    use crate::refinery::multiplicity_reduction;

    #[test]
    fn table_covers_every_divisible_l() {
        let x = MultiHypergraph::from_supports(3, 2, [[0, 1], [1, 2], [0, 2]]).unwrap();
        let rf = multiplicity_reduction(&x, 3, &mut IidPool::after([&x])).unwrap();
        let cert = export_refiner(&rf, &VerifyConfig::default()).unwrap();
        assert_eq!(cert.table_mode, VerifyMode::Exhaustive);
        assert_eq!(cert.q_table.len(), 2);
        assert_eq!(cert.family.len(), rf.family().len());
        let json = serde_json::to_value(&cert).unwrap();
        assert!(json["q_table"][1]["members"].is_array());
    }
}
