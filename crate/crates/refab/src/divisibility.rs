//! K_q^r-divisibility and the modulus M(q,r).

use std::collections::BTreeMap;
use std::sync::OnceLock;

use itertools::Itertools;
use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::hypercore::{MultiHypergraph, Vertex};

pub const MAX_Q: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DivisibilityError {
    #[error("need q > r >= 1 and q <= {MAX_Q}, got q={q}, r={r}")]
    InvalidParameters { q: usize, r: usize },
    #[error("set {set:?} has size {size}, expected 1..{r}")]
    BadSetSize { set: Vec<Vertex>, size: usize, r: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub i: usize,
    pub set: Vec<Vertex>,
    pub degree: usize,
    pub modulus: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DivisibilityReport {
    pub divisible: bool,
    pub first_violation: Option<Violation>,
}

impl DivisibilityReport {
    fn from_violation(v: Option<Violation>) -> Self {
        Self { divisible: v.is_none(), first_violation: v }
    }
}

fn pascal() -> &'static Vec<Vec<u64>> {
    static TABLE: OnceLock<Vec<Vec<u64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![vec![0u64; MAX_Q + 1]; MAX_Q + 1];
        for n in 0..=MAX_Q {
            t[n][0] = 1;
            for k in 1..=n {
                t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
            }
        }
        t
    })
}

/// binom(n, k) for n ≤ 64.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    assert!(n <= MAX_Q, "binomial table covers n <= {MAX_Q}");
    pascal()[n][k]
}

fn check_params(q: usize, r: usize) -> Result<(), DivisibilityError> {
    if r == 0 || q <= r || q > MAX_Q {
        return Err(DivisibilityError::InvalidParameters { q, r });
    }
    Ok(())
}

/// M(q,r) = lcm of binom(q−i, r−i) over 0 ≤ i < r.
pub fn modulus_m(q: usize, r: usize) -> Result<u64, DivisibilityError> {
    check_params(q, r)?;
    Ok((0..r).map(|i| binomial(q - i, r - i)).fold(1u64, |acc, b| acc.lcm(&b)))
}

/// Divisibility of an arbitrary r-uniform instance list, given as supports.
pub fn check_supports<'a, I>(r: usize, q: usize, supports: I) -> Result<DivisibilityReport, DivisibilityError>
where
    I: IntoIterator<Item = &'a [Vertex]>,
{
    check_params(q, r)?;
    let mut tables: Vec<BTreeMap<Vec<Vertex>, usize>> = vec![BTreeMap::new(); r];
    for e in supports {
        debug_assert_eq!(e.len(), r);
        for (i, table) in tables.iter_mut().enumerate() {
            for sub in e.iter().copied().combinations(i) {
                *table.entry(sub).or_insert(0) += 1;
            }
        }
    }
    for (i, table) in tables.iter().enumerate() {
        let modulus = binomial(q - i, r - i);
        if let Some((set, &degree)) = table.iter().find(|(_, &d)| !(d as u64).is_multiple_of(modulus)) {
            return Ok(DivisibilityReport::from_violation(Some(Violation { i, set: set.clone(), degree, modulus })));
        }
    }
    Ok(DivisibilityReport::from_violation(None))
}

/// Checks binom(q−i, r−i) | |G(S)| for every i < r and every i-set S, reporting the first
/// violation in (i, S) lexicographic order. Only sets inside some edge are visited.
pub fn is_divisible(g: &MultiHypergraph, q: usize) -> Result<DivisibilityReport, DivisibilityError> {
    check_params(q, g.r())?;
    check_supports(g.r(), q, g.instances().map(|(_, e)| e))
}

pub fn divisible(g: &MultiHypergraph, q: usize) -> bool {
    is_divisible(g, q).map(|r| r.divisible).unwrap_or(false)
}

/// K_{q−i}^{r−i}-divisibility of the link L(S).
pub fn check_link_divisibility(
    l: &MultiHypergraph,
    q: usize,
    s: &[Vertex],
) -> Result<DivisibilityReport, DivisibilityError> {
    let r = l.r();
    if s.is_empty() || s.len() >= r {
        return Err(DivisibilityError::BadSetSize { set: s.to_vec(), size: s.len(), r });
    }
    let link = l.link(s).expect("set size already checked");
    is_divisible(&link, q - s.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::Iid;

    #[test]
    fn modulus_examples() {
        assert_eq!(modulus_m(3, 2).unwrap(), 6);
        assert_eq!(modulus_m(4, 3).unwrap(), 12);
        for q in 2..10 {
            assert_eq!(modulus_m(q, 1).unwrap(), q as u64);
        }
        assert!(modulus_m(2, 2).is_err());
    }

    #[test]
    fn complete_graph_examples() {
        assert!(is_divisible(&MultiHypergraph::complete(7, 2), 3).unwrap().divisible);
        let rep = is_divisible(&MultiHypergraph::complete(6, 2), 3).unwrap();
        let v = rep.first_violation.unwrap();
        assert_eq!((v.i, v.degree, v.modulus), (1, 5, 2));
        assert!(is_divisible(&MultiHypergraph::new(4, 3), 5).unwrap().divisible);
    }

    #[test]
    fn cliques_are_divisible() {
        for q in 2..=7 {
            for r in 1..q {
                assert!(divisible(&MultiHypergraph::complete(q as u32, r), q), "q={q} r={r}");
            }
        }
    }

    #[test]
    fn link_examples() {
        let k7 = MultiHypergraph::complete(7, 2);
        assert!(check_link_divisibility(&k7, 3, &[4]).unwrap().divisible);
        let k5 = MultiHypergraph::complete(5, 3);
        for s in (0..5u32).combinations(2) {
            assert!(check_link_divisibility(&k5, 5, &s).unwrap().divisible);
        }
    }

    #[test]
    fn stack_of_m_copies_is_divisible() {
        for q in 2..=6 {
            for r in 1..q {
                let m = modulus_m(q, r).unwrap();
                let mut g = MultiHypergraph::new(r as u32, r);
                for i in 0..m {
                    g.insert(Iid(i), (0..r as u32).collect()).unwrap();
                }
                assert!(divisible(&g, q));
            }
        }
    }
}
