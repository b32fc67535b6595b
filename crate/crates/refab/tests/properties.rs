mod common;

use std::collections::{BTreeSet, HashSet};

use itertools::Itertools;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::seq::SliceRandom;

use common::*;
use refab::divisibility::{check_link_divisibility, modulus_m};
use refab::exactdecomp::{Infeasibility, DEFAULT_BUDGET};
use refab::gadgets::absorber::provide_absorber;
use refab::gadgets::{anti_edge, check_gadget_congruences, fake_edge, verify_absorber, SearchBudget};
use refab::hypercore::IidPool;
use refab::pipeline::{reserve_sample, ReserveBounds};
use refab::refinery::multi::terminal_refiner;
use refab::refinery::{concat, multiplicity_reduction, verify_refiner, VerifyConfig};
use refab::rmh::{build_rmh, rmh_matching};
use refab::{find_decomposition, is_divisible, verify_decomposition, Iid, MultiHypergraph, SearchOutcome, Vertex};

fn graph(max_n: u32, max_r: usize, max_e: usize) -> impl Strategy<Value = MultiHypergraph> {
    (2..=max_n, 1..=max_r, 0..=max_e, any::<u64>()).prop_map(|(n, r, e, seed)| {
        let r = r.min(n as usize);
        random_multigraph(&mut rng(seed), n, r, e)
    })
}

fn multigraph2(max_n: u32, max_e: usize) -> impl Strategy<Value = MultiHypergraph> {
    (2..=max_n, 0..=max_e, any::<u64>()).prop_map(|(n, e, seed)| random_multigraph(&mut rng(seed), n, 2, e))
}

fn simple_graph(max_n: u32) -> impl Strategy<Value = MultiHypergraph> {
    (3..=max_n, any::<u64>(), any::<u8>()).prop_map(|(n, seed, fill)| {
        let pairs = (n * (n - 1) / 2) as usize;
        random_simple_graph(&mut rng(seed), n, fill as usize % (pairs + 1))
    })
}

fn divisible_graph() -> impl Strategy<Value = (MultiHypergraph, usize)> {
    (4..=8u32, 2..=3usize, 1..=4usize, any::<u64>()).prop_flat_map(|(n, r, cliques, seed)| {
        let r = r.min(n as usize - 1);
        (r + 1..=(r + 2).min(n as usize)).prop_map(move |q| (random_clique_union(&mut rng(seed), n, r, q, cliques), q))
    })
}

fn subset_of(g: &MultiHypergraph, mask: u64) -> BTreeSet<Iid> {
    g.iids().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, id)| id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, rng_seed: RngSeed::Fixed(17), failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn degree_counts_instances(g in graph(8, 3, 14)) {
        let r = g.r();
        for i in 0..r {
            for s in (0..g.n()).combinations(i) {
                let direct = g.instances().filter(|(_, e)| s.iter().all(|v| e.contains(v))).count();
                prop_assert_eq!(g.degree(&s), direct);
            }
        }
        let total: usize = g.supports().map(|(s, _)| g.multiplicity(s)).sum();
        prop_assert_eq!(total, g.e());
    }

    #[test]
    fn join_inverts_link(g in graph(8, 3, 14), pick in any::<u64>()) {
        let r = g.r();
        prop_assume!(r >= 2);
        let sets: Vec<Vec<Vertex>> = (1..r).flat_map(|i| (0..g.n()).combinations(i)).collect();
        let s = &sets[pick as usize % sets.len()];
        let back = MultiHypergraph::join(s, &g.link(s).unwrap()).unwrap();
        prop_assert_eq!(back, g.star(s));
    }

    #[test]
    fn flatness_monotone(g in graph(8, 3, 14), ymask in any::<u16>(), drop in any::<u64>()) {
        let y: BTreeSet<Vertex> = (0..g.n()).filter(|v| ymask >> v & 1 == 1).collect();
        let sub = g.restrict(&subset_of(&g, drop)).unwrap();
        for i in 0..g.r() {
            if g.is_flat(&y, i) {
                prop_assert!(g.is_flat(&y, i + 1));
                prop_assert!(sub.is_flat(&y, i));
            }
        }
    }

    #[test]
    fn serializer_round_trip(g in graph(9, 4, 16)) {
        let text = g.serialize();
        let back = MultiHypergraph::parse(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn links_of_divisible_graphs((g, q) in divisible_graph()) {
        prop_assert!(is_divisible(&g, q).unwrap().divisible);
        for i in 1..g.r() {
            for s in (0..g.n()).combinations(i) {
                prop_assert!(check_link_divisibility(&g, q, &s).unwrap().divisible);
                prop_assert!(graph_divisible(&g.link(&s).unwrap(), q - i));
            }
        }
    }

    #[test]
    fn divisibility_agrees_with_oracle(g in graph(7, 3, 12), q_extra in 1..=3usize) {
        let q = g.r() + q_extra;
        prop_assert_eq!(is_divisible(&g, q).unwrap().divisible, graph_divisible(&g, q));
    }

    #[test]
    fn unions_and_differences_stay_divisible((a, q) in divisible_graph(), seed in any::<u64>()) {
        let r = a.r();
        let b = random_clique_union(&mut rng(seed), a.n(), r, q, 2);
        let shifted = {
            let mut out = MultiHypergraph::new(a.n(), r);
            let mut pool = IidPool::after([&a]);
            for (_, e) in b.instances() {
                out.push(&mut pool, e.to_vec()).unwrap();
            }
            out
        };
        let both = a.union(&shifted).unwrap();
        prop_assert!(is_divisible(&both, q).unwrap().divisible);
        prop_assert!(is_divisible(&both.without(&shifted.iid_set()), q).unwrap().divisible);
    }

    #[test]
    fn solver_output_verifies(g in simple_graph(7)) {
        let out = find_decomposition(&g, 3, DEFAULT_BUDGET).unwrap();
        let again = find_decomposition(&g, 3, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(&out, &again);
        match out {
            SearchOutcome::Found(d) => {
                prop_assert!(verify_decomposition(&g, 3, &d, &g.iid_set()));
                prop_assert!(decomposition_oracle(&g, 3, &d, &g.iid_set()));
            }
            SearchOutcome::Infeasible(Infeasibility::Divisibility(_)) => prop_assert!(!graph_divisible(&g, 3)),
            SearchOutcome::Infeasible(Infeasibility::Exhausted { .. }) => prop_assert!(graph_divisible(&g, 3)),
            SearchOutcome::Indeterminate { .. } => prop_assert!(false, "budget ran out on a tiny graph"),
        }
    }

    #[test]
    fn rmh_blocks_are_edges(q in 2..=5usize, m in 1..=6usize, mask in any::<u8>()) {
        let xs: Vec<Vertex> = (0..m as Vertex).collect();
        let inst = build_rmh(&xs, q, 100).unwrap();
        let l: Vec<Vertex> = xs.iter().copied().filter(|v| mask >> v & 1 == 1).collect();
        let edges: HashSet<Vec<Vertex>> = inst.labelled_edges().into_iter().collect();
        let blocks = rmh_matching(&inst, &l).unwrap();
        let mut seen = BTreeSet::new();
        for b in &blocks {
            prop_assert!(edges.contains(b));
            for &v in b {
                prop_assert!(seen.insert(v));
            }
        }
    }

    #[test]
    fn gadget_congruences(q in 2..=6usize, r_pick in any::<usize>(), offset in 0..20u32) {
        let r = 1 + r_pick % (q - 1);
        let root: Vec<Vertex> = (0..r as Vertex).map(|v| 3 * v + offset).collect();
        let fresh = 3 * r as Vertex + offset;
        for (g, sign) in [(anti_edge(&root, q, fresh).unwrap(), -1i64), (fake_edge(&root, q, fresh).unwrap(), 1)] {
            prop_assert!(check_gadget_congruences(&g, q));
            prop_assert!(g.new_verts.iter().all(|v| !root.contains(v)));
            let degrees = subset_degrees(g.edges.instances().map(|(_, v)| v), r);
            for s in root.iter().copied().powerset().filter(|s| s.len() < r) {
                let d = degrees.get(&s).copied().unwrap_or(0) as i64;
                let modulus = choose((q - s.len()) as u64, (r - s.len()) as u64) as i64;
                prop_assert_eq!((d - sign).rem_euclid(modulus), 0);
            }
        }
    }

    #[test]
    fn m_parallel_copies_divisible(q in 2..=7usize, r_pick in any::<usize>()) {
        let r = 1 + r_pick % (q - 1);
        let m = modulus_m(q, r).unwrap() as usize;
        let root: Vec<Vertex> = (0..r as Vertex).collect();
        let g = MultiHypergraph::from_supports(r as u32, r, std::iter::repeat_n(root, m)).unwrap();
        prop_assert!(is_divisible(&g, q).unwrap().divisible);
        prop_assert!(is_divisible(&MultiHypergraph::complete(q as u32, r), q).unwrap().divisible);
    }

    #[test]
    fn refiner_leftovers(q in 3..=4usize, x in multigraph2(5, 6)) {
        let rf = multiplicity_reduction(&x, q, &mut IidPool::after([&x])).unwrap();
        prop_assert!(verify_refiner(&rf, &VerifyConfig::default()).ok);
        let recount = rf.family().recount_membership();
        for (iid, n) in recount {
            prop_assert_eq!(rf.family().memberships(iid).len(), n);
        }
        for l in divisible_subsets(&x, q) {
            let left = rf.leftover(&l, &rf.refine(&l).unwrap());
            prop_assert!(left.is_subset(rf.remainder()));
            prop_assert!(instances_divisible(rf.universe(), &left, q));
        }
    }

    #[test]
    fn empty_l_decomposes_r(x in multigraph2(5, 5)) {
        let rf = terminal_refiner(&x, 3, &mut IidPool::after([&x])).unwrap();
        let chosen = rf.refine(&BTreeSet::new()).unwrap();
        prop_assert_eq!(rf.covered(&chosen), rf.r_graph().iid_set());
        prop_assert!(graph_divisible(rf.r_graph(), 3));
    }

    #[test]
    fn concat_is_associative(x in multigraph2(5, 3)) {
        let mut pool = IidPool::after([&x]);
        let a = multiplicity_reduction(&x, 3, &mut pool).unwrap();
        let b = multiplicity_reduction(&a.remainder_graph(), 3, &mut pool).unwrap();
        let c = multiplicity_reduction(&b.remainder_graph(), 3, &mut pool).unwrap();
        let left = concat(&concat(&a, &b).unwrap(), &c).unwrap();
        let right = concat(&a, &concat(&b, &c).unwrap()).unwrap();
        let supports = |rf: &refab::Refiner| -> Vec<Vec<Vec<Vertex>>> {
            rf.family()
                .members()
                .iter()
                .map(|m| m.iter().map(|&i| rf.universe().get(i).unwrap().to_vec()).sorted().collect())
                .collect()
        };
        prop_assert_eq!(supports(&left), supports(&right));
        prop_assert_eq!(left.family().members(), right.family().members());
        for l in divisible_subsets(&x, 3) {
            prop_assert_eq!(left.refine(&l).unwrap(), right.refine(&l).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, rng_seed: RngSeed::Fixed(23), failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reservation_report_recomputes(n in 6..=11u32, p in 0.0..=1.0f64, seed in any::<u64>()) {
        let g = MultiHypergraph::complete(n, 2);
        let rep = reserve_sample(&g, 3, p, seed, 3, ReserveBounds::default()).unwrap();
        let x = &rep.x;
        prop_assert_eq!(rep.x_edges, x.e());
        prop_assert_eq!(rep.max_degree, max_vertex_degree(x));
        let xs: HashSet<Vec<Vertex>> = x.supports().map(|(s, _)| s.to_vec()).collect();
        let mut least = None;
        for (iid, e) in g.instances() {
            let count = (0..n)
                .filter(|w| !e.contains(w))
                .filter(|&w| e.iter().all(|&v| xs.contains(&[v.min(w), v.max(w)][..])))
                .count();
            prop_assert_eq!(rep.extension_counts[&iid], count);
            if !x.contains(iid) {
                least = Some(least.map_or(count, |m: usize| m.min(count)));
            }
        }
        prop_assert_eq!(rep.min_extension_count, least);
        let bound = (2.0 * p * n as f64).max(2.0);
        prop_assert_eq!(rep.degree_ok, rep.max_degree as f64 <= bound);
        prop_assert_eq!(rep.extension_ok, least.is_none_or(|m| m >= rep.threshold));
    }

    #[test]
    fn provided_absorbers_verify(len in 1..=2usize, seed in any::<u64>()) {
        let mut verts: Vec<Vertex> = (0..9).collect();
        verts.shuffle(&mut rng(seed));
        let cycle: Vec<[Vertex; 2]> = (0..3 * len)
            .map(|i| {
                let (a, b) = (verts[i % (3 * len)], verts[(i + 1) % (3 * len)]);
                [a.min(b), a.max(b)]
            })
            .collect();
        let l = MultiHypergraph::from_supports(9, 2, cycle).unwrap();
        let g = provide_absorber(&l, 3, 9, &mut IidPool::after([&l]), &SearchBudget::default()).unwrap();
        prop_assert!(verify_absorber(&l, &g, 3));
    }
}
