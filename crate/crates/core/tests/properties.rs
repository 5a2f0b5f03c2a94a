use proptest::prelude::*;

use pcc::embedding::grid;
use pcc::matching::{min_weight_perfect_matching, MatchingSolver, WeightedMatchGraph};
use pcc::model::BinaryMRF;
use pcc::oracle::{brute_force_map, brute_force_mwpm};
use pcc::pcc::{build_pcc, decode_upper, init_params, lower_bound, optimize, subgradient, SolveOptions};

fn small_grid() -> impl Strategy<Value = (usize, usize, Vec<i32>, Vec<i32>)> {
    (1usize..=3, 2usize..=4).prop_flat_map(|(r, c)| {
        let m = r * (c - 1) + (r - 1) * c;
        (
            Just(r),
            Just(c),
            prop::collection::vec(-50i32..=50, m),
            prop::collection::vec(-80i32..=80, r * c),
        )
    })
}

fn model_of(r: usize, c: usize, pair: &[i32], unary: &[i32]) -> BinaryMRF {
    let (edges, _) = grid(r, c);
    let triples: Vec<_> = edges.iter().zip(pair).map(|(&(i, j), &w)| (i, j, w as f64)).collect();
    BinaryMRF::from_triples(r * c, &triples, unary.iter().map(|&u| u as f64).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn bounds_bracket_the_optimum((r, c, pair, unary) in small_grid()) {
        let model = model_of(r, c, &pair, &unary);
        let (_, emb) = grid(r, c);
        let e_map = brute_force_map(&model).unwrap().energy;
        let res = optimize(&model, &emb, SolveOptions { max_iters: 60, ..SolveOptions::default() }).unwrap();
        prop_assert!(res.best_lower <= e_map + 1e-9);
        prop_assert!(res.best_upper >= e_map);
        prop_assert_eq!(model.energy(&res.best_assignment).unwrap(), res.best_upper);
        for rec in &res.trace.records {
            prop_assert!(rec.lower_bound <= e_map + 1e-9);
            prop_assert!(rec.upper_bound >= e_map);
        }
    }

    #[test]
    fn decode_and_subgradient_are_consistent((r, c, pair, unary) in small_grid()) {
        let model = model_of(r, c, &pair, &unary);
        let (_, emb) = grid(r, c);
        let pcc = build_pcc(&model, &emb).unwrap();
        let lb = lower_bound(&model, &pcc, &init_params(&model, &pcc)).unwrap();
        let (labels, energy) = decode_upper(&model, &pcc, &lb.config).unwrap();
        prop_assert_eq!(model.energy(&labels).unwrap(), energy);
        let g = subgradient(&pcc, &lb.config);
        prop_assert_eq!(g.len(), pcc.incidences().len());
        // Per node the subgradient entries sum to zero.
        for i in 0..model.num_nodes() {
            let s: f64 = pcc.node_incidences(i).iter().map(|&k| g[k]).sum();
            prop_assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn matching_agrees_with_enumeration(
        n in (1usize..=5).prop_map(|h| 2 * h),
        seed_edges in prop::collection::vec((0usize..10, 0usize..10, -30i64..=30), 1..40),
    ) {
        let mut seen = std::collections::HashSet::new();
        let edges: Vec<_> = seed_edges
            .into_iter()
            .filter(|&(u, v, _)| u < n && v < n && u != v && seen.insert((u.min(v), u.max(v))))
            .collect();
        prop_assume!(!edges.is_empty());
        let g = WeightedMatchGraph::new(n, edges).unwrap();
        match (min_weight_perfect_matching(&g), brute_force_mwpm(&g)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.total_weight(), b.total_weight()),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "solver {:?} vs oracle {:?}", a, b),
        }
    }

    #[test]
    fn rewarm_equals_cold(
        weights in prop::collection::vec(prop::collection::vec(-40i64..=40, 15), 2..6),
    ) {
        // Complete graph on 6 vertices, re-solved under several weight vectors.
        let pairs: Vec<(usize, usize)> = (0..6).flat_map(|u| (u + 1..6).map(move |v| (u, v))).collect();
        let build = |w: &[i64]| {
            WeightedMatchGraph::new(6, pairs.iter().zip(w).map(|(&(u, v), &x)| (u, v, x)).collect()).unwrap()
        };
        let mut solver = MatchingSolver::new(build(&weights[0])).unwrap();
        solver.solve().unwrap();
        for w in &weights[1..] {
            let g = build(w);
            let warm = solver.rewarm_solve(&g).unwrap();
            prop_assert_eq!(warm.total_weight(), brute_force_mwpm(&g).unwrap().total_weight());
        }
    }
}
