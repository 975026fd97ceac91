mod common;

use common::{random_instance, tour_length};
use hqts::construct::import_solution;
use hqts::qubo::{build_tsp_qubo, decode_sample, qubo_energy, route_penalties, TspLayout};
use hqts::solution::{infeasibility, route_cost, validate, Solution};
use hqts::tabu::moves::NeighborhoodContext;
use hqts::tabu::{apply_move, generate_neighborhood, NearestNeighbors};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random assignment of customers `1..=n` to up to `k` nonempty routes.
fn random_routes(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = common::rng(seed);
    let mut ids: Vec<usize> = (1..=n).collect();
    ids.shuffle(&mut r);
    let mut routes = vec![Vec::new(); k];
    for c in ids {
        routes[r.gen_range(0..k)].push(c);
    }
    routes.retain(|x| !x.is_empty());
    routes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn route_cost_matches_naive_sum(n in 1usize..15, seed in any::<u64>()) {
        let (_, m) = random_instance(n, 100, seed);
        for route in random_routes(n, 3, seed) {
            prop_assert!((route_cost(&route, &m) - tour_length(&route, &m)).abs() < 1e-9);
        }
    }

    #[test]
    fn splitting_a_route_never_saves(n in 2usize..12, seed in any::<u64>(), cut in 1usize..11) {
        let (_, m) = random_instance(n, 100, seed);
        let route: Vec<usize> = (1..=n).collect();
        let cut = cut.min(n - 1);
        let split = route_cost(&route[..cut], &m) + route_cost(&route[cut..], &m);
        prop_assert!(split >= route_cost(&route, &m) - 1e-9);
    }

    #[test]
    fn excess_is_per_route_sum(n in 2usize..20, seed in any::<u64>()) {
        let (inst, m) = random_instance(n, 12, seed);
        let s = Solution::from_sequences(random_routes(n, 2, seed ^ 1), &inst, &m);
        let oracle: u64 = s
            .sequences()
            .iter()
            .map(|r| r.iter().map(|&c| inst.demand(c)).sum::<u64>().saturating_sub(inst.capacity()))
            .sum();
        prop_assert_eq!(infeasibility(&s, &inst), oracle);
        prop_assert_eq!(s.excess(), oracle);
        prop_assert_eq!(s.is_feasible(), oracle == 0);
    }

    #[test]
    fn move_deltas_match_recomputation(n in 2usize..=8, seed in any::<u64>()) {
        let (inst, m) = random_instance(n, 10, seed);
        let s = Solution::from_sequences(random_routes(n, 3, seed), &inst, &m);
        let nn = NearestNeighbors::new(&m);
        let ctx = NeighborhoodContext { instance: &inst, matrix: &m, neighbors: &nn, breadth: n };
        for cand in generate_neighborhood(&s, &ctx) {
            let mut t = s.clone();
            apply_move(&mut t, &cand.mv, &inst, &m, 99);
            prop_assert!(validate(&t, &inst, &m).is_ok());
            let recomputed: f64 = t.sequences().iter().map(|r| tour_length(r, &m)).sum();
            prop_assert!((recomputed - cand.cost).abs() < 1e-9, "{:?}", cand.mv);
            prop_assert!((s.cost() + cand.delta_cost - recomputed).abs() < 1e-9);
            prop_assert_eq!(t.excess(), cand.excess);
        }
    }

    #[test]
    fn permutations_round_trip(order in Just((1usize..=6).collect::<Vec<_>>()).prop_shuffle()) {
        let customers: Vec<usize> = (1..=6).collect();
        let layout = TspLayout::new(customers.clone());
        let bits = layout.encode(&order);
        prop_assert_eq!(decode_sample(&bits, &customers).unwrap(), order);
    }

    #[test]
    fn decoded_energy_is_tour_length(n in 2usize..6, seed in any::<u64>(), bits in proptest::collection::vec(0u8..2, 25)) {
        let (_, m) = random_instance(n, 100, seed);
        let customers: Vec<usize> = (1..=n).collect();
        let tsp = build_tsp_qubo(&customers, &m, 0, route_penalties(&customers, 0, &m)).unwrap();
        let bits = &bits[..n * n];
        if let Ok(order) = decode_sample(bits, &customers) {
            prop_assert!((qubo_energy(&tsp.qubo, bits) - route_cost(&order, &m)).abs() < 1e-9);
        } else {
            prop_assert!(qubo_energy(&tsp.qubo, bits) > 0.0);
        }
    }

    #[test]
    fn solution_json_round_trips(n in 1usize..20, seed in any::<u64>()) {
        let (inst, m) = random_instance(n, 30, seed);
        let s = Solution::from_sequences(random_routes(n, 4, seed), &inst, &m);
        let text = serde_json::to_string(&s.to_json()).unwrap();
        let (back, report) = import_solution(&text, &inst, &m).unwrap();
        prop_assert_eq!(back.sequences(), s.sequences());
        prop_assert!((report.cost - s.cost()).abs() < 1e-9);
        prop_assert_eq!(report.feasible, s.is_feasible());
    }
}
