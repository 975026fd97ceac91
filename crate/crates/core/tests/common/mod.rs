#![allow(dead_code)]

use hqts::instance::{build_distance_matrix, DistanceMatrix, Instance, Location};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in a 100x100 square; demands in 1..=capacity/2.
pub fn random_instance(n: usize, capacity: u64, seed: u64) -> (Instance, DistanceMatrix) {
    let mut r = rng(seed);
    let locations = (0..=n)
        .map(|id| Location {
            id,
            x: r.gen_range(0.0..100.0),
            y: r.gen_range(0.0..100.0),
            demand: if id == 0 { 0 } else { r.gen_range(1..=capacity / 2) },
        })
        .collect();
    let inst = Instance::new(format!("rand{n}-{seed}"), capacity, locations).unwrap();
    let m = build_distance_matrix(&inst);
    (inst, m)
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Closed tour depot -> order -> depot, summed the long way.
pub fn tour_length(order: &[usize], m: &DistanceMatrix) -> f64 {
    let mut nodes = vec![0];
    nodes.extend_from_slice(order);
    nodes.push(0);
    let mut total = 0.0;
    for w in nodes.windows(2) {
        total += m.get(w[0], w[1]);
    }
    total
}

pub fn brute_force_tsp(customers: &[usize], m: &DistanceMatrix) -> f64 {
    permutations(customers)
        .iter()
        .map(|p| tour_length(p, m))
        .fold(f64::INFINITY, f64::min)
}

/// Exhaustive CVRP optimum: best tour per customer subset, then the best
/// partition into capacity-feasible subsets.
pub fn brute_force_cvrp(inst: &Instance, m: &DistanceMatrix) -> f64 {
    let n = inst.num_customers();
    assert!(n <= 10);
    let full = (1usize << n) - 1;
    let members = |mask: usize| (0..n).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect::<Vec<_>>();
    let mut tsp = vec![f64::INFINITY; full + 1];
    for mask in 1..=full {
        let c = members(mask);
        let load: u64 = c.iter().map(|&i| inst.demand(i)).sum();
        if load <= inst.capacity() {
            tsp[mask] = brute_force_tsp(&c, m);
        }
    }
    let mut best = vec![f64::INFINITY; full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            let v = tsp[block] + best[mask ^ block];
            if v < best[mask] {
                best[mask] = v;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    best[full]
}

/// Symmetric matrix of random points; only the distances matter.
pub fn random_matrix(n: usize, seed: u64) -> DistanceMatrix {
    random_instance(n, 1000, seed).1
}
