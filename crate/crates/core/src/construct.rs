//! Starting solutions: parallel Clarke-Wright savings, a geometric
//! clustering start, and import of solutions produced elsewhere.

use std::cmp::Ordering;

use thiserror::Error;

use crate::instance::{DistanceMatrix, Instance};
use crate::scalar::Scalar;
use crate::solution::{Solution, SolutionJson};

/// Merge gain `c(0,i) + c(0,j) - c(i,j)` of serving `i` and `j` on one route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saving<T = f64> {
    pub i: usize,
    pub j: usize,
    pub value: T,
}

/// Positive savings of every unordered customer pair, sorted by value
/// descending, ties by `(i, j)` ascending.
pub fn savings_list<T: Scalar>(instance: &Instance<T>, matrix: &DistanceMatrix<T>) -> Vec<Saving<T>> {
    let n = instance.num_customers();
    let mut savings = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 1..=n {
        for j in (i + 1)..=n {
            let value = matrix.get(0, i) + matrix.get(0, j) - matrix.get(i, j);
            if value > T::zero() {
                savings.push(Saving { i, j, value });
            }
        }
    }
    savings.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap_or(Ordering::Equal)
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });
    savings
}

/// Parallel savings construction. Deterministic, always capacity-feasible.
pub fn clarke_wright<T: Scalar>(instance: &Instance<T>, matrix: &DistanceMatrix<T>) -> Solution<T> {
    let n = instance.num_customers();
    let cap = instance.capacity();
    // route_of[c] indexes into `routes`; merged-away slots become empty.
    let mut route_of: Vec<usize> = (0..=n).collect();
    let mut routes: Vec<Vec<usize>> = (0..=n).map(|c| if c == 0 { vec![] } else { vec![c] }).collect();
    let mut loads: Vec<u64> = (0..=n).map(|c| instance.demand(c)).collect();

    for s in savings_list(instance, matrix) {
        let (ri, rj) = (route_of[s.i], route_of[s.j]);
        if ri == rj || loads[ri] + loads[rj] > cap {
            continue;
        }
        let i_first = routes[ri].first() == Some(&s.i);
        let i_last = routes[ri].last() == Some(&s.i);
        let j_first = routes[rj].first() == Some(&s.j);
        let j_last = routes[rj].last() == Some(&s.j);
        if !(i_first || i_last) || !(j_first || j_last) {
            continue;
        }
        // Orient so the result reads ... i, j ...
        let mut left = std::mem::take(&mut routes[ri]);
        let mut right = std::mem::take(&mut routes[rj]);
        if !i_last {
            left.reverse();
        }
        if !j_first {
            right.reverse();
        }
        left.extend(right);
        for &c in &left {
            route_of[c] = ri;
        }
        loads[ri] += loads[rj];
        loads[rj] = 0;
        routes[ri] = left;
    }
    Solution::from_sequences(routes, instance, matrix)
}

/// Cluster-first start: seed each cluster at the farthest unassigned
/// location from the depot, grow it with the location nearest to the
/// running centroid until the next one would not fit, run one relocation
/// sweep toward closer centroids, then sequence each cluster by nearest
/// neighbour from the depot.
pub fn geometric_cluster_start<T: Scalar>(
    instance: &Instance<T>,
    matrix: &DistanceMatrix<T>,
) -> Solution<T> {
    let n = instance.num_customers();
    let cap = instance.capacity();
    let locs = instance.locations();
    let mut assigned = vec![false; n + 1];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    let centroid = |members: &[usize]| -> (T, T) {
        let k = T::of_usize(members.len());
        let sx: T = members.iter().map(|&c| locs[c].x).sum();
        let sy: T = members.iter().map(|&c| locs[c].y).sum();
        (sx / k, sy / k)
    };
    let dist_to = |c: usize, (cx, cy): (T, T)| (locs[c].x - cx).hypot(locs[c].y - cy);

    while let Some(seed) = (1..=n)
        .filter(|&c| !assigned[c])
        .max_by(|&a, &b| cmp_scalar(matrix.get(0, a), matrix.get(0, b)).then(b.cmp(&a)))
    {
        assigned[seed] = true;
        let mut members = vec![seed];
        let mut load = instance.demand(seed);
        loop {
            let center = centroid(&members);
            let next = (1..=n)
                .filter(|&c| !assigned[c])
                .min_by(|&a, &b| cmp_scalar(dist_to(a, center), dist_to(b, center)).then(a.cmp(&b)));
            match next {
                Some(c) if load + instance.demand(c) <= cap => {
                    assigned[c] = true;
                    load += instance.demand(c);
                    members.push(c);
                }
                _ => break,
            }
        }
        clusters.push(members);
    }

    // One improvement sweep.
    let mut loads: Vec<u64> = clusters
        .iter()
        .map(|m| m.iter().map(|&c| instance.demand(c)).sum())
        .collect();
    for c in 1..=n {
        let Some(home) = clusters.iter().position(|m| m.contains(&c)) else {
            continue;
        };
        let centers: Vec<Option<(T, T)>> = clusters
            .iter()
            .map(|m| (!m.is_empty()).then(|| centroid(m)))
            .collect();
        let Some(home_center) = centers[home] else {
            continue;
        };
        let here = dist_to(c, home_center);
        let best = centers
            .iter()
            .enumerate()
            .filter(|&(k, center)| {
                k != home && center.is_some() && loads[k] + instance.demand(c) <= cap
            })
            .map(|(k, center)| (k, dist_to(c, center.unwrap())))
            .filter(|&(_, d)| d < here)
            .min_by(|a, b| cmp_scalar(a.1, b.1).then(a.0.cmp(&b.0)));
        if let Some((target, _)) = best {
            clusters[home].retain(|&x| x != c);
            loads[home] -= instance.demand(c);
            clusters[target].push(c);
            loads[target] += instance.demand(c);
        }
    }

    let routes = clusters
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|members| nearest_neighbor_sequence(members, matrix));
    Solution::from_sequences(routes, instance, matrix)
}

fn nearest_neighbor_sequence<T: Scalar>(mut pool: Vec<usize>, matrix: &DistanceMatrix<T>) -> Vec<usize> {
    let mut seq = Vec::with_capacity(pool.len());
    let mut at = 0;
    while !pool.is_empty() {
        let (k, _) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| cmp_scalar(matrix.get(at, *a.1), matrix.get(at, *b.1)).then(a.1.cmp(b.1)))
            .expect("nonempty pool");
        at = pool.swap_remove(k);
        seq.push(at);
    }
    seq
}

fn cmp_scalar<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("solution json does not match the schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("unknown customer id {0}")]
    UnknownId(usize),
    #[error("customer {0} is visited more than once")]
    Duplicate(usize),
    #[error("customer {0} is not covered by any route")]
    Missing(usize),
}

/// Outcome flags for an imported start. Infeasible imports are accepted;
/// the search repairs them through strategic oscillation.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportReport {
    pub feasible: bool,
    pub excess: u64,
    pub cost: f64,
    /// Cost stated in the file, when present.
    pub declared_cost: Option<f64>,
}

pub fn import_solution<T: Scalar>(
    text: &str,
    instance: &Instance<T>,
    matrix: &DistanceMatrix<T>,
) -> Result<(Solution<T>, ImportReport), ImportError> {
    let doc: SolutionJson = serde_json::from_str(text)?;
    let n = instance.num_customers();
    let mut seen = vec![false; n + 1];
    for &c in doc.routes.iter().flatten() {
        if c == 0 || c > n {
            return Err(ImportError::UnknownId(c));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(ImportError::Duplicate(c));
        }
    }
    if let Some(missing) = (1..=n).find(|&c| !seen[c]) {
        return Err(ImportError::Missing(missing));
    }
    let solution = Solution::from_sequences(doc.routes, instance, matrix);
    let report = ImportReport {
        feasible: solution.is_feasible(),
        excess: solution.excess(),
        cost: solution.cost().as_f64(),
        declared_cost: doc.cost,
    };
    Ok((solution, report))
}
