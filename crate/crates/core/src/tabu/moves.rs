//! Neighbourhood moves, their incremental evaluation and application.
//!
//! * Relocate, the (1,0) change: a customer leaves its route and is
//!   inserted into another at the cheapest position.
//! * IntraSwap, the (0,1) change: two customers of one route trade
//!   positions.
//! * InterSwap, the (1,1) change: two customers of different routes trade
//!   places, each taking the other's position.
//!
//! Candidate pairs are limited to a granular neighbourhood: a customer is
//! only paired with its `breadth` nearest customers (a pair qualifies when
//! either end lists the other).

use crate::instance::{DistanceMatrix, Instance};
use crate::scalar::Scalar;
use crate::solution::{Route, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Index of an existing route.
    Route(usize),
    /// A fresh single-customer route.
    NewRoute,
}

/// Routes are referenced by index into the incumbent's route list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Relocate {
        customer: usize,
        from: usize,
        to: Target,
        /// Insertion index in the target sequence.
        position: usize,
    },
    IntraSwap {
        route: usize,
        i: usize,
        j: usize,
    },
    InterSwap {
        a: usize,
        b: usize,
        route_a: usize,
        route_b: usize,
    },
}

impl Move {
    pub fn kind(&self) -> &'static str {
        match self {
            Move::Relocate { .. } => "relocate",
            Move::IntraSwap { .. } => "intra_swap",
            Move::InterSwap { .. } => "inter_swap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T = f64> {
    pub mv: Move,
    pub delta_cost: T,
    pub delta_excess: i64,
    /// Incumbent totals after the move.
    pub cost: T,
    pub excess: u64,
}

/// Each customer's other customers ordered by distance (ties by id), with
/// the inverse ranks for constant-time membership tests.
#[derive(Debug, Clone)]
pub struct NearestNeighbors {
    order: Vec<Vec<usize>>,
    rank: Vec<Vec<u32>>,
}

impl NearestNeighbors {
    pub fn new<T: Scalar>(matrix: &DistanceMatrix<T>) -> Self {
        let n = matrix.len() - 1;
        let mut order = vec![Vec::new(); n + 1];
        let mut rank = vec![Vec::new(); n + 1];
        for c in 1..=n {
            let mut others: Vec<usize> = (1..=n).filter(|&d| d != c).collect();
            others.sort_by(|&x, &y| {
                matrix
                    .get(c, x)
                    .partial_cmp(&matrix.get(c, y))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(x.cmp(&y))
            });
            let mut r = vec![u32::MAX; n + 1];
            for (k, &d) in others.iter().enumerate() {
                r[d] = k as u32;
            }
            order[c] = others;
            rank[c] = r;
        }
        Self { order, rank }
    }

    pub fn nearest(&self, c: usize, breadth: usize) -> &[usize] {
        let list = &self.order[c];
        &list[..breadth.min(list.len())]
    }

    /// `d` is among the `breadth` nearest customers of `c`.
    #[inline]
    pub fn within(&self, c: usize, d: usize, breadth: usize) -> bool {
        (self.rank[c][d] as usize) < breadth
    }
}

/// Position of every customer: `(route index, index in route)`.
pub fn locate<T: Scalar>(solution: &Solution<T>, num_customers: usize) -> Vec<(usize, usize)> {
    let mut at = vec![(usize::MAX, usize::MAX); num_customers + 1];
    for (r, route) in solution.routes().iter().enumerate() {
        for (k, &c) in route.customers().iter().enumerate() {
            at[c] = (r, k);
        }
    }
    at
}

#[inline]
fn before(seq: &[usize], k: usize) -> usize {
    if k == 0 {
        0
    } else {
        seq[k - 1]
    }
}

#[inline]
fn after(seq: &[usize], k: usize) -> usize {
    seq.get(k + 1).copied().unwrap_or(0)
}

/// Cheapest insertion of `c` into `seq`: `(position, added length)`.
/// The first cheapest position wins ties.
pub fn best_insertion<T: Scalar>(seq: &[usize], c: usize, m: &DistanceMatrix<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for k in 0..=seq.len() {
        let a = before(seq, k);
        let b = seq.get(k).copied().unwrap_or(0);
        let add = m.get(a, c) + m.get(c, b) - m.get(a, b);
        if add < best.1 {
            best = (k, add);
        }
    }
    best
}

fn removal_delta<T: Scalar>(seq: &[usize], k: usize, m: &DistanceMatrix<T>) -> T {
    let (p, c, n) = (before(seq, k), seq[k], after(seq, k));
    m.get(p, n) - m.get(p, c) - m.get(c, n)
}

fn replace_delta<T: Scalar>(seq: &[usize], k: usize, new: usize, m: &DistanceMatrix<T>) -> T {
    let (p, old, n) = (before(seq, k), seq[k], after(seq, k));
    m.get(p, new) + m.get(new, n) - m.get(p, old) - m.get(old, n)
}

/// Length change of swapping positions `i < j` within one route.
pub fn intra_swap_delta<T: Scalar>(seq: &[usize], i: usize, j: usize, m: &DistanceMatrix<T>) -> T {
    debug_assert!(i < j);
    let (a, b) = (seq[i], seq[j]);
    if j == i + 1 {
        let (p, n) = (before(seq, i), after(seq, j));
        m.get(p, b) + m.get(a, n) - m.get(p, a) - m.get(b, n)
    } else {
        replace_delta(seq, i, b, m) + replace_delta(seq, j, a, m)
    }
}

fn excess(load: u64, q: u64) -> i64 {
    load.saturating_sub(q) as i64
}

pub struct NeighborhoodContext<'a, T> {
    pub instance: &'a Instance<T>,
    pub matrix: &'a DistanceMatrix<T>,
    pub neighbors: &'a NearestNeighbors,
    pub breadth: usize,
}

/// Every admissible move from `solution`, in a fixed order: relocates by
/// customer then target route, then swaps by customer pair. New-route
/// relocates are offered only for customers of overloaded routes.
pub fn generate_neighborhood<T: Scalar>(
    solution: &Solution<T>,
    ctx: &NeighborhoodContext<'_, T>,
) -> Vec<Candidate<T>> {
    let inst = ctx.instance;
    let m = ctx.matrix;
    let q = inst.capacity();
    let n = inst.num_customers();
    let routes = solution.routes();
    let at = locate(solution, n);
    let full = ctx.breadth >= n.saturating_sub(1);
    let (base_cost, base_excess) = (solution.cost(), solution.excess());
    let mut out = Vec::new();
    let mut push = |mv: Move, delta_cost: T, delta_excess: i64| {
        out.push(Candidate {
            mv,
            delta_cost,
            delta_excess,
            cost: base_cost + delta_cost,
            excess: (base_excess as i64 + delta_excess) as u64,
        });
    };

    let mut targets = vec![false; routes.len()];
    for c in 1..=n {
        let (rc, kc) = at[c];
        let src = &routes[rc];
        let dc = inst.demand(c);
        let remove = removal_delta(src.customers(), kc, m);
        let src_gain = excess(src.load() - dc, q) - excess(src.load(), q);

        targets.iter_mut().for_each(|t| *t = full);
        if !full {
            for &d in ctx.neighbors.nearest(c, ctx.breadth) {
                targets[at[d].0] = true;
            }
        }
        for (rt, dst) in routes.iter().enumerate() {
            if rt == rc || !targets[rt] {
                continue;
            }
            let (pos, add) = best_insertion(dst.customers(), c, m);
            let dst_gain = excess(dst.load() + dc, q) - excess(dst.load(), q);
            push(
                Move::Relocate {
                    customer: c,
                    from: rc,
                    to: Target::Route(rt),
                    position: pos,
                },
                remove + add,
                src_gain + dst_gain,
            );
        }
        if src.load() > q && src.len() > 1 {
            let add = m.get(0, c) + m.get(c, 0);
            push(
                Move::Relocate {
                    customer: c,
                    from: rc,
                    to: Target::NewRoute,
                    position: 0,
                },
                remove + add,
                src_gain + excess(dc, q),
            );
        }
    }

    for a in 1..=n {
        let partners: &[usize] = ctx.neighbors.nearest(a, ctx.breadth);
        let mut pairs: Vec<usize> = partners
            .iter()
            .copied()
            .filter(|&b| !(b < a && ctx.neighbors.within(b, a, ctx.breadth)))
            .collect();
        pairs.sort_unstable();
        for b in pairs {
            let ((ra, ka), (rb, kb)) = (at[a], at[b]);
            if ra == rb {
                let (i, j) = if ka < kb { (ka, kb) } else { (kb, ka) };
                let seq = routes[ra].customers();
                push(Move::IntraSwap { route: ra, i, j }, intra_swap_delta(seq, i, j, m), 0);
            } else {
                let (x, y) = (&routes[ra], &routes[rb]);
                let (da, db) = (inst.demand(a), inst.demand(b));
                let delta = replace_delta(x.customers(), ka, b, m) + replace_delta(y.customers(), kb, a, m);
                let ex = excess(x.load() - da + db, q) + excess(y.load() - db + da, q)
                    - excess(x.load(), q)
                    - excess(y.load(), q);
                push(
                    Move::InterSwap {
                        a,
                        b,
                        route_a: ra,
                        route_b: rb,
                    },
                    delta,
                    ex,
                );
            }
        }
    }
    out
}

/// Applies `mv` to `solution`, recomputing the touched routes from scratch.
/// A route emptied by a relocate is dropped. `new_route_id` is the identity
/// given to a route created by a new-route relocate.
pub fn apply_move<T: Scalar>(
    solution: &mut Solution<T>,
    mv: &Move,
    instance: &Instance<T>,
    matrix: &DistanceMatrix<T>,
    new_route_id: u32,
) {
    match *mv {
        Move::Relocate {
            customer,
            from,
            to,
            position,
        } => {
            match to {
                Target::Route(r) => solution
                    .route_mut(r)
                    .edit(instance, matrix, |s| s.insert(position, customer)),
                Target::NewRoute => {
                    solution.push_route(Route::new(new_route_id, vec![customer], instance, matrix))
                }
            }
            solution
                .route_mut(from)
                .edit(instance, matrix, |s| s.retain(|&c| c != customer));
        }
        Move::IntraSwap { route, i, j } => {
            solution.route_mut(route).edit(instance, matrix, |s| s.swap(i, j));
        }
        Move::InterSwap {
            a,
            b,
            route_a,
            route_b,
        } => {
            let swap = |s: &mut Vec<usize>, old: usize, new: usize| {
                if let Some(slot) = s.iter_mut().find(|c| **c == old) {
                    *slot = new;
                }
            };
            solution.route_mut(route_a).edit(instance, matrix, |s| swap(s, a, b));
            solution.route_mut(route_b).edit(instance, matrix, |s| swap(s, b, a));
        }
    }
    solution.refresh_totals(instance);
}

/// `(customer, route index)` pairs a move would create, used for tabu
/// checks: the customer arriving in a route it may have recently left.
/// A new route is never tabu and is reported as `None`.
pub fn arrivals(mv: &Move) -> Vec<(usize, Option<usize>)> {
    match *mv {
        Move::Relocate { customer, to, .. } => match to {
            Target::Route(r) => vec![(customer, Some(r))],
            Target::NewRoute => vec![(customer, None)],
        },
        Move::IntraSwap { .. } => Vec::new(),
        Move::InterSwap {
            a,
            b,
            route_a,
            route_b,
        } => vec![(a, Some(route_b)), (b, Some(route_a))],
    }
}

/// `(customer, route index)` pairs that become tabu after the move: each
/// moved customer with the route it came from.
pub fn departures<T: Scalar>(mv: &Move, solution: &Solution<T>) -> Vec<(usize, usize)> {
    match *mv {
        Move::Relocate { customer, from, .. } => vec![(customer, from)],
        Move::IntraSwap { route, i, j } => {
            let s = solution.routes()[route].customers();
            vec![(s[i], route), (s[j], route)]
        }
        Move::InterSwap {
            a,
            b,
            route_a,
            route_b,
        } => vec![(a, route_a), (b, route_b)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_distance_matrix, Location};
    use crate::solution::validate;

    fn instance(points: &[(f64, f64, u64)], q: u64) -> (Instance, DistanceMatrix) {
        let mut locs = vec![Location { id: 0, x: 0.0, y: 0.0, demand: 0 }];
        for (k, &(x, y, d)) in points.iter().enumerate() {
            locs.push(Location { id: k + 1, x, y, demand: d });
        }
        let inst = Instance::new("t", q, locs).unwrap();
        let m = build_distance_matrix(&inst);
        (inst, m)
    }

    fn neighborhood(s: &Solution, inst: &Instance, m: &DistanceMatrix) -> Vec<Candidate> {
        let nn = NearestNeighbors::new(m);
        let ctx = NeighborhoodContext {
            instance: inst,
            matrix: m,
            neighbors: &nn,
            breadth: inst.num_customers(),
        };
        generate_neighborhood(s, &ctx)
    }

    fn count(c: &[Candidate], kind: &str) -> usize {
        c.iter().filter(|x| x.mv.kind() == kind).count()
    }

    #[test]
    fn two_singleton_routes() {
        let (inst, m) = instance(&[(1.0, 0.0, 1), (0.0, 1.0, 1)], 5);
        let s = Solution::from_sequences(vec![vec![1], vec![2]], &inst, &m);
        let c = neighborhood(&s, &inst, &m);
        assert_eq!(count(&c, "relocate"), 2);
        assert_eq!(count(&c, "inter_swap"), 1);
        assert_eq!(count(&c, "intra_swap"), 0);
    }

    #[test]
    fn one_route_of_three() {
        let (inst, m) = instance(&[(1.0, 0.0, 1), (0.0, 1.0, 1), (1.0, 1.0, 1)], 5);
        let s = Solution::from_sequences(vec![vec![1, 2, 3]], &inst, &m);
        let c = neighborhood(&s, &inst, &m);
        assert_eq!(count(&c, "relocate"), 0);
        assert_eq!(count(&c, "inter_swap"), 0);
        assert_eq!(count(&c, "intra_swap"), 3);
    }

    #[test]
    fn deltas_match_recomputation() {
        let pts = [
            (3.0, 1.0, 4),
            (-2.0, 5.0, 3),
            (7.0, -1.0, 5),
            (0.5, -4.0, 2),
            (-6.0, -2.0, 6),
            (4.0, 4.0, 3),
            (-1.0, 2.0, 4),
        ];
        let (inst, m) = instance(&pts, 10);
        let s = Solution::from_sequences(vec![vec![1, 2, 3], vec![4, 5], vec![6, 7]], &inst, &m);
        for cand in neighborhood(&s, &inst, &m) {
            let mut t = s.clone();
            apply_move(&mut t, &cand.mv, &inst, &m, 99);
            validate(&t, &inst, &m).unwrap();
            assert!((t.cost() - cand.cost).abs() < 1e-9, "{cand:?}");
            assert_eq!(t.excess(), cand.excess, "{cand:?}");
        }
    }

    #[test]
    fn new_route_offered_only_when_overloaded() {
        let (inst, m) = instance(&[(1.0, 0.0, 3), (2.0, 0.0, 3)], 4);
        let s = Solution::from_sequences(vec![vec![1, 2]], &inst, &m);
        let c = neighborhood(&s, &inst, &m);
        assert_eq!(count(&c, "relocate"), 2);
        for cand in &c {
            if cand.mv.kind() == "relocate" {
                assert_eq!(cand.excess, 0);
            }
        }
        let (inst, m) = instance(&[(1.0, 0.0, 1), (2.0, 0.0, 1)], 4);
        let s = Solution::from_sequences(vec![vec![1, 2]], &inst, &m);
        assert_eq!(count(&neighborhood(&s, &inst, &m), "relocate"), 0);
    }

    #[test]
    fn narrow_breadth_limits_pairs() {
        let pts: Vec<(f64, f64, u64)> = (0..6).map(|k| (k as f64 * 10.0, 1.0, 1)).collect();
        let (inst, m) = instance(&pts, 100);
        let s = Solution::from_sequences(vec![(1..=6).collect::<Vec<_>>()], &inst, &m);
        let nn = NearestNeighbors::new(&m);
        let ctx = NeighborhoodContext { instance: &inst, matrix: &m, neighbors: &nn, breadth: 1 };
        let c = generate_neighborhood(&s, &ctx);
        // Nearest partner on a line: only the 5 adjacent pairs survive.
        assert_eq!(count(&c, "intra_swap"), 5);
    }
}
