//! Per-route TSP as a QUBO.
//!
//! Variables `x[c, p]` say that the `c`-th customer of the route is visited
//! at position `p`; the flat index is `c * n + p`. The energy is
//!
//! ```text
//! H = A * sum_c (1 - sum_p x[c,p])^2 + A * sum_p (1 - sum_c x[c,p])^2
//!   + B * sum_{p < n-1} sum_{i != j} c(i,j) x[i,p] x[j,p+1]
//!   + B * sum_i c(0,i) (x[i,0] + x[i,n-1])
//! ```
//!
//! The depot is not a variable: every tour passes through it exactly once,
//! so its two legs become linear terms on the first and last positions and
//! the wraparound edge between positions `n-1` and `0` is not encoded. This
//! keeps the grid at `n^2` variables instead of `(n+1)^2`. On a complete
//! graph the missing-edge penalty family vanishes.
//!
//! For a permutation assignment the penalty part is exactly zero and the
//! energy equals `B` times the depot-anchored tour length.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::DistanceMatrix;
use crate::scalar::Scalar;

/// Upper-triangular sparse QUBO. `(i, i)` keys hold linear coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo<T = f64> {
    num_vars: usize,
    coefficients: BTreeMap<(usize, usize), T>,
    offset: T,
}

impl<T: Scalar> Qubo<T> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            coefficients: BTreeMap::new(),
            offset: T::zero(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn add_offset(&mut self, v: T) {
        self.offset = self.offset + v;
    }

    /// Accumulates `v * x_i * x_j`. Order of `i`, `j` does not matter and
    /// `i == j` is a linear term (`x^2 = x`). Entries that cancel to zero
    /// are removed.
    ///
    /// # Panics
    ///
    /// Panics if an index is out of range.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(i < self.num_vars && j < self.num_vars, "variable index out of range");
        if v == T::zero() {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let entry = self.coefficients.entry(key).or_insert(T::zero());
        *entry = *entry + v;
        if *entry == T::zero() {
            self.coefficients.remove(&key);
        }
    }

    pub fn coefficient(&self, i: usize, j: usize) -> T {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.coefficients.get(&key).copied().unwrap_or(T::zero())
    }

    /// Stored terms in key order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.coefficients.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn num_terms(&self) -> usize {
        self.coefficients.len()
    }

    pub fn max_abs_coefficient(&self) -> T {
        self.coefficients
            .values()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn to_wire(&self) -> WireQubo {
        WireQubo {
            num_vars: self.num_vars,
            offset: self.offset.as_f64(),
            terms: self.terms().map(|(i, j, v)| (i, j, v.as_f64())).collect(),
        }
    }

    pub fn from_wire(wire: &WireQubo) -> Result<Self, QuboError> {
        let mut q = Self::new(wire.num_vars);
        q.offset = T::of(wire.offset);
        for &(i, j, v) in &wire.terms {
            if i >= wire.num_vars || j >= wire.num_vars {
                return Err(QuboError::IndexOutOfRange { index: i.max(j), num_vars: wire.num_vars });
            }
            q.add(i, j, T::of(v));
        }
        Ok(q)
    }
}

/// JSON form `{"num_vars": n, "offset": r, "terms": [[i, j, c], ...]}`.
/// Also the payload of the remote sampler protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireQubo {
    pub num_vars: usize,
    pub offset: f64,
    pub terms: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuboError {
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("route must contain at least one customer")]
    EmptyRoute,
    #[error("customer {0} appears twice in the route")]
    DuplicateCustomer(usize),
    #[error("the depot cannot be a routed customer")]
    DepotInRoute,
}

/// Evaluates `offset + sum of coefficients over set bits`.
///
/// # Panics
///
/// Panics if `bits.len() != qubo.num_vars()`.
pub fn qubo_energy<T: Scalar>(qubo: &Qubo<T>, bits: &[u8]) -> T {
    assert_eq!(bits.len(), qubo.num_vars, "bit vector length must equal num_vars");
    qubo.terms()
        .filter(|&(i, j, _)| bits[i] != 0 && bits[j] != 0)
        .fold(qubo.offset, |e, (_, _, v)| e + v)
}

/// Constraint weight `A` and cost weight `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig<T = f64> {
    pub a: T,
    pub b: T,
}

/// `B = 1`, `A = 2 * max(costs)`; `A` floors at 1 when every cost is zero.
pub fn default_penalties<T: Scalar>(costs: impl IntoIterator<Item = T>) -> PenaltyConfig<T> {
    let max = costs.into_iter().fold(T::zero(), |m, c| m.max(c));
    let a = if max > T::zero() { T::of(2.0) * max } else { T::one() };
    PenaltyConfig { a, b: T::one() }
}

/// Default penalties from the submatrix spanned by the depot and `customers`.
pub fn route_penalties<T: Scalar>(
    customers: &[usize],
    depot: usize,
    matrix: &DistanceMatrix<T>,
) -> PenaltyConfig<T> {
    let nodes: Vec<usize> = std::iter::once(depot).chain(customers.iter().copied()).collect();
    default_penalties(
        nodes
            .iter()
            .flat_map(|&i| nodes.iter().map(move |&j| (i, j)))
            .map(|(i, j)| matrix.get(i, j)),
    )
}

/// Bijection between `(slot, position)` and the flat variable index for a
/// route of `n` customers.
#[derive(Debug, Clone, PartialEq)]
pub struct TspLayout {
    customers: Vec<usize>,
}

impl TspLayout {
    pub fn new(customers: Vec<usize>) -> Self {
        Self { customers }
    }

    pub fn n(&self) -> usize {
        self.customers.len()
    }

    pub fn customers(&self) -> &[usize] {
        &self.customers
    }

    #[inline]
    pub fn var(&self, slot: usize, position: usize) -> usize {
        slot * self.customers.len() + position
    }

    #[inline]
    pub fn slot_position(&self, var: usize) -> (usize, usize) {
        (var / self.customers.len(), var % self.customers.len())
    }

    /// Bits of the permutation that visits `order` (customer ids) in turn.
    ///
    /// # Panics
    ///
    /// Panics if `order` is not a permutation of the layout's customers.
    pub fn encode(&self, order: &[usize]) -> Vec<u8> {
        assert_eq!(order.len(), self.n(), "order must visit every customer once");
        let mut bits = vec![0u8; self.n() * self.n()];
        for (pos, c) in order.iter().enumerate() {
            let slot = self
                .customers
                .iter()
                .position(|x| x == c)
                .expect("order contains a customer outside the layout");
            assert_eq!(bits[self.var(slot, pos)], 0);
            bits[self.var(slot, pos)] = 1;
        }
        bits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspQubo<T = f64> {
    pub qubo: Qubo<T>,
    pub layout: TspLayout,
    pub penalties: PenaltyConfig<T>,
}

pub fn build_tsp_qubo<T: Scalar>(
    customers: &[usize],
    matrix: &DistanceMatrix<T>,
    depot: usize,
    penalties: PenaltyConfig<T>,
) -> Result<TspQubo<T>, QuboError> {
    let n = customers.len();
    if n == 0 {
        return Err(QuboError::EmptyRoute);
    }
    for (k, &c) in customers.iter().enumerate() {
        if c == depot {
            return Err(QuboError::DepotInRoute);
        }
        if customers[..k].contains(&c) {
            return Err(QuboError::DuplicateCustomer(c));
        }
    }
    let layout = TspLayout::new(customers.to_vec());
    let PenaltyConfig { a, b } = penalties;
    let two = T::of(2.0);
    let mut q = Qubo::new(n * n);

    // One-hot rows (each customer once) and columns (each position once):
    // A (1 - sum x)^2 = A - A sum x + 2A sum_{u<v} x_u x_v.
    q.add_offset(two * T::of_usize(n) * a);
    for slot in 0..n {
        for pos in 0..n {
            q.add(layout.var(slot, pos), layout.var(slot, pos), -two * a);
            for other in (pos + 1)..n {
                q.add(layout.var(slot, pos), layout.var(slot, other), two * a);
            }
            for other in (slot + 1)..n {
                q.add(layout.var(slot, pos), layout.var(other, pos), two * a);
            }
        }
    }

    // Tour length between consecutive positions.
    for pos in 0..n.saturating_sub(1) {
        for (si, &ci) in customers.iter().enumerate() {
            for (sj, &cj) in customers.iter().enumerate() {
                if si != sj {
                    q.add(layout.var(si, pos), layout.var(sj, pos + 1), b * matrix.get(ci, cj));
                }
            }
        }
    }

    // Depot legs folded onto the first and last positions.
    for (slot, &c) in customers.iter().enumerate() {
        q.add(layout.var(slot, 0), layout.var(slot, 0), b * matrix.get(depot, c));
        q.add(layout.var(slot, n - 1), layout.var(slot, n - 1), b * matrix.get(c, depot));
    }

    Ok(TspQubo { qubo: q, layout, penalties })
}

/// Which one-hot family a bitstring breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    LengthMismatch { expected: usize, found: usize },
    CityUnassigned(usize),
    CityRepeated(usize),
    PositionEmpty(usize),
    PositionShared(usize),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} bits, found {found}")
            }
            DecodeError::CityUnassigned(c) => write!(f, "city {c} unassigned"),
            DecodeError::CityRepeated(c) => write!(f, "city {c} assigned to several positions"),
            DecodeError::PositionEmpty(p) => write!(f, "position {p} empty"),
            DecodeError::PositionShared(p) => write!(f, "position {p} holds several cities"),
        }
    }
}

impl std::error::Error for DecodeError {}

/// Reads a permutation matrix back into a visiting order of customer ids.
pub fn decode_sample(bits: &[u8], customers: &[usize]) -> Result<Vec<usize>, DecodeError> {
    let n = customers.len();
    if bits.len() != n * n {
        return Err(DecodeError::LengthMismatch { expected: n * n, found: bits.len() });
    }
    let mut order = vec![usize::MAX; n];
    for (slot, &c) in customers.iter().enumerate() {
        let row = &bits[slot * n..(slot + 1) * n];
        let mut set = row.iter().enumerate().filter(|(_, &b)| b != 0).map(|(p, _)| p);
        match (set.next(), set.next()) {
            (None, _) => return Err(DecodeError::CityUnassigned(c)),
            (Some(_), Some(_)) => return Err(DecodeError::CityRepeated(c)),
            (Some(p), None) => {
                if order[p] != usize::MAX {
                    return Err(DecodeError::PositionShared(p));
                }
                order[p] = c;
            }
        }
    }
    // n rows each with one bit and no shared column fill every position.
    if let Some(p) = order.iter().position(|&c| c == usize::MAX) {
        return Err(DecodeError::PositionEmpty(p));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_distance_matrix, Instance, Location};
    use crate::solution::route_cost;

    fn matrix(points: &[(f64, f64)]) -> DistanceMatrix {
        let locs = points
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Location { id, x, y, demand: u64::from(id > 0) })
            .collect();
        build_distance_matrix(&Instance::new("q", 100, locs).unwrap())
    }

    #[test]
    fn penalties_follow_the_doubling_rule() {
        assert_eq!(default_penalties([3.0, 10.0, 7.0]), PenaltyConfig { a: 20.0, b: 1.0 });
        assert_eq!(default_penalties([0.0, 0.0]), PenaltyConfig { a: 1.0, b: 1.0 });
    }

    #[test]
    fn single_customer_route() {
        let m = matrix(&[(0.0, 0.0), (3.0, 4.0)]);
        let tq = build_tsp_qubo(&[1], &m, 0, route_penalties(&[1], 0, &m)).unwrap();
        assert_eq!(tq.qubo.num_vars(), 1);
        assert_eq!(qubo_energy(&tq.qubo, &[1]), 10.0);
        assert_eq!(decode_sample(&[1], &[1]).unwrap(), vec![1]);
    }

    #[test]
    fn permutation_energy_is_tour_length() {
        let m = matrix(&[(0.0, 0.0), (1.0, 5.0), (4.0, 4.0), (-3.0, 2.0), (2.0, -6.0)]);
        let route = [1, 2, 3, 4];
        let tq = build_tsp_qubo(&route, &m, 0, route_penalties(&route, 0, &m)).unwrap();
        for order in [[1, 2, 3, 4], [4, 2, 1, 3], [3, 1, 4, 2]] {
            let bits = tq.layout.encode(&order);
            let e = qubo_energy(&tq.qubo, &bits);
            assert!(f64::approx_eq(e, route_cost(&order, &m)), "{e}");
            assert_eq!(decode_sample(&bits, &route).unwrap(), order.to_vec());
        }
    }

    #[test]
    fn all_zero_energy_is_the_one_hot_penalty() {
        let m = matrix(&[(0.0, 0.0), (1.0, 5.0), (4.0, 4.0), (-3.0, 2.0)]);
        let route = [1, 2, 3];
        let pen = route_penalties(&route, 0, &m);
        let tq = build_tsp_qubo(&route, &m, 0, pen).unwrap();
        let e = qubo_energy(&tq.qubo, &[0; 9]);
        assert_eq!(e, 2.0 * 3.0 * pen.a);
        assert_eq!(e, tq.qubo.offset());
    }

    #[test]
    fn decode_reports_the_broken_family() {
        assert_eq!(
            decode_sample(&[0; 9], &[4, 7, 9]).unwrap_err().to_string(),
            "city 4 unassigned"
        );
        let identity = [1, 0, 0, 0, 1, 0, 0, 0, 1];
        assert_eq!(decode_sample(&identity, &[4, 7, 9]).unwrap(), vec![4, 7, 9]);
        let shared = [1, 0, 0, 1, 0, 0, 0, 0, 1];
        assert_eq!(decode_sample(&shared, &[4, 7, 9]), Err(DecodeError::PositionShared(0)));
        let twice = [1, 1, 0, 0, 0, 0, 0, 0, 1];
        assert_eq!(decode_sample(&twice, &[4, 7, 9]), Err(DecodeError::CityRepeated(4)));
    }

    #[test]
    fn coefficients_are_upper_triangular_and_nonzero() {
        let m = matrix(&[(0.0, 0.0), (1.0, 5.0), (4.0, 4.0), (-3.0, 2.0)]);
        let tq = build_tsp_qubo(&[1, 2, 3], &m, 0, route_penalties(&[1, 2, 3], 0, &m)).unwrap();
        assert!(tq.qubo.terms().all(|(i, j, v)| i <= j && v != 0.0));
    }

    #[test]
    fn energy_is_additive_over_term_subsets() {
        let m = matrix(&[(0.0, 0.0), (1.0, 5.0), (4.0, 4.0), (-3.0, 2.0)]);
        let tq = build_tsp_qubo(&[1, 2, 3], &m, 0, route_penalties(&[1, 2, 3], 0, &m)).unwrap();
        let bits = [1, 0, 1, 0, 1, 1, 0, 0, 1];
        let (mut left, mut right) = (Qubo::new(9), Qubo::new(9));
        left.add_offset(tq.qubo.offset());
        for (k, (i, j, v)) in tq.qubo.terms().enumerate() {
            if k % 2 == 0 { left.add(i, j, v) } else { right.add(i, j, v) }
        }
        let whole = qubo_energy(&tq.qubo, &bits);
        let parts = qubo_energy(&left, &bits) + qubo_energy(&right, &bits);
        assert!(f64::approx_eq(whole, parts));
    }

    #[test]
    fn rejects_bad_routes() {
        let m = matrix(&[(0.0, 0.0), (1.0, 5.0)]);
        let pen = PenaltyConfig { a: 1.0, b: 1.0 };
        assert_eq!(build_tsp_qubo(&[], &m, 0, pen).unwrap_err(), QuboError::EmptyRoute);
        assert_eq!(build_tsp_qubo(&[1, 1], &m, 0, pen).unwrap_err(), QuboError::DuplicateCustomer(1));
        assert_eq!(build_tsp_qubo(&[0], &m, 0, pen).unwrap_err(), QuboError::DepotInRoute);
    }

    #[test]
    fn wire_round_trip() {
        let m = matrix(&[(0.0, 0.0), (1.0, 5.0), (4.0, 4.0)]);
        let tq = build_tsp_qubo(&[1, 2], &m, 0, route_penalties(&[1, 2], 0, &m)).unwrap();
        let back: Qubo = Qubo::from_wire(&tq.qubo.to_wire()).unwrap();
        assert_eq!(back, tq.qubo);
    }

    #[test]
    fn f32_qubo_energy() {
        let locs = [(0.0f32, 0.0f32), (3.0, 4.0), (6.0, 8.0)]
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Location { id, x, y, demand: u64::from(id > 0) })
            .collect();
        let m = build_distance_matrix(&Instance::<f32>::new("q", 9, locs).unwrap());
        let tq = build_tsp_qubo(&[1, 2], &m, 0, route_penalties(&[1, 2], 0, &m)).unwrap();
        assert!(f32::approx_eq(qubo_energy(&tq.qubo, &tq.layout.encode(&[1, 2])), 20.0));
    }
}
