//! Route sets, their cost and load bookkeeping, and structural validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::{DistanceMatrix, Instance};
use crate::scalar::Scalar;

/// Length of a depot-anchored route: depot to first, consecutive legs, last
/// back to the depot. An empty sequence has length zero.
///
/// # Panics
///
/// Panics if an id is outside the matrix.
pub fn route_cost<T: Scalar>(customers: &[usize], matrix: &DistanceMatrix<T>) -> T {
    let (Some(&first), Some(&last)) = (customers.first(), customers.last()) else {
        return T::zero();
    };
    let inner: T = customers
        .windows(2)
        .map(|w| matrix.get(w[0], w[1]))
        .sum();
    matrix.get(0, first) + inner + matrix.get(last, 0)
}

pub fn route_load<T: Scalar>(customers: &[usize], instance: &Instance<T>) -> u64 {
    customers.iter().map(|&c| instance.demand(c)).sum()
}

/// One vehicle's tour. The depot is implicit at both ends.
///
/// `id` is a stable identity that survives reordering and membership
/// changes; the tabu memory keys on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Route<T = f64> {
    pub id: u32,
    customers: Vec<usize>,
    load: u64,
    cost: T,
}

impl<T: Scalar> Route<T> {
    pub fn new(
        id: u32,
        customers: Vec<usize>,
        instance: &Instance<T>,
        matrix: &DistanceMatrix<T>,
    ) -> Self {
        let load = route_load(&customers, instance);
        let cost = route_cost(&customers, matrix);
        Self {
            id,
            customers,
            load,
            cost,
        }
    }

    pub fn customers(&self) -> &[usize] {
        &self.customers
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn load(&self) -> u64 {
        self.load
    }

    pub fn cost(&self) -> T {
        self.cost
    }

    pub fn excess(&self, capacity: u64) -> u64 {
        self.load.saturating_sub(capacity)
    }

    /// Mutates the sequence and refreshes both caches from scratch.
    pub fn edit(
        &mut self,
        instance: &Instance<T>,
        matrix: &DistanceMatrix<T>,
        f: impl FnOnce(&mut Vec<usize>),
    ) {
        f(&mut self.customers);
        self.load = route_load(&self.customers, instance);
        self.cost = route_cost(&self.customers, matrix);
    }

    #[cfg(test)]
    pub(crate) fn corrupt_cost(&mut self, delta: T) {
        self.cost = self.cost + delta;
    }
}

/// A set of routes with cached totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T = f64> {
    routes: Vec<Route<T>>,
    total_cost: T,
    total_excess: u64,
}

impl<T: Scalar> Solution<T> {
    /// Builds a solution from plain sequences. Empty sequences are dropped
    /// and routes get ids `0..k` in order.
    pub fn from_sequences(
        sequences: impl IntoIterator<Item = Vec<usize>>,
        instance: &Instance<T>,
        matrix: &DistanceMatrix<T>,
    ) -> Self {
        let routes = sequences
            .into_iter()
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(i, s)| Route::new(i as u32, s, instance, matrix))
            .collect();
        Self::from_routes(routes, instance)
    }

    pub fn from_routes(routes: Vec<Route<T>>, instance: &Instance<T>) -> Self {
        let mut s = Self {
            routes,
            total_cost: T::zero(),
            total_excess: 0,
        };
        s.refresh_totals(instance);
        s
    }

    pub fn routes(&self) -> &[Route<T>] {
        &self.routes
    }

    pub fn num_routes(&self) -> usize {
        self.routes.len()
    }

    /// Cached total length.
    pub fn cost(&self) -> T {
        self.total_cost
    }

    /// Cached total capacity excess.
    pub fn excess(&self) -> u64 {
        self.total_excess
    }

    pub fn is_feasible(&self) -> bool {
        self.total_excess == 0
    }

    pub fn sequences(&self) -> Vec<Vec<usize>> {
        self.routes.iter().map(|r| r.customers.clone()).collect()
    }

    pub fn max_route_id(&self) -> Option<u32> {
        self.routes.iter().map(|r| r.id).max()
    }

    pub fn route_mut(&mut self, idx: usize) -> &mut Route<T> {
        &mut self.routes[idx]
    }

    pub fn push_route(&mut self, route: Route<T>) {
        self.routes.push(route);
    }

    /// Drops empty routes and recomputes the totals from the route caches.
    pub fn refresh_totals(&mut self, instance: &Instance<T>) {
        self.routes.retain(|r| !r.is_empty());
        self.total_cost = self.routes.iter().map(|r| r.cost).sum();
        let q = instance.capacity();
        self.total_excess = self.routes.iter().map(|r| r.excess(q)).sum();
    }

    pub fn to_json(&self) -> SolutionJson {
        SolutionJson {
            routes: self.sequences(),
            cost: Some(self.total_cost.as_f64()),
            feasible: Some(self.is_feasible()),
            excess: Some(self.total_excess),
        }
    }
}

/// Sum of route lengths, recomputed from the route caches.
pub fn solution_cost<T: Scalar>(solution: &Solution<T>) -> T {
    solution.routes.iter().map(|r| r.cost).sum()
}

/// Every route load within capacity (boundary inclusive).
pub fn is_feasible<T: Scalar>(solution: &Solution<T>, instance: &Instance<T>) -> bool {
    solution
        .routes
        .iter()
        .all(|r| route_load(&r.customers, instance) <= instance.capacity())
}

/// Total capacity excess: sum over routes of `max(0, load - Q)`.
pub fn infeasibility<T: Scalar>(solution: &Solution<T>, instance: &Instance<T>) -> u64 {
    solution
        .routes
        .iter()
        .map(|r| route_load(&r.customers, instance).saturating_sub(instance.capacity()))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingCustomer(usize),
    DuplicateVisit(usize),
    UnknownId(usize),
    EmptyRoute { route: usize },
    StaleLoad { route: usize, cached: u64, actual: u64 },
    StaleRouteCost { route: usize, cached: f64, actual: f64 },
    StaleTotalCost { cached: f64, actual: f64 },
    StaleExcess { cached: u64, actual: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingCustomer(c) => write!(f, "customer {c} is not visited"),
            Violation::DuplicateVisit(c) => write!(f, "customer {c} is visited more than once"),
            Violation::UnknownId(c) => write!(f, "unknown customer id {c}"),
            Violation::EmptyRoute { route } => write!(f, "route {route} is empty"),
            Violation::StaleLoad { route, cached, actual } => {
                write!(f, "route {route} caches load {cached}, actual {actual}")
            }
            Violation::StaleRouteCost { route, cached, actual } => {
                write!(f, "route {route} caches cost {cached}, actual {actual}")
            }
            Violation::StaleTotalCost { cached, actual } => {
                write!(f, "solution caches cost {cached}, actual {actual}")
            }
            Violation::StaleExcess { cached, actual } => {
                write!(f, "solution caches excess {cached}, actual {actual}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl std::error::Error for ValidationReport {}

/// Checks coverage (each customer exactly once, no unknown ids), nonempty
/// routes and that every cache agrees with a from-scratch recomputation.
pub fn validate<T: Scalar>(
    solution: &Solution<T>,
    instance: &Instance<T>,
    matrix: &DistanceMatrix<T>,
) -> Result<(), ValidationReport> {
    let n = instance.num_customers();
    let mut seen = vec![0usize; n + 1];
    let mut violations = Vec::new();
    let mut total = T::zero();
    let mut all_known = true;
    for (idx, route) in solution.routes.iter().enumerate() {
        if route.is_empty() {
            violations.push(Violation::EmptyRoute { route: idx });
        }
        let mut known = true;
        for &c in &route.customers {
            if c == 0 || c > n {
                violations.push(Violation::UnknownId(c));
                known = false;
            } else {
                seen[c] += 1;
            }
        }
        if !known {
            all_known = false;
            continue;
        }
        let load = route_load(&route.customers, instance);
        if load != route.load {
            violations.push(Violation::StaleLoad {
                route: idx,
                cached: route.load,
                actual: load,
            });
        }
        let cost = route_cost(&route.customers, matrix);
        total = total + cost;
        if !T::approx_eq(cost, route.cost) {
            violations.push(Violation::StaleRouteCost {
                route: idx,
                cached: route.cost.as_f64(),
                actual: cost.as_f64(),
            });
        }
    }
    for (c, &count) in seen.iter().enumerate().skip(1) {
        match count {
            0 => violations.push(Violation::MissingCustomer(c)),
            1 => {}
            _ => violations.push(Violation::DuplicateVisit(c)),
        }
    }
    if !all_known {
        return Err(ValidationReport { violations });
    }
    if !T::approx_eq(total, solution.total_cost) {
        violations.push(Violation::StaleTotalCost {
            cached: solution.total_cost.as_f64(),
            actual: total.as_f64(),
        });
    }
    let excess = infeasibility(solution, instance);
    if excess != solution.total_excess {
        violations.push(Violation::StaleExcess {
            cached: solution.total_excess,
            actual: excess,
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ValidationReport { violations })
    }
}

/// Wire form of a solution: routes as arrays of customer ids. The derived
/// fields are informative on input and always filled on output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub routes: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess: Option<u64>,
}
