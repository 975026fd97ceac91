//! Tabu search over customer-to-route assignments with periodic QUBO
//! re-sequencing of the best solution's routes.
//!
//! One iteration: generate the neighbourhood of the incumbent, select with
//! strategic oscillation, apply, then
//! * re-sequence the global best through the sampler once `routing_delay`
//!   iterations have passed without a new global best (the result becomes
//!   the incumbent), and
//! * after a random number of non-improving iterations, alternately clear
//!   the tabu list (intensify) or toggle the neighbourhood breadth
//!   (diversify).
//!
//! The search stops after `stop_factor * N` consecutive iterations without
//! a new global best.

pub mod memory;
pub mod moves;
pub mod reroute;
pub mod select;
pub mod trace;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{DistanceMatrix, Instance};
use crate::sampler::Sampler;
use crate::scalar::Scalar;
use crate::solution::{validate, Solution, ValidationReport};

pub use memory::TabuList;
pub use moves::{apply_move, generate_neighborhood, Candidate, Move, NearestNeighbors, Target};
pub use reroute::{quantum_reroute, PenaltyRule, RerouteAccept, RerouteStats};
pub use select::{select_next, CandidateView, Pick, Selection};
pub use trace::{EventKind, TraceEvent};

/// Default narrow neighbourhood breadth.
pub const BASE_BREADTH: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams<T = f64> {
    /// Non-improving iterations before the best solution is re-sequenced.
    pub routing_delay: usize,
    /// Tabu tenure bounds as fractions of N.
    pub tenure_range: (f64, f64),
    /// Intensify/diversify threshold bounds as fractions of N.
    pub trigger_range: (f64, f64),
    /// Stop after `stop_factor * N` iterations without a new global best.
    pub stop_factor: usize,
    pub seed: u64,
    /// `(narrow, wide)` nearest-neighbour breadths; `None` for
    /// `(min(N, 15), N)`.
    pub neighbor_breadth: Option<(usize, usize)>,
    pub reroute_accept: RerouteAccept,
    pub penalties: PenaltyRule<T>,
    pub time_limit: Option<Duration>,
    pub max_iterations: Option<u64>,
    /// Record `elapsed_ms` on trace events. Off by default so equal runs
    /// produce identical traces.
    pub trace_timing: bool,
    /// Keep `move` events in the trace (the other events are always kept).
    pub trace_moves: bool,
}

impl<T: Scalar> Default for SearchParams<T> {
    fn default() -> Self {
        Self {
            routing_delay: 250,
            tenure_range: (0.4, 0.6),
            trigger_range: (0.6, 1.1),
            stop_factor: 100,
            seed: 0,
            neighbor_breadth: None,
            reroute_accept: RerouteAccept::Better,
            penalties: PenaltyRule::PerRoute,
            time_limit: None,
            max_iterations: None,
            trace_timing: false,
            trace_moves: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("start solution is invalid: {0}")]
    InvalidStart(ValidationReport),
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
}

/// Integer range `[round(lo * n), round(hi * n)]`, lower end at least 1.
pub fn fraction_range(n: usize, (lo, hi): (f64, f64)) -> (u64, u64) {
    let a = ((lo * n as f64).round() as u64).max(1);
    let b = ((hi * n as f64).round() as u64).max(a);
    (a, b)
}

impl<T: Scalar> SearchParams<T> {
    /// Resolved `(narrow, wide)` breadths for `n` customers.
    pub fn breadths(&self, n: usize) -> (usize, usize) {
        self.neighbor_breadth
            .unwrap_or((n.min(BASE_BREADTH), n))
    }

    pub fn validate(&self, n: usize) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidParams(m));
        if self.routing_delay == 0 || self.stop_factor == 0 {
            return bad("routing_delay and stop_factor must be positive".into());
        }
        for (name, (lo, hi)) in [("tenure", self.tenure_range), ("trigger", self.trigger_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} range must satisfy 0 < lo <= hi"));
            }
        }
        let (p, w) = self.breadths(n);
        if p == 0 || p > w || w > n.max(1) {
            return bad(format!("breadths must satisfy 0 < {p} <= {w} <= {n}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    Intensify,
    Diversify,
}

/// Intensify/diversify scheduling: fires when the counter reaches the
/// current threshold, alternating kinds starting with intensify, then
/// redraws the threshold and resets the counter.
#[derive(Debug, Clone)]
pub struct TriggerState {
    range: (u64, u64),
    pub threshold: u64,
    pub counter: u64,
    next: Trigger,
}

impl TriggerState {
    pub fn new<R: Rng>(n: usize, fractions: (f64, f64), rng: &mut R) -> Self {
        let range = fraction_range(n, fractions);
        Self {
            range,
            threshold: rng.gen_range(range.0..=range.1),
            counter: 0,
            next: Trigger::Intensify,
        }
    }

    pub fn range(&self) -> (u64, u64) {
        self.range
    }

    pub fn check<R: Rng>(&mut self, rng: &mut R) -> Option<Trigger> {
        if self.counter < self.threshold {
            return None;
        }
        let fired = self.next;
        self.next = match fired {
            Trigger::Intensify => Trigger::Diversify,
            Trigger::Diversify => Trigger::Intensify,
        };
        self.threshold = rng.gen_range(self.range.0..=self.range.1);
        self.counter = 0;
        Some(fired)
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult<T = f64> {
    /// Global best if one was found, else the least infeasible incumbent.
    pub best: Solution<T>,
    pub iterations: u64,
    /// Iteration at which `best` was found (0 for the start solution).
    pub iterations_to_best: u64,
    pub elapsed: Duration,
    pub reroutes: usize,
    pub sampler_calls: usize,
    pub sampler_failures: usize,
    pub sampler_errors: Vec<String>,
    pub trace: Vec<TraceEvent>,
}

impl<T: Scalar> SearchResult<T> {
    pub fn cost(&self) -> T {
        self.best.cost()
    }
}

struct Run<'a, T: Scalar> {
    params: &'a SearchParams<T>,
    started: Instant,
    trace: Vec<TraceEvent>,
}

impl<T: Scalar> Run<'_, T> {
    fn event(&mut self, iteration: u64, kind: EventKind, s: &Solution<T>) -> &mut TraceEvent {
        let mut e = TraceEvent::new(iteration, kind, s.cost().as_f64(), s.excess());
        if self.params.trace_timing {
            e.elapsed_ms = Some(self.started.elapsed().as_millis() as u64);
        }
        self.trace.push(e);
        self.trace.last_mut().expect("just pushed")
    }
}

fn cheaper_infeasible<T: Scalar>(a: &Solution<T>, b: &Solution<T>) -> bool {
    a.excess() < b.excess() || (a.excess() == b.excess() && a.cost() < b.cost())
}

/// Runs the search from `start` until the stopping rule fires.
pub fn run_search<T: Scalar>(
    instance: &Instance<T>,
    matrix: &DistanceMatrix<T>,
    start: Solution<T>,
    params: &SearchParams<T>,
    sampler: &dyn Sampler<T>,
) -> Result<SearchResult<T>, SearchError> {
    let n = instance.num_customers();
    params.validate(n)?;
    validate(&start, instance, matrix).map_err(SearchError::InvalidStart)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let neighbors = NearestNeighbors::new(matrix);
    let (narrow, wide) = params.breadths(n);
    let mut wide_mode = false;
    let tenure = fraction_range(n, params.tenure_range);
    let mut triggers = TriggerState::new(n, params.trigger_range, &mut rng);
    let stop_after = (params.stop_factor * n) as u64;

    let mut run = Run {
        params,
        started: Instant::now(),
        trace: Vec::new(),
    };
    let mut tabu = TabuList::new();
    let mut next_route_id = start.max_route_id().map_or(0, |m| m + 1);
    let mut incumbent = start;
    let mut best: Option<Solution<T>> = None;
    let mut least_bad = incumbent.clone();
    let mut iterations_to_best = 0u64;
    if incumbent.is_feasible() {
        best = Some(incumbent.clone());
        run.event(0, EventKind::NewBest, &incumbent);
    }

    let mut non_improving = 0u64;
    let mut since_reroute = 0u64;
    let (mut reroutes, mut sampler_calls, mut sampler_failures) = (0, 0, 0);
    let mut sampler_errors = Vec::new();
    let mut iteration = 0u64;

    loop {
        if params.max_iterations.is_some_and(|m| iteration >= m)
            || params
                .time_limit
                .is_some_and(|t| run.started.elapsed() >= t)
            || non_improving >= stop_after
        {
            break;
        }
        iteration += 1;
        let ctx = moves::NeighborhoodContext {
            instance,
            matrix,
            neighbors: &neighbors,
            breadth: if wide_mode { wide } else { narrow },
        };
        let candidates = generate_neighborhood(&incumbent, &ctx);
        if candidates.is_empty() {
            break;
        }
        let ids: Vec<u32> = incumbent.routes().iter().map(|r| r.id).collect();
        let views: Vec<CandidateView<T>> = candidates
            .iter()
            .map(|c| CandidateView {
                cost: c.cost,
                excess: c.excess,
                tabu_until: tabu_expiry(&c.mv, &incumbent, &ids, &tabu, iteration),
            })
            .collect();
        let best_cost = best.as_ref().map(|b| b.cost());
        let selection = select_next(incumbent.is_feasible(), best_cost, &views);

        // A feasible candidate cheaper than the global best that was not
        // selected still becomes the global best.
        let mut improved = false;
        if let Some(k) = selection.new_best.filter(|&k| k != selection.chosen) {
            let mut side = incumbent.clone();
            apply_move(&mut side, &candidates[k].mv, instance, matrix, next_route_id);
            if side.is_feasible() && best_cost.is_none_or(|b| side.cost() < b) {
                best = Some(side);
                improved = true;
            }
        }

        let mv = candidates[selection.chosen].mv;
        let span = rng.gen_range(tenure.0..=tenure.1);
        for (c, r) in moves::departures(&mv, &incumbent) {
            tabu.add(c, ids[r], iteration, span);
        }
        apply_move(&mut incumbent, &mv, instance, matrix, next_route_id);
        if matches!(mv, Move::Relocate { to: Target::NewRoute, .. }) {
            next_route_id += 1;
        }
        if params.trace_moves {
            run.event(iteration, EventKind::Move, &incumbent).kind = Some(mv.kind().to_string());
        }
        if incumbent.is_feasible()
            && best.as_ref().is_none_or(|b| incumbent.cost() < b.cost())
        {
            best = Some(incumbent.clone());
            improved = true;
        }
        if !incumbent.is_feasible() && cheaper_infeasible(&incumbent, &least_bad) {
            least_bad = incumbent.clone();
        }

        if improved {
            let b = best.as_ref().expect("improved implies a best");
            run.event(iteration, EventKind::NewBest, b);
            iterations_to_best = iteration;
            non_improving = 0;
            since_reroute = 0;
            triggers.counter = 0;
        } else {
            non_improving += 1;
            since_reroute += 1;
            triggers.counter += 1;
        }

        if since_reroute >= params.routing_delay as u64 {
            since_reroute = 0;
            reroutes += 1;
            match &best {
                Some(b) => {
                    let (out, stats) = quantum_reroute(
                        b,
                        instance,
                        matrix,
                        sampler,
                        params.penalties,
                        params.reroute_accept,
                        &mut rng,
                    );
                    sampler_calls += stats.sampler_calls;
                    sampler_failures += stats.fallbacks;
                    sampler_errors.extend(stats.errors);
                    let input_cost = b.cost().as_f64();
                    incumbent = out;
                    let e = run.event(iteration, EventKind::Reroute, &incumbent);
                    e.input_cost = Some(input_cost);
                    e.sampler_calls = Some(stats.sampler_calls);
                    e.replaced = Some(stats.replaced);
                    e.fallbacks = Some(stats.fallbacks);
                    if incumbent.is_feasible() && incumbent.cost() < b.cost() {
                        best = Some(incumbent.clone());
                        run.event(iteration, EventKind::NewBest, &incumbent);
                        iterations_to_best = iteration;
                        non_improving = 0;
                        triggers.counter = 0;
                    }
                }
                None => {
                    let e = run.event(iteration, EventKind::Reroute, &incumbent);
                    e.sampler_calls = Some(0);
                }
            }
        }

        match triggers.check(&mut rng) {
            Some(Trigger::Intensify) => {
                tabu.clear();
                run.event(iteration, EventKind::Intensify, &incumbent);
            }
            Some(Trigger::Diversify) => {
                wide_mode = !wide_mode;
                run.event(iteration, EventKind::Diversify, &incumbent);
            }
            None => {}
        }
        if iteration.is_multiple_of(1024) {
            tabu.purge(iteration);
        }
    }

    Ok(SearchResult {
        best: best.unwrap_or(least_bad),
        iterations: iteration,
        iterations_to_best,
        elapsed: run.started.elapsed(),
        reroutes,
        sampler_calls,
        sampler_failures,
        sampler_errors,
        trace: run.trace,
    })
}

/// Latest expiry among the tabu attributes a move would violate.
fn tabu_expiry<T: Scalar>(
    mv: &Move,
    incumbent: &Solution<T>,
    ids: &[u32],
    tabu: &TabuList,
    iteration: u64,
) -> Option<u64> {
    let check: Vec<(usize, u32)> = match *mv {
        Move::IntraSwap { route, i, j } => {
            let s = incumbent.routes()[route].customers();
            vec![(s[i], ids[route]), (s[j], ids[route])]
        }
        _ => moves::arrivals(mv)
            .into_iter()
            .filter_map(|(c, r)| r.map(|r| (c, ids[r])))
            .collect(),
    };
    check
        .into_iter()
        .filter_map(|(c, id)| tabu.active_until(c, id, iteration))
        .max()
}
