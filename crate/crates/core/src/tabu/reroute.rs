//! Route re-sequencing through a QUBO sampler.

use rand::Rng;

use crate::instance::{DistanceMatrix, Instance};
use crate::qubo::{build_tsp_qubo, decode_sample, route_penalties, PenaltyConfig};
use crate::sampler::Sampler;
use crate::scalar::Scalar;
use crate::solution::{route_cost, Solution};

/// When a decoded sequence replaces the current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerouteAccept {
    /// Only if strictly shorter; the result can never be worse.
    #[default]
    Better,
    /// Whenever a sample decodes, as a hardware run would.
    Always,
}

impl std::str::FromStr for RerouteAccept {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "better" => Ok(Self::Better),
            "always" => Ok(Self::Always),
            _ => Err(format!("unknown acceptance rule {s:?}; expected better or always")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PenaltyRule<T = f64> {
    /// `B = 1`, `A` twice the largest distance among the depot and the
    /// route's customers.
    #[default]
    PerRoute,
    Fixed(PenaltyConfig<T>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RerouteStats {
    pub sampler_calls: usize,
    pub replaced: usize,
    /// Routes kept because sampling failed or nothing decoded.
    pub fallbacks: usize,
    pub errors: Vec<String>,
}

/// Re-sequences every route of `best` one by one: each route's TSP is
/// built as a QUBO and sampled; the lowest-energy sample that decodes to a
/// permutation is a proposal, accepted per `accept`. Sampling errors and
/// undecodable sample sets leave the route unchanged. Single-customer
/// routes have only one sequence and are sampled all the same so that the
/// call count equals the route count.
///
/// Sampler seeds are drawn from `rng`, one per route, in route order.
pub fn quantum_reroute<T: Scalar, R: Rng>(
    best: &Solution<T>,
    instance: &Instance<T>,
    matrix: &DistanceMatrix<T>,
    sampler: &dyn Sampler<T>,
    penalties: PenaltyRule<T>,
    accept: RerouteAccept,
    rng: &mut R,
) -> (Solution<T>, RerouteStats) {
    let mut out = best.clone();
    let mut stats = RerouteStats::default();
    for idx in 0..best.num_routes() {
        let current = best.routes()[idx].customers().to_vec();
        let seed: u64 = rng.gen();
        let cfg = match penalties {
            PenaltyRule::PerRoute => route_penalties(&current, 0, matrix),
            PenaltyRule::Fixed(c) => c,
        };
        let tsp = match build_tsp_qubo(&current, matrix, 0, cfg) {
            Ok(t) => t,
            Err(e) => {
                stats.fallbacks += 1;
                stats.errors.push(e.to_string());
                continue;
            }
        };
        stats.sampler_calls += 1;
        let set = match sampler.sample(&tsp.qubo, seed) {
            Ok(s) => s,
            Err(e) => {
                stats.fallbacks += 1;
                stats.errors.push(e.to_string());
                continue;
            }
        };
        let Some(order) = set.iter().find_map(|s| decode_sample(&s.bits, &current).ok()) else {
            stats.fallbacks += 1;
            continue;
        };
        let take = match accept {
            RerouteAccept::Better => route_cost(&order, matrix) < best.routes()[idx].cost(),
            RerouteAccept::Always => order != current,
        };
        if take {
            out.route_mut(idx).edit(instance, matrix, |s| *s = order);
            stats.replaced += 1;
        }
    }
    out.refresh_totals(instance);
    (out, stats)
}
