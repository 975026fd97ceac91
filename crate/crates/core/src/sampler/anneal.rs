//! Single-flip Metropolis simulated annealing.
//!
//! Each read starts from a uniformly random assignment and performs `sweeps`
//! passes over the variables in index order, cooling geometrically after
//! every pass. Read `r` draws from ChaCha stream `r` of the schedule seed, so
//! the result does not depend on how reads are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Couplings, SampleSet, Sampler, SamplerError};
use crate::qubo::Qubo;
use crate::scalar::Scalar;

pub const DEFAULT_NUM_READS: usize = 1000;
pub const DEFAULT_SWEEPS_PER_VAR: usize = 10;

/// Uphill moves with `delta / T` above this are rejected without drawing.
const REJECT_ABOVE: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule<T = f64> {
    pub num_reads: usize,
    pub sweeps: usize,
    pub initial_temperature: T,
    pub final_temperature: T,
    /// Per-sweep multiplier; the temperature never drops below
    /// `final_temperature`.
    pub cooling: T,
    pub seed: u64,
}

impl<T: Scalar> AnnealSchedule<T> {
    /// Default schedule for `qubo`: `10 * num_vars` sweeps from
    /// `max |coefficient|` (1 for an all-zero QUBO) down to a thousandth of
    /// that, cooling so the final temperature is reached on the last sweep.
    pub fn for_qubo(qubo: &Qubo<T>, num_reads: usize, seed: u64) -> Self {
        let sweeps = (DEFAULT_SWEEPS_PER_VAR * qubo.num_vars()).max(1);
        let top = qubo.max_abs_coefficient();
        let initial = if top > T::zero() { top } else { T::one() };
        let last = initial * T::of(1e-3);
        let cooling = if sweeps > 1 {
            (last / initial).powf(T::one() / T::of_usize(sweeps - 1))
        } else {
            T::of(0.5)
        };
        Self {
            num_reads,
            sweeps,
            initial_temperature: initial,
            final_temperature: last,
            cooling,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidSchedule(m.to_string()));
        if self.num_reads == 0 {
            return bad("num_reads must be positive");
        }
        if self.sweeps == 0 {
            return bad("sweeps must be positive");
        }
        let (t0, t1, c) = (self.initial_temperature, self.final_temperature, self.cooling);
        if !(t1 > T::zero() && t1 < t0 && t0.is_finite()) {
            return bad("temperatures must satisfy 0 < final < initial");
        }
        if !(c > T::zero() && c < T::one()) {
            return bad("cooling must lie in (0, 1)");
        }
        Ok(())
    }
}

pub fn sample_sa<T: Scalar>(
    qubo: &Qubo<T>,
    schedule: &AnnealSchedule<T>,
) -> Result<SampleSet<T>, SamplerError> {
    schedule.validate()?;
    let couplings = Couplings::new(qubo);
    let reads: Vec<Vec<u8>> = (0..schedule.num_reads)
        .into_par_iter()
        .map(|r| anneal_read(&couplings, schedule, r as u64))
        .collect();
    Ok(SampleSet::from_reads(qubo, reads))
}

fn anneal_read<T: Scalar>(c: &Couplings<T>, s: &AnnealSchedule<T>, read: u64) -> Vec<u8> {
    let n = c.linear.len();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(read);
    let mut x: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
    let mut field = c.fields(&x);
    let mut temperature = s.initial_temperature;
    for _ in 0..s.sweeps {
        let beta = temperature.recip().as_f64();
        for i in 0..n {
            let delta = if x[i] == 0 { field[i] } else { -field[i] };
            let accept = if delta <= T::zero() {
                true
            } else {
                let z = delta.as_f64() * beta;
                z < REJECT_ABOVE && rng.gen::<f64>() < (-z).exp()
            };
            if accept {
                let sign = if x[i] == 0 { T::one() } else { -T::one() };
                x[i] ^= 1;
                for &(j, q) in c.neighbors(i) {
                    field[j] = field[j] + sign * q;
                }
            }
        }
        temperature = (temperature * s.cooling).max(s.final_temperature);
    }
    x
}

/// Annealing backend with the default schedule derived per QUBO.
#[derive(Debug, Clone)]
pub struct AnnealingSampler {
    pub num_reads: usize,
}

impl Default for AnnealingSampler {
    fn default() -> Self {
        Self {
            num_reads: DEFAULT_NUM_READS,
        }
    }
}

impl<T: Scalar> Sampler<T> for AnnealingSampler {
    fn name(&self) -> &str {
        "sa"
    }

    fn sample(&self, qubo: &Qubo<T>, seed: u64) -> Result<SampleSet<T>, SamplerError> {
        sample_sa(qubo, &AnnealSchedule::for_qubo(qubo, self.num_reads, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{best_sample, sample_exact};

    fn frustrated(n: usize) -> Qubo {
        let mut q = Qubo::new(n);
        for i in 0..n {
            q.add(i, i, -1.0);
            for j in i + 1..n {
                q.add(i, j, if (i + j) % 2 == 0 { 1.5 } else { -0.25 });
            }
        }
        q
    }

    #[test]
    fn same_seed_same_set() {
        let q = frustrated(10);
        let s = AnnealSchedule::for_qubo(&q, 50, 7);
        assert_eq!(sample_sa(&q, &s).unwrap(), sample_sa(&q, &s).unwrap());
    }

    #[test]
    fn counts_sum_to_reads() {
        let q = frustrated(6);
        let set = sample_sa(&q, &AnnealSchedule::for_qubo(&q, 64, 1)).unwrap();
        assert_eq!(set.total_count(), 64);
    }

    #[test]
    fn zero_qubo_yields_offset() {
        let mut q: Qubo = Qubo::new(4);
        q.add_offset(2.5);
        let set = sample_sa(&q, &AnnealSchedule::for_qubo(&q, 20, 3)).unwrap();
        assert!(set.iter().all(|s| s.energy == 2.5));
    }

    #[test]
    fn finds_ground_state_of_small_problem() {
        let q = frustrated(10);
        let exact = best_sample(&sample_exact(&q).unwrap()).unwrap().1;
        let set = sample_sa(&q, &AnnealSchedule::for_qubo(&q, 100, 11)).unwrap();
        assert!((best_sample(&set).unwrap().1 - exact).abs() < 1e-9);
    }

    #[test]
    fn invalid_schedules_rejected() {
        let q = frustrated(3);
        let mut s = AnnealSchedule::for_qubo(&q, 10, 0);
        s.cooling = 1.0;
        assert!(sample_sa(&q, &s).is_err());
        let mut s = AnnealSchedule::for_qubo(&q, 10, 0);
        s.final_temperature = s.initial_temperature * 2.0;
        assert!(s.validate().is_err());
        let mut s = AnnealSchedule::for_qubo(&q, 10, 0);
        s.num_reads = 0;
        assert!(s.validate().is_err());
    }
}
