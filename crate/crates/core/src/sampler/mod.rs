//! QUBO samplers behind one interface.
//!
//! * [`exact`]: complete enumeration, the ground truth for small problems.
//! * [`anneal`]: seeded single-flip Metropolis annealing, the desk-scale
//!   stand-in for an annealing QPU.
//! * [`remote`]: newline-delimited JSON to an out-of-process bridge.
//!
//! Every backend returns a [`SampleSet`] whose energies have been recomputed
//! locally with [`qubo_energy`] and which is sorted by energy.

pub mod anneal;
pub mod exact;
pub mod protocol;
pub mod remote;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::qubo::{qubo_energy, Qubo};
use crate::scalar::Scalar;

pub use anneal::{sample_sa, AnnealSchedule, AnnealingSampler};
pub use exact::{sample_exact, ExactSampler};
pub use remote::{RemoteEndpoint, RemoteSampler};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T = f64> {
    pub bits: Vec<u8>,
    pub energy: T,
    pub count: usize,
}

/// Samples sorted ascending by energy; equal energies keep first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T = f64> {
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> SampleSet<T> {
    /// Groups identical reads (first occurrence fixes the order), computes
    /// each energy from the QUBO and sorts.
    pub fn from_reads(qubo: &Qubo<T>, reads: Vec<Vec<u8>>) -> Self {
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut samples: Vec<Sample<T>> = Vec::new();
        for bits in reads {
            if let Some(&k) = index.get(&bits) {
                samples[k].count += 1;
                continue;
            }
            index.insert(bits.clone(), samples.len());
            let energy = qubo_energy(qubo, &bits);
            samples.push(Sample { bits, energy, count: 1 });
        }
        Self::sorted(samples)
    }

    /// Accepts samples with reported energies, rejecting any that disagree
    /// with local recomputation by more than `tolerance * max(1, |e|)`.
    pub fn verified(
        qubo: &Qubo<T>,
        samples: Vec<Sample<T>>,
        tolerance: f64,
    ) -> Result<Self, SamplerError> {
        let mut checked = Vec::with_capacity(samples.len());
        for (index, s) in samples.into_iter().enumerate() {
            if s.bits.len() != qubo.num_vars() || s.bits.iter().any(|&b| b > 1) {
                return Err(SamplerError::Malformed(format!(
                    "sample {index} is not a {}-bit 0/1 vector",
                    qubo.num_vars()
                )));
            }
            let local = qubo_energy(qubo, &s.bits);
            let (reported, recomputed) = (s.energy.as_f64(), local.as_f64());
            if (reported - recomputed).abs() > tolerance * 1f64.max(recomputed.abs()) {
                return Err(SamplerError::EnergyMismatch {
                    index,
                    reported,
                    recomputed,
                });
            }
            checked.push(Sample { energy: local, ..s });
        }
        Ok(Self::sorted(checked))
    }

    fn sorted(mut samples: Vec<Sample<T>>) -> Self {
        samples.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap_or(std::cmp::Ordering::Equal));
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_count(&self) -> usize {
        self.samples.iter().map(|s| s.count).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample<T>> {
        self.samples.iter()
    }
}

/// Lowest-energy sample, first seen on ties. `None` for an empty set.
pub fn best_sample<T: Scalar>(set: &SampleSet<T>) -> Option<(&[u8], T)> {
    set.samples.first().map(|s| (s.bits.as_slice(), s.energy))
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("{num_vars} variables exceed the {backend} limit of {limit}")]
    TooLarge {
        backend: &'static str,
        num_vars: usize,
        limit: usize,
    },
    #[error("invalid anneal schedule: {0}")]
    InvalidSchedule(String),
    #[error("remote transport failure: {0}")]
    Transport(String),
    #[error("remote sampler timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("malformed remote response: {0}")]
    Malformed(String),
    #[error("remote sampler reported an error: {0}")]
    Backend(String),
    #[error("sample {index} energy mismatch: reported {reported}, recomputed {recomputed}")]
    EnergyMismatch {
        index: usize,
        reported: f64,
        recomputed: f64,
    },
}

impl SamplerError {
    pub fn is_remote(&self) -> bool {
        !matches!(self, SamplerError::TooLarge { .. } | SamplerError::InvalidSchedule(_))
    }
}

/// A QUBO solver. `seed` makes stochastic backends reproducible; exact and
/// remote backends ignore it.
pub trait Sampler<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn sample(&self, qubo: &Qubo<T>, seed: u64) -> Result<SampleSet<T>, SamplerError>;
}

/// Backend selector used by the CLI and study configs: `sa`, `exact` or
/// `remote:ADDR` (see [`RemoteEndpoint`] for address forms).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SamplerSpec {
    Anneal,
    Exact,
    Remote(String),
}

impl FromStr for SamplerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sa" => Ok(Self::Anneal),
            "exact" => Ok(Self::Exact),
            _ => match s.strip_prefix("remote:") {
                Some(addr) if !addr.is_empty() => Ok(Self::Remote(addr.to_string())),
                _ => Err(format!("unknown sampler {s:?}; expected sa, exact or remote:ADDR")),
            },
        }
    }
}

impl TryFrom<String> for SamplerSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SamplerSpec> for String {
    fn from(s: SamplerSpec) -> Self {
        s.to_string()
    }
}

impl fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Anneal => f.write_str("sa"),
            Self::Exact => f.write_str("exact"),
            Self::Remote(a) => write!(f, "remote:{a}"),
        }
    }
}

impl SamplerSpec {
    /// Instantiates the backend; `num_reads` applies to annealing and remote
    /// backends. Remote backends connect eagerly so an unreachable endpoint
    /// is reported here rather than mid-search.
    pub fn build<T: Scalar>(&self, num_reads: usize) -> Result<Box<dyn Sampler<T>>, SamplerError> {
        Ok(match self {
            Self::Anneal => Box::new(AnnealingSampler { num_reads }),
            Self::Exact => Box::new(ExactSampler::default()),
            Self::Remote(addr) => {
                let endpoint: RemoteEndpoint = addr.parse().map_err(SamplerError::Transport)?;
                let mut sampler = RemoteSampler::new(endpoint);
                sampler.num_reads = num_reads;
                sampler.connect()?;
                Box::new(sampler)
            }
        })
    }
}

/// CSR adjacency of a QUBO: linear terms plus symmetric neighbour lists.
pub(crate) struct Couplings<T> {
    pub linear: Vec<T>,
    start: Vec<usize>,
    neighbors: Vec<(usize, T)>,
}

impl<T: Scalar> Couplings<T> {
    pub fn new(qubo: &Qubo<T>) -> Self {
        let n = qubo.num_vars();
        let mut linear = vec![T::zero(); n];
        let mut degree = vec![0usize; n];
        for (i, j, v) in qubo.terms() {
            if i == j {
                linear[i] = linear[i] + v;
            } else {
                degree[i] += 1;
                degree[j] += 1;
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + degree[i];
        }
        let mut fill = start.clone();
        let mut neighbors = vec![(0usize, T::zero()); start[n]];
        for (i, j, v) in qubo.terms() {
            if i != j {
                neighbors[fill[i]] = (j, v);
                fill[i] += 1;
                neighbors[fill[j]] = (i, v);
                fill[j] += 1;
            }
        }
        Self { linear, start, neighbors }
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.neighbors[self.start[i]..self.start[i + 1]]
    }

    /// Local fields `linear_i + sum_j Q_ij x_j` for a full assignment.
    pub fn fields(&self, x: &[u8]) -> Vec<T> {
        (0..self.linear.len())
            .map(|i| {
                self.neighbors(i)
                    .iter()
                    .filter(|(j, _)| x[*j] != 0)
                    .fold(self.linear[i], |h, &(_, q)| h + q)
            })
            .collect()
    }
}
