//! Hybrid tabu search for the capacitated vehicle routing problem.
//!
//! A classical tabu search decides which customers share a route. Whenever
//! the search stalls for a configurable number of iterations, every route of
//! the best solution is re-sequenced by posing its travelling salesman
//! problem as a QUBO and handing it to a [`sampler::Sampler`]: exact
//! enumeration, simulated annealing, or an out-of-process bridge to annealing
//! hardware.
//!
//! Numeric code is generic over [`Scalar`] (`f64` or `f32`). The aliases at
//! the crate root fix the working precision to `f64`; the `F32` variants are
//! there for memory-bound experiments.

pub mod bench;
pub mod construct;
pub mod instance;
pub mod qubo;
pub mod sampler;
pub mod scalar;
pub mod solution;
pub mod tabu;

pub use scalar::Scalar;

pub type InstanceF64 = instance::Instance<f64>;
pub type InstanceF32 = instance::Instance<f32>;
pub type DistanceMatrixF64 = instance::DistanceMatrix<f64>;
pub type DistanceMatrixF32 = instance::DistanceMatrix<f32>;
pub type SolutionF64 = solution::Solution<f64>;
pub type SolutionF32 = solution::Solution<f32>;
pub type RouteF64 = solution::Route<f64>;
pub type RouteF32 = solution::Route<f32>;
pub type QuboF64 = qubo::Qubo<f64>;
pub type QuboF32 = qubo::Qubo<f32>;
pub type SampleSetF64 = sampler::SampleSet<f64>;
pub type SampleSetF32 = sampler::SampleSet<f32>;
