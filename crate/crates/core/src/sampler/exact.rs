//! Exhaustive QUBO minimisation.
//!
//! Up to [`ENUMERATION_LIMIT`] variables every assignment is visited in Gray
//! code order, so each step flips one bit and costs one neighbour-list pass.
//! Between that and [`BRANCH_LIMIT`] the search switches to a depth-first
//! branch and bound over contiguous variable blocks, which is still exact
//! but prunes whole subtrees. A 6-customer route (36 variables) is the
//! typical case for the latter.

use std::cmp::Ordering;

use super::{Couplings, SampleSet, Sampler, SamplerError};
use crate::qubo::{qubo_energy, Qubo};
use crate::scalar::Scalar;

pub const ENUMERATION_LIMIT: usize = 24;
pub const BRANCH_LIMIT: usize = 64;
pub const DEFAULT_KEEP: usize = 100;

/// Complete enumeration, keeping the [`DEFAULT_KEEP`] lowest states.
pub fn sample_exact<T: Scalar>(qubo: &Qubo<T>) -> Result<SampleSet<T>, SamplerError> {
    enumerate(qubo, DEFAULT_KEEP)
}

/// Gray-code enumeration keeping the `keep` lowest-energy states. Ties are
/// ordered by enumeration order.
pub fn enumerate<T: Scalar>(qubo: &Qubo<T>, keep: usize) -> Result<SampleSet<T>, SamplerError> {
    let n = qubo.num_vars();
    if n > ENUMERATION_LIMIT {
        return Err(SamplerError::TooLarge {
            backend: "enumeration",
            num_vars: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let c = Couplings::new(qubo);
    let mut x = vec![0u8; n];
    let mut field = c.linear.clone();
    let mut energy = qubo.offset();
    let mut top = TopK::new(keep);
    top.offer(energy, &x);
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let sign = if x[i] == 0 { T::one() } else { -T::one() };
        energy = energy + sign * field[i];
        x[i] ^= 1;
        for &(j, q) in c.neighbors(i) {
            field[j] = field[j] + sign * q;
        }
        top.offer(energy, &x);
    }
    Ok(top.into_set(qubo))
}

/// Exact minimisation by block branch and bound, keeping the `keep` lowest
/// states. Variables are split into contiguous blocks of about `sqrt(n)`;
/// the bound for unassigned blocks is the sum of each block's best internal
/// state under the current fields plus every negative coupling between
/// unassigned variables in different blocks.
pub fn branch_and_bound<T: Scalar>(
    qubo: &Qubo<T>,
    keep: usize,
) -> Result<SampleSet<T>, SamplerError> {
    let n = qubo.num_vars();
    if n > BRANCH_LIMIT {
        return Err(SamplerError::TooLarge {
            backend: "branch and bound",
            num_vars: n,
            limit: BRANCH_LIMIT,
        });
    }
    if n == 0 {
        return enumerate(qubo, keep);
    }
    let c = Couplings::new(qubo);
    let width = (n as f64).sqrt().round().clamp(1.0, 12.0) as usize;
    let blocks: Vec<(usize, usize)> = (0..n)
        .step_by(width)
        .map(|s| (s, (s + width).min(n)))
        .collect();
    let block_of: Vec<usize> = (0..n).map(|i| i / width).collect();

    // loose[b]: negative couplings between a variable in block >= b and a
    // variable in a later, different block
    let mut loose = vec![T::zero(); blocks.len() + 1];
    for (i, j, v) in qubo.terms() {
        if i != j && v < T::zero() && block_of[i] != block_of[j] {
            let first = block_of[i].min(block_of[j]);
            loose[first] = loose[first] + v;
        }
    }
    for b in (0..blocks.len()).rev() {
        loose[b] = loose[b] + loose[b + 1];
    }

    let intra = blocks
        .iter()
        .map(|&(s, e)| {
            let k = e - s;
            let mut m = vec![T::zero(); k * k];
            for a in s..e {
                for &(j, q) in c.neighbors(a) {
                    if (s..e).contains(&j) {
                        m[(a - s) * k + (j - s)] = q;
                    }
                }
            }
            m
        })
        .collect();

    let mut search = Bnb {
        c: &c,
        blocks,
        intra,
        loose,
        x: vec![0u8; n],
        field: c.linear.clone(),
        top: TopK::new(keep),
    };
    search.descend(0, qubo.offset());
    Ok(search.top.into_set(qubo))
}

struct Bnb<'a, T> {
    c: &'a Couplings<T>,
    blocks: Vec<(usize, usize)>,
    intra: Vec<Vec<T>>,
    loose: Vec<T>,
    x: Vec<u8>,
    field: Vec<T>,
    top: TopK<T>,
}

impl<T: Scalar> Bnb<'_, T> {
    /// Every internal state of block `b` under the current fields, as
    /// (energy contribution, bit mask), in Gray order.
    fn block_states(&self, b: usize) -> Vec<(T, u32)> {
        let (s, e) = self.blocks[b];
        let k = e - s;
        let m = &self.intra[b];
        let mut out = Vec::with_capacity(1 << k);
        let mut mask = 0u32;
        let mut value = T::zero();
        out.push((value, mask));
        for step in 1u32..(1u32 << k) {
            let i = step.trailing_zeros() as usize;
            let mut delta = self.field[s + i];
            for j in 0..k {
                if mask & (1 << j) != 0 {
                    delta = delta + m[i * k + j];
                }
            }
            if mask & (1 << i) != 0 {
                value = value - delta;
            } else {
                value = value + delta;
            }
            mask ^= 1 << i;
            out.push((value, mask));
        }
        out
    }

    fn block_min(&self, b: usize) -> T {
        self.block_states(b)
            .into_iter()
            .map(|(v, _)| v)
            .fold(T::infinity(), T::min)
    }

    fn rest_bound(&self, from: usize) -> T {
        (from..self.blocks.len()).fold(self.loose[from], |acc, b| acc + self.block_min(b))
    }

    fn set_block(&mut self, b: usize, mask: u32) {
        let (s, e) = self.blocks[b];
        for i in s..e {
            let bit = ((mask >> (i - s)) & 1) as u8;
            if bit != self.x[i] {
                let sign = if bit == 1 { T::one() } else { -T::one() };
                self.x[i] = bit;
                for &(j, q) in self.c.neighbors(i) {
                    self.field[j] = self.field[j] + sign * q;
                }
            }
        }
    }

    fn descend(&mut self, b: usize, fixed: T) {
        if b == self.blocks.len() {
            self.top.offer(fixed, &self.x);
            return;
        }
        let mut states = self.block_states(b);
        states.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let coarse = self.rest_bound(b + 1) + (self.loose[b] - self.loose[b + 1]);
        for (value, mask) in states {
            let cutoff = self.top.cutoff();
            if fixed + value + coarse >= cutoff {
                break;
            }
            self.set_block(b, mask);
            let energy = fixed + value;
            if energy + self.rest_bound(b + 1) < self.top.cutoff() {
                self.descend(b + 1, energy);
            }
        }
        self.set_block(b, 0);
    }
}

/// The `keep` lowest states seen so far, ties in arrival order.
struct TopK<T> {
    keep: usize,
    seen: u64,
    entries: Vec<(T, u64, Vec<u8>)>,
}

impl<T: Scalar> TopK<T> {
    fn new(keep: usize) -> Self {
        Self {
            keep: keep.max(1),
            seen: 0,
            entries: Vec::new(),
        }
    }

    fn cutoff(&self) -> T {
        if self.entries.len() < self.keep {
            T::infinity()
        } else {
            self.entries[self.entries.len() - 1].0
        }
    }

    fn offer(&mut self, energy: T, bits: &[u8]) {
        let order = self.seen;
        self.seen += 1;
        if energy >= self.cutoff() {
            return;
        }
        let at = self.entries.partition_point(|(e, _, _)| *e <= energy);
        self.entries.insert(at, (energy, order, bits.to_vec()));
        self.entries.truncate(self.keep);
    }

    fn into_set(self, qubo: &Qubo<T>) -> SampleSet<T> {
        // Recomputing from scratch removes drift accumulated by the
        // incremental updates; the stable sort then keeps arrival order.
        let mut entries: Vec<(T, u64, Vec<u8>)> = self
            .entries
            .into_iter()
            .map(|(_, order, bits)| (qubo_energy(qubo, &bits), order, bits))
            .collect();
        entries.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        SampleSet::from_reads(qubo, entries.into_iter().map(|(_, _, bits)| bits).collect())
    }
}

/// Exact backend: enumeration up to [`ENUMERATION_LIMIT`] variables, branch
/// and bound up to [`BRANCH_LIMIT`].
#[derive(Debug, Clone)]
pub struct ExactSampler {
    pub keep: usize,
}

impl Default for ExactSampler {
    fn default() -> Self {
        Self { keep: DEFAULT_KEEP }
    }
}

impl<T: Scalar> Sampler<T> for ExactSampler {
    fn name(&self) -> &str {
        "exact"
    }

    fn sample(&self, qubo: &Qubo<T>, _seed: u64) -> Result<SampleSet<T>, SamplerError> {
        if qubo.num_vars() <= ENUMERATION_LIMIT {
            enumerate(qubo, self.keep)
        } else {
            branch_and_bound(qubo, self.keep)
        }
    }
}
