//! Reproducible randomness, label shuffling, the permutation p-value rule,
//! and an exhaustive-enumeration oracle for small inputs.
//!
//! Streams are counter-based: a `(master_seed, stream_id)` pair maps to a
//! generator state as a pure function, so any permutation or replicate can
//! be reproduced in isolation and loops can run in parallel without
//! changing results.

use crate::error::{Error, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Identifies one random stream: a master seed plus a stream index
/// (replicate or permutation number).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec { master_seed, stream_id }
    }

    /// Derive a child seed space: the current (master, stream) pair is
    /// folded into a fresh master seed and `label` becomes the stream id.
    /// Pure and collision-resistant, so nested derivations (grid point ->
    /// replicate -> permutation) never alias.
    pub fn child(&self, label: u64) -> SeedSpec {
        let folded = splitmix64(self.master_seed ^ splitmix64(self.stream_id ^ 0xA5A5_5A5A_C3C3_3C3C));
        SeedSpec { master_seed: folded, stream_id: label }
    }
}

/// Deterministic generator for a stream: same `SeedSpec` gives the same
/// sequence regardless of thread count or call order.
pub fn derive_stream(seed: SeedSpec) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let mut s = seed.master_seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(seed.stream_id);
    rng
}

/// Observed statistic plus its permutation replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PermTrace {
    pub observed: f64,
    pub permuted: Vec<f64>,
}

impl PermTrace {
    pub fn n_perms(&self) -> usize {
        self.permuted.len()
    }
}

/// Add-one permutation p-value: (1 + #{b : permuted[b] >= observed}) / (1 + B).
///
/// Never zero, so downstream log-combination is always defined. Ties count
/// toward rejection (exact `>=`).
pub fn permutation_pvalue(trace: &PermTrace) -> Result<f64> {
    if trace.permuted.is_empty() {
        return Err(Error::InvalidInput(
            "permutation_pvalue requires at least one permuted statistic".into(),
        ));
    }
    let b = trace.permuted.len();
    let count = trace
        .permuted
        .iter()
        .filter(|&&v| v >= trace.observed)
        .count();
    Ok((1 + count) as f64 / (1 + b) as f64)
}

/// Iterator over all distinct multiset permutations of `labels`, in
/// lexicographic order starting from the sorted arrangement.
#[derive(Debug)]
pub struct LabelAssignments {
    current: Option<Vec<u8>>,
}

impl Iterator for LabelAssignments {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let out = self.current.clone()?;
        // Classic next-permutation step; None once wrapped around.
        let v = self.current.as_mut().unwrap();
        let n = v.len();
        let mut i = n.wrapping_sub(1);
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            self.current = None;
        } else {
            let mut j = n - 1;
            while v[j] <= v[i - 1] {
                j -= 1;
            }
            v.swap(i - 1, j);
            v[i..].reverse();
        }
        Some(out)
    }
}

/// Number of distinct arrangements of a label multiset.
pub fn distinct_arrangements(labels: &[u8]) -> u128 {
    let n = labels.len();
    let mut counts = [0u64; 256];
    for &l in labels {
        counts[l as usize] += 1;
    }
    // n! / prod(c_i!) computed incrementally to stay exact in u128.
    let mut result: u128 = 1;
    let mut placed: u64 = 0;
    for &c in counts.iter().filter(|&&c| c > 0) {
        for k in 1..=c {
            placed += 1;
            result = result * placed as u128 / k as u128;
        }
    }
    debug_assert_eq!(placed as usize, n);
    result
}

/// Enumerate every distinct permutation of the label multiset, erroring
/// when the count exceeds `limit`.
pub fn enumerate_label_assignments(labels: &[u8], limit: u128) -> Result<LabelAssignments> {
    let count = distinct_arrangements(labels);
    if count > limit {
        return Err(Error::Capacity { count, limit });
    }
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    Ok(LabelAssignments {
        current: if sorted.is_empty() { None } else { Some(sorted) },
    })
}
