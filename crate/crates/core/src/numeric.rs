//! Dense distance kernels and the seeded random source.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Squared Euclidean distance `Σ (a_k - b_k)²`.
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(sq_dist(a, b))
}

/// Unchecked kernel. Callers guarantee equal lengths.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric `n × n` matrix of squared distances, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// All pairwise squared distances. The upper triangle is computed and
/// mirrored, so the result is exactly symmetric with a zero diagonal.
pub fn pairwise_distances<V: AsRef<[f64]>>(xs: &[V]) -> Result<DistanceMatrix> {
    let first = xs.first().ok_or(Error::Empty("pairwise_distances needs at least one vector"))?;
    let dim = first.as_ref().len();
    for x in xs {
        if x.as_ref().len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: x.as_ref().len() });
        }
    }
    let n = xs.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(xs[i].as_ref(), xs[j].as_ref());
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

/// Seeded deterministic random source. Equal seeds give equal draw sequences.
///
/// Every stochastic operation in this crate takes one of these explicitly.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream, e.g. one per training component.
    pub fn fork(&mut self) -> Self {
        Self::new(self.rng.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, uniformly, in draw order.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_euclidean_examples() {
        assert_eq!(squared_euclidean(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(squared_euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(squared_euclidean(&[1.0, 0.0, 2.0], &[0.0, 1.0, 0.0]).unwrap(), 6.0);
    }

    #[test]
    fn squared_euclidean_rejects_mismatch() {
        assert_eq!(
            squared_euclidean(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn pairwise_small_cases() {
        let m = pairwise_distances(&[[0.0], [3.0]]).unwrap();
        assert_eq!(m.row(0), &[0.0, 9.0]);
        assert_eq!(m.row(1), &[9.0, 0.0]);
        let single = pairwise_distances(&[[1.5, -2.0]]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.get(0, 0), 0.0);
    }

    #[test]
    fn pairwise_matches_loop_oracle() {
        let mut rng = RandomSource::new(11);
        let xs: Vec<Vec<f64>> =
            (0..4).map(|_| (0..5).map(|_| rng.standard_normal()).collect()).collect();
        let m = pairwise_distances(&xs).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = squared_euclidean(&xs[i], &xs[j]).unwrap();
                assert_eq!(m.get(i, j).to_bits(), expected.to_bits());
            }
        }
    }

    #[test]
    fn pairwise_errors() {
        let empty: [[f64; 1]; 0] = [];
        assert!(matches!(pairwise_distances(&empty), Err(Error::Empty(_))));
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(pairwise_distances(&ragged), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = RandomSource::new(0xDEAD_BEEF);
        let mut b = RandomSource::new(0xDEAD_BEEF);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn choose_distinct_is_distinct() {
        let mut rng = RandomSource::new(3);
        for _ in 0..100 {
            let mut picked = rng.choose_distinct(10, 6);
            picked.sort_unstable();
            picked.dedup();
            assert_eq!(picked.len(), 6);
            assert!(picked.iter().all(|&i| i < 10));
        }
    }
}
