use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Labelled binary classification data with sparse rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    /// `(feature index, value)` per row, 0-based and strictly increasing.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Labels in `{+1, -1}`.
    pub labels: Vec<f64>,
    /// Number of features (1 + largest index seen).
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(samples, features)`
    pub fn dims(&self) -> (usize, usize) {
        (self.len(), self.dim)
    }

    pub fn dense_row(&self, i: usize) -> DVector<f64> {
        let mut r = DVector::zeros(self.dim);
        for &(j, v) in &self.rows[i] {
            r[j] = v;
        }
        r
    }

    pub fn dense_rows(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|i| self.dense_row(i)).collect()
    }
}

/// Gaussian features with labels from a random linear separator; each label
/// is flipped with probability `flip_prob`.
pub fn synthetic_classification(samples: usize, dim: usize, flip_prob: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let r: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let margin: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen::<f64>() < flip_prob {
            label = -label;
        }
        rows.push(r.into_iter().enumerate().collect());
        labels.push(label);
    }
    Dataset { rows, labels, dim }
}

/// Splits `0..n` into `k` disjoint shards after a seeded shuffle. Shard
/// sizes differ by at most one; the first `n % k` shards get the extra
/// element. Indices inside a shard are sorted.
pub fn partition_dataset(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("number of shards must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} samples into {k} non-empty shards"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut shards = Vec::with_capacity(k);
    let mut start = 0;
    for s in 0..k {
        let len = base + usize::from(s < extra);
        let mut shard = idx[start..start + len].to_vec();
        shard.sort_unstable();
        shards.push(shard);
        start += len;
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_split() {
        let s = partition_dataset(4, 2, 0).unwrap();
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn single_shard_is_identity() {
        let s = partition_dataset(6, 1, 3).unwrap();
        assert_eq!(s, vec![(0..6).collect::<Vec<_>>()]);
    }

    #[test]
    fn remainder_goes_first() {
        let s = partition_dataset(5, 2, 9).unwrap();
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn too_many_shards() {
        assert!(partition_dataset(2, 3, 0).is_err());
        assert!(partition_dataset(2, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn shards_cover_disjointly(n in 1usize..200, k in 1usize..20, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let shards = partition_dataset(n, k, seed).unwrap();
            let mut all: Vec<usize> = shards.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let max = shards.iter().map(Vec::len).max().unwrap();
            let min = shards.iter().map(Vec::len).min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert_eq!(shards, partition_dataset(n, k, seed).unwrap());
        }
    }
}
