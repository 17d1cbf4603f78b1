//! Least squares under a linear transform: `φ(x) = E[(b − ⟨La, x⟩)²]` with a
//! fraction of the rows of `L` rescaled, approximated on a finite train set.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blocks::{dot, BlockPartition, BlockVector};
use crate::error::{Error, Result};
use crate::geometry::Regularizer;
use crate::oracles::{DenseMatrix, StochasticOracle};

/// Standard deviation of the additive target noise (`N(0, 0.01·I)` read as
/// covariance).
pub const NOISE_STD: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct TransformedLs {
    pub(crate) partition: Arc<BlockPartition>,
    /// Training features `z = L a`, one sample per row.
    pub(crate) train: DenseMatrix,
    pub(crate) train_targets: Vec<f64>,
    pub(crate) test: DenseMatrix,
    pub(crate) test_targets: Vec<f64>,
    pub(crate) planted: BlockVector,
    pub(crate) regularizer: Regularizer,
    pub(crate) rescale: f64,
    pub(crate) rescaled_fraction: f64,
    pub(crate) seed: u64,
    pub(crate) deterministic: bool,
}

/// Generates a transformed least-squares instance. The transform starts from
/// a standard normal matrix and rescales a random `rescaled_fraction` of its
/// rows by `rescale`; `x*` is standard normal truncated coordinatewise to
/// `[-1, 1]`; targets are `b = ⟨La, x*⟩ + ε`, `ε ~ N(0, 0.01)`.
pub fn gen_transformed_ls(
    n: usize,
    m_train: usize,
    m_test: usize,
    blocks: usize,
    rescale: f64,
    rescaled_fraction: f64,
    seed: u64,
) -> Result<TransformedLs> {
    if n == 0 || m_train == 0 {
        return Err(Error::InvalidParameter(
            "transformed least squares needs n >= 1 and m_train >= 1".into(),
        ));
    }
    if !(rescale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rescale factor must be positive, got {rescale}"
        )));
    }
    if !(rescaled_fraction > 0.0 && rescaled_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rescaled fraction must lie in (0, 1), got {rescaled_fraction}"
        )));
    }
    let partition = BlockPartition::uniform_split(n, blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut transform = DenseMatrix::zeros(n, n);
    for r in 0..n {
        for v in transform.row_mut(r) {
            *v = rng.sample(StandardNormal);
        }
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let k = (rescaled_fraction * n as f64).round() as usize;
    for &r in rows.iter().take(k) {
        for v in transform.row_mut(r) {
            *v *= rescale;
        }
    }

    let planted: Vec<f64> = (0..n)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v.clamp(-1.0, 1.0)
        })
        .collect();

    let mut draw_split = |count: usize, planted: &[f64]| -> (DenseMatrix, Vec<f64>) {
        let mut feats = DenseMatrix::zeros(count, n);
        let mut targets = Vec::with_capacity(count);
        let mut a = vec![0.0; n];
        for s in 0..count {
            for v in &mut a {
                *v = rng.sample(StandardNormal);
            }
            let row = feats.row_mut(s);
            for (j, rv) in row.iter_mut().enumerate() {
                *rv = dot(transform.row(j), &a);
            }
            let eps: f64 = rng.sample(StandardNormal);
            targets.push(dot(row, planted) + NOISE_STD * eps);
        }
        (feats, targets)
    };
    let (train, train_targets) = draw_split(m_train, &planted);
    let (test, test_targets) = draw_split(m_test, &planted);

    Ok(TransformedLs {
        planted: BlockVector::from_vec(&partition, planted)?,
        partition,
        train,
        train_targets,
        test,
        test_targets,
        regularizer: Regularizer::Zero,
        rescale,
        rescaled_fraction,
        seed,
        deterministic: false,
    })
}

impl TransformedLs {
    pub fn planted(&self) -> &BlockVector {
        &self.planted
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_regularizer(&mut self, reg: Regularizer) {
        self.regularizer = reg;
    }

    pub fn set_deterministic(&mut self, on: bool) {
        self.deterministic = on;
    }

    /// Mean squared error on the held-out split.
    pub fn test_objective(&self, x: &BlockVector) -> f64 {
        if self.test.rows() == 0 {
            return f64::NAN;
        }
        mean_squared_error(&self.test, &self.test_targets, x)
    }

    fn residual(&self, x: &BlockVector, row: usize) -> f64 {
        self.train_targets[row] - dot(self.train.row(row), x.as_slice())
    }
}

fn mean_squared_error(feats: &DenseMatrix, targets: &[f64], x: &BlockVector) -> f64 {
    let m = feats.rows();
    (0..m)
        .map(|r| {
            let res = targets[r] - dot(feats.row(r), x.as_slice());
            res * res
        })
        .sum::<f64>()
        / m as f64
}

impl StochasticOracle for TransformedLs {
    fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn loss(&self, x: &BlockVector) -> f64 {
        mean_squared_error(&self.train, &self.train_targets, x)
    }

    fn block_subgradient(&self, x: &BlockVector, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.deterministic {
            return self.mean_block_gradient(x, i).unwrap();
        }
        let row = rng.random_range(0..self.train.rows());
        let r = self.residual(x, row);
        let range = self.partition.range(i);
        self.train.row(row)[range]
            .iter()
            .map(|z| -2.0 * r * z)
            .collect()
    }

    fn full_subgradient(&self, x: &BlockVector, rng: &mut ChaCha8Rng) -> BlockVector {
        let mut out = BlockVector::zeros(&self.partition);
        if self.deterministic {
            let m = self.train.rows() as f64;
            for row in 0..self.train.rows() {
                let r = self.residual(x, row);
                for (o, z) in out.as_mut_slice().iter_mut().zip(self.train.row(row)) {
                    *o -= 2.0 * r * z / m;
                }
            }
            return out;
        }
        let row = rng.random_range(0..self.train.rows());
        let r = self.residual(x, row);
        for (o, z) in out.as_mut_slice().iter_mut().zip(self.train.row(row)) {
            *o = -2.0 * r * z;
        }
        out
    }

    fn mean_block_gradient(&self, x: &BlockVector, i: usize) -> Option<Vec<f64>> {
        let range = self.partition.range(i);
        let mut acc = vec![0.0; range.len()];
        let m = self.train.rows() as f64;
        for row in 0..self.train.rows() {
            let r = self.residual(x, row);
            for (o, z) in acc.iter_mut().zip(&self.train.row(row)[range.clone()]) {
                *o -= 2.0 * r * z / m;
            }
        }
        Some(acc)
    }

    fn dataset_size(&self) -> usize {
        self.train.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::slice_norm;

    #[test]
    fn objective_near_noise_floor_at_planted_point() {
        let o = gen_transformed_ls(40, 800, 200, 4, 1.0, 0.9, 5).unwrap();
        let at_star = o.loss(o.planted());
        // Residuals at x* are exactly the injected noise.
        assert!((at_star - NOISE_STD * NOISE_STD).abs() < 0.005, "{at_star}");
        assert!(o.test_objective(o.planted()) < 0.02);
    }

    #[test]
    fn unit_rescale_keeps_block_moments_balanced() {
        // With rescale = 1 every block has the same expected subgradient
        // moment; the empirical spread over blocks stays under 20%.
        let o = gen_transformed_ls(40, 2000, 0, 4, 1.0, 0.9, 9).unwrap();
        let x = BlockVector::zeros(o.partition());
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut moments = Vec::new();
        for i in 0..4 {
            let mut acc = 0.0;
            let draws = 10_000;
            for _ in 0..draws {
                let g = o.block_subgradient(&x, i, &mut rng);
                let nrm = slice_norm(&g);
                acc += nrm * nrm;
            }
            moments.push(acc / draws as f64);
        }
        let max = moments.iter().cloned().fold(f64::MIN, f64::max);
        let min = moments.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            (max - min) / min < 0.2,
            "moment spread too large: {moments:?}"
        );
    }

    #[test]
    fn small_rescale_depresses_most_blocks() {
        let o = gen_transformed_ls(40, 500, 0, 4, 0.01, 0.9, 9).unwrap();
        // Roughly 90% of feature rows carry scale 0.01; row norms of the
        // feature matrix split accordingly.
        let mut small = 0;
        for j in 0..40 {
            let col_scale: f64 = (0..o.train.rows())
                .map(|r| o.train.row(r)[j].abs())
                .sum::<f64>()
                / o.train.rows() as f64;
            if col_scale < 0.1 {
                small += 1;
            }
        }
        assert_eq!(small, 36, "expected 90% of features rescaled");
    }

    #[test]
    fn planted_solution_is_truncated() {
        let o = gen_transformed_ls(64, 10, 0, 8, 0.1, 0.9, 2).unwrap();
        assert!(o.planted().as_slice().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_transformed_ls(0, 10, 0, 1, 1.0, 0.9, 1).is_err());
        assert!(gen_transformed_ls(10, 0, 0, 1, 1.0, 0.9, 1).is_err());
        assert!(gen_transformed_ls(10, 10, 0, 1, 0.0, 0.9, 1).is_err());
        assert!(gen_transformed_ls(10, 10, 0, 1, 1.0, 1.0, 1).is_err());
    }
}
