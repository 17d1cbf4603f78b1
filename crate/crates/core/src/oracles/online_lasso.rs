//! Budgeted online lasso: `½·E[(y − ⟨w, x⟩)²] + λ‖w‖₁` where each query
//! reveals exactly two features of a fresh sample — the coordinate `i`
//! requested by the solver and one coordinate `j` drawn from a known
//! distribution — giving the unbiased coordinate-gradient estimator
//! `G^{(i)} = (1/p_j)·x_i·x_j·w_j − y·x_i`.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blocks::{BlockPartition, BlockVector};
use crate::error::{Error, Result};
use crate::geometry::Regularizer;
use crate::oracles::StochasticOracle;

/// Fraction of nonzero coordinates in the planted model.
pub const PLANTED_DENSITY: f64 = 0.1;

/// Standard deviation of the target noise.
pub const NOISE_STD: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct OnlineLasso {
    pub(crate) partition: Arc<BlockPartition>,
    pub(crate) planted: BlockVector,
    pub(crate) feature_sampler: crate::schedules::SamplingDistribution,
    pub(crate) regularizer: Regularizer,
    pub(crate) noise_std: f64,
    pub(crate) seed: u64,
    pub(crate) deterministic: bool,
    /// Cached `‖w*‖²`; must stay in sync with `planted`.
    pub(crate) planted_sq_norm: f64,
}

/// Generates a budgeted online lasso instance over `n` single-coordinate
/// blocks. Samples follow `x ~ N(0, I)`, `y = ⟨x, w*⟩ + ε` with a sparse
/// planted `w*` (density [`PLANTED_DENSITY`], standard normal values).
pub fn gen_online_lasso(
    n: usize,
    lambda: f64,
    feature_sampler: crate::schedules::SamplingDistribution,
    seed: u64,
) -> Result<OnlineLasso> {
    if n == 0 {
        return Err(Error::InvalidParameter("online lasso needs n >= 1".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "l1 penalty must be nonnegative, got {lambda}"
        )));
    }
    if feature_sampler.num_blocks() != n {
        return Err(Error::InvalidParameter(format!(
            "feature sampler covers {} coordinates but n = {n}",
            feature_sampler.num_blocks()
        )));
    }
    let partition = BlockPartition::scalar_blocks(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nnz = ((n as f64 * PLANTED_DENSITY).round() as usize).max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut planted = vec![0.0; n];
    for &j in idx.iter().take(nnz) {
        planted[j] = rng.sample(StandardNormal);
    }
    let planted = BlockVector::from_vec(&partition, planted)?;
    let planted_sq_norm = planted.norm().powi(2);
    Ok(OnlineLasso {
        partition,
        planted,
        feature_sampler,
        regularizer: Regularizer::L1 { weight: lambda },
        noise_std: NOISE_STD,
        seed,
        deterministic: false,
        planted_sq_norm,
    })
}

impl OnlineLasso {
    pub fn planted(&self) -> &BlockVector {
        &self.planted
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_sampler(&self) -> &crate::schedules::SamplingDistribution {
        &self.feature_sampler
    }

    pub fn set_regularizer(&mut self, reg: Regularizer) {
        self.regularizer = reg;
    }

    pub fn set_deterministic(&mut self, on: bool) {
        self.deterministic = on;
    }

    /// Draws `(x_i, x_j, y)` from their exact joint marginal: the variance of
    /// the unobserved coordinates is folded into the conditional target noise.
    fn draw_pair(&self, i: usize, j: usize, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
        let wstar = self.planted.as_slice();
        let xi: f64 = rng.sample(StandardNormal);
        let (xj, seen) = if j == i {
            (xi, wstar[i] * wstar[i])
        } else {
            let xj: f64 = rng.sample(StandardNormal);
            (xj, wstar[i] * wstar[i] + wstar[j] * wstar[j])
        };
        let mean = if j == i {
            xi * wstar[i]
        } else {
            xi * wstar[i] + xj * wstar[j]
        };
        let rest_var = (self.planted_sq_norm - seen).max(0.0) + self.noise_std * self.noise_std;
        let eps: f64 = rng.sample(StandardNormal);
        (xi, xj, mean + rest_var.sqrt() * eps)
    }
}

impl StochasticOracle for OnlineLasso {
    fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    /// Closed-form population loss `½(‖w − w*‖² + σ²)`.
    fn loss(&self, w: &BlockVector) -> f64 {
        let diff_sq: f64 = w
            .as_slice()
            .iter()
            .zip(self.planted.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        0.5 * (diff_sq + self.noise_std * self.noise_std)
    }

    fn block_subgradient(&self, w: &BlockVector, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.deterministic {
            return self.mean_block_gradient(w, i).unwrap();
        }
        let j = self.feature_sampler.sample(rng);
        let (xi, xj, y) = self.draw_pair(i, j, rng);
        let g = xi * xj * w.as_slice()[j] / self.feature_sampler.p(j) - y * xi;
        vec![g]
    }

    fn full_subgradient(&self, w: &BlockVector, rng: &mut ChaCha8Rng) -> BlockVector {
        let mut out = BlockVector::zeros(&self.partition);
        if self.deterministic {
            for (o, (wv, ws)) in out
                .as_mut_slice()
                .iter_mut()
                .zip(w.as_slice().iter().zip(self.planted.as_slice()))
            {
                *o = wv - ws;
            }
            return out;
        }
        let n = self.partition.total();
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let eps: f64 = rng.sample(StandardNormal);
        let y = crate::blocks::dot(&x, self.planted.as_slice()) + self.noise_std * eps;
        let pred = crate::blocks::dot(&x, w.as_slice());
        for (o, xv) in out.as_mut_slice().iter_mut().zip(&x) {
            *o = (pred - y) * xv;
        }
        out
    }

    fn mean_block_gradient(&self, w: &BlockVector, i: usize) -> Option<Vec<f64>> {
        Some(vec![w.as_slice()[i] - self.planted.as_slice()[i]])
    }

    /// Online oracle: one data item per query.
    fn dataset_size(&self) -> usize {
        1
    }

    /// Each block query reveals two of the `n` features of one sample.
    fn block_query_cost(&self, _i: usize) -> f64 {
        2.0 / self.partition.total() as f64
    }

    fn full_query_cost(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::SamplingDistribution;

    #[test]
    fn zero_iterate_gives_pure_target_term() {
        // With w = 0 the estimation term vanishes: G^{(i)} = −y·x_i.
        let sampler = SamplingDistribution::uniform(10).unwrap();
        let o = gen_online_lasso(10, 0.1, sampler, 3).unwrap();
        let w = BlockVector::zeros(o.partition());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Mean of G at w=0 is -w*_i; check via Monte Carlo on one coordinate.
        let i = 2;
        let draws = 200_000;
        let mean: f64 = (0..draws)
            .map(|_| o.block_subgradient(&w, i, &mut rng)[0])
            .sum::<f64>()
            / draws as f64;
        let expect = -o.planted().as_slice()[i];
        assert!((mean - expect).abs() < 0.02, "mean {mean} expect {expect}");
    }

    #[test]
    fn estimator_is_unbiased_for_the_coordinate_gradient() {
        let sampler = SamplingDistribution::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let o = gen_online_lasso(4, 0.1, sampler, 7).unwrap();
        let w = BlockVector::from_vec(o.partition(), vec![0.5, -0.3, 0.2, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..4 {
            let reference = o.mean_block_gradient(&w, i).unwrap()[0];
            let draws = 100_000;
            let samples: Vec<f64> = (0..draws)
                .map(|_| o.block_subgradient(&w, i, &mut rng)[0])
                .collect();
            let mean = samples.iter().sum::<f64>() / draws as f64;
            let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!(
                (mean - reference).abs() <= 3.0 * se + 1e-9,
                "coordinate {i}: mean {mean}, reference {reference}, se {se}"
            );
        }
    }

    #[test]
    fn closed_form_loss_matches_montecarlo() {
        let sampler = SamplingDistribution::uniform(6).unwrap();
        let o = gen_online_lasso(6, 0.0, sampler, 5).unwrap();
        let w = BlockVector::from_vec(o.partition(), vec![0.1; 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 200_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let x: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
            let eps: f64 = rng.sample(StandardNormal);
            let y = crate::blocks::dot(&x, o.planted().as_slice()) + NOISE_STD * eps;
            let r = y - crate::blocks::dot(&x, w.as_slice());
            acc += 0.5 * r * r;
        }
        let mc = acc / draws as f64;
        assert!((mc - o.loss(&w)).abs() < 0.02, "mc {mc} vs {}", o.loss(&w));
    }

    #[test]
    fn planted_model_is_sparse_and_deterministic() {
        let sampler = SamplingDistribution::uniform(50).unwrap();
        let a = gen_online_lasso(50, 0.1, sampler.clone(), 11).unwrap();
        let b = gen_online_lasso(50, 0.1, sampler, 11).unwrap();
        assert_eq!(a.planted(), b.planted());
        let nnz = a.planted().as_slice().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, 5);
    }

    #[test]
    fn rejects_mismatched_sampler() {
        let sampler = SamplingDistribution::uniform(3).unwrap();
        assert!(gen_online_lasso(4, 0.1, sampler, 1).is_err());
        let sampler = SamplingDistribution::uniform(4).unwrap();
        assert!(gen_online_lasso(4, -0.1, sampler, 1).is_err());
    }
}
