//! Robust linear regression: `φ(x) = (1/m) Σ_r |b_r − ⟨ã_r, x⟩|` with
//! column-scaled Gaussian data `ã = S a` and a planted solution.

use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blocks::{dot, BlockPartition, BlockVector};
use crate::error::{Error, Result};
use crate::geometry::Regularizer;
use crate::oracles::{sign, DenseMatrix, StochasticOracle};

/// Distribution of the column scales `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingLaw {
    /// All scales equal to one.
    Uniform,
    /// Scales drawn from the density `p(s; a) = a (1 − s)^{a−1}` on `[0, 1]`
    /// and sorted in decreasing order, so that for large `a` the subgradient
    /// moments `M_i` concentrate on the leading blocks.
    PowerLaw { a: f64 },
}

impl FromStr for ScalingLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(ScalingLaw::Uniform);
        }
        if let Some(rest) = s
            .strip_prefix("powerlaw:")
            .or_else(|| s.strip_prefix("power-law:"))
        {
            let a: f64 = rest.parse().map_err(|_| {
                Error::InvalidParameter(format!("bad power-law exponent {rest:?}"))
            })?;
            if !(a > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "power-law exponent must be positive, got {a}"
                )));
            }
            return Ok(ScalingLaw::PowerLaw { a });
        }
        Err(Error::InvalidParameter(format!(
            "unknown scaling law {s:?}; expected \"uniform\" or \"powerlaw:<a>\""
        )))
    }
}

impl std::fmt::Display for ScalingLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalingLaw::Uniform => write!(f, "uniform"),
            ScalingLaw::PowerLaw { a } => write!(f, "powerlaw:{a}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct L1Regression {
    pub(crate) partition: Arc<BlockPartition>,
    /// Row-scaled data matrix `ã = A·S`, one sample per row.
    pub(crate) data: DenseMatrix,
    pub(crate) targets: Vec<f64>,
    pub(crate) scales: Vec<f64>,
    pub(crate) planted: BlockVector,
    pub(crate) regularizer: Regularizer,
    pub(crate) noise_var: f64,
    pub(crate) scaling: ScalingLaw,
    pub(crate) seed: u64,
    pub(crate) deterministic: bool,
}

/// Generates an `l1`-regression instance: `x*` and the rows of `A` are
/// standard normal, columns are scaled by `s ~ ScalingLaw`, and
/// `b = (A S) x* + σ` with `σ ~ N(0, noise_var·I)`.
///
/// The instance is a deterministic function of its arguments.
pub fn gen_l1_regression(
    m: usize,
    n: usize,
    blocks: usize,
    noise_var: f64,
    scaling: ScalingLaw,
    seed: u64,
) -> Result<L1Regression> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "l1 regression needs m >= 1 and n >= 1".into(),
        ));
    }
    if noise_var < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be nonnegative, got {noise_var}"
        )));
    }
    let partition = BlockPartition::uniform_split(n, blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let planted: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut data = DenseMatrix::zeros(m, n);
    for r in 0..m {
        for v in data.row_mut(r) {
            *v = rng.sample(StandardNormal);
        }
    }
    let mut scales = vec![1.0; n];
    if let ScalingLaw::PowerLaw { a } = scaling {
        for s in &mut scales {
            let u: f64 = rng.random();
            *s = 1.0 - (1.0 - u).powf(1.0 / a);
        }
        scales.sort_by(|x, y| y.partial_cmp(x).unwrap());
    }
    for r in 0..m {
        for (v, s) in data.row_mut(r).iter_mut().zip(&scales) {
            *v *= s;
        }
    }
    let noise_std = noise_var.sqrt();
    let targets: Vec<f64> = (0..m)
        .map(|r| {
            let eps: f64 = rng.sample(StandardNormal);
            dot(data.row(r), &planted) + noise_std * eps
        })
        .collect();

    Ok(L1Regression {
        planted: BlockVector::from_vec(&partition, planted)?,
        partition,
        data,
        targets,
        scales,
        regularizer: Regularizer::Zero,
        noise_var,
        scaling,
        seed,
        deterministic: false,
    })
}

impl L1Regression {
    pub fn planted(&self) -> &BlockVector {
        &self.planted
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
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

    fn residual(&self, x: &BlockVector, row: usize) -> f64 {
        self.targets[row] - dot(self.data.row(row), x.as_slice())
    }
}

impl StochasticOracle for L1Regression {
    fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn loss(&self, x: &BlockVector) -> f64 {
        let m = self.data.rows();
        (0..m).map(|r| self.residual(x, r).abs()).sum::<f64>() / m as f64
    }

    fn block_subgradient(&self, x: &BlockVector, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.deterministic {
            return self.mean_block_gradient(x, i).unwrap();
        }
        let row = rng.random_range(0..self.data.rows());
        let s = sign(self.residual(x, row));
        let range = self.partition.range(i);
        self.data.row(row)[range].iter().map(|a| -s * a).collect()
    }

    fn full_subgradient(&self, x: &BlockVector, rng: &mut ChaCha8Rng) -> BlockVector {
        let mut out = BlockVector::zeros(&self.partition);
        if self.deterministic {
            let m = self.data.rows() as f64;
            for r in 0..self.data.rows() {
                let s = sign(self.residual(x, r));
                for (o, a) in out.as_mut_slice().iter_mut().zip(self.data.row(r)) {
                    *o -= s * a / m;
                }
            }
            return out;
        }
        let row = rng.random_range(0..self.data.rows());
        let s = sign(self.residual(x, row));
        for (o, a) in out.as_mut_slice().iter_mut().zip(self.data.row(row)) {
            *o = -s * a;
        }
        out
    }

    fn mean_block_gradient(&self, x: &BlockVector, i: usize) -> Option<Vec<f64>> {
        let range = self.partition.range(i);
        let mut acc = vec![0.0; range.len()];
        let m = self.data.rows() as f64;
        for r in 0..self.data.rows() {
            let s = sign(self.residual(x, r));
            for (o, a) in acc.iter_mut().zip(&self.data.row(r)[range.clone()]) {
                *o -= s * a / m;
            }
        }
        Some(acc)
    }

    fn dataset_size(&self) -> usize {
        self.data.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::slice_norm;

    #[test]
    fn noiseless_objective_vanishes_at_planted_solution() {
        let o = gen_l1_regression(50, 20, 4, 0.0, ScalingLaw::Uniform, 3).unwrap();
        assert!(o.loss(o.planted()) < 1e-12);
    }

    #[test]
    fn planted_point_is_a_near_minimizer_under_small_noise() {
        let o = gen_l1_regression(500, 200, 10, 0.01, ScalingLaw::Uniform, 7).unwrap();
        let at_star = o.loss(o.planted());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let mut x = o.planted().clone();
            for v in x.as_mut_slice() {
                let step: f64 = rng.sample(StandardNormal);
                *v += step;
            }
            assert!(o.loss(&x) >= at_star, "perturbation beat the planted point");
        }
    }

    #[test]
    fn deterministic_instances_are_bit_identical() {
        let a = gen_l1_regression(30, 12, 3, 0.01, ScalingLaw::PowerLaw { a: 5.0 }, 11).unwrap();
        let b = gen_l1_regression(30, 12, 3, 0.01, ScalingLaw::PowerLaw { a: 5.0 }, 11).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.targets, b.targets);
        assert_eq!(a.planted, b.planted);
        let c = gen_l1_regression(30, 12, 3, 0.01, ScalingLaw::PowerLaw { a: 5.0 }, 12).unwrap();
        assert_ne!(a.targets, c.targets);
    }

    #[test]
    fn identical_seeds_give_identical_sample_streams() {
        let o = gen_l1_regression(30, 12, 3, 0.01, ScalingLaw::Uniform, 11).unwrap();
        let x = BlockVector::zeros(o.partition());
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            assert_eq!(
                o.block_subgradient(&x, 1, &mut r1),
                o.block_subgradient(&x, 1, &mut r2)
            );
        }
    }

    #[test]
    fn block_subgradient_is_a_scaled_row_slice() {
        let o = gen_l1_regression(10, 6, 2, 0.0, ScalingLaw::Uniform, 2).unwrap();
        let x = BlockVector::zeros(o.partition());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = o.block_subgradient(&x, 1, &mut rng);
        assert_eq!(g.len(), 3);
        let matches = (0..10).any(|r| {
            let s = sign(o.residual(&x, r));
            o.data.row(r)[3..6]
                .iter()
                .zip(&g)
                .all(|(a, gv)| (-s * a - gv).abs() < 1e-15)
        });
        assert!(matches, "subgradient must come from one data row");
    }

    #[test]
    fn powerlaw_scales_are_sorted_and_spread() {
        let o = gen_l1_regression(50, 200, 20, 0.01, ScalingLaw::PowerLaw { a: 30.0 }, 4).unwrap();
        let s = o.scales();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        // Per-block root-mean-square scale spans at least 10x from the
        // heaviest block to the lightest.
        let p = o.partition();
        let block_rms: Vec<f64> = (0..p.num_blocks())
            .map(|i| {
                let sl = &s[p.range(i)];
                slice_norm(sl) / (sl.len() as f64).sqrt()
            })
            .collect();
        let max = block_rms.iter().cloned().fold(f64::MIN, f64::max);
        let min = block_rms.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min >= 10.0, "spread {max}/{min} too small");
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(gen_l1_regression(0, 5, 1, 0.0, ScalingLaw::Uniform, 1).is_err());
        assert!(gen_l1_regression(5, 0, 1, 0.0, ScalingLaw::Uniform, 1).is_err());
        assert!(gen_l1_regression(5, 3, 7, 0.0, ScalingLaw::Uniform, 1).is_err());
    }

    #[test]
    fn scaling_law_parses() {
        assert_eq!("uniform".parse::<ScalingLaw>().unwrap(), ScalingLaw::Uniform);
        assert_eq!(
            "powerlaw:30".parse::<ScalingLaw>().unwrap(),
            ScalingLaw::PowerLaw { a: 30.0 }
        );
        assert!("powerlaw:-1".parse::<ScalingLaw>().is_err());
        assert!("gamma".parse::<ScalingLaw>().is_err());
    }
}
