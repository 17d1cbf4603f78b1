//! Problem definitions: objective plus stochastic block-subgradient oracle,
//! synthetic generators for the three experiment families, and estimation of
//! the per-block parameters `M_i`, `D_i`.
//!
//! Oracles are immutable after construction; every source of randomness is an
//! explicitly passed RNG stream owned by the caller, so concurrent runs use
//! independent streams and identical seeds reproduce identical sample paths.

mod l1_regression;
mod online_lasso;
mod serialize;
mod transformed_ls;

pub use l1_regression::{gen_l1_regression, L1Regression, ScalingLaw};
pub use online_lasso::{gen_online_lasso, OnlineLasso};
pub use serialize::{read_instance, write_instance};
pub use transformed_ls::{gen_transformed_ls, TransformedLs};

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::blocks::{slice_norm, BlockPartition, BlockVector};
use crate::error::{Error, Result};
use crate::geometry::Regularizer;
use crate::schedules::BlockParams;

/// Stochastic first-order oracle for `φ(x) = f(x) + ω(x)`.
///
/// `block_subgradient` returns one stochastic subgradient restricted to a
/// block; its expectation over the sample stream is a subgradient of `f`.
pub trait StochasticOracle {
    fn partition(&self) -> &Arc<BlockPartition>;

    fn regularizer(&self) -> &Regularizer;

    /// `f(x)`, evaluated exactly (out-of-band; not an oracle query).
    fn loss(&self, x: &BlockVector) -> f64;

    /// Full composite objective `φ(x) = f(x) + ω(x)`.
    fn objective(&self, x: &BlockVector) -> f64 {
        self.loss(x) + self.regularizer().eval(x)
    }

    /// Stochastic subgradient of `f` restricted to block `i`.
    fn block_subgradient(&self, x: &BlockVector, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Full stochastic subgradient of `f`.
    fn full_subgradient(&self, x: &BlockVector, rng: &mut ChaCha8Rng) -> BlockVector;

    /// Exact `g^{(i)}(x) = E[G^{(i)}(x, ξ)]` where available; used as the
    /// reference in unbiasedness checks and as the deterministic-mode value.
    fn mean_block_gradient(&self, x: &BlockVector, i: usize) -> Option<Vec<f64>>;

    /// Number of data items a full pass visits (1 for purely online oracles).
    fn dataset_size(&self) -> usize;

    /// Fraction of a data pass consumed by one block query on block `i`.
    fn block_query_cost(&self, i: usize) -> f64 {
        let p = self.partition();
        p.size(i) as f64 / p.total() as f64 / self.dataset_size() as f64
    }

    /// Fraction of a data pass consumed by one full-subgradient query.
    fn full_query_cost(&self) -> f64 {
        1.0 / self.dataset_size() as f64
    }
}

/// Dense row-major matrix; just enough surface for data matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// How to bound `D_i = d_i(x*^{(i)})` when estimating block parameters.
pub enum DistanceBound<'a> {
    /// `D_i = ½·radius²` on every block (the honest choice when `x*` is
    /// unknown).
    Radius(f64),
    /// Exact `D_i = ½‖x*^{(i)}‖²` relative to the origin prox center, for
    /// synthetic instances with a planted solution.
    Planted(&'a BlockVector),
}

/// Estimates `M_i` as the root of the worst (over probe points) empirical
/// mean of `‖G^{(i)}‖²`, and `D_i` per the chosen bound. Both are floored so
/// downstream stepsize and sampling formulas stay finite.
pub fn estimate_params<O: StochasticOracle + ?Sized>(
    oracle: &O,
    probe_points: &[BlockVector],
    samples_per_point: usize,
    d_bound: DistanceBound,
    rng: &mut ChaCha8Rng,
) -> Result<BlockParams> {
    if probe_points.is_empty() {
        return Err(Error::InvalidParameter(
            "parameter estimation needs at least one probe point".into(),
        ));
    }
    if samples_per_point == 0 {
        return Err(Error::InvalidParameter(
            "samples_per_point must be at least 1".into(),
        ));
    }
    let n = oracle.partition().num_blocks();
    let mut m_sq = vec![0.0f64; n];
    for x in probe_points {
        for (i, worst) in m_sq.iter_mut().enumerate() {
            let mut acc = 0.0;
            for _ in 0..samples_per_point {
                let g = oracle.block_subgradient(x, i, rng);
                let nrm = slice_norm(&g);
                acc += nrm * nrm;
            }
            *worst = worst.max(acc / samples_per_point as f64);
        }
    }
    let m: Vec<f64> = m_sq.iter().map(|v| v.sqrt()).collect();
    let d: Vec<f64> = match d_bound {
        DistanceBound::Radius(r) => {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "radius guess must be positive, got {r}"
                )));
            }
            vec![0.5 * r * r; n]
        }
        DistanceBound::Planted(xstar) => (0..n)
            .map(|i| {
                let b = xstar.block_norm(i);
                0.5 * b * b
            })
            .collect(),
    };
    BlockParams::new(m, d)
}

/// A serializable problem instance wrapping one of the three generators.
#[derive(Debug, Clone)]
pub enum Instance {
    L1Regression(L1Regression),
    TransformedLs(TransformedLs),
    OnlineLasso(OnlineLasso),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::L1Regression(_) => "l1_regression",
            Instance::TransformedLs(_) => "transformed_ls",
            Instance::OnlineLasso(_) => "online_lasso",
        }
    }

    pub fn planted(&self) -> &BlockVector {
        match self {
            Instance::L1Regression(o) => o.planted(),
            Instance::TransformedLs(o) => o.planted(),
            Instance::OnlineLasso(o) => o.planted(),
        }
    }

    pub fn set_regularizer(&mut self, reg: Regularizer) {
        match self {
            Instance::L1Regression(o) => o.set_regularizer(reg),
            Instance::TransformedLs(o) => o.set_regularizer(reg),
            Instance::OnlineLasso(o) => o.set_regularizer(reg),
        }
    }

    /// Switches the oracle to deterministic mode: every subgradient query
    /// returns the exact mean subgradient (`g ≡ G`), matching the
    /// deterministic-optimization reading of the model.
    pub fn set_deterministic(&mut self, on: bool) {
        match self {
            Instance::L1Regression(o) => o.set_deterministic(on),
            Instance::TransformedLs(o) => o.set_deterministic(on),
            Instance::OnlineLasso(o) => o.set_deterministic(on),
        }
    }
}

macro_rules! delegate {
    ($self:ident, $o:ident => $e:expr) => {
        match $self {
            Instance::L1Regression($o) => $e,
            Instance::TransformedLs($o) => $e,
            Instance::OnlineLasso($o) => $e,
        }
    };
}

impl StochasticOracle for Instance {
    fn partition(&self) -> &Arc<BlockPartition> {
        delegate!(self, o => o.partition())
    }

    fn regularizer(&self) -> &Regularizer {
        delegate!(self, o => o.regularizer())
    }

    fn loss(&self, x: &BlockVector) -> f64 {
        delegate!(self, o => o.loss(x))
    }

    fn block_subgradient(&self, x: &BlockVector, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        delegate!(self, o => o.block_subgradient(x, i, rng))
    }

    fn full_subgradient(&self, x: &BlockVector, rng: &mut ChaCha8Rng) -> BlockVector {
        delegate!(self, o => o.full_subgradient(x, rng))
    }

    fn mean_block_gradient(&self, x: &BlockVector, i: usize) -> Option<Vec<f64>> {
        delegate!(self, o => o.mean_block_gradient(x, i))
    }

    fn dataset_size(&self) -> usize {
        delegate!(self, o => o.dataset_size())
    }

    fn block_query_cost(&self, i: usize) -> f64 {
        delegate!(self, o => o.block_query_cost(i))
    }

    fn full_query_cost(&self) -> f64 {
        delegate!(self, o => o.full_query_cost())
    }
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
