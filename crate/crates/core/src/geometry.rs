//! Distance-generating functions, Bregman divergences, and closed-form
//! solutions of the per-block dual-averaging subproblems.
//!
//! Every block uses the quadratic distance `d_i(x) = ½‖x − c^{(i)}‖²` around a
//! prox center `c`, which is 1-strongly convex w.r.t. the Euclidean block
//! norm. All subproblems are solved in closed form; there is no inner
//! iterative solver.

use crate::blocks::{dot, BlockVector};
use crate::error::{Error, Result};

/// Quadratic distance function `d(x) = Σ_i ½‖x^{(i)} − c^{(i)}‖²` with
/// strong-convexity modulus 1.
#[derive(Debug, Clone)]
pub struct DistanceFunction {
    center: BlockVector,
    modulus: f64,
}

impl DistanceFunction {
    pub fn new(center: BlockVector) -> Self {
        Self {
            center,
            modulus: 1.0,
        }
    }

    pub fn center(&self) -> &BlockVector {
        &self.center
    }

    pub fn center_block(&self, i: usize) -> &[f64] {
        self.center.block(i)
    }

    /// Strong-convexity modulus of each `d_i` (fixed at 1 for the quadratic
    /// choice).
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// `d_i` evaluated on a block slice.
    pub fn value_block(&self, i: usize, x: &[f64]) -> f64 {
        let c = self.center.block(i);
        0.5 * x
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    /// `d(x) = Σ_i d_i(x^{(i)})`.
    pub fn value(&self, x: &BlockVector) -> f64 {
        (0..self.center.partition().num_blocks())
            .map(|i| self.value_block(i, x.block(i)))
            .sum()
    }

    /// Gradient of `d_i` at `z`, i.e. `z − c^{(i)}`.
    pub fn gradient_block(&self, i: usize, z: &[f64]) -> Vec<f64> {
        let c = self.center.block(i);
        z.iter().zip(c).map(|(a, b)| a - b).collect()
    }
}

/// Bregman divergence `V_i(z, x) = d_i(x) − d_i(z) − ⟨∇_i d(z), x − z⟩`,
/// computed from the defining formula. For the quadratic `d_i` this equals
/// `½‖x^{(i)} − z^{(i)}‖²`.
pub fn bregman(d: &DistanceFunction, z: &BlockVector, x: &BlockVector, i: usize) -> f64 {
    let zs = z.block(i);
    let xs = x.block(i);
    let grad = d.gradient_block(i, zs);
    let diff: Vec<f64> = xs.iter().zip(zs).map(|(a, b)| a - b).collect();
    d.value_block(i, xs) - d.value_block(i, zs) - dot(&grad, &diff)
}

/// Block-separable simple term `ω(x) = Σ_i ω_i(x^{(i)})`.
///
/// `Box` doubles as the feasible-set description: it is the indicator of the
/// axis-aligned box (0 inside, +∞ outside) and is enforced by clamping in
/// every prox step regardless of its weight.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `weight * ‖x‖₁`
    L1 { weight: f64 },
    /// `(modulus / 2) * ‖x‖²`; strongly convex with the given modulus.
    SqL2 { modulus: f64 },
    /// Indicator of `[lo, hi]^{N_i}` per coordinate.
    Box { lo: f64, hi: f64 },
}

impl Regularizer {
    /// Strong-convexity modulus λ of ω (zero except for `SqL2`).
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Regularizer::SqL2 { modulus } => *modulus,
            _ => 0.0,
        }
    }

    /// Bounds of the feasible box, if the regularizer encodes one.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Regularizer::Box { lo, hi } => Some((*lo, *hi)),
            _ => None,
        }
    }

    pub fn eval_slice(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::SqL2 { modulus } => {
                0.5 * modulus * x.iter().map(|v| v * v).sum::<f64>()
            }
            Regularizer::Box { lo, hi } => {
                if x.iter().all(|v| *v >= *lo && *v <= *hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn eval(&self, x: &BlockVector) -> f64 {
        self.eval_slice(x.as_slice())
    }

    pub fn id(&self) -> String {
        match self {
            Regularizer::Zero => "zero".into(),
            Regularizer::L1 { weight } => format!("l1({weight})"),
            Regularizer::SqL2 { modulus } => format!("sql2({modulus})"),
            Regularizer::Box { lo, hi } => format!("box({lo},{hi})"),
        }
    }
}

/// Soft-thresholding; ties at `|v| == threshold` resolve to 0.
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// Solves the SBDA-u per-block subproblem
///
/// `argmin_{z ∈ X_i} { ⟨gbar, z⟩ + l·ω_i(z) + γ·½‖z − center‖² }`
///
/// in closed form. `center` is the block slice of the prox center.
pub fn prox_step_u(
    gbar: &[f64],
    l: f64,
    omega: &Regularizer,
    gamma: f64,
    center: &[f64],
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidStepsize(gamma));
    }
    debug_assert_eq!(gbar.len(), center.len());
    let out = match omega {
        Regularizer::Zero => gbar
            .iter()
            .zip(center)
            .map(|(g, c)| c - g / gamma)
            .collect(),
        Regularizer::SqL2 { modulus } => {
            let denom = gamma + l * modulus;
            gbar.iter()
                .zip(center)
                .map(|(g, c)| (gamma * c - g) / denom)
                .collect()
        }
        Regularizer::L1 { weight } => {
            let tau = l * weight;
            gbar.iter()
                .zip(center)
                .map(|(g, c)| soft_threshold(gamma * c - g, tau) / gamma)
                .collect()
        }
        Regularizer::Box { lo, hi } => gbar
            .iter()
            .zip(center)
            .map(|(g, c)| (c - g / gamma).clamp(*lo, *hi))
            .collect(),
    };
    Ok(out)
}

/// Solves the SBDA-r per-block subproblem
///
/// `argmin_{z ∈ X_i} { ⟨gbar, z⟩ + (γ/p)·½‖z − center‖² }`
///
/// returning `center − (p/γ)·gbar`, clamped when the feasible set is a box.
pub fn prox_step_r(
    gbar: &[f64],
    gamma: f64,
    p: f64,
    center: &[f64],
    bounds: Option<(f64, f64)>,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidStepsize(gamma));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let step = p / gamma;
    let out = gbar.iter().zip(center).map(|(g, c)| {
        let z = c - step * g;
        match bounds {
            Some((lo, hi)) => z.clamp(lo, hi),
            None => z,
        }
    });
    Ok(out.collect())
}
