//! Stepsize state machines and block-sampling distributions.
//!
//! Stepsizes `γ_t` are per-block and may only grow on the sampled block
//! (all other blocks keep their previous value). The accumulated weights
//! `l_t^{(i)}` track the sum of `α_s` over the iterations at which block `i`
//! was sampled. Adaptive rules work without knowing the horizon; constant
//! rules require `T` up front.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Floor applied to block parameters so that sampling and stepsize formulas
/// stay finite (`p_i ∝ M_i^{2/3} D_i^{1/3}` degenerates at zero).
pub const PARAM_FLOOR: f64 = 1e-8;

/// Floor applied to block probabilities before renormalization.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

/// Per-block problem parameters: `M_i` bounds the second moment of the
/// stochastic block subgradient, `D_i` bounds `d_i` at the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    m: Vec<f64>,
    d: Vec<f64>,
}

impl BlockParams {
    /// Builds params, flooring both vectors at [`PARAM_FLOOR`]. Rejects
    /// mismatched lengths, empty inputs, and non-finite values.
    pub fn new(m: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if m.is_empty() || m.len() != d.len() {
            return Err(Error::InvalidParameter(format!(
                "block params need equal nonzero lengths, got {} and {}",
                m.len(),
                d.len()
            )));
        }
        if m.iter().chain(d.iter()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "block params must be finite and nonnegative".into(),
            ));
        }
        let floor = |v: f64| v.max(PARAM_FLOOR);
        Ok(Self {
            m: m.into_iter().map(floor).collect(),
            d: d.into_iter().map(floor).collect(),
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self, i: usize) -> f64 {
        self.m[i]
    }

    pub fn d(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn m_values(&self) -> &[f64] {
        &self.m
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d
    }

    pub fn sum_m_sq(&self) -> f64 {
        self.m.iter().map(|v| v * v).sum()
    }

    pub fn sum_d(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// Probability mass over blocks with a cumulative table for inverse-CDF
/// sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    p: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SamplingDistribution {
    /// Normalizes nonnegative weights into a distribution. Weights below
    /// [`PROBABILITY_FLOOR`] (after normalization) are floored and the mass
    /// renormalized, keeping every `1/p_i` factor bounded.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no blocks".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        let mut p: Vec<f64> = weights
            .iter()
            .map(|w| (w / total).max(PROBABILITY_FLOOR))
            .collect();
        let renorm: f64 = p.iter().sum();
        for v in &mut p {
            *v /= renorm;
        }
        let mut cumulative = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        for v in &p {
            acc += v;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { p, cumulative })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    /// Optimal nonuniform law `p_i = M_i^{2/3} D_i^{1/3} / C` minimizing the
    /// SBDA-r bound jointly with the stepsizes.
    pub fn optimal(params: &BlockParams) -> Result<Self> {
        let weights = params
            .m
            .iter()
            .zip(&params.d)
            .map(|(m, d)| m.powf(2.0 / 3.0) * d.powf(1.0 / 3.0))
            .collect();
        Self::new(weights)
    }

    pub fn num_blocks(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Draws a block index by inverse-CDF binary search; deterministic given
    /// the RNG state.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|c| *c <= u);
        idx.min(self.p.len() - 1)
    }
}

/// Closed-form solution of `min_{x > 0, y ∈ simplex} Σ_i [a_i/x_i + x_i/(b_i y_i)]`:
/// `y*_i = (a_i/b_i)^{1/3}·W`, `x*_i = a_i^{2/3} b_i^{1/3} √W` with
/// `W = (Σ_j (a_j/b_j)^{1/3})^{-1}`. Returns `(x*, y*)`.
pub fn joint_optimum(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidParameter(
            "joint optimum needs equal nonzero lengths".into(),
        ));
    }
    if a.iter().chain(b.iter()).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "joint optimum requires strictly positive inputs".into(),
        ));
    }
    let w: f64 = 1.0
        / a.iter()
            .zip(b)
            .map(|(ai, bi)| (ai / bi).powf(1.0 / 3.0))
            .sum::<f64>();
    let y: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| (ai / bi).powf(1.0 / 3.0) * w)
        .collect();
    let x: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| ai.powf(2.0 / 3.0) * bi.powf(1.0 / 3.0) * w.sqrt())
        .collect();
    Ok((x, y))
}

/// Objective of the joint stepsize/sampling problem solved by
/// [`joint_optimum`].
pub fn joint_objective(x: &[f64], y: &[f64], a: &[f64], b: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(a.iter().zip(b))
        .map(|((xi, yi), (ai, bi))| ai / xi + xi / (bi * yi))
        .sum()
}

/// Per-block stepsize and averaging-weight state of a solver run.
#[derive(Debug, Clone)]
pub struct ScheduleState {
    gamma: Vec<f64>,
    l: Vec<f64>,
    alpha: f64,
    next_t: usize,
}

impl ScheduleState {
    pub fn gamma(&self, i: usize) -> f64 {
        self.gamma[i]
    }

    pub fn l(&self, i: usize) -> f64 {
        self.l[i]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }
}

/// Every stepsize rule used by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Constant per-block stepsizes `γ^{(i)} = sqrt(5·T·M_i²/(n·ρ·D_i))`,
    /// `α_t ≡ 1` (convex composite, horizon known).
    ConstGammaConvex { beta: Vec<f64> },
    /// Adaptive `γ_t^{(i)} = u_i·sqrt(t+1)` on the sampled block with
    /// `u_i = sqrt(10·M_i²/(n·ρ·D_i))`, `γ_{-1}^{(i)} = u_i` (convex, anytime).
    AdaptiveGammaConvex { u: Vec<f64> },
    /// `α_t ≡ 1`, `γ ≡ λ/ρ` (strongly convex, simple averaging).
    StronglyConvexSimple { gamma: f64 },
    /// `α_t = n + t`, `γ ≡ λ(2n+T)/ρ` (strongly convex, aggressive weights).
    StronglyConvexAggressive { gamma: f64, n: usize },
    /// SBDA-r constant rule `γ^{(i)} = sqrt((1+T)·p_i·M_i²/(2·ρ·D_i))`; at the
    /// optimal `p` this equals `sqrt((1+T)/(2ρC))·M_i^{4/3}·D_i^{-1/3}`.
    SbdaRConstGamma { beta: Vec<f64> },
    /// SBDA-r adaptive rule `γ_t^{(i)} = u_i·sqrt(t+1)` on the sampled block
    /// with `u_i = sqrt(p_i·M_i²/(ρ·D_i))`, `γ_{-1}^{(i)} = u_i`.
    SbdaRAdaptiveGamma { u: Vec<f64> },
}

impl Schedule {
    pub fn const_gamma_convex(params: &BlockParams, horizon: usize, rho: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter(
                "constant stepsizes require a horizon of at least 1".into(),
            ));
        }
        check_rho(rho)?;
        let n = params.num_blocks() as f64;
        let t = horizon as f64;
        let beta = params
            .m
            .iter()
            .zip(&params.d)
            .map(|(m, d)| (5.0 * t * m * m / (n * rho * d)).sqrt())
            .collect();
        Ok(Schedule::ConstGammaConvex { beta })
    }

    pub fn adaptive_gamma_convex(params: &BlockParams, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let n = params.num_blocks() as f64;
        let u = params
            .m
            .iter()
            .zip(&params.d)
            .map(|(m, d)| (10.0 * m * m / (n * rho * d)).sqrt())
            .collect();
        Ok(Schedule::AdaptiveGammaConvex { u })
    }

    pub fn strongly_convex_simple(lambda: f64, rho: f64) -> Result<Self> {
        check_lambda(lambda)?;
        check_rho(rho)?;
        Ok(Schedule::StronglyConvexSimple {
            gamma: lambda / rho,
        })
    }

    pub fn strongly_convex_aggressive(
        lambda: f64,
        rho: f64,
        n: usize,
        horizon: usize,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        check_rho(rho)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter(
                "the aggressive scheme requires the horizon up front".into(),
            ));
        }
        Ok(Schedule::StronglyConvexAggressive {
            gamma: lambda * (2.0 * n as f64 + horizon as f64) / rho,
            n,
        })
    }

    pub fn sbda_r_const_gamma(
        params: &BlockParams,
        horizon: usize,
        rho: f64,
        p: &SamplingDistribution,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter(
                "constant stepsizes require a horizon of at least 1".into(),
            ));
        }
        check_rho(rho)?;
        check_matching(params, p)?;
        let t = horizon as f64;
        let beta = params
            .m
            .iter()
            .zip(&params.d)
            .zip(p.probabilities())
            .map(|((m, d), pi)| ((1.0 + t) * pi * m * m / (2.0 * rho * d)).sqrt())
            .collect();
        Ok(Schedule::SbdaRConstGamma { beta })
    }

    pub fn sbda_r_adaptive_gamma(
        params: &BlockParams,
        rho: f64,
        p: &SamplingDistribution,
    ) -> Result<Self> {
        check_rho(rho)?;
        check_matching(params, p)?;
        let u = params
            .m
            .iter()
            .zip(&params.d)
            .zip(p.probabilities())
            .map(|((m, d), pi)| (pi * m * m / (rho * d)).sqrt())
            .collect();
        Ok(Schedule::SbdaRAdaptiveGamma { u })
    }

    pub fn num_blocks(&self) -> usize {
        match self {
            Schedule::ConstGammaConvex { beta } | Schedule::SbdaRConstGamma { beta } => beta.len(),
            Schedule::AdaptiveGammaConvex { u } | Schedule::SbdaRAdaptiveGamma { u } => u.len(),
            Schedule::StronglyConvexSimple { .. } => 0,
            Schedule::StronglyConvexAggressive { .. } => 0,
        }
    }

    /// Weight `α_t` put on the subgradient sampled at iteration `t`.
    pub fn alpha(&self, t: usize) -> f64 {
        match self {
            Schedule::StronglyConvexAggressive { n, .. } => (*n + t) as f64,
            _ => 1.0,
        }
    }

    /// Initial state: `γ_{-1}`, zero accumulated weights.
    pub fn init_state(&self, n: usize) -> ScheduleState {
        let gamma = match self {
            Schedule::ConstGammaConvex { beta } | Schedule::SbdaRConstGamma { beta } => {
                beta.clone()
            }
            Schedule::AdaptiveGammaConvex { u } | Schedule::SbdaRAdaptiveGamma { u } => u.clone(),
            Schedule::StronglyConvexSimple { gamma }
            | Schedule::StronglyConvexAggressive { gamma, .. } => vec![*gamma; n],
        };
        debug_assert_eq!(gamma.len(), n);
        ScheduleState {
            gamma,
            l: vec![0.0; n],
            alpha: 0.0,
            next_t: 0,
        }
    }

    /// Advances the state for iteration `t` with sampled block `i`: sets
    /// `α_t`, updates `γ_t` on the sampled block only (never decreasing), and
    /// accumulates `l_t^{(i)} += α_t`.
    pub fn advance(&self, state: &mut ScheduleState, t: usize, i: usize) {
        debug_assert_eq!(state.next_t, t, "schedule advanced out of order");
        state.alpha = self.alpha(t);
        let new_gamma = match self {
            Schedule::ConstGammaConvex { beta } | Schedule::SbdaRConstGamma { beta } => beta[i],
            Schedule::AdaptiveGammaConvex { u } | Schedule::SbdaRAdaptiveGamma { u } => {
                u[i] * ((t + 1) as f64).sqrt()
            }
            Schedule::StronglyConvexSimple { gamma }
            | Schedule::StronglyConvexAggressive { gamma, .. } => *gamma,
        };
        debug_assert!(
            new_gamma >= state.gamma[i],
            "stepsizes may not decrease on the sampled block"
        );
        state.gamma[i] = new_gamma;
        state.l[i] += state.alpha;
        state.next_t = t + 1;
    }

    pub fn id(&self) -> &'static str {
        match self {
            Schedule::ConstGammaConvex { .. } => "const_gamma_convex",
            Schedule::AdaptiveGammaConvex { .. } => "adaptive_gamma_convex",
            Schedule::StronglyConvexSimple { .. } => "strongly_convex_simple",
            Schedule::StronglyConvexAggressive { .. } => "strongly_convex_aggressive",
            Schedule::SbdaRConstGamma { .. } => "sbda_r_const_gamma",
            Schedule::SbdaRAdaptiveGamma { .. } => "sbda_r_adaptive_gamma",
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "strong-convexity modulus rho must be positive, got {rho}"
        )))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "strongly convex schedules require lambda > 0, got {lambda}"
        )))
    }
}

fn check_matching(params: &BlockParams, p: &SamplingDistribution) -> Result<()> {
    if params.num_blocks() == p.num_blocks() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "params cover {} blocks but the sampler covers {}",
            params.num_blocks(),
            p.num_blocks()
        )))
    }
}
