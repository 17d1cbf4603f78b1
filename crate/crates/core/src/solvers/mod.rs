//! The SBDA-u / SBDA-r loops, output-averaging schemes, and the baseline
//! algorithms used for comparison (dual averaging, mirror descent, and a
//! stochastic block mirror descent reconstruction).
//!
//! Every run is single threaded and fully determined by its seed. Block
//! methods issue exactly one block-subgradient query per iteration;
//! full-gradient baselines issue exactly one full query per iteration. The
//! objective is evaluated out of band at the logging cadence and never counts
//! as an oracle query.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blocks::{slice_norm, BlockVector};
use crate::error::{Error, Result};
use crate::geometry::{prox_step_r, prox_step_u, Regularizer};
use crate::oracles::StochasticOracle;
use crate::schedules::{SamplingDistribution, Schedule};

/// Output-averaging rule for SBDA-u.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMode {
    /// The algorithm's own weights `w_t = α_{t−1} − ((n−1)/n)·α_t`, `t = 1..T`.
    Algorithm,
    /// Plain average `x̄ = (1/T) Σ_{t=1..T} x_t` (the constant-α corollaries).
    Uniform,
    /// Linearly growing weights `x̄ = Σ t·x_t / Σ t` (the aggressive scheme).
    Linear,
}

impl AveragingMode {
    /// Weight assigned to iterate `x_s`, `s = 1..=T`.
    pub fn weight(&self, s: usize, schedule: &Schedule, n: usize) -> f64 {
        match self {
            AveragingMode::Algorithm => {
                schedule.alpha(s - 1) - (n as f64 - 1.0) / n as f64 * schedule.alpha(s)
            }
            AveragingMode::Uniform => 1.0,
            AveragingMode::Linear => s as f64,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            AveragingMode::Algorithm => "algorithm",
            AveragingMode::Uniform => "uniform",
            AveragingMode::Linear => "linear",
        }
    }
}

/// Exact weighted mean of a set of iterates.
pub fn average_output(iterates: &[BlockVector], weights: &[f64]) -> Result<BlockVector> {
    if iterates.is_empty() || iterates.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "need equally many iterates and weights, got {} and {}",
            iterates.len(),
            weights.len()
        )));
    }
    if let Some((t, &w)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(Error::NegativeOutputWeight { t, weight: w });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let mut acc = BlockVector::zeros(iterates[0].partition());
    for (x, &w) in iterates.iter().zip(weights) {
        acc.scaled_add(w, x);
    }
    acc.scale(1.0 / total);
    Ok(acc)
}

/// One logged point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: usize,
    /// Oracle queries issued so far (block or full, per the algorithm).
    pub queries: u64,
    /// Data passes consumed so far under the cost-fair metric.
    pub passes: f64,
    /// Full objective `φ` at the algorithm's current output point.
    pub objective: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunMeta {
    pub algorithm: String,
    pub seed: u64,
    pub schedule: String,
    pub sampler: String,
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_point: BlockVector,
    /// The algorithm's averaged output `x̄`.
    pub averaged: BlockVector,
    pub trace: Vec<TracePoint>,
    pub block_queries: u64,
    pub full_queries: u64,
    pub meta: RunMeta,
    /// All iterates `x_0..x_T`, kept only when requested.
    pub iterates: Option<Vec<BlockVector>>,
}

impl RunResult {
    /// Objective at the averaged output (the last trace entry).
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map(|p| p.objective).unwrap_or(f64::NAN)
    }
}

/// Common knobs of a solver run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Number of iterations `T`.
    pub horizon: usize,
    pub seed: u64,
    /// Logging cadence; 0 selects `ceil(T / 200)`.
    pub cadence: usize,
    /// Keep all iterates in the result (small runs only).
    pub keep_iterates: bool,
}

impl RunOptions {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            cadence: 0,
            keep_iterates: false,
        }
    }

    pub fn cadence(mut self, cadence: usize) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn keep_iterates(mut self, keep: bool) -> Self {
        self.keep_iterates = keep;
        self
    }

    fn effective_cadence(&self) -> usize {
        if self.cadence > 0 {
            self.cadence
        } else {
            self.horizon.div_ceil(200).max(1)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Running weighted average plus trace bookkeeping shared by all solvers.
struct RunState {
    averaged_acc: BlockVector,
    weight_sum: f64,
    trace: Vec<TracePoint>,
    queries: u64,
    passes: f64,
    cadence: usize,
    horizon: usize,
    start: Instant,
    iterates: Option<Vec<BlockVector>>,
}

impl RunState {
    fn new(x0: &BlockVector, opts: &RunOptions) -> Self {
        let iterates = opts.keep_iterates.then(|| vec![x0.clone()]);
        Self {
            averaged_acc: BlockVector::zeros(x0.partition()),
            weight_sum: 0.0,
            trace: Vec::new(),
            queries: 0,
            passes: 0.0,
            cadence: opts.effective_cadence(),
            horizon: opts.horizon,
            start: Instant::now(),
            iterates,
        }
    }

    /// Adds `x` to the output average; weights must be nonnegative.
    fn accumulate(&mut self, weight: f64, x: &BlockVector, t: usize) -> Result<()> {
        if weight < 0.0 {
            return Err(Error::NegativeOutputWeight { t, weight });
        }
        self.averaged_acc.scaled_add(weight, x);
        self.weight_sum += weight;
        Ok(())
    }

    /// Records a new iterate `x_{t+1}` (kept only when requested).
    fn record_iterate(&mut self, x: &BlockVector) {
        if let Some(iters) = &mut self.iterates {
            iters.push(x.clone());
        }
    }

    /// Current output point: the weighted average if any weight has
    /// accumulated, otherwise the supplied fallback (the initial point).
    fn output(&self, fallback: &BlockVector) -> BlockVector {
        if self.weight_sum > 0.0 {
            let mut out = self.averaged_acc.clone();
            out.scale(1.0 / self.weight_sum);
            out
        } else {
            fallback.clone()
        }
    }

    fn should_log(&self, t_done: usize) -> bool {
        t_done == 0 || t_done == self.horizon || t_done % self.cadence == 0
    }

    fn log<O: StochasticOracle + ?Sized>(&mut self, oracle: &O, t_done: usize, x: &BlockVector) {
        let point = self.output(x);
        self.trace.push(TracePoint {
            t: t_done,
            queries: self.queries,
            passes: self.passes,
            objective: oracle.objective(&point),
            elapsed_ms: self.start.elapsed().as_millis() as u64,
        });
    }

    fn finish(
        self,
        x: BlockVector,
        meta: RunMeta,
        block_queries: u64,
        full_queries: u64,
    ) -> RunResult {
        let averaged = self.output(&x);
        RunResult {
            final_point: x,
            averaged,
            trace: self.trace,
            block_queries,
            full_queries,
            meta,
            iterates: self.iterates,
        }
    }
}

/// Initial point `x_0 = argmin_X Σ_i γ_{-1}^{(i)} d_i`: the prox center,
/// clamped into the feasible box when one is present.
fn initial_point<O: StochasticOracle + ?Sized>(oracle: &O) -> BlockVector {
    let mut x0 = BlockVector::zeros(oracle.partition());
    if let Some((lo, hi)) = oracle.regularizer().bounds() {
        for v in x0.as_mut_slice() {
            *v = v.clamp(lo, hi);
        }
    }
    x0
}

/// Uniformly randomized stochastic block dual averaging.
///
/// Per iteration: sample a block uniformly, advance the stepsize state, add
/// the weighted block subgradient into the dual average, and re-solve the
/// prox subproblem on that block only. The output is the weighted average of
/// `x_1..x_T` under the chosen [`AveragingMode`].
pub fn sbda_u<O: StochasticOracle + ?Sized>(
    oracle: &O,
    schedule: &Schedule,
    averaging: AveragingMode,
    opts: &RunOptions,
) -> Result<RunResult> {
    opts.validate()?;
    let n = oracle.partition().num_blocks();
    let omega = oracle.regularizer().clone();
    let sampler = SamplingDistribution::uniform(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut state = schedule.init_state(n);

    let center = BlockVector::zeros(oracle.partition());
    let mut x = initial_point(oracle);
    let mut gbar = BlockVector::zeros(oracle.partition());
    let mut run = RunState::new(&x, opts);
    run.log(oracle, 0, &x);

    for t in 0..opts.horizon {
        let i = sampler.sample(&mut rng);
        schedule.advance(&mut state, t, i);
        let g = oracle.block_subgradient(&x, i, &mut rng);
        run.queries += 1;
        run.passes += oracle.block_query_cost(i);

        let alpha = state.alpha();
        for (acc, gv) in gbar.block_mut(i).iter_mut().zip(&g) {
            *acc += alpha * gv;
        }
        let z = prox_step_u(
            gbar.block(i),
            state.l(i),
            &omega,
            state.gamma(i),
            center.block(i),
        )?;
        x.block_mut(i).copy_from_slice(&z);
        run.record_iterate(&x);

        let w = averaging.weight(t + 1, schedule, n);
        run.accumulate(w, &x, t + 1)?;
        if run.should_log(t + 1) {
            run.log(oracle, t + 1, &x);
        }
    }
    let queries = run.queries;
    Ok(run.finish(
        x,
        RunMeta {
            algorithm: "sbda_u".into(),
            seed: opts.seed,
            schedule: schedule.id().into(),
            sampler: "uniform".into(),
        },
        queries,
        0,
    ))
}

/// Nonuniformly randomized stochastic block dual averaging.
///
/// Blocks are sampled from `p`; the dual average uses importance-weighted
/// increments `(α_t / p_{i_t})·G^{(i_t)}` and the prox uses `γ/p_{i_t}`. The
/// output averages all iterates `x_0..x_T` with weights `α_t`. Only `Zero`
/// and `Box` regularizers are supported (the simple term is otherwise lumped
/// into the loss).
pub fn sbda_r<O: StochasticOracle + ?Sized>(
    oracle: &O,
    schedule: &Schedule,
    sampler: &SamplingDistribution,
    opts: &RunOptions,
) -> Result<RunResult> {
    opts.validate()?;
    let n = oracle.partition().num_blocks();
    if sampler.num_blocks() != n {
        return Err(Error::InvalidParameter(format!(
            "sampler covers {} blocks but the problem has {n}",
            sampler.num_blocks()
        )));
    }
    let bounds = match oracle.regularizer() {
        Regularizer::Zero => None,
        Regularizer::Box { lo, hi } => Some((*lo, *hi)),
        other => {
            return Err(Error::UnsupportedConfiguration(format!(
                "SBDA-r requires a zero (or box) simple term, got {}",
                other.id()
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut state = schedule.init_state(n);

    let center = BlockVector::zeros(oracle.partition());
    let mut x = initial_point(oracle);
    let mut gbar = BlockVector::zeros(oracle.partition());
    let mut run = RunState::new(&x, opts);
    // x_0 enters the output average with weight α_0.
    run.accumulate(schedule.alpha(0), &x, 0)?;
    run.log(oracle, 0, &x);

    for t in 0..opts.horizon {
        let i = sampler.sample(&mut rng);
        schedule.advance(&mut state, t, i);
        let g = oracle.block_subgradient(&x, i, &mut rng);
        run.queries += 1;
        run.passes += oracle.block_query_cost(i);

        let scale = state.alpha() / sampler.p(i);
        for (acc, gv) in gbar.block_mut(i).iter_mut().zip(&g) {
            *acc += scale * gv;
        }
        let z = prox_step_r(
            gbar.block(i),
            state.gamma(i),
            sampler.p(i),
            center.block(i),
            bounds,
        )?;
        x.block_mut(i).copy_from_slice(&z);
        run.record_iterate(&x);

        run.accumulate(schedule.alpha(t + 1), &x, t + 1)?;
        if run.should_log(t + 1) {
            run.log(oracle, t + 1, &x);
        }
    }
    let queries = run.queries;
    Ok(run.finish(
        x,
        RunMeta {
            algorithm: "sbda_r".into(),
            seed: opts.seed,
            schedule: schedule.id().into(),
            sampler: sampler_id(sampler),
        },
        queries,
        0,
    ))
}

fn sampler_id(sampler: &SamplingDistribution) -> String {
    let n = sampler.num_blocks();
    let uniform = sampler
        .probabilities()
        .iter()
        .all(|p| (p - 1.0 / n as f64).abs() < 1e-12);
    if uniform {
        "uniform".into()
    } else {
        "nonuniform".into()
    }
}

/// Stepsize rule of the full dual-averaging baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSchedule {
    /// `β_t = c·sqrt(t+1)` (convex default).
    SqrtT { c: f64 },
    /// `β_t = c` (strongly convex regularizers carry the growth).
    Const { c: f64 },
}

impl BetaSchedule {
    fn value(&self, t: usize) -> f64 {
        match self {
            BetaSchedule::SqrtT { c } => c * ((t + 1) as f64).sqrt(),
            BetaSchedule::Const { c } => *c,
        }
    }

    pub fn id(&self) -> String {
        match self {
            BetaSchedule::SqrtT { c } => format!("da_sqrt({c})"),
            BetaSchedule::Const { c } => format!("da_const({c})"),
        }
    }
}

/// Full (stochastic) dual averaging:
/// `x_{t+1} = argmin { ⟨Ḡ, x⟩ + (t+1)·ω(x) + β_t·d(x) }` with one full
/// subgradient per iteration. Coincides with SBDA-u at `n = 1`, `α ≡ 1`,
/// `γ_t = β_t`.
pub fn baseline_da<O: StochasticOracle + ?Sized>(
    oracle: &O,
    beta: &BetaSchedule,
    opts: &RunOptions,
) -> Result<RunResult> {
    opts.validate()?;
    let n = oracle.partition().num_blocks();
    let omega = oracle.regularizer().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let center = BlockVector::zeros(oracle.partition());
    let mut x = initial_point(oracle);
    let mut gbar = BlockVector::zeros(oracle.partition());
    let mut run = RunState::new(&x, opts);
    run.log(oracle, 0, &x);

    for t in 0..opts.horizon {
        let g = oracle.full_subgradient(&x, &mut rng);
        run.queries += 1;
        run.passes += oracle.full_query_cost();
        gbar.scaled_add(1.0, &g);
        let l = (t + 1) as f64;
        let beta_t = beta.value(t);
        for i in 0..n {
            let z = prox_step_u(gbar.block(i), l, &omega, beta_t, center.block(i))?;
            x.block_mut(i).copy_from_slice(&z);
        }
        run.record_iterate(&x);
        run.accumulate(1.0, &x, t + 1)?;
        if run.should_log(t + 1) {
            run.log(oracle, t + 1, &x);
        }
    }
    let queries = run.queries;
    Ok(run.finish(
        x,
        RunMeta {
            algorithm: "da".into(),
            seed: opts.seed,
            schedule: beta.id(),
            sampler: "full".into(),
        },
        0,
        queries,
    ))
}

/// Mirror-descent stepsize rules from the experimental comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum MdStepsize {
    /// `η_t = c / sqrt(t+1)`.
    Sm1 { c: f64 },
    /// `η_t = c / ‖g_t‖`; falls back to the `Sm1` value on a zero
    /// subgradient.
    Sm2 { c: f64 },
}

impl MdStepsize {
    /// Stepsize for iteration `t` given the current subgradient norm.
    pub fn value(&self, t: usize, grad_norm: f64) -> f64 {
        match self {
            MdStepsize::Sm1 { c } => c / ((t + 1) as f64).sqrt(),
            MdStepsize::Sm2 { c } => {
                if grad_norm > 0.0 {
                    c / grad_norm
                } else {
                    c / ((t + 1) as f64).sqrt()
                }
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            MdStepsize::Sm1 { c } => format!("sm1({c})"),
            MdStepsize::Sm2 { c } => format!("sm2({c})"),
        }
    }
}

/// Proximal (composite) mirror descent with a full subgradient per step:
/// `x_{t+1} = argmin { ⟨g_t, x⟩ + ω(x) + (1/η_t)·½‖x − x_t‖² }`.
pub fn baseline_md<O: StochasticOracle + ?Sized>(
    oracle: &O,
    rule: &MdStepsize,
    opts: &RunOptions,
) -> Result<RunResult> {
    opts.validate()?;
    let n = oracle.partition().num_blocks();
    let omega = oracle.regularizer().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut x = initial_point(oracle);
    let mut run = RunState::new(&x, opts);
    run.log(oracle, 0, &x);

    for t in 0..opts.horizon {
        let g = oracle.full_subgradient(&x, &mut rng);
        run.queries += 1;
        run.passes += oracle.full_query_cost();
        let eta = rule.value(t, slice_norm(g.as_slice()));
        let gamma = 1.0 / eta;
        let prev = x.clone();
        for i in 0..n {
            let z = prox_step_u(g.block(i), 1.0, &omega, gamma, prev.block(i))?;
            x.block_mut(i).copy_from_slice(&z);
        }
        run.record_iterate(&x);
        run.accumulate(1.0, &x, t + 1)?;
        if run.should_log(t + 1) {
            run.log(oracle, t + 1, &x);
        }
    }
    let queries = run.queries;
    Ok(run.finish(
        x,
        RunMeta {
            algorithm: "md".into(),
            seed: opts.seed,
            schedule: rule.id(),
            sampler: "full".into(),
        },
        0,
        queries,
    ))
}

/// Scalar stepsize rule of the block mirror descent baseline (deliberately
/// not block adaptive).
#[derive(Debug, Clone, PartialEq)]
pub enum SbmdStepsize {
    Const { c: f64 },
    InvSqrt { c: f64 },
}

impl SbmdStepsize {
    fn value(&self, t: usize) -> f64 {
        match self {
            SbmdStepsize::Const { c } => *c,
            SbmdStepsize::InvSqrt { c } => c / ((t + 1) as f64).sqrt(),
        }
    }

    pub fn id(&self) -> String {
        match self {
            SbmdStepsize::Const { c } => format!("sbmd_const({c})"),
            SbmdStepsize::InvSqrt { c } => format!("sbmd_invsqrt({c})"),
        }
    }
}

/// Theory-tuned constant for [`SbmdStepsize::Const`] at a known horizon:
/// `η = sqrt(2·n·ΣD_i / (T·ΣM_i²))`.
pub fn sbmd_default_constant(params: &crate::schedules::BlockParams, horizon: usize) -> f64 {
    let n = params.num_blocks() as f64;
    (2.0 * n * params.sum_d() / (horizon as f64 * params.sum_m_sq())).sqrt()
}

/// Stochastic block mirror descent (baseline reconstruction): the sampled
/// block takes a proximal step with a scalar stepsize, all other blocks stay
/// frozen. The output averages iterates with stepsize weights.
///
/// This is a comparison baseline reconstructed from its cited description;
/// tests assert only its query discipline and relative ordering, never its
/// exact trajectory.
pub fn baseline_sbmd<O: StochasticOracle + ?Sized>(
    oracle: &O,
    rule: &SbmdStepsize,
    sampler: &SamplingDistribution,
    opts: &RunOptions,
) -> Result<RunResult> {
    opts.validate()?;
    let n = oracle.partition().num_blocks();
    if sampler.num_blocks() != n {
        return Err(Error::InvalidParameter(format!(
            "sampler covers {} blocks but the problem has {n}",
            sampler.num_blocks()
        )));
    }
    let omega = oracle.regularizer().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut x = initial_point(oracle);
    let mut run = RunState::new(&x, opts);
    run.log(oracle, 0, &x);

    for t in 0..opts.horizon {
        let i = sampler.sample(&mut rng);
        let g = oracle.block_subgradient(&x, i, &mut rng);
        run.queries += 1;
        run.passes += oracle.block_query_cost(i);
        let eta = rule.value(t);
        let prev_block = x.block(i).to_vec();
        let z = prox_step_u(&g, 1.0, &omega, 1.0 / eta, &prev_block)?;
        x.block_mut(i).copy_from_slice(&z);

        run.accumulate(eta, &x, t + 1)?;
        if run.should_log(t + 1) {
            run.log(oracle, t + 1, &x);
        }
    }
    let queries = run.queries;
    Ok(run.finish(
        x,
        RunMeta {
            algorithm: "sbmd".into(),
            seed: opts.seed,
            schedule: rule.id(),
            sampler: sampler_id(sampler),
        },
        queries,
        0,
    ))
}
