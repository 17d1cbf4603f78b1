//! Iterate-for-iterate checks of every solver loop against independent
//! straight-line transcripts executed directly from the algorithm
//! descriptions, on tiny deterministic instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sbda_core::blocks::{dot, BlockVector};
use sbda_core::oracles::{gen_l1_regression, L1Regression, ScalingLaw, StochasticOracle};
use sbda_core::schedules::{BlockParams, SamplingDistribution, Schedule};
use sbda_core::solvers::{
    baseline_da, baseline_md, baseline_sbmd, sbda_r, sbda_u, AveragingMode, BetaSchedule,
    MdStepsize, RunOptions, SbmdStepsize,
};

/// Deterministic toy: m rows, n coordinates, exact (mean) subgradients.
fn toy(m: usize, n: usize, blocks: usize, seed: u64) -> L1Regression {
    let mut o = gen_l1_regression(m, n, blocks, 0.0, ScalingLaw::Uniform, seed).unwrap();
    o.set_deterministic(true);
    o
}

/// Exact subgradient of the toy objective (1/m)Σ|b_r − ⟨a_r, x⟩| computed
/// from scratch.
fn exact_subgradient(o: &L1Regression, x: &[f64]) -> Vec<f64> {
    let m = o.data().rows();
    let n = o.data().cols();
    let mut g = vec![0.0; n];
    for r in 0..m {
        let row = o.data().row(r);
        let res = o.targets()[r] - dot(row, x);
        let s = if res > 0.0 {
            1.0
        } else if res < 0.0 {
            -1.0
        } else {
            0.0
        };
        for (gv, a) in g.iter_mut().zip(row) {
            *gv -= s * a / m as f64;
        }
    }
    g
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(
            (x - y).abs() <= tol * y.abs().max(1.0),
            "{what}: coordinate {i} differs: {x} vs {y}"
        );
    }
}

#[test]
fn sbda_u_matches_hand_transcript_on_two_block_toy() {
    // m = 4 rows, 2 coordinates in 2 blocks, T = 3, fixed seed.
    let o = toy(4, 2, 2, 31);
    let horizon = 3;
    let m = vec![1.5, 2.5];
    let d = vec![1.0, 0.5];
    let params = BlockParams::new(m.clone(), d.clone()).unwrap();
    let schedule = Schedule::const_gamma_convex(&params, horizon, 1.0).unwrap();
    let opts = RunOptions::new(horizon, 9).keep_iterates(true);
    let run = sbda_u(&o, &schedule, AveragingMode::Uniform, &opts).unwrap();
    let solver_iterates = run.iterates.unwrap();

    // Straight-line transcript of the uniform loop.
    let n = 2.0f64;
    let gamma: Vec<f64> = m
        .iter()
        .zip(&d)
        .map(|(mi, di)| (5.0 * horizon as f64 * mi * mi / (n * 1.0 * di)).sqrt())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x = [0.0f64, 0.0];
    let mut gbar = [0.0f64, 0.0];
    let mut transcript = vec![x.to_vec()];
    let mut avg = [0.0f64, 0.0];
    for _t in 0..horizon {
        let u: f64 = rng.random();
        let i = if u < 0.5 { 0 } else { 1 };
        let g = exact_subgradient(&o, &x)[i];
        gbar[i] += g;
        x[i] = -gbar[i] / gamma[i];
        transcript.push(x.to_vec());
        avg[0] += x[0];
        avg[1] += x[1];
    }
    avg[0] /= horizon as f64;
    avg[1] /= horizon as f64;

    assert_eq!(solver_iterates.len(), transcript.len());
    for (xs, xt) in solver_iterates.iter().zip(&transcript) {
        assert_close(xs.as_slice(), xt, 1e-12, "sbda_u iterate");
    }
    assert_close(run.averaged.as_slice(), &avg, 1e-12, "sbda_u average");
}

#[test]
fn sbda_r_matches_hand_transcript_with_nonuniform_sampling() {
    let o = toy(4, 2, 2, 47);
    let horizon = 3;
    let m = vec![2.0, 1.0];
    let d = vec![0.5, 1.5];
    let params = BlockParams::new(m.clone(), d.clone()).unwrap();
    let p = vec![0.8, 0.2];
    let sampler = SamplingDistribution::new(p.clone()).unwrap();
    let schedule = Schedule::sbda_r_const_gamma(&params, horizon, 1.0, &sampler).unwrap();
    let opts = RunOptions::new(horizon, 5).keep_iterates(true);
    let run = sbda_r(&o, &schedule, &sampler, &opts).unwrap();
    let solver_iterates = run.iterates.unwrap();

    let gamma: Vec<f64> = m
        .iter()
        .zip(&d)
        .zip(&p)
        .map(|((mi, di), pi)| ((1.0 + horizon as f64) * pi * mi * mi / (2.0 * di)).sqrt())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = [0.0f64, 0.0];
    let mut gbar = [0.0f64, 0.0];
    let mut transcript = vec![x.to_vec()];
    let mut avg = [x[0], x[1]];
    for _t in 0..horizon {
        let u: f64 = rng.random();
        let i = if u < 0.8 { 0 } else { 1 };
        let g = exact_subgradient(&o, &x)[i];
        gbar[i] += g / p[i];
        x[i] = -(p[i] / gamma[i]) * gbar[i];
        transcript.push(x.to_vec());
        avg[0] += x[0];
        avg[1] += x[1];
    }
    avg[0] /= (horizon + 1) as f64;
    avg[1] /= (horizon + 1) as f64;

    for (xs, xt) in solver_iterates.iter().zip(&transcript) {
        assert_close(xs.as_slice(), xt, 1e-12, "sbda_r iterate");
    }
    assert_close(run.averaged.as_slice(), &avg, 1e-12, "sbda_r average");
}

#[test]
fn baseline_da_matches_hand_transcript_on_1d_toy() {
    let o = toy(4, 1, 1, 13);
    let horizon = 3;
    let c = 0.7;
    let opts = RunOptions::new(horizon, 2).keep_iterates(true);
    let run = baseline_da(&o, &BetaSchedule::SqrtT { c }, &opts).unwrap();
    let solver_iterates = run.iterates.unwrap();

    let mut x = 0.0f64;
    let mut gbar = 0.0f64;
    let mut transcript = vec![x];
    for t in 0..horizon {
        gbar += exact_subgradient(&o, &[x])[0];
        let beta = c * ((t + 1) as f64).sqrt();
        x = -gbar / beta;
        transcript.push(x);
    }
    for (xs, xt) in solver_iterates.iter().zip(&transcript) {
        assert!((xs.as_slice()[0] - xt).abs() < 1e-12, "da iterate mismatch");
    }
}

#[test]
fn baseline_md_matches_hand_transcript() {
    let o = toy(4, 2, 2, 17);
    let horizon = 3;
    let c = 0.4;
    let opts = RunOptions::new(horizon, 2).keep_iterates(true);
    let run = baseline_md(&o, &MdStepsize::Sm1 { c }, &opts).unwrap();
    let solver_iterates = run.iterates.unwrap();

    let mut x = vec![0.0f64, 0.0];
    let mut transcript = vec![x.clone()];
    for t in 0..horizon {
        let g = exact_subgradient(&o, &x);
        let eta = c / ((t + 1) as f64).sqrt();
        for (xv, gv) in x.iter_mut().zip(&g) {
            *xv -= eta * gv;
        }
        transcript.push(x.clone());
    }
    for (xs, xt) in solver_iterates.iter().zip(&transcript) {
        assert_close(xs.as_slice(), xt, 1e-12, "md iterate");
    }
}

#[test]
fn baseline_sbmd_matches_hand_transcript_on_two_block_toy() {
    let o = toy(4, 2, 2, 29);
    let horizon = 3;
    let c = 0.6;
    let sampler = SamplingDistribution::uniform(2).unwrap();
    let opts = RunOptions::new(horizon, 8).keep_iterates(true);
    let run = baseline_sbmd(&o, &SbmdStepsize::InvSqrt { c }, &sampler, &opts).unwrap();
    let solver_iterates = run.iterates.unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut x = vec![0.0f64, 0.0];
    let mut transcript = vec![x.clone()];
    for t in 0..horizon {
        let u: f64 = rng.random();
        let i = if u < 0.5 { 0 } else { 1 };
        let g = exact_subgradient(&o, &x)[i];
        let eta = c / ((t + 1) as f64).sqrt();
        x[i] -= eta * g;
        transcript.push(x.clone());
    }
    for (xs, xt) in solver_iterates.iter().zip(&transcript) {
        assert_close(xs.as_slice(), xt, 1e-12, "sbmd iterate");
    }
}

#[test]
fn sbda_u_single_block_coincides_with_dual_averaging() {
    // n = 1, ω = Zero: SBDA-u is full dual averaging, iterate for iterate.
    let o = toy(10, 3, 1, 59);
    let horizon = 100;
    let gamma = 3.7;
    let schedule = Schedule::ConstGammaConvex {
        beta: vec![gamma],
    };
    let opts = RunOptions::new(horizon, 4).keep_iterates(true);
    let a = sbda_u(&o, &schedule, AveragingMode::Uniform, &opts).unwrap();
    let b = baseline_da(&o, &BetaSchedule::Const { c: gamma }, &opts).unwrap();
    let (ia, ib) = (a.iterates.unwrap(), b.iterates.unwrap());
    assert_eq!(ia.len(), ib.len());
    for (xa, xb) in ia.iter().zip(&ib) {
        for (va, vb) in xa.as_slice().iter().zip(xb.as_slice()) {
            assert!((va - vb).abs() < 1e-10, "reduction identity violated");
        }
    }
    assert_close(
        a.averaged.as_slice(),
        b.averaged.as_slice(),
        1e-10,
        "reduction average",
    );
}

#[test]
fn sbda_r_with_uniform_sampler_reproduces_sbda_u() {
    // At p_i = 1/n the importance weights cancel: with the same stepsizes and
    // seed the two loops generate identical iterate sequences.
    let mut o = gen_l1_regression(8, 4, 2, 0.01, ScalingLaw::Uniform, 77).unwrap();
    o.set_regularizer(sbda_core::geometry::Regularizer::Zero);
    let horizon = 60;
    let params = BlockParams::new(vec![1.3, 0.8], vec![1.0, 2.0]).unwrap();
    let schedule = Schedule::const_gamma_convex(&params, horizon, 1.0).unwrap();
    let sampler = SamplingDistribution::uniform(2).unwrap();
    let opts = RunOptions::new(horizon, 21).keep_iterates(true);
    let a = sbda_u(&o, &schedule, AveragingMode::Uniform, &opts).unwrap();
    let b = sbda_r(&o, &schedule, &sampler, &opts).unwrap();
    let (ia, ib) = (a.iterates.unwrap(), b.iterates.unwrap());
    for (xa, xb) in ia.iter().zip(&ib) {
        assert_close(xa.as_slice(), xb.as_slice(), 1e-12, "uniform reduction");
    }
}

#[test]
fn importance_weighted_increment_is_unbiased() {
    // E over i_t of (1/p_{i_t})·U_{i_t}·G^{(i_t)} equals the full mean
    // gradient (Monte Carlo over the block draw and the data draw).
    let o = {
        let mut o = gen_l1_regression(20, 6, 3, 0.01, ScalingLaw::PowerLaw { a: 5.0 }, 3).unwrap();
        o.set_deterministic(false);
        o
    };
    let sampler = SamplingDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
    let x = BlockVector::from_vec(o.partition(), vec![0.3, -0.1, 0.2, 0.0, 0.5, -0.4]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000;
    let n = 6;
    let mut mean = vec![0.0f64; n];
    let mut m2 = vec![0.0f64; n];
    for k in 0..draws {
        let i = sampler.sample(&mut rng);
        let g = o.block_subgradient(&x, i, &mut rng);
        let mut full = vec![0.0; n];
        let range = o.partition().range(i);
        for (slot, gv) in full[range].iter_mut().zip(&g) {
            *slot = gv / sampler.p(i);
        }
        // Welford moments.
        for j in 0..n {
            let delta = full[j] - mean[j];
            mean[j] += delta / (k + 1) as f64;
            m2[j] += delta * (full[j] - mean[j]);
        }
    }
    let mut reference = Vec::new();
    for i in 0..3 {
        reference.extend(o.mean_block_gradient(&x, i).unwrap());
    }
    for j in 0..n {
        let se = (m2[j] / (draws as f64 - 1.0) / draws as f64).sqrt();
        assert!(
            (mean[j] - reference[j]).abs() <= 4.0 * se + 1e-9,
            "coordinate {j}: mean {} vs reference {} (se {se})",
            mean[j],
            reference[j]
        );
    }
}
