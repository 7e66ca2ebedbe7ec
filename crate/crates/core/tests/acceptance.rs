//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddp_core::accountant::{
    calibrate_sigma, oracle_rdp_subsampled, rdp_of_schedule, rdp_subsampled_gaussian, to_dp, AccountingMode,
    AlphaGrid, CalibrationOptions, RdpCurve,
};
use saddp_core::data::{stratified_split, synth_imbalanced, SynthConfig};
use saddp_core::engine::{
    clip_per_sample, l2_norm, train_traced, ClipPolicy, ModelParams, PerSampleGrads, TrainConfig,
};
use saddp_core::harness::{run, Algorithm, ExperimentConfig};
use saddp_core::schedule::{
    build_schedule, schedule_stats, ScheduleSpec, ScheduleTemplate, Segment, StepSchedule,
};

/// Default setup: 5000 samples, 20% held out, B = 250, 30 epochs.
const BASE_TRAIN: usize = 4000;
const BASE_BATCH: usize = 250;
const BASE_EPOCHS: usize = 30;
const DELTA: f64 = 1e-3;

fn base_q() -> f64 {
    BASE_BATCH as f64 / BASE_TRAIN as f64
}

fn base_iters() -> usize {
    BASE_EPOCHS * (BASE_TRAIN / BASE_BATCH)
}

fn calibrated(beta: f64, gamma: f64, target: f64) -> StepSchedule<f64> {
    let template = ScheduleTemplate::with_default_clip_decay(base_iters(), 3, gamma, beta, 1.0);
    calibrate_sigma(
        &template,
        base_q(),
        target,
        DELTA,
        &AlphaGrid::default_orders(),
        AccountingMode::Subsampled,
        &CalibrationOptions::default(),
    )
    .unwrap()
    .schedule
}

fn accountant_matches_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0, 0.0, 0.0);
    for alpha in 2..=64 {
        for sigma in [0.5, 1.0, 2.0, 4.0] {
            for q in [0.0, 0.001, 0.01, 0.1, 1.0] {
                let a = alpha as f64;
                let fast = rdp_subsampled_gaussian(a, sigma, q).map_err(|e| e.to_string())?;
                let exact = oracle_rdp_subsampled(a, sigma, q).map_err(|e| e.to_string())?;
                let diff = (fast - exact).abs();
                if diff > worst.0 {
                    worst = (diff, a, sigma, q);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if worst.0 > 1e-6 {
        return Err(format!(
            "max |fast - oracle| = {:.3e} at alpha={} sigma={} q={}",
            worst.0, worst.1, worst.2, worst.3
        ));
    }
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("max diff {:.2e} over 1260 points in {elapsed:.2?}", worst.0))
}

fn rdp_to_dp_conversion() -> Result<String, String> {
    let curve = RdpCurve::from_values(AlphaGrid::new(vec![2.0f64]).unwrap(), vec![1.0]).unwrap();
    let eps = to_dp(&curve, 1e-3).unwrap().epsilon;
    if (eps - 6.521461).abs() <= 1e-6 {
        Ok(format!("epsilon = {eps:.7}"))
    } else {
        Err(format!("epsilon = {eps:.9}"))
    }
}

fn random_schedule(rng: &mut ChaCha8Rng) -> StepSchedule<f64> {
    let n = rng.random_range(1..=5);
    StepSchedule::from_segments(
        (0..n)
            .map(|_| {
                Segment::new(
                    rng.random_range(1..=400),
                    rng.random_range(0.3..8.0),
                    rng.random_range(0.1..4.0),
                )
            })
            .collect(),
    )
    .unwrap()
}

fn composition_is_exact() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let grid = AlphaGrid::default_orders();
    for i in 0..100 {
        let a = random_schedule(&mut rng);
        let b = random_schedule(&mut rng);
        let q = [0.0, 0.004, 0.05, 0.3, 1.0][i % 5];
        let mode = if i % 2 == 0 {
            AccountingMode::Subsampled
        } else {
            AccountingMode::Unamplified
        };
        let joint = rdp_of_schedule(&a.concat(&b), q, &grid, mode).unwrap();
        let parts = rdp_of_schedule(&a, q, &grid, mode)
            .unwrap()
            .compose(&rdp_of_schedule(&b, q, &grid, mode).unwrap())
            .unwrap();
        let bits = |c: &RdpCurve<f64>| c.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&joint) != bits(&parts) {
            return Err(format!("pair {i} differs"));
        }
    }
    Ok("100 pairs bit-identical".into())
}

fn calibration_round_trip() -> Result<String, String> {
    let mut report = Vec::new();
    for target in [1.0, 3.0, 8.0, 16.0] {
        let schedule = calibrated(0.8, 0.9, target);
        let curve = rdp_of_schedule(&schedule, base_q(), &AlphaGrid::default_orders(), AccountingMode::Subsampled)
            .unwrap();
        let eps = to_dp(&curve, DELTA).unwrap().epsilon;
        let rel = (eps - target).abs() / target;
        if rel > 1e-3 || eps > target {
            return Err(format!("target {target}: forward epsilon {eps}"));
        }
        report.push(format!("{target}->{eps:.5}"));
    }
    Ok(report.join(" "))
}

fn reduction_to_dpsgd() -> Result<String, String> {
    let data = synth_imbalanced::<f64>(&SynthConfig {
        n: 1000,
        ..SynthConfig::default()
    })
    .unwrap();
    let config = TrainConfig {
        hidden: 8,
        learning_rate: 0.5,
        batch_size: 50,
        epochs: 25,
        seed: 42,
        delta: DELTA,
        target_epsilon: None,
        accounting: AccountingMode::Subsampled,
        clip_policy: ClipPolicy::Scheduled,
    };
    let total = config.total_iters(data.len());
    assert_eq!(total, 500);
    let sad = build_schedule(&ScheduleSpec {
        total_iters: total,
        num_segments: 3,
        step_decay: 1.0,
        noise_decay: 1.0,
        clip_decay: 1.0,
        final_sigma: 1.1,
        final_clip: 0.7,
    })
    .unwrap();
    let constant = StepSchedule::constant(total, 1.1, 0.7).unwrap();

    let trace = |schedule: &StepSchedule<f64>| {
        let mut steps: Vec<Vec<u64>> = Vec::with_capacity(total);
        train_traced(&config, &data, &data, schedule, |_, p: &ModelParams<f64>| {
            steps.push(p.values().iter().map(|v| v.to_bits()).collect())
        })
        .unwrap();
        steps
    };
    let a = trace(&sad);
    let b = trace(&constant);
    if a.len() != 500 || b.len() != 500 {
        return Err(format!("trajectory lengths {} and {}", a.len(), b.len()));
    }
    match a.iter().zip(&b).position(|(x, y)| x != y) {
        None => Ok("500 iterates bit-identical".into()),
        Some(t) => Err(format!("diverged at iteration {t}")),
    }
}

fn clipping_is_exact() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut scaled = 0;
    for trial in 0..100 {
        let cols = rng.random_range(1..=64);
        let clip: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let scale = clip * 10f64.powf(rng.random_range(-2.0..2.0));
                (0..cols).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
            })
            .collect();
        let mut grads = PerSampleGrads::from_rows(rows.clone()).unwrap();
        clip_per_sample(&mut grads, clip).unwrap();
        for (i, original) in rows.iter().enumerate() {
            let after = grads.row(i);
            let norm = l2_norm(after);
            if norm > clip {
                return Err(format!("trial {trial} row {i}: norm {norm} > {clip}"));
            }
            if l2_norm(original) <= clip {
                if after.iter().zip(original).any(|(a, o)| a.to_bits() != o.to_bits()) {
                    return Err(format!("trial {trial} row {i}: sub-threshold row changed"));
                }
            } else {
                scaled += 1;
            }
        }
    }
    Ok(format!("10000 rows, {scaled} scaled, all within bound"))
}

fn gradients_match_finite_differences() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let (params, x, label) = common::random_case(&mut rng, 200);
        let analytic = common::analytic_gradient(&params, &x, label);
        let numeric = common::finite_difference(&params, &x, label, 1e-5);
        let err = common::worst_relative_error(&analytic, &numeric, 1e-3);
        worst = worst.max(err);
        if err > 1e-5 {
            return Err(format!("trial {trial} ({}): relative error {err:.3e}", params.arch()));
        }
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

fn noise_decay_trend() -> Result<String, String> {
    let start = Instant::now();
    let stats: Vec<_> = [0.6, 0.7, 0.8, 0.9]
        .iter()
        .map(|&beta| schedule_stats(&calibrated(beta, 0.9, 3.0)))
        .collect();
    let elapsed = start.elapsed();
    for w in stats.windows(2) {
        if w[1].weighted_mean_sigma > w[0].weighted_mean_sigma
            || w[1].weighted_var_sigma > w[0].weighted_var_sigma
            || w[1].initial_sigma < w[0].initial_sigma
        {
            return Err(format!("trend broken: {stats:?}"));
        }
    }
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    let fmt = |f: fn(&saddp_core::schedule::ScheduleStats<f64>) -> f64| {
        stats.iter().map(|s| format!("{:.4}", f(s))).collect::<Vec<_>>().join("/")
    };
    Ok(format!(
        "mean {} var {} initial {} in {elapsed:.2?}",
        fmt(|s| s.weighted_mean_sigma),
        fmt(|s| s.weighted_var_sigma),
        fmt(|s| s.initial_sigma)
    ))
}

fn step_decay_trend() -> Result<String, String> {
    let fractions: Vec<f64> = [0.2, 0.4, 0.6, 0.8, 1.0]
        .iter()
        .map(|&gamma| {
            let spec = ScheduleTemplate::with_default_clip_decay(base_iters(), 3, gamma, 0.8, 1.0).with_final_sigma(1.0);
            schedule_stats(&build_schedule(&spec).unwrap()).initial_step_fraction
        })
        .collect();
    if fractions.windows(2).all(|w| w[1] > w[0]) {
        Ok(format!("{fractions:.4?}"))
    } else {
        Err(format!("not strictly increasing: {fractions:?}"))
    }
}

fn minority_direction() -> Result<String, String> {
    let sad = ExperimentConfig::default();
    let dpsgd = ExperimentConfig {
        algorithm: Algorithm::Dpsgd,
        ..ExperimentConfig::default()
    };
    assert!(sad.seeds.len() >= 5);
    let a = run(&sad).map_err(|e| e.to_string())?;
    let b = run(&dpsgd).map_err(|e| e.to_string())?;
    if !a.all_ok() || !b.all_ok() {
        return Err("a seed failed".into());
    }
    let (ma, mb) = (a.minority.unwrap(), b.minority.unwrap());
    let line = format!(
        "minority sad {:.4}±{:.4} vs dpsgd {:.4}±{:.4} over {} seeds",
        ma.mean, ma.std, mb.mean, mb.std, ma.count
    );
    if ma.mean >= mb.mean {
        Ok(line)
    } else {
        Err(line)
    }
}

type Criterion = fn() -> Result<String, String>;

fn main() -> ExitCode {
    // Sanity check that the split used by these constants is what the harness builds.
    let data = synth_imbalanced::<f64>(&SynthConfig::default()).unwrap();
    let (train, _) = stratified_split(&data, 0.2, 0).unwrap();
    assert_eq!(train.len(), BASE_TRAIN);

    let criteria: [(&str, Criterion); 10] = [
        ("accountant matches quadrature oracle", accountant_matches_oracle),
        ("rdp to (eps, delta) conversion", rdp_to_dp_conversion),
        ("composition exact under concatenation", composition_is_exact),
        ("calibration round trip", calibration_round_trip),
        ("unit decays reduce to dpsgd", reduction_to_dpsgd),
        ("clipping bound exact", clipping_is_exact),
        ("per-sample gradients vs finite differences", gradients_match_finite_differences),
        ("noise decay trend of calibrated schedules", noise_decay_trend),
        ("step decay trend of initial segment", step_decay_trend),
        ("minority accuracy sad >= dpsgd", minority_direction),
    ];

    let suite = Instant::now();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{elapsed:.2?}]", i + 1)
            }
        }
    }
    let total = suite.elapsed();
    println!("acceptance: {} of 10 passed in {total:.2?}", 10 - failures);
    if failures == 0 && total < Duration::from_secs(600) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
