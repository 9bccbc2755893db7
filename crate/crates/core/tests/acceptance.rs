//! Acceptance suite. Each criterion prints one PASS/FAIL line; run with
//! `cargo test --test acceptance -- --nocapture` to see them.

mod common;

use diffloc::clustering::{GridScheme, RadialPrior};
use diffloc::experiment::{self, Config, Preset};
use diffloc::medium::{Arena, DiffusionParams, FusionCenter, MeanModel};
use diffloc::numerics::{marcum_q, noncentral_chi2_cdf, ratio_gaussian_approx};
use diffloc::sensors::Strategy;
use diffloc::sim::{
    analytic_report, evaluate, gateway_samples, mean_value_density_mean, run_trials,
    sample_fc_counts, trial_rng, Channel, SamplingModel, TrialPlan,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn verdict(name: &str, ok: bool, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn ideal_plan(strategy: Strategy, l: usize, molecules: f64, trials: u64, seed: u64) -> TrialPlan {
    let mut plan = TrialPlan::new(strategy, l, trials, seed);
    plan.params.molecules = molecules;
    plan
}

#[test]
fn criterion_1_collaborative_agreement() {
    let mut detail = Vec::new();
    let mut ok = true;
    for l in 2..=4 {
        let plan = ideal_plan(Strategy::Collaborative, l, 1e6, 100_000, 100 + l as u64);
        let (report, _) = evaluate(&plan).unwrap();
        let analytic = report.analytic.unwrap();
        let e = report.empirical.unwrap();
        // Wilson interval: stays informative when no errors are observed.
        let (lo, hi) = e.wilson_interval(3.0);
        ok &= (lo..=hi).contains(&analytic);
        detail.push(format!(
            "L={l} analytic {analytic:.3e} in [{lo:.3e}, {hi:.3e}] ({} errors)",
            e.errors
        ));
    }
    verdict(
        "collaborative analytic within 99.7% interval",
        ok,
        &detail.join("; "),
    );
}

#[test]
fn criterion_2_noncollaborative_agreement() {
    let mut detail = Vec::new();
    let mut ok = true;
    for l in 2..=4 {
        let plan = ideal_plan(Strategy::NonCollaborative, l, 3e6, 100_000, 200 + l as u64);
        let (report, _) = evaluate(&plan).unwrap();
        let gap = (report.analytic.unwrap() - report.empirical.unwrap().p()).abs();
        ok &= gap <= 0.05;
        detail.push(format!("L={l} gap {gap:.3e}"));
    }
    verdict("non-collaborative gap <= 0.05", ok, &detail.join("; "));
}

fn analytic(plan: &TrialPlan) -> f64 {
    analytic_report(plan, RadialPrior::Uniform)
        .unwrap()
        .analytic
        .unwrap()
}

#[test]
fn criterion_3_monotonicity() {
    let mut violations = Vec::new();
    let mut checked = 0;
    for strategy in [Strategy::Collaborative, Strategy::NonCollaborative] {
        let table: Vec<Vec<f64>> = [1e6, 2e6, 3e6]
            .iter()
            .map(|&n| {
                (2..=6)
                    .map(|l| analytic(&ideal_plan(strategy, l, n, 1, 0)))
                    .collect()
            })
            .collect();
        for (li, l) in (2..=6).enumerate() {
            for r in 0..2 {
                checked += 1;
                if table[r + 1][li] > table[r][li] {
                    violations.push(format!("{strategy:?} L={l} rises with molecules"));
                }
            }
        }
        for (r, row) in table.iter().enumerate() {
            for li in 0..row.len() - 1 {
                checked += 1;
                if row[li + 1] < row[li] {
                    violations.push(format!("{strategy:?} row {r} L={} falls with L", li + 2));
                }
            }
        }
        let noisy = |l: usize, alpha: u64, f: f64| {
            let mut plan = ideal_plan(strategy, l, 1e8, 1, 0);
            plan.channel = Channel::Noisy;
            plan.params.alpha = alpha;
            plan.arena = Arena::new(1e-2, f * 1e-2).unwrap();
            analytic(&plan)
        };
        for l in 2..=6 {
            for f in [3.0, 5.0, 7.0] {
                let by_alpha: Vec<f64> = [100, 1000, 10_000]
                    .iter()
                    .map(|&a| noisy(l, a, f))
                    .collect();
                checked += 2;
                if by_alpha.windows(2).any(|p| p[1] > p[0]) {
                    violations.push(format!("{strategy:?} L={l} dfg={f}w rises with alpha"));
                }
            }
            for alpha in [100, 1000, 10_000] {
                let by_dfg: Vec<f64> = [3.0, 5.0, 7.0]
                    .iter()
                    .map(|&f| noisy(l, alpha, f))
                    .collect();
                checked += 2;
                if by_dfg.windows(2).any(|p| p[1] < p[0]) {
                    violations.push(format!("{strategy:?} L={l} alpha={alpha} falls with dfg"));
                }
            }
        }
    }
    let detail = format!(
        "{checked} orderings, {} violations {:?}",
        violations.len(),
        violations
    );
    verdict("analytic error orderings", violations.is_empty(), &detail);
}

#[test]
fn criterion_4_special_function_oracles() {
    let mut worst: f64 = 0.0;
    for a in [0.0, 0.5, 1.5, 3.0, 6.0] {
        for b in [0.25, 1.0, 2.0, 4.0, 8.0] {
            let err = (marcum_q(1.0, a, b).unwrap() - common::marcum_q_quadrature(1.0, a, b)).abs();
            worst = worst.max(err);
        }
    }
    let n = 1_000_000;
    let eps = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
    let mut ks = Vec::new();
    for (i, lambda) in [0.0f64, 4.0, 16.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        let mut xs: Vec<f64> = (0..n)
            .map(|_| {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                (z1 + lambda.sqrt()).powi(2) + z2 * z2
            })
            .collect();
        xs.sort_unstable_by(f64::total_cmp);
        let top = *xs.last().unwrap();
        ks.push(common::ks_on_interval(
            &xs,
            |x| noncentral_chi2_cdf(2, lambda, x).unwrap(),
            0.0,
            top,
        ));
    }
    let ok = worst <= 1e-8 && ks.iter().all(|&d| d <= eps);
    let detail = format!(
        "marcum max error {worst:.2e}; chi-square KS {:.2e} vs DKW bound {eps:.2e}",
        ks.iter().cloned().fold(0.0, f64::max)
    );
    verdict("special-function oracles", ok, &detail);
}

#[test]
fn criterion_5_ratio_normal_approximation() {
    let arena = Arena::table_default();
    let params = DiffusionParams {
        molecules: 3e6,
        ..DiffusionParams::default()
    };
    let model = MeanModel::ideal(&arena, &params, params.molecules).unwrap();
    let g = GridScheme::build(&arena, 3).unwrap();
    let k = params.k as f64;
    let n = 100_000;
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    for (ci, cell) in g.cells().enumerate() {
        let p = g.indicator_point(cell);
        let d1 = arena.distance_to(FusionCenter::Fc1, &p);
        let d2 = arena.distance_to(FusionCenter::Fc2, &p);
        let (m1, m2) = (model.mean(d1), model.mean(d2));
        if (k * m2).sqrt() < 10.0 {
            continue;
        }
        tested += 1;
        let approx = ratio_gaussian_approx(m1, (m1 / k).sqrt(), m2, (m2 / k).sqrt(), 1.0).unwrap();
        let mut z: Vec<f64> = (0..n as u64)
            .map(|i| {
                let mut rng = trial_rng(500 + ci as u64, i);
                let v1 = sample_fc_counts(
                    d1,
                    &arena,
                    &params,
                    params.molecules,
                    SamplingModel::Binomial,
                    &mut rng,
                )
                .unwrap();
                let v2 = sample_fc_counts(
                    d2,
                    &arena,
                    &params,
                    params.molecules,
                    SamplingModel::Binomial,
                    &mut rng,
                )
                .unwrap();
                v1.iter().sum::<f64>() / v2.iter().sum::<f64>()
            })
            .collect();
        z.sort_unstable_by(f64::total_cmp);
        let (lo, hi) = (
            approx.mean_z - approx.sigma_z,
            approx.mean_z + approx.sigma_z,
        );
        worst = worst.max(common::ks_on_interval(&z, |x| approx.cdf(x), lo, hi));
    }
    let ok = tested > 0 && worst <= 0.02;
    verdict(
        "ratio normal approximation",
        ok,
        &format!("{tested} indicator points, max KS {worst:.4}"),
    );
}

#[test]
fn criterion_6_gateway_mean_value_density() {
    let arena = Arena::table_default();
    let d1 = 8.3e-4;
    let mut ok = true;
    let mut detail = Vec::new();
    for alpha in [1000u64, 10_000] {
        let params = DiffusionParams {
            alpha,
            ..DiffusionParams::default()
        };
        let xs = gateway_samples(
            d1,
            &arena,
            &params,
            100_000,
            60 + alpha,
            SamplingModel::Binomial,
        )
        .unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let raw2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
        let var = raw2 - mean * mean;
        // The approximating density N(m, m) has E[W] = m and E[W^2] = m + m^2.
        let m = mean_value_density_mean(d1, &arena, &params).unwrap();
        let e1 = (mean / m - 1.0).abs();
        let e2 = (raw2 / (m + m * m) - 1.0).abs();
        ok &= e1 <= 0.05 && e2 <= 0.05;
        detail.push(format!(
            "alpha={alpha} mean err {e1:.2e}, second moment err {e2:.2e} (variance ratio {:.2})",
            var / m
        ));
    }
    verdict("gateway histogram moments", ok, &detail.join("; "));
}

#[test]
fn criterion_7_zero_noise() {
    let mut failures = Vec::new();
    for strategy in [Strategy::Collaborative, Strategy::NonCollaborative] {
        for channel in [Channel::Ideal, Channel::Noisy] {
            for l in 2..=6 {
                let mut plan = TrialPlan::new(strategy, l, 4_000, 70 + l as u64);
                plan.zero_noise = true;
                plan.channel = channel;
                plan.confusion = true;
                if channel == Channel::Noisy {
                    plan.gain = Some(1.0);
                }
                let r = run_trials(&plan).unwrap();
                let visited = r
                    .confusion
                    .unwrap()
                    .trials_per_cluster()
                    .iter()
                    .all(|&t| t > 0);
                let errors = r.report.empirical.unwrap().errors;
                if errors != 0 || !visited {
                    failures.push(format!("{strategy:?} {channel:?} L={l}: {errors} errors"));
                }
            }
        }
    }
    verdict(
        "zero-noise decisions exact",
        failures.is_empty(),
        &format!("20 configurations, failures {failures:?}"),
    );
}

#[test]
fn criterion_8_determinism() {
    let mut same = Vec::new();
    for (preset, trials) in [(Preset::Fig4, 300), (Preset::Fig5, 300), (Preset::Fig6, 0)] {
        let mut cfg = Config {
            preset,
            seed: 2024,
            samples: 5_000,
            ..Config::default()
        };
        if trials > 0 {
            cfg.trials = trials;
        }
        let bytes: Vec<Vec<u8>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let path = experiment::run(&cfg, dir.path()).unwrap();
                std::fs::read(path).unwrap()
            })
            .collect();
        same.push((preset.name(), bytes[0] == bytes[1] && !bytes[0].is_empty()));
    }
    let ok = same.iter().all(|(_, s)| *s);
    verdict("byte-identical preset output", ok, &format!("{same:?}"));
}
