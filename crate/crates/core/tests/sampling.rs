use diffloc::medium::{marker_hit_probability, Arena, DiffusionParams, MeanModel};
use diffloc::sim::{sample_fc_counts, sample_gateway_counts, trial_rng, SamplingModel};

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn fusion_center_counts_have_the_model_mean() {
    let arena = Arena::table_default();
    let params = DiffusionParams {
        k: 1,
        ..DiffusionParams::default()
    };
    let d = 0.5 * arena.w() * 2f64.sqrt();
    let m = MeanModel::ideal(&arena, &params, params.molecules)
        .unwrap()
        .mean(d);
    let n = 1_000_000;
    let mut means = Vec::new();
    for (i, model) in [SamplingModel::Binomial, SamplingModel::Gaussian]
        .into_iter()
        .enumerate()
    {
        let mut rng = trial_rng(10 + i as u64, 0);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                sample_fc_counts(d, &arena, &params, params.molecules, model, &mut rng).unwrap()[0]
            })
            .collect();
        let (mean, var) = moments(&xs);
        let tol = 3.0 * (m / n as f64).sqrt();
        assert!((mean - m).abs() < tol, "{model:?}: {mean} vs {m}");
        assert!(
            (var / m - 1.0).abs() < 0.01,
            "{model:?}: variance {var} vs {m}"
        );
        means.push(mean);
    }
    assert!((means[0] / means[1] - 1.0).abs() < 0.005);
}

#[test]
fn gateway_counts_have_the_conditional_mean() {
    let arena = Arena::table_default();
    let params = DiffusionParams::default();
    let p = marker_hit_probability(&arena, &params);
    let y = 260.0;
    let expected = params.alpha as f64 * y * p;
    let n = 200_000;
    for model in [SamplingModel::Binomial, SamplingModel::Gaussian] {
        let mut rng = trial_rng(3, 1);
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_gateway_counts(&[y], params.alpha, p, model, &mut rng).unwrap()[0])
            .collect();
        let (mean, _) = moments(&xs);
        assert!(
            (mean - expected).abs() < 3.0 * (expected / n as f64).sqrt(),
            "{model:?}: {mean} vs {expected}"
        );
    }
    assert!(sample_gateway_counts(
        &[-1.0],
        10,
        0.1,
        SamplingModel::Binomial,
        &mut trial_rng(0, 0)
    )
    .is_err());
}
