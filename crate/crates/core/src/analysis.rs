//! Closed-form localization error probabilities.
//!
//! The radial (collaborative) analysis is exact under the Gaussian count
//! model: the sum of squared samples, normalized by the variance, is
//! non-central chi-squared with `K` degrees of freedom. The grid
//! (non-collaborative) analysis relies on the normal approximation of a
//! ratio of Gaussians, which is guaranteed only near the mean; the tails are
//! used as an approximation. The noisy link reuses both with every mean
//! count replaced by its mean-value approximation `alpha * mu~ * m(d)`.

use std::fmt;

use crate::clustering::{GridCell, GridScheme, RadialPrior, RadialScheme};
use crate::detection::{GridDetector, RadialDetector};
use crate::error::{Error, Result};
use crate::medium::{Arena, DiffusionParams, FusionCenter, MeanModel};
use crate::numerics::{gaussian_q, marcum_q_tails};

/// `sqrt(K m(d2))` below which the ratio approximation is not trusted.
pub const LEMMA2_MIN_SNR: f64 = 10.0;

/// z-score of a two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// Empirical error rate over a number of independent trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalPe {
    pub errors: u64,
    pub trials: u64,
}

impl EmpiricalPe {
    pub fn new(errors: u64, trials: u64) -> Self {
        EmpiricalPe { errors, trials }
    }

    pub fn p(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn standard_error(&self) -> f64 {
        let p = self.p();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Half-width of the 95% normal-approximation confidence interval.
    pub fn half_width(&self) -> f64 {
        Z95 * self.standard_error()
    }

    /// Whether `p` lies within `z` standard errors of the estimate.
    pub fn within(&self, p: f64, z: f64) -> bool {
        (p - self.p()).abs() <= z * self.standard_error()
    }

    /// Wilson score interval at `z` standard deviations. Unlike the normal
    /// interval it stays informative when no errors were observed.
    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        let n = self.trials as f64;
        let p = self.p();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProbability {
    pub label: String,
    pub prior: f64,
    /// Probability of deciding any other cluster. Kept directly rather than
    /// as `1 - correct` so tiny values survive.
    pub error: f64,
}

impl ClusterProbability {
    pub fn correct(&self) -> f64 {
        1.0 - self.error
    }
}

/// Error probability of a decision made by two independent components.
fn joint_error(e1: f64, e2: f64) -> f64 {
    (e1 + e2 - e1 * e2).clamp(0.0, 1.0)
}

/// Analytic and/or empirical error probabilities for one configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub config: String,
    pub analytic: Option<f64>,
    pub empirical: Option<EmpiricalPe>,
    pub per_cluster: Vec<ClusterProbability>,
    /// `Some(false)` when the ratio approximation's applicability condition
    /// fails for at least one hypothesis.
    pub lemma2_ok: Option<bool>,
    pub warnings: Vec<String>,
}

impl ErrorReport {
    /// `sum(prior * error)` over the per-cluster table.
    pub fn pe_from_clusters(&self) -> f64 {
        self.per_cluster
            .iter()
            .map(|c| c.prior * c.error)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.config)?;
        if let Some(a) = self.analytic {
            write!(f, " analytic P_e = {a:.6}")?;
        }
        if let Some(e) = self.empirical {
            write!(
                f,
                " empirical P_e = {:.6} +/- {:.6} ({} trials)",
                e.p(),
                e.half_width(),
                e.trials
            )?;
        }
        Ok(())
    }
}

/// Probability that one fusion center decides each of its ladder radii
/// wrongly, indexed like the ladder.
fn radial_error_probabilities(det: &RadialDetector, fc: FusionCenter) -> Result<Vec<f64>> {
    let (_, means, thresholds) = det.ladder_parts(fc);
    let k = det.k() as f64;
    let order = 0.5 * k;
    let n = means.len();
    (0..n)
        .map(|i| {
            let m = means[i];
            let a = (k * m).sqrt();
            // Falling below the boundary with the next farther radius
            // (smaller mean), or above the one with the next nearer radius.
            let below = if i + 1 < n {
                marcum_q_tails(order, a, (thresholds[i] / m).sqrt())?.0
            } else {
                0.0
            };
            let above = if i > 0 {
                marcum_q_tails(order, a, (thresholds[i - 1] / m).sqrt())?.1
            } else {
                0.0
            };
            Ok((below + above).clamp(0.0, 1.0))
        })
        .collect()
}

/// Error probability of the radial threshold ladder.
pub fn pe_radial(
    scheme: &RadialScheme,
    k: usize,
    mean_fn: impl Fn(f64) -> f64,
    prior: RadialPrior,
) -> Result<ErrorReport> {
    let det = RadialDetector::new(scheme, k, mean_fn)?;
    let e1 = radial_error_probabilities(&det, FusionCenter::Fc1)?;
    let e2 = radial_error_probabilities(&det, FusionCenter::Fc2)?;
    let (js1, _, _) = det.ladder_parts(FusionCenter::Fc1);
    let (js2, _, _) = det.ladder_parts(FusionCenter::Fc2);
    let pos = |js: &[usize], j: usize| js.iter().position(|&x| x == j).expect("cell on ladder");
    let priors = scheme.prior(prior);
    let per_cluster: Vec<ClusterProbability> = scheme
        .psi()
        .iter()
        .zip(priors)
        .map(|(c, prior)| ClusterProbability {
            label: c.to_string(),
            prior,
            error: joint_error(e1[pos(js1, c.j1)], e2[pos(js2, c.j2)]),
        })
        .collect();
    let mut report = ErrorReport {
        config: format!("radial L={} K={k}", scheme.l()),
        per_cluster,
        ..Default::default()
    };
    report.analytic = Some(report.pe_from_clusters());
    Ok(report)
}

/// Probability that a normal statistic falls outside `(lo, hi)`.
fn normal_outside(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    (gaussian_q((mu - lo) / sigma) + gaussian_q((hi - mu) / sigma)).clamp(0.0, 1.0)
}

/// Error probability of the grid ratio rule under the normal approximation
/// of the ratio statistics, evaluated with the true denominator mean of
/// every hypothesis.
pub fn pe_grid(scheme: &GridScheme, k: usize, mean_fn: impl Fn(f64) -> f64) -> Result<ErrorReport> {
    let det = GridDetector::new(scheme, k, &mean_fn)?;
    let l = scheme.l();
    let n = scheme.n_cells() as f64;
    let mu = det.ratio_means();
    let mut lemma2_ok = true;
    let mut warnings = Vec::new();
    let mut per_cluster = Vec::with_capacity(scheme.n_cells());
    for cell in scheme.cells() {
        let p = scheme.indicator_point(cell);
        // Distance from FC2 at the origin.
        let m2 = mean_fn(p.x.hypot(p.y));
        if (k as f64 * m2).sqrt() < LEMMA2_MIN_SNR {
            if lemma2_ok {
                warnings.push(format!(
                    "sqrt(K m(d2)) = {:.3} < {LEMMA2_MIN_SNR} at {cell}; ratio approximation not guaranteed",
                    (k as f64 * m2).sqrt()
                ));
            }
            lemma2_ok = false;
        }
        let gammas = det.thresholds(m2)?;
        let edge = |i: usize| -> f64 {
            match i {
                0 => 0.0,
                i if i == l => f64::INFINITY,
                i => gammas[i - 1],
            }
        };
        let axis = |i: usize| {
            let sigma = det.ratio_variance(i, m2).sqrt();
            normal_outside(mu[i - 1], sigma, edge(i - 1), edge(i))
        };
        per_cluster.push(ClusterProbability {
            label: cell.to_string(),
            prior: 1.0 / n,
            error: joint_error(axis(cell.ix), axis(cell.iy)),
        });
    }
    let mut report = ErrorReport {
        config: format!("grid L={l} K={k}"),
        per_cluster,
        lemma2_ok: Some(lemma2_ok),
        warnings,
        ..Default::default()
    };
    report.analytic = Some(report.pe_from_clusters());
    Ok(report)
}

/// Localization scheme under analysis.
#[derive(Debug, Clone, Copy)]
pub enum SchemeRef<'a> {
    Radial(&'a RadialScheme, RadialPrior),
    Grid(&'a GridScheme),
}

/// Error probability over the noisy fusion-center to gateway link under the
/// mean-value approximation.
pub fn pe_noisy(
    scheme: SchemeRef<'_>,
    arena: &Arena,
    params: &DiffusionParams,
    released: f64,
) -> Result<ErrorReport> {
    if params.alpha < 1 {
        return Err(Error::param("alpha", "amplification factor must be >= 1"));
    }
    let model = MeanModel::noisy(arena, params, released)?;
    let mut report = match scheme {
        SchemeRef::Radial(s, prior) => pe_radial(s, params.k, model.as_fn(), prior)?,
        SchemeRef::Grid(s) => pe_grid(s, params.k, model.as_fn())?,
    };
    report.config = format!(
        "{} noisy alpha={} d_fg={}",
        report.config,
        params.alpha,
        arena.d_fg()
    );
    Ok(report)
}

/// Correct-decision probability of a grid hypothesis from a report built by
/// [`pe_grid`].
pub fn grid_cluster_correct(report: &ErrorReport, cell: GridCell) -> Option<f64> {
    let label = cell.to_string();
    report
        .per_cluster
        .iter()
        .find(|c| c.label == label)
        .map(|c| c.correct())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::RadialCell;
    use crate::numerics::marcum_q;

    fn setup(molecules: f64) -> (Arena, DiffusionParams, MeanModel) {
        let arena = Arena::table_default();
        let params = DiffusionParams {
            molecules,
            ..DiffusionParams::default()
        };
        let m = MeanModel::ideal(&arena, &params, molecules).unwrap();
        (arena, params, m)
    }

    #[test]
    fn single_cluster_has_zero_error() {
        let (arena, _, m) = setup(1e6);
        let s = RadialScheme::from_cells(&arena, 2, &[RadialCell { j1: 1, j2: 1 }]).unwrap();
        let r = pe_radial(&s, 2, m.as_fn(), RadialPrior::Uniform).unwrap();
        assert_eq!(r.analytic, Some(0.0));
    }

    #[test]
    fn radial_probabilities_are_consistent() {
        let (arena, _, m) = setup(1e6);
        for l in 2..=6 {
            let s = RadialScheme::build(&arena, l).unwrap();
            for prior in [RadialPrior::Uniform, RadialPrior::AreaWeighted] {
                let r = pe_radial(&s, 2, m.as_fn(), prior).unwrap();
                let pe = r.analytic.unwrap();
                assert!((0.0..=1.0).contains(&pe));
                assert!(r.per_cluster.iter().all(|c| (0.0..=1.0).contains(&c.error)));
                assert!((r.per_cluster.iter().map(|c| c.prior).sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((r.pe_from_clusters() - pe).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn radial_error_falls_with_released_molecules() {
        let arena = Arena::table_default();
        let s = RadialScheme::build(&arena, 6).unwrap();
        let mut last = 1.0;
        for molecules in [1e5, 1e6, 1e7] {
            let (_, _, m) = setup(molecules);
            let pe = pe_radial(&s, 2, m.as_fn(), RadialPrior::Uniform)
                .unwrap()
                .analytic
                .unwrap();
            assert!(pe < last, "{molecules}: {pe} !< {last}");
            last = pe;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn tiny_error_probabilities_keep_their_order() {
        // Deep in the high-count regime the error is far below machine
        // epsilon and must still fall with the molecule budget.
        let arena = Arena::table_default();
        let s = RadialScheme::build(&arena, 2).unwrap();
        let g = GridScheme::build(&arena, 2).unwrap();
        let (mut lr, mut lg) = (1.0, 1.0);
        for molecules in [1e6, 2e6, 3e6] {
            let (_, _, m) = setup(molecules);
            let r = pe_radial(&s, 2, m.as_fn(), RadialPrior::Uniform)
                .unwrap()
                .analytic
                .unwrap();
            let gr = pe_grid(&g, 2, m.as_fn()).unwrap().analytic.unwrap();
            assert!(r > 0.0 && r < lr && r < 1e-12, "{r}");
            assert!(gr > 0.0 && gr < lg, "{gr}");
            lr = r;
            lg = gr;
        }
    }

    #[test]
    fn per_fc_probabilities_partition_unity() {
        // Summed over the decided radius, the probabilities for a fixed true
        // radius must add to one; check via the ladder thresholds directly.
        let (arena, _, m) = setup(1e6);
        let s = RadialScheme::build(&arena, 4).unwrap();
        let det = RadialDetector::new(&s, 2, m.as_fn()).unwrap();
        let (_, means, thr) = det.ladder_parts(FusionCenter::Fc1);
        for &mean in means {
            let a = (2.0 * mean).sqrt();
            let mut edges = vec![0.0];
            edges.extend(thr.iter().rev().copied());
            edges.push(f64::INFINITY);
            let total: f64 = edges
                .windows(2)
                .map(|e| {
                    let lo = if e[0] == 0.0 {
                        1.0
                    } else {
                        marcum_q(1.0, a, (e[0] / mean).sqrt()).unwrap()
                    };
                    let hi = if e[1].is_infinite() {
                        0.0
                    } else {
                        marcum_q(1.0, a, (e[1] / mean).sqrt()).unwrap()
                    };
                    lo - hi
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_report_is_symmetric_under_transpose() {
        let (arena, _, m) = setup(3e6);
        for l in 2..=6 {
            let g = GridScheme::build(&arena, l).unwrap();
            let r = pe_grid(&g, 2, m.as_fn()).unwrap();
            assert_eq!(r.lemma2_ok, Some(true));
            for cell in g.cells() {
                let t = GridCell {
                    ix: cell.iy,
                    iy: cell.ix,
                };
                let a = grid_cluster_correct(&r, cell).unwrap();
                let b = grid_cluster_correct(&r, t).unwrap();
                assert!((a - b).abs() < 1e-12, "{cell} vs {t}");
            }
        }
    }

    #[test]
    fn grid_flags_low_counts() {
        let (arena, _, m) = setup(1e5);
        let g = GridScheme::build(&arena, 3).unwrap();
        let r = pe_grid(&g, 2, m.as_fn()).unwrap();
        assert_eq!(r.lemma2_ok, Some(false));
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn noisy_with_unit_gain_equals_ideal() {
        let (arena, mut params, _) = setup(1e6);
        // alpha * mu~ = 1 exactly: choose V_G so that mu~ = 1 / alpha.
        params.alpha = 1000;
        let t_g = arena.gateway_sampling_time(&params);
        params.v_g = 4.0 * std::f64::consts::PI * params.d2 * t_g * std::f64::consts::E / 1000.0;
        let gain = crate::medium::gateway_gain(&arena, &params);
        let ideal = MeanModel::ideal(&arena, &params, 1e6).unwrap();
        let unit = MeanModel::with_gain(&arena, &params, 1e6, 1.0).unwrap();
        assert!((gain - 1.0).abs() < 1e-12);
        let s = RadialScheme::build(&arena, 3).unwrap();
        let a = pe_radial(&s, 2, ideal.as_fn(), RadialPrior::Uniform).unwrap();
        let b = pe_radial(&s, 2, unit.as_fn(), RadialPrior::Uniform).unwrap();
        assert_eq!(a.analytic, b.analytic);
        let g = GridScheme::build(&arena, 3).unwrap();
        assert_eq!(
            pe_grid(&g, 2, ideal.as_fn()).unwrap().analytic,
            pe_grid(&g, 2, unit.as_fn()).unwrap().analytic
        );
    }

    #[test]
    fn empirical_interval() {
        let e = EmpiricalPe::new(300, 1000);
        assert_eq!(e.p(), 0.3);
        assert!((e.half_width() - 1.96 * (0.21_f64 / 1000.0).sqrt()).abs() < 1e-15);
        assert!(e.within(0.31, 3.0));
        assert!(!e.within(0.35, 3.0));
        let (lo, hi) = EmpiricalPe::new(0, 100_000).wilson_interval(3.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 9.0 / 100_009.0).abs() < 1e-12);
    }
}
