//! Gateway decision rules.
//!
//! Collaborative sensors are localized on the radial scheme: every fusion
//! center's sum of squared samples is compared against a ladder of pairwise
//! ML thresholds. Non-collaborative sensors are localized on the grid scheme
//! from the ratios `V1/V2` and `V3/V2` of the per-FC sample averages.

use crate::clustering::{GridCell, GridScheme, RadialCell, RadialScheme};
use crate::error::{Error, Result};
use crate::medium::FusionCenter;

/// Whether counts are fusion-center samples or gateway marker samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// `Y`: molecules counted by the fusion centers.
    Molecules,
    /// `W`: markers counted by the gateway.
    Markers,
}

/// Per-FC sample vectors observed by the gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    kind: SampleKind,
    counts: Vec<Vec<f64>>,
}

impl ObservationSet {
    /// `counts[i]` holds the `K` samples of FC `i + 1`.
    pub fn new(kind: SampleKind, counts: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=3).contains(&counts.len()) {
            return Err(Error::Observation(format!(
                "expected 2 or 3 fusion centers, got {}",
                counts.len()
            )));
        }
        let k = counts[0].len();
        if k == 0 {
            return Err(Error::Observation("need at least one sample".into()));
        }
        for (i, c) in counts.iter().enumerate() {
            if c.len() != k {
                return Err(Error::Observation(format!(
                    "FC{} has {} samples, expected {k}",
                    i + 1,
                    c.len()
                )));
            }
            if c.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Observation(format!(
                    "FC{} has a negative count",
                    i + 1
                )));
            }
        }
        Ok(ObservationSet { kind, counts })
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.counts[0].len()
    }

    pub fn n_fc(&self) -> usize {
        self.counts.len()
    }

    pub fn samples(&self, fc: FusionCenter) -> &[f64] {
        let i = match fc {
            FusionCenter::Fc1 => 0,
            FusionCenter::Fc2 => 1,
            FusionCenter::Fc3 => 2,
        };
        &self.counts[i]
    }

    pub fn samples_mut(&mut self, fc: FusionCenter) -> &mut [f64] {
        let i = match fc {
            FusionCenter::Fc1 => 0,
            FusionCenter::Fc2 => 1,
            FusionCenter::Fc3 => 2,
        };
        &mut self.counts[i]
    }

    pub fn sum_squares(&self, fc: FusionCenter) -> f64 {
        self.samples(fc).iter().map(|y| y * y).sum()
    }

    pub fn average(&self, fc: FusionCenter) -> f64 {
        estimate_mean(self.samples(fc))
    }

    fn expect_shape(&self, n_fc: usize, k: usize) -> Result<()> {
        if self.n_fc() != n_fc {
            return Err(Error::Observation(format!(
                "expected {n_fc} fusion centers, got {}",
                self.n_fc()
            )));
        }
        if self.k() != k {
            return Err(Error::Observation(format!(
                "expected {k} samples per FC, got {}",
                self.k()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDecision {
    /// Decided cluster, always a member of the hypothesis set.
    pub cell: RadialCell,
    /// Per-FC decisions before snapping onto the hypothesis set.
    pub raw: RadialCell,
    pub sum_squares: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDecision {
    pub cell: GridCell,
    pub z12: f64,
    pub z32: f64,
    /// Some per-FC average was raised to the half-count floor.
    pub floored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionOutcome {
    Radial(RadialDecision),
    Grid(GridDecision),
}

fn tau_from_means(m1: f64, m2: f64, k: usize) -> Result<f64> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "threshold needs positive means, got {m1}, {m2}"
        )));
    }
    if m1 == m2 {
        return Err(Error::Degenerate("threshold between equal means".into()));
    }
    Ok(k as f64 * m1 * m2 * (1.0 + (m1 / m2).ln() / (m1 - m2)))
}

/// Pairwise ML threshold on the sum of squared samples between the
/// hypotheses `d = r1` and `d = r2`.
pub fn tau_threshold(r1: f64, r2: f64, k: usize, mean_fn: impl Fn(f64) -> f64) -> Result<f64> {
    if r1 == r2 {
        return Err(Error::Degenerate(format!("equal radii {r1}")));
    }
    tau_from_means(mean_fn(r1), mean_fn(r2), k)
}

/// One fusion center's threshold ladder over its radius indices.
#[derive(Debug, Clone, PartialEq)]
struct Ladder {
    js: Vec<usize>,
    means: Vec<f64>,
    /// `thresholds[i] = tau(r_{js[i]}, r_{js[i+1]})`, strictly decreasing.
    thresholds: Vec<f64>,
}

impl Ladder {
    fn new(
        scheme: &RadialScheme,
        fc: FusionCenter,
        k: usize,
        mean_fn: &impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let js = scheme.ladder(fc).to_vec();
        let means: Vec<f64> = js.iter().map(|&j| mean_fn(scheme.radius(j))).collect();
        if means.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Degenerate(
                "mean count must be positive on every radius".into(),
            ));
        }
        let thresholds = means
            .windows(2)
            .map(|m| tau_from_means(m[0], m[1], k))
            .collect::<Result<Vec<_>>>()?;
        if thresholds.windows(2).any(|t| !(t[0] > t[1])) {
            return Err(Error::Degenerate(
                "mean model is not strictly decreasing in distance".into(),
            ));
        }
        Ok(Ladder {
            js,
            means,
            thresholds,
        })
    }

    /// Position on the ladder selected by the sum of squares `s`.
    fn select(&self, s: f64) -> usize {
        self.thresholds
            .iter()
            .position(|&t| s >= t)
            .unwrap_or(self.thresholds.len())
    }

    fn exact_ml(&self, samples: &[f64]) -> usize {
        let k = samples.len() as f64;
        let mut best = (f64::INFINITY, 0);
        for (i, &m) in self.means.iter().enumerate() {
            let cost = k * m.ln() + samples.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / m;
            if cost < best.0 {
                best = (cost, i);
            }
        }
        best.1
    }
}

/// Precomputed threshold ladders for the radial scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDetector {
    scheme: RadialScheme,
    k: usize,
    fc1: Ladder,
    fc2: Ladder,
}

impl RadialDetector {
    pub fn new(scheme: &RadialScheme, k: usize, mean_fn: impl Fn(f64) -> f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "need at least one sample"));
        }
        Ok(RadialDetector {
            scheme: scheme.clone(),
            k,
            fc1: Ladder::new(scheme, FusionCenter::Fc1, k, &mean_fn)?,
            fc2: Ladder::new(scheme, FusionCenter::Fc2, k, &mean_fn)?,
        })
    }

    pub fn scheme(&self) -> &RadialScheme {
        &self.scheme
    }

    /// Thresholds of one fusion center, ordered from the nearest radius pair
    /// outwards.
    pub fn thresholds(&self, fc: FusionCenter) -> &[f64] {
        match fc {
            FusionCenter::Fc2 => &self.fc2.thresholds,
            _ => &self.fc1.thresholds,
        }
    }

    /// Ladder radius indices, hypothesis means and thresholds of one FC.
    pub(crate) fn ladder_parts(&self, fc: FusionCenter) -> (&[usize], &[f64], &[f64]) {
        let l = match fc {
            FusionCenter::Fc2 => &self.fc2,
            _ => &self.fc1,
        };
        (&l.js, &l.means, &l.thresholds)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sub-optimal threshold rule.
    pub fn decide(&self, obs: &ObservationSet) -> Result<RadialDecision> {
        obs.expect_shape(2, self.k)?;
        let s1 = obs.sum_squares(FusionCenter::Fc1);
        let s2 = obs.sum_squares(FusionCenter::Fc2);
        let raw = RadialCell {
            j1: self.fc1.js[self.fc1.select(s1)],
            j2: self.fc2.js[self.fc2.select(s2)],
        };
        Ok(RadialDecision {
            cell: self.scheme.snap(raw),
            raw,
            sum_squares: [s1, s2],
        })
    }

    /// Exhaustive minimization of the reduced ML cost over each ladder.
    pub fn decide_exact(&self, obs: &ObservationSet) -> Result<RadialDecision> {
        obs.expect_shape(2, self.k)?;
        let y1 = obs.samples(FusionCenter::Fc1);
        let y2 = obs.samples(FusionCenter::Fc2);
        let raw = RadialCell {
            j1: self.fc1.js[self.fc1.exact_ml(y1)],
            j2: self.fc2.js[self.fc2.exact_ml(y2)],
        };
        Ok(RadialDecision {
            cell: self.scheme.snap(raw),
            raw,
            sum_squares: [
                obs.sum_squares(FusionCenter::Fc1),
                obs.sum_squares(FusionCenter::Fc2),
            ],
        })
    }
}

pub fn decide_radial(
    obs: &ObservationSet,
    scheme: &RadialScheme,
    k: usize,
    mean_fn: impl Fn(f64) -> f64,
) -> Result<DecisionOutcome> {
    Ok(DecisionOutcome::Radial(
        RadialDetector::new(scheme, k, mean_fn)?.decide(obs)?,
    ))
}

pub fn exact_ml_radial(
    obs: &ObservationSet,
    scheme: &RadialScheme,
    k: usize,
    mean_fn: impl Fn(f64) -> f64,
) -> Result<DecisionOutcome> {
    Ok(DecisionOutcome::Radial(
        RadialDetector::new(scheme, k, mean_fn)?.decide_exact(obs)?,
    ))
}

/// Least-squares estimate of a fusion center's mean count: the sample
/// average.
pub fn estimate_mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Coefficients `(a, b, c)` of the log-likelihood ratio
/// `ln p(z | lower) - ln p(z | upper)` for two normal hypotheses.
fn llr_coefficients(mu_lo: f64, mu_hi: f64, var_lo: f64, var_hi: f64) -> (f64, f64, f64) {
    let a = 0.5 * (1.0 / var_hi - 1.0 / var_lo);
    let b = mu_lo / var_lo - mu_hi / var_hi;
    let c = 0.5 * ((var_hi / var_lo).ln() + mu_hi * mu_hi / var_hi - mu_lo * mu_lo / var_lo);
    (a, b, c)
}

/// Log-likelihood ratio between the normal hypotheses at `z`.
pub fn llr(z: f64, mu_lo: f64, mu_hi: f64, var_lo: f64, var_hi: f64) -> f64 {
    0.5 * (var_hi / var_lo).ln() + (z - mu_hi).powi(2) / (2.0 * var_hi)
        - (z - mu_lo).powi(2) / (2.0 * var_lo)
}

/// Decision threshold between grid hypotheses `i` and `i + 1` on one axis:
/// the zero of the LLR lying strictly between the two hypothesis means.
pub fn gamma_threshold(i: usize, mu_lo: f64, mu_hi: f64, var_lo: f64, var_hi: f64) -> Result<f64> {
    if !(var_lo > 0.0 && var_hi > 0.0) {
        return Err(Error::Degenerate("ratio variances must be positive".into()));
    }
    if !(mu_lo < mu_hi) {
        return Err(Error::Degenerate(format!(
            "hypothesis means must increase, got {mu_lo} then {mu_hi}"
        )));
    }
    let (a, b, c) = llr_coefficients(mu_lo, mu_hi, var_lo, var_hi);
    let inside = |z: f64| z > mu_lo && z < mu_hi;
    let root = if a == 0.0 {
        let z = -c / b;
        inside(z).then_some(z)
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            None
        } else {
            // Cancellation-free pair of roots.
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            [q / a, c / q].into_iter().find(|z| inside(*z))
        }
    };
    let mut z = root.ok_or(Error::NoSeparatingRoot {
        lower: i,
        upper: i + 1,
    })?;
    // One Newton step removes the last bits of rounding error.
    let f = a * z * z + b * z + c;
    let df = 2.0 * a * z + b;
    if df != 0.0 {
        let polished = z - f / df;
        if inside(polished) {
            z = polished;
        }
    }
    Ok(z)
}

/// Grid detector: hypothesis means of the ratio statistics per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDetector {
    scheme: GridScheme,
    k: usize,
    /// `mu[i - 1]` is the mean of `V1/V2` (or `V3/V2`) under hypothesis `i`.
    mu: Vec<f64>,
    floor: Option<f64>,
}

/// Per-FC averages below this are raised to it before forming ratios.
pub const HALF_COUNT_FLOOR: f64 = 0.5;

impl GridDetector {
    pub fn new(scheme: &GridScheme, k: usize, mean_fn: impl Fn(f64) -> f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "need at least one sample"));
        }
        let w = scheme.w();
        let mu: Vec<f64> = (1..=scheme.l())
            .map(|i| {
                let s = scheme.coordinate(i);
                // Ratio m(d1)/m(d2) depends on s_x only; evaluate on the x-axis.
                mean_fn(w - s) / mean_fn(s)
            })
            .collect();
        if mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) || mu.windows(2).any(|m| !(m[0] < m[1]))
        {
            return Err(Error::Degenerate(
                "ratio means must be finite and increasing".into(),
            ));
        }
        Ok(GridDetector {
            scheme: *scheme,
            k,
            mu,
            floor: Some(HALF_COUNT_FLOOR),
        })
    }

    /// Disables the half-count floor: a non-positive `V2` becomes an error.
    pub fn without_floor(mut self) -> Self {
        self.floor = None;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scheme(&self) -> &GridScheme {
        &self.scheme
    }

    pub fn ratio_means(&self) -> &[f64] {
        &self.mu
    }

    /// Variance of the ratio statistic under hypothesis `i` (1-based) when
    /// the denominator FC mean is `m2`.
    pub fn ratio_variance(&self, i: usize, m2: f64) -> f64 {
        let mu = self.mu[i - 1];
        mu * (1.0 + mu) / (self.k as f64 * m2)
    }

    /// Thresholds `gamma(1) < ... < gamma(L-1)` for denominator mean `m2`.
    pub fn thresholds(&self, m2: f64) -> Result<Vec<f64>> {
        if !(m2 > 0.0) {
            return Err(Error::Degenerate(format!(
                "denominator mean must be positive, got {m2}"
            )));
        }
        (1..self.scheme.l())
            .map(|i| {
                gamma_threshold(
                    i,
                    self.mu[i - 1],
                    self.mu[i],
                    self.ratio_variance(i, m2),
                    self.ratio_variance(i + 1, m2),
                )
            })
            .collect()
    }

    fn axis_decision(thresholds: &[f64], z: f64) -> usize {
        thresholds.iter().take_while(|&&g| z > g).count() + 1
    }

    pub fn decide(&self, obs: &ObservationSet) -> Result<GridDecision> {
        obs.expect_shape(3, self.k)?;
        let mut floored = false;
        let mut average = |fc| {
            let v = obs.average(fc);
            match self.floor {
                Some(f) if v < f => {
                    floored = true;
                    Ok(f)
                }
                None if fc == FusionCenter::Fc2 && v <= 0.0 => Err(Error::Degenerate(
                    "FC2 average is zero; ratio undefined".into(),
                )),
                _ => Ok(v),
            }
        };
        let v1 = average(FusionCenter::Fc1)?;
        let v2 = average(FusionCenter::Fc2)?;
        let v3 = average(FusionCenter::Fc3)?;
        let z12 = v1 / v2;
        let z32 = v3 / v2;
        let gammas = self.thresholds(v2)?;
        Ok(GridDecision {
            cell: GridCell {
                ix: Self::axis_decision(&gammas, z12),
                iy: Self::axis_decision(&gammas, z32),
            },
            z12,
            z32,
            floored,
        })
    }
}

pub fn decide_grid(
    obs: &ObservationSet,
    scheme: &GridScheme,
    k: usize,
    mean_fn: impl Fn(f64) -> f64,
) -> Result<DecisionOutcome> {
    Ok(DecisionOutcome::Grid(
        GridDetector::new(scheme, k, mean_fn)?.decide(obs)?,
    ))
}
