//! Monte Carlo engine for the localization pipelines.
//!
//! Every trial draws counts from the true stochastic model (binomial, or its
//! Gaussian approximation), runs the same decision rules as the analysis
//! assumes, and scores the decision against the cluster that contains the
//! abnormality. Trials get independent generators derived from the master
//! seed and the trial index, so results do not depend on scheduling.

use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::{pe_grid, pe_radial, EmpiricalPe, ErrorReport};
use crate::clustering::{GridScheme, RadialPrior, RadialScheme};
use crate::detection::{GridDetector, ObservationSet, RadialDetector, SampleKind};
use crate::error::{Error, Result};
use crate::medium::{
    hit_probability, marker_hit_probability, Arena, DiffusionParams, FusionCenter, MeanModel, Point,
};
use crate::sensors::{walk_until_release, SensorParams, Strategy};

/// Mean count above which the automatic sampling model switches from the
/// exact binomial to its Gaussian approximation.
pub const GAUSSIAN_ABOVE_MEAN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// The gateway sees the fusion-center counts directly.
    Ideal,
    /// Fusion centers amplify and forward markers over a diffusive link.
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingModel {
    Binomial,
    /// `N(m, m)` rounded to the nearest non-negative integer.
    Gaussian,
    /// Gaussian above [`GAUSSIAN_ABOVE_MEAN`], binomial below.
    Auto,
}

impl SamplingModel {
    fn gaussian_for(self, mean: f64) -> bool {
        match self {
            SamplingModel::Binomial => false,
            SamplingModel::Gaussian => true,
            SamplingModel::Auto => mean > GAUSSIAN_ABOVE_MEAN,
        }
    }
}

/// Where the abnormality is placed in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbnormalityPrior {
    /// Uniformly over the indicator points of the hypothesis set.
    IndicatorPoints,
    /// Uniformly over the whole area, scored against the containing cluster.
    UniformArea,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReleaseMode {
    /// The configured molecule count is released without simulating sensors.
    Direct,
    /// Sensor walks decide how many molecules are released.
    Walk(SensorParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub strategy: Strategy,
    pub channel: Channel,
    pub sampling: SamplingModel,
    pub arena: Arena,
    pub params: DiffusionParams,
    pub l: usize,
    pub trials: u64,
    pub seed: u64,
    pub prior: AbnormalityPrior,
    pub release: ReleaseMode,
    /// Replace every random count by its mean.
    pub zero_noise: bool,
    /// Overrides the end-to-end marker gain `alpha * mu~` of the noisy link.
    pub gain: Option<f64>,
    /// Also tally a confusion matrix.
    pub confusion: bool,
}

impl TrialPlan {
    /// Table defaults: ideal channel, automatic sampling, abnormality at the
    /// indicator points, direct release.
    pub fn new(strategy: Strategy, l: usize, trials: u64, seed: u64) -> Self {
        TrialPlan {
            strategy,
            channel: Channel::Ideal,
            sampling: SamplingModel::Auto,
            arena: Arena::table_default(),
            params: DiffusionParams::default(),
            l,
            trials,
            seed,
            prior: AbnormalityPrior::IndicatorPoints,
            release: ReleaseMode::Direct,
            zero_noise: false,
            gain: None,
            confusion: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trial count must be >= 1".into()));
        }
        if self.l == 0 {
            return Err(Error::Config("L must be >= 1".into()));
        }
        self.params.validate()?;
        if let Some(g) = self.gain {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gain must be positive, got {g}")));
            }
            if self.channel == Channel::Noisy && g > self.params.alpha as f64 {
                return Err(Error::Config(
                    "gain cannot exceed alpha (marker probability > 1)".into(),
                ));
            }
        }
        if let ReleaseMode::Walk(s) = &self.release {
            s.validate()?;
        }
        Ok(())
    }

    /// Probability that one amplified marker reaches the gateway.
    pub fn marker_probability(&self) -> f64 {
        match self.gain {
            Some(g) => g / self.params.alpha as f64,
            None => marker_hit_probability(&self.arena, &self.params),
        }
    }

    /// Mean-count map the gateway's decision rules are built on.
    pub fn mean_model(&self) -> Result<MeanModel> {
        let released = self.params.molecules;
        match self.channel {
            Channel::Ideal => MeanModel::ideal(&self.arena, &self.params, released),
            Channel::Noisy => {
                let gain = self.params.alpha as f64 * self.marker_probability();
                MeanModel::with_gain(&self.arena, &self.params, released, gain)
            }
        }
    }

    fn describe(&self) -> String {
        let strategy = match self.strategy {
            Strategy::Collaborative => "collab",
            Strategy::NonCollaborative => "noncollab",
        };
        let channel = match self.channel {
            Channel::Ideal => "ideal",
            Channel::Noisy => "noisy",
        };
        format!(
            "{strategy} {channel} L={} molecules={}",
            self.l, self.params.molecules
        )
    }
}

/// `K` fusion-center counts at distance `d` from a release of `released`
/// molecules.
pub fn sample_fc_counts<R: Rng + ?Sized>(
    d: f64,
    arena: &Arena,
    params: &DiffusionParams,
    released: f64,
    model: SamplingModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(released >= 0.0) {
        return Err(Error::param("released", "must be >= 0"));
    }
    let p = hit_probability(
        d,
        arena.sampling_time(params),
        params.v_f,
        params.d,
        arena.dims(),
    )?;
    draw_counts(released, p, params.k, model, rng)
}

/// Gateway marker counts given the fusion-center counts `y`: each of the
/// `alpha * y` amplified markers arrives independently with probability
/// `marker_p`.
pub fn sample_gateway_counts<R: Rng + ?Sized>(
    y: &[f64],
    alpha: u64,
    marker_p: f64,
    model: SamplingModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&marker_p) {
        return Err(Error::param("marker_p", "must be a probability"));
    }
    y.iter()
        .map(|&yk| {
            if !(yk >= 0.0) {
                return Err(Error::Observation(format!("negative count {yk}")));
            }
            Ok(draw_counts(alpha as f64 * yk, marker_p, 1, model, rng)?[0])
        })
        .collect()
}

fn draw_counts<R: Rng + ?Sized>(
    trials: f64,
    p: f64,
    k: usize,
    model: SamplingModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = trials.round();
    let mean = n * p;
    if mean == 0.0 {
        return Ok(vec![0.0; k]);
    }
    if model.gaussian_for(mean) {
        let normal =
            Normal::new(mean, mean.sqrt()).map_err(|e| Error::Degenerate(e.to_string()))?;
        Ok((0..k)
            .map(|_| normal.sample(rng).round().max(0.0))
            .collect())
    } else {
        let binom = Binomial::new(n as u64, p).map_err(|e| Error::Degenerate(e.to_string()))?;
        Ok((0..k).map(|_| binom.sample(rng) as f64).collect())
    }
}

/// Per-hypothesis tallies: `rows[t][d]` counts trials whose true cluster is
/// `t` and whose decision is `d`; the last column counts trials where no
/// decision could be made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn trials_per_cluster(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn correct(&self) -> u64 {
        self.rows.iter().enumerate().map(|(i, r)| r[i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Empirical part filled in; no analytic value.
    pub report: ErrorReport,
    pub confusion: Option<ConfusionMatrix>,
    /// Trials that raised a grid average to the half-count floor.
    pub floored: u64,
    /// Trials counted as errors because the rule produced no decision.
    pub undecided: u64,
    /// Radial scheme only: error rate of the per-FC decisions before they
    /// are snapped onto the hypothesis set. This is the quantity the closed
    /// form describes; snapping can only repair errors.
    pub unsnapped: Option<EmpiricalPe>,
}

enum Pipeline {
    Radial(RadialDetector),
    Grid(GridDetector),
}

impl Pipeline {
    fn n_fc(&self) -> usize {
        match self {
            Pipeline::Radial(_) => 2,
            Pipeline::Grid(_) => 3,
        }
    }

    fn n_hypotheses(&self) -> usize {
        match self {
            Pipeline::Radial(d) => d.scheme().n_p(),
            Pipeline::Grid(d) => d.scheme().n_cells(),
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Pipeline::Radial(d) => d.scheme().psi().iter().map(|c| c.to_string()).collect(),
            Pipeline::Grid(d) => d.scheme().cells().map(|c| c.to_string()).collect(),
        }
    }

    fn indicator_point(&self, h: usize) -> Point {
        match self {
            Pipeline::Radial(d) => {
                let s = d.scheme();
                s.indicator_point(&s.psi()[h])
                    .expect("hypotheses have indicator points")
            }
            Pipeline::Grid(d) => {
                let s = d.scheme();
                s.indicator_point(s.cells().nth(h).expect("cell index in range"))
            }
        }
    }

    fn locate(&self, arena: &Arena, p: &Point) -> Result<usize> {
        match self {
            Pipeline::Radial(d) => {
                let s = d.scheme();
                // Slivers of the area without a feasible indicator point are
                // scored against their nearest hypothesis.
                let cell = s.snap(s.locate(arena, p)?);
                Ok(s.index_of(&cell).expect("snapped onto hypothesis set"))
            }
            Pipeline::Grid(d) => {
                let s = d.scheme();
                Ok(s.cell_index(s.locate(arena, p)?))
            }
        }
    }

    /// Decided hypothesis index, whether the floor was used and whether
    /// the decision before snapping was already `truth`.
    fn decide(&self, obs: &ObservationSet, truth: usize) -> Result<(usize, bool, bool)> {
        match self {
            Pipeline::Radial(d) => {
                let dec = d.decide(obs)?;
                let s = d.scheme();
                let idx = s.index_of(&dec.cell).expect("snapped onto hypothesis set");
                Ok((idx, false, dec.raw == s.psi()[truth]))
            }
            Pipeline::Grid(d) => {
                let dec = d.decide(obs)?;
                let idx = d.scheme().cell_index(dec.cell);
                Ok((idx, dec.floored, idx == truth))
            }
        }
    }
}

fn build_pipeline(plan: &TrialPlan, model: &MeanModel) -> Result<Pipeline> {
    let k = plan.params.k;
    Ok(match plan.strategy {
        Strategy::Collaborative => {
            let scheme = RadialScheme::build(&plan.arena, plan.l)?;
            Pipeline::Radial(RadialDetector::new(&scheme, k, model.as_fn())?)
        }
        Strategy::NonCollaborative => {
            let scheme = GridScheme::build(&plan.arena, plan.l)?;
            Pipeline::Grid(GridDetector::new(&scheme, k, model.as_fn())?)
        }
    })
}

/// Generator of one trial, independent of every other trial's.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

struct TrialOutcome {
    truth: usize,
    decision: Option<usize>,
    floored: bool,
    raw_correct: bool,
}

fn run_one(plan: &TrialPlan, pipe: &Pipeline, marker_p: f64, trial: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(plan.seed, trial);
    let arena = &plan.arena;
    let (point, truth) = match plan.prior {
        AbnormalityPrior::IndicatorPoints => {
            let h = rng.sample(Uniform::new(0, pipe.n_hypotheses()));
            (pipe.indicator_point(h), h)
        }
        AbnormalityPrior::UniformArea => {
            let side = Uniform::new_inclusive(0.0, arena.w());
            let p = Point::new(rng.sample(side), rng.sample(side));
            (p, pipe.locate(arena, &p)?)
        }
    };
    let released = match &plan.release {
        ReleaseMode::Direct => plan.params.molecules,
        ReleaseMode::Walk(s) => {
            let event = walk_until_release(s, arena, point, plan.strategy, rng.gen())?;
            event.molecules(s)
        }
    };
    let fcs = &FusionCenter::ALL[..pipe.n_fc()];
    let mut counts = Vec::with_capacity(fcs.len());
    for &fc in fcs {
        let d = arena.distance_to(fc, &point);
        let y = if plan.zero_noise {
            let m = MeanModel::ideal(arena, &plan.params, released)?.mean(d);
            vec![m; plan.params.k]
        } else {
            sample_fc_counts(d, arena, &plan.params, released, plan.sampling, &mut rng)?
        };
        let observed = match plan.channel {
            Channel::Ideal => y,
            Channel::Noisy if plan.zero_noise => {
                let g = plan.params.alpha as f64 * marker_p;
                y.iter().map(|v| g * v).collect()
            }
            Channel::Noisy => {
                sample_gateway_counts(&y, plan.params.alpha, marker_p, plan.sampling, &mut rng)?
            }
        };
        counts.push(observed);
    }
    let kind = match plan.channel {
        Channel::Ideal => SampleKind::Molecules,
        Channel::Noisy => SampleKind::Markers,
    };
    let obs = ObservationSet::new(kind, counts)?;
    Ok(match pipe.decide(&obs, truth) {
        Ok((decision, floored, raw_correct)) => TrialOutcome {
            truth,
            decision: Some(decision),
            floored,
            raw_correct,
        },
        // The rule cannot separate the hypotheses for this draw (no
        // threshold root, or a zero denominator): scored as an error.
        Err(Error::NoSeparatingRoot { .. } | Error::Degenerate(_)) => TrialOutcome {
            truth,
            decision: None,
            floored: false,
            raw_correct: false,
        },
        Err(e) => return Err(e),
    })
}

#[derive(Clone)]
struct Tally {
    errors: u64,
    raw_errors: u64,
    floored: u64,
    undecided: u64,
    rows: Vec<Vec<u64>>,
}

impl Tally {
    fn new(n: usize, confusion: bool) -> Self {
        Tally {
            errors: 0,
            raw_errors: 0,
            floored: 0,
            undecided: 0,
            rows: if confusion {
                vec![vec![0; n + 1]; n]
            } else {
                Vec::new()
            },
        }
    }

    fn add(&mut self, o: &TrialOutcome) {
        if o.decision != Some(o.truth) {
            self.errors += 1;
        }
        self.raw_errors += !o.raw_correct as u64;
        self.floored += o.floored as u64;
        self.undecided += o.decision.is_none() as u64;
        if !self.rows.is_empty() {
            let n = self.rows.len();
            self.rows[o.truth][o.decision.unwrap_or(n)] += 1;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.errors += other.errors;
        self.raw_errors += other.raw_errors;
        self.floored += other.floored;
        self.undecided += other.undecided;
        for (a, b) in self.rows.iter_mut().zip(other.rows) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

/// Runs the plan's trials in parallel and aggregates the empirical error
/// rate.
pub fn run_trials(plan: &TrialPlan) -> Result<SimReport> {
    plan.validate()?;
    let model = plan.mean_model()?;
    let pipe = build_pipeline(plan, &model)?;
    let marker_p = plan.marker_probability();
    let n = pipe.n_hypotheses();
    let tally = (0..plan.trials)
        .into_par_iter()
        .map(|t| run_one(plan, &pipe, marker_p, t))
        .try_fold(
            || Tally::new(n, plan.confusion),
            |mut acc, o| {
                acc.add(&o?);
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| Tally::new(n, plan.confusion), |a, b| Ok(a.merge(b)))?;
    let mut warnings = Vec::new();
    if tally.undecided > 0 {
        warnings.push(format!("{} trials produced no decision", tally.undecided));
    }
    let confusion = plan.confusion.then(|| ConfusionMatrix {
        labels: pipe.labels(),
        rows: tally.rows,
    });
    Ok(SimReport {
        report: ErrorReport {
            config: plan.describe(),
            empirical: Some(EmpiricalPe::new(tally.errors, plan.trials)),
            warnings,
            ..Default::default()
        },
        confusion,
        floored: tally.floored,
        undecided: tally.undecided,
        unsnapped: matches!(pipe, Pipeline::Radial(_))
            .then(|| EmpiricalPe::new(tally.raw_errors, plan.trials)),
    })
}

/// Analytic error probability of the plan's configuration, using the same
/// mean model as the simulated gateway.
pub fn analytic_report(plan: &TrialPlan, prior: RadialPrior) -> Result<ErrorReport> {
    plan.validate()?;
    let model = plan.mean_model()?;
    let k = plan.params.k;
    let mut r = match plan.strategy {
        Strategy::Collaborative => pe_radial(
            &RadialScheme::build(&plan.arena, plan.l)?,
            k,
            model.as_fn(),
            prior,
        )?,
        Strategy::NonCollaborative => {
            pe_grid(&GridScheme::build(&plan.arena, plan.l)?, k, model.as_fn())?
        }
    };
    r.config = plan.describe();
    Ok(r)
}

/// Analytic and empirical error probability of one plan.
pub fn evaluate(plan: &TrialPlan) -> Result<(ErrorReport, SimReport)> {
    let sim = run_trials(plan)?;
    let mut report = analytic_report(plan, RadialPrior::Uniform)?;
    report.empirical = sim.report.empirical;
    report.warnings.extend(sim.report.warnings.iter().cloned());
    Ok((report, sim))
}

/// Gateway marker counts from one fusion center at distance `d1`, sampled
/// through the full two-stage channel.
pub fn gateway_samples(
    d1: f64,
    arena: &Arena,
    params: &DiffusionParams,
    samples: usize,
    seed: u64,
    model: SamplingModel,
) -> Result<Vec<f64>> {
    params.validate()?;
    let marker_p = marker_hit_probability(arena, params);
    let single = DiffusionParams { k: 1, ..*params };
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let y = sample_fc_counts(d1, arena, &single, params.molecules, model, &mut rng)?;
            Ok(sample_gateway_counts(&y, params.alpha, marker_p, model, &mut rng)?[0])
        })
        .collect()
}

/// Mean (and variance) of the mean-value approximation of the gateway count
/// at distance `d1`, a normal law with equal mean and variance.
pub fn mean_value_density_mean(d1: f64, arena: &Arena, params: &DiffusionParams) -> Result<f64> {
    Ok(MeanModel::noisy(arena, params, params.molecules)?.mean(d1))
}

/// Density of `N(m, m)` at `x`.
pub fn normal_equal_variance_pdf(x: f64, m: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * m)).exp() / (2.0 * std::f64::consts::PI * m).sqrt()
}

/// Counts of `samples` falling in `bins` equal-width bins over `[lo, hi)`.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &s in samples {
        if s >= lo && s < hi {
            let b = (((s - lo) / width) as usize).min(bins - 1);
            h[b] += 1;
        }
    }
    h
}
