//! Named experiment sweeps, flat config files and CSV output.
//!
//! A run resolves a [`Config`] (defaults, then config file, then command-line
//! overrides), expands the chosen preset into sweep points, evaluates each
//! point analytically and by simulation, and writes `<preset>.csv` plus a
//! `<preset>.manifest` sidecar into the output directory. Files are written
//! to a temporary name first and renamed once complete.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::medium::{Arena, DiffusionParams};
use crate::sensors::{SensorParams, Strategy};
use crate::sim::{
    evaluate, gateway_samples, histogram, mean_value_density_mean, normal_equal_variance_pdf,
    AbnormalityPrior, Channel, ReleaseMode, SamplingModel, TrialPlan,
};

/// Header of the sweep CSV files. Column order is part of the output format.
pub const SWEEP_COLUMNS: [&str; 22] = [
    "preset",
    "strategy",
    "channel",
    "L",
    "resolution",
    "molecules",
    "total_molecules",
    "K",
    "alpha",
    "dfg_over_w",
    "w",
    "D",
    "D2",
    "V_F",
    "V_G",
    "trials",
    "seed",
    "analytic_pe",
    "empirical_pe",
    "ci_half_width",
    "unsnapped_pe",
    "ratio_approx_ok",
];

/// Header of the gateway-count histogram CSV.
pub const HISTOGRAM_COLUMNS: [&str; 9] = [
    "alpha",
    "d1",
    "dfg_over_w",
    "molecules",
    "samples",
    "seed",
    "bin_center",
    "empirical_density",
    "approx_density",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Error probability against resolution for both strategies.
    Fig3,
    /// Error probability against the released molecule count.
    Fig4,
    /// Noisy link: error probability against the amplification factor.
    Fig5,
    /// Gateway-count histograms against the mean-value approximation.
    Fig6,
    /// A single configuration taken from the config and overrides.
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6" => Ok(Preset::Fig6),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::Config(format!(
                "unknown preset '{s}' (expected fig3, fig4, fig5, fig6 or custom)"
            ))),
        }
    }
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "collab" => Ok(Strategy::Collaborative),
        "noncollab" => Ok(Strategy::NonCollaborative),
        _ => Err(Error::Config(format!(
            "strategy must be collab or noncollab, got '{s}'"
        ))),
    }
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Collaborative => "collab",
        Strategy::NonCollaborative => "noncollab",
    }
}

fn parse_channel(s: &str) -> Result<Channel> {
    match s {
        "ideal" => Ok(Channel::Ideal),
        "noisy" => Ok(Channel::Noisy),
        _ => Err(Error::Config(format!(
            "channel must be ideal or noisy, got '{s}'"
        ))),
    }
}

fn channel_name(c: Channel) -> &'static str {
    match c {
        Channel::Ideal => "ideal",
        Channel::Noisy => "noisy",
    }
}

fn sampling_name(s: SamplingModel) -> &'static str {
    match s {
        SamplingModel::Binomial => "binomial",
        SamplingModel::Gaussian => "gaussian",
        SamplingModel::Auto => "auto",
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub preset: Preset,
    /// Restricts sweeps to one strategy; `None` runs both.
    pub strategy: Option<Strategy>,
    pub channel: Channel,
    pub l: Option<usize>,
    pub molecules: Option<f64>,
    pub alpha: Option<u64>,
    /// Fusion-center to gateway distance in units of the side length.
    pub dfg_over_w: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub k: usize,
    pub w: f64,
    pub d: f64,
    pub d2: f64,
    pub v_f: f64,
    pub v_g: f64,
    pub sampling: SamplingModel,
    pub prior: AbnormalityPrior,
    pub walk: bool,
    pub zero_noise: bool,
    /// Gateway histogram samples and bins.
    pub samples: usize,
    pub bins: usize,
    pub d1: f64,
}

impl Default for Config {
    fn default() -> Self {
        let p = DiffusionParams::default();
        Config {
            preset: Preset::Custom,
            strategy: None,
            channel: Channel::Ideal,
            l: None,
            molecules: None,
            alpha: None,
            dfg_over_w: None,
            trials: 20_000,
            seed: 1,
            k: p.k,
            w: 1e-2,
            d: p.d,
            d2: p.d2,
            v_f: p.v_f,
            v_g: p.v_g,
            sampling: SamplingModel::Auto,
            prior: AbnormalityPrior::IndicatorPoints,
            walk: false,
            zero_noise: false,
            samples: 100_000,
            bins: 60,
            d1: 8.3e-4,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean '{value}' for '{key}'"
        ))),
    }
}

impl Config {
    /// Sets one key. Keys and units match the config file format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => self.preset = value.parse()?,
            "strategy" => self.strategy = Some(parse_strategy(value)?),
            "channel" => self.channel = parse_channel(value)?,
            "L" => self.l = Some(parse_num(key, value)?),
            "molecules" => self.molecules = Some(parse_num(key, value)?),
            "alpha" => self.alpha = Some(parse_num(key, value)?),
            "dfg" => self.dfg_over_w = Some(parse_num(key, value)?),
            "trials" => self.trials = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "K" => self.k = parse_num(key, value)?,
            "w" => self.w = parse_num(key, value)?,
            "D" => self.d = parse_num(key, value)?,
            "D2" => self.d2 = parse_num(key, value)?,
            "V_F" => self.v_f = parse_num(key, value)?,
            "V_G" => self.v_g = parse_num(key, value)?,
            "sampling" => {
                self.sampling = match value {
                    "binomial" => SamplingModel::Binomial,
                    "gaussian" => SamplingModel::Gaussian,
                    "auto" => SamplingModel::Auto,
                    _ => return Err(Error::Config(format!("invalid sampling model '{value}'"))),
                }
            }
            "prior" => {
                self.prior = match value {
                    "ip" => AbnormalityPrior::IndicatorPoints,
                    "area" => AbnormalityPrior::UniformArea,
                    _ => {
                        return Err(Error::Config(format!(
                            "prior must be ip or area, got '{value}'"
                        )))
                    }
                }
            }
            "release" => {
                self.walk = match value {
                    "direct" => false,
                    "walk" => true,
                    _ => {
                        return Err(Error::Config(format!(
                            "release must be direct or walk, got '{value}'"
                        )))
                    }
                }
            }
            "zero_noise" => self.zero_noise = parse_bool(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "bins" => self.bins = parse_num(key, value)?,
            "d1" => self.d1 = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Rejects values no run can use and overrides of a preset's swept
    /// variable.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.samples == 0 || self.bins == 0 {
            return Err(Error::Config("samples and bins must be >= 1".into()));
        }
        if matches!(self.l, Some(0)) {
            return Err(Error::Config("L must be >= 1".into()));
        }
        if matches!(self.alpha, Some(0)) {
            return Err(Error::Config("alpha must be >= 1".into()));
        }
        if let Some(f) = self.dfg_over_w {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::Config("dfg must be positive".into()));
            }
        }
        let swept: &[(&str, bool)] = match self.preset {
            Preset::Fig3 => &[("L", self.l.is_some())],
            Preset::Fig4 => &[("molecules", self.molecules.is_some())],
            Preset::Fig5 => &[
                ("alpha", self.alpha.is_some()),
                ("dfg", self.dfg_over_w.is_some()),
            ],
            Preset::Fig6 => &[("alpha", self.alpha.is_some())],
            Preset::Custom => &[],
        };
        if let Some((name, _)) = swept.iter().find(|(_, set)| *set) {
            return Err(Error::Config(format!(
                "preset {} sweeps '{name}'; it cannot be overridden",
                self.preset.name()
            )));
        }
        self.params(1e6, 1)?.validate()?;
        Arena::new(self.w, self.w)?;
        Ok(())
    }

    fn params(&self, molecules: f64, alpha: u64) -> Result<DiffusionParams> {
        let p = DiffusionParams {
            d: self.d,
            d2: self.d2,
            v_f: self.v_f,
            v_g: self.v_g,
            k: self.k,
            molecules,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    fn strategies(&self) -> Vec<Strategy> {
        match self.strategy {
            Some(s) => vec![s],
            None => vec![Strategy::Collaborative, Strategy::NonCollaborative],
        }
    }

    /// `key = value` listing of every resolved setting, readable back with
    /// [`Config::apply_text`]. Unset sweep variables appear as comments.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: Option<String>| {
            let _ = match v {
                Some(v) => writeln!(s, "{k} = {v}"),
                None => writeln!(s, "# {k} = (preset default)"),
            };
        };
        kv("preset", Some(self.preset.name().into()));
        kv("strategy", self.strategy.map(|s| strategy_name(s).into()));
        kv("channel", Some(channel_name(self.channel).into()));
        kv("L", self.l.map(|v| v.to_string()));
        kv("molecules", self.molecules.map(|v| format!("{v:e}")));
        kv("alpha", self.alpha.map(|v| v.to_string()));
        kv("dfg", self.dfg_over_w.map(|v| v.to_string()));
        let mut kv = |k: &str, v: String| kv(k, Some(v));
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        kv("K", self.k.to_string());
        kv("w", format!("{:e}", self.w));
        kv("D", format!("{:e}", self.d));
        kv("D2", format!("{:e}", self.d2));
        kv("V_F", format!("{:e}", self.v_f));
        kv("V_G", format!("{:e}", self.v_g));
        kv("sampling", sampling_name(self.sampling).into());
        kv(
            "prior",
            match self.prior {
                AbnormalityPrior::IndicatorPoints => "ip",
                AbnormalityPrior::UniformArea => "area",
            }
            .into(),
        );
        kv("release", if self.walk { "walk" } else { "direct" }.into());
        kv("zero_noise", self.zero_noise.to_string());
        kv("samples", self.samples.to_string());
        kv("bins", self.bins.to_string());
        kv("d1", format!("{:e}", self.d1));
        s
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub strategy: Strategy,
    pub channel: Channel,
    pub l: usize,
    pub molecules: f64,
    pub alpha: u64,
    pub dfg_over_w: f64,
}

/// Sweep points of a preset, in output order.
pub fn sweep_points(cfg: &Config) -> Vec<SweepPoint> {
    let point = |strategy, channel, l, molecules, alpha, dfg_over_w| SweepPoint {
        strategy,
        channel,
        l,
        molecules,
        alpha,
        dfg_over_w,
    };
    let alpha = cfg.alpha.unwrap_or(1_000);
    let dfg = cfg.dfg_over_w.unwrap_or(5.0);
    let mut out = Vec::new();
    match cfg.preset {
        Preset::Fig3 => {
            let molecules = cfg
                .molecules
                .map_or_else(|| vec![1e6, 2e6, 3e6], |m| vec![m]);
            for s in cfg.strategies() {
                for &m in &molecules {
                    for l in 2..=8 {
                        out.push(point(s, Channel::Ideal, l, m, alpha, dfg));
                    }
                }
            }
        }
        Preset::Fig4 => {
            let ls = cfg.l.map_or_else(|| vec![4, 6, 8], |l| vec![l]);
            for s in cfg.strategies() {
                for &l in &ls {
                    for m in [5e5, 1e6, 1.5e6, 2e6, 2.5e6, 3e6] {
                        out.push(point(s, Channel::Ideal, l, m, alpha, dfg));
                    }
                }
            }
        }
        Preset::Fig5 => {
            let l = cfg.l.unwrap_or(8);
            let m = cfg.molecules.unwrap_or(1e8);
            for s in cfg.strategies() {
                for f in [3.0, 5.0, 7.0] {
                    for a in [100, 300, 1_000, 3_000, 10_000] {
                        out.push(point(s, Channel::Noisy, l, m, a, f));
                    }
                }
            }
        }
        Preset::Fig6 => {}
        Preset::Custom => {
            for s in cfg.strategies() {
                out.push(point(
                    s,
                    cfg.channel,
                    cfg.l.unwrap_or(3),
                    cfg.molecules.unwrap_or(1e6),
                    alpha,
                    dfg,
                ));
            }
        }
    }
    out
}

/// Seed of the `i`-th sweep point, distinct per point.
fn point_seed(master: u64, i: usize) -> u64 {
    master.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn plan_for(cfg: &Config, p: &SweepPoint, seed: u64) -> Result<TrialPlan> {
    let arena = Arena::new(cfg.w, p.dfg_over_w * cfg.w)?;
    let params = cfg.params(p.molecules, p.alpha)?;
    let mut plan = TrialPlan::new(p.strategy, p.l, cfg.trials, seed);
    plan.channel = p.channel;
    plan.sampling = cfg.sampling;
    plan.arena = arena;
    plan.params = params;
    plan.prior = cfg.prior;
    plan.zero_noise = cfg.zero_noise;
    if cfg.walk {
        plan.release = ReleaseMode::Walk(SensorParams::defaults(&arena, &params));
    }
    Ok(plan)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Sweep CSV for `cfg`, header included.
pub fn sweep_csv(cfg: &Config) -> Result<String> {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for (i, p) in sweep_points(cfg).iter().enumerate() {
        let seed = point_seed(cfg.seed, i);
        let plan = plan_for(cfg, p, seed)?;
        let (report, sim) = evaluate(&plan)?;
        let e = report.empirical.expect("evaluate fills the empirical part");
        let w = cfg.w;
        let fields = [
            cfg.preset.name().to_string(),
            strategy_name(p.strategy).into(),
            channel_name(p.channel).into(),
            p.l.to_string(),
            format!("{:e}", (w / p.l as f64).powi(-2)),
            format!("{:e}", p.molecules),
            format!("{:e}", p.molecules * cfg.k as f64),
            cfg.k.to_string(),
            p.alpha.to_string(),
            p.dfg_over_w.to_string(),
            format!("{w:e}"),
            format!("{:e}", cfg.d),
            format!("{:e}", cfg.d2),
            format!("{:e}", cfg.v_f),
            format!("{:e}", cfg.v_g),
            cfg.trials.to_string(),
            seed.to_string(),
            fmt_opt(report.analytic),
            format!("{:e}", e.p()),
            format!("{:e}", e.half_width()),
            fmt_opt(sim.unsnapped.map(|u| u.p())),
            report.lemma2_ok.map_or_else(String::new, |b| b.to_string()),
        ];
        debug_assert_eq!(fields.len(), SWEEP_COLUMNS.len());
        out.push_str(&fields.join(","));
        out.push('\n');
        log::info!("{}", report);
    }
    Ok(out)
}

/// Gateway-count histogram CSV for both amplification factors.
pub fn histogram_csv(cfg: &Config) -> Result<String> {
    let mut out = HISTOGRAM_COLUMNS.join(",");
    out.push('\n');
    let dfg = cfg.dfg_over_w.unwrap_or(5.0);
    let arena = Arena::new(cfg.w, dfg * cfg.w)?;
    let molecules = cfg.molecules.unwrap_or(1e6);
    for (i, alpha) in [1_000u64, 10_000].into_iter().enumerate() {
        let params = cfg.params(molecules, alpha)?;
        let seed = point_seed(cfg.seed, i);
        let w = gateway_samples(cfg.d1, &arena, &params, cfg.samples, seed, cfg.sampling)?;
        let m = mean_value_density_mean(cfg.d1, &arena, &params)?;
        // Six standard deviations of the approximation either side.
        let lo = (m - 6.0 * m.sqrt()).max(0.0).floor();
        let hi = (m + 6.0 * m.sqrt()).ceil() + 1.0;
        let bins = cfg.bins;
        let width = (hi - lo) / bins as f64;
        let counts = histogram(&w, lo, hi, bins);
        for (b, c) in counts.iter().enumerate() {
            let centre = lo + (b as f64 + 0.5) * width;
            let fields = [
                alpha.to_string(),
                format!("{:e}", cfg.d1),
                dfg.to_string(),
                format!("{molecules:e}"),
                cfg.samples.to_string(),
                seed.to_string(),
                format!("{centre:e}"),
                format!("{:e}", *c as f64 / (cfg.samples as f64 * width)),
                format!("{:e}", normal_equal_variance_pdf(centre, m)),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}

/// Writes `contents` to `path` through a temporary sibling file, removing
/// the temporary on failure.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs the configured preset and writes its CSV and manifest into `out`.
/// Returns the CSV path.
pub fn run(cfg: &Config, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let csv = match cfg.preset {
        Preset::Fig6 => histogram_csv(cfg)?,
        _ => sweep_csv(cfg)?,
    };
    let name = cfg.preset.name();
    let csv_path = out.join(format!("{name}.csv"));
    let manifest_path = out.join(format!("{name}.manifest"));
    let manifest = format!(
        "# {} {}\n{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    );
    write_atomic(&csv_path, &csv)?;
    if let Err(e) = write_atomic(&manifest_path, &manifest) {
        let _ = fs::remove_file(&csv_path);
        return Err(e);
    }
    Ok(csv_path)
}
