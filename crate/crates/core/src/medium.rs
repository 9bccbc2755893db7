//! Observing-area geometry and the diffusion channel.
//!
//! Both links (sensors to fusion centers, fusion centers to gateway) use the
//! free-space point-release solution of the diffusion equation observed by a
//! small transparent receiver of fixed volume.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Fusion centers, each sitting on a vertex of the observing area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionCenter {
    /// At `[w, 0]`.
    Fc1,
    /// At the origin.
    Fc2,
    /// At `[0, w]`.
    Fc3,
}

impl FusionCenter {
    pub const ALL: [FusionCenter; 3] = [FusionCenter::Fc1, FusionCenter::Fc2, FusionCenter::Fc3];
}

/// The square `w x w` observing area, its fusion centers and the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    w: f64,
    d_fg: f64,
    dims: u32,
}

impl Arena {
    pub fn new(w: f64, d_fg: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param("w", format!("must be positive, got {w}")));
        }
        if !(d_fg > 0.0 && d_fg.is_finite()) {
            return Err(Error::param(
                "d_fg",
                format!("must be positive, got {d_fg}"),
            ));
        }
        Ok(Arena { w, d_fg, dims: 2 })
    }

    /// Width `1e-2` m with the gateway five widths away from every FC.
    pub fn table_default() -> Self {
        Arena {
            w: 1e-2,
            d_fg: 5e-2,
            dims: 2,
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Common fusion-center to gateway distance.
    pub fn d_fg(&self) -> f64 {
        self.d_fg
    }

    pub fn dims(&self) -> u32 {
        self.dims
    }

    pub fn with_d_fg(mut self, d_fg: f64) -> Result<Self> {
        if !(d_fg > 0.0 && d_fg.is_finite()) {
            return Err(Error::param(
                "d_fg",
                format!("must be positive, got {d_fg}"),
            ));
        }
        self.d_fg = d_fg;
        Ok(self)
    }

    pub fn fc_position(&self, fc: FusionCenter) -> Point {
        match fc {
            FusionCenter::Fc1 => Point::new(self.w, 0.0),
            FusionCenter::Fc2 => Point::new(0.0, 0.0),
            FusionCenter::Fc3 => Point::new(0.0, self.w),
        }
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * self.w, 0.5 * self.w)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.w).contains(&p.x) && (0.0..=self.w).contains(&p.y)
    }

    pub fn distance_to(&self, fc: FusionCenter, p: &Point) -> f64 {
        self.fc_position(fc).distance(p)
    }

    /// Sampling delay used by every fusion center: the concentration peak
    /// time for a release at the center of the area, `w^2 / (4 N D)`.
    pub fn sampling_time(&self, params: &DiffusionParams) -> f64 {
        self.w * self.w / (4.0 * self.dims as f64 * params.d)
    }

    /// Gateway sampling delay, the peak time of the marker concentration at
    /// distance `d_fg`.
    pub fn gateway_sampling_time(&self, params: &DiffusionParams) -> f64 {
        self.d_fg * self.d_fg / (2.0 * self.dims as f64 * params.d2)
    }
}

/// Diffusion and receiver parameters of both links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    /// Diffusion coefficient of the sensor molecules (m^2/s).
    pub d: f64,
    /// Diffusion coefficient of the fusion-center markers (m^2/s).
    pub d2: f64,
    /// Fusion-center receiver volume.
    pub v_f: f64,
    /// Gateway receiver volume.
    pub v_g: f64,
    /// Independent samples per fusion center (molecule types).
    pub k: usize,
    /// Molecules of each type released by the activated sensors, `N_th * M`.
    pub molecules: f64,
    /// Amplification factor at the fusion centers.
    pub alpha: u64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            d: 1e-9,
            d2: 1e-10,
            v_f: 1.11e-7,
            v_g: 1.78e-6,
            k: 2,
            molecules: 1e6,
            alpha: 1_000,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("d2", self.d2),
            ("v_f", self.v_f),
            ("v_g", self.v_g),
            ("molecules", self.molecules),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.k < 1 {
            return Err(Error::param(
                "k",
                "need at least one sample per fusion center",
            ));
        }
        if self.alpha < 1 {
            return Err(Error::param("alpha", "amplification factor must be >= 1"));
        }
        Ok(())
    }
}

/// Probability that a molecule released at distance `d` sits inside a
/// receiver of the given volume `t_obs` seconds later, clipped to `[0, 1]`.
pub fn hit_probability(d: f64, t_obs: f64, volume: f64, diff_coeff: f64, dims: u32) -> Result<f64> {
    if !(t_obs > 0.0) {
        return Err(Error::param(
            "t_obs",
            format!("must be positive, got {t_obs}"),
        ));
    }
    if !(d >= 0.0) {
        return Err(Error::param("d", format!("must be >= 0, got {d}")));
    }
    let spread = 4.0 * diff_coeff * t_obs;
    let p = volume / (PI * spread).powf(0.5 * dims as f64) * (-d * d / spread).exp();
    if p > 1.0 {
        log::warn!("hit probability {p:.4} exceeds 1 (d={d}, t={t_obs}); clipped");
        return Ok(1.0);
    }
    Ok(p)
}

/// Time at which the concentration at distance `d` peaks, `d^2 / (2 N D)`.
pub fn peak_time(d: f64, diff_coeff: f64, dims: u32) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::param("d", format!("must be positive, got {d}")));
    }
    Ok(d * d / (2.0 * dims as f64 * diff_coeff))
}

/// Mean count `m(d)` observed by a fusion center at distance `d` from the
/// release point when `released` molecules of one type are emitted.
pub fn mean_count(d: f64, arena: &Arena, params: &DiffusionParams, released: f64) -> Result<f64> {
    if released == 0.0 {
        return Ok(0.0);
    }
    let t = arena.sampling_time(params);
    Ok(released * hit_probability(d, t, params.v_f, params.d, arena.dims())?)
}

/// Per-marker hit probability on the fusion-center to gateway link.
pub fn marker_hit_probability(arena: &Arena, params: &DiffusionParams) -> f64 {
    let t = arena.gateway_sampling_time(params);
    // t > 0 is guaranteed by the Arena and DiffusionParams invariants.
    hit_probability(arena.d_fg(), t, params.v_g, params.d2, arena.dims()).unwrap_or(0.0)
}

/// End-to-end gain `alpha * mu~` mapping a fusion-center count onto the mean
/// gateway count.
pub fn gateway_gain(arena: &Arena, params: &DiffusionParams) -> f64 {
    params.alpha as f64 * marker_hit_probability(arena, params)
}

/// Mean gateway marker count given that the fusion center observed
/// `y_observed` molecules.
pub fn marker_mean_count(y_observed: f64, arena: &Arena, params: &DiffusionParams) -> f64 {
    y_observed * gateway_gain(arena, params)
}

/// Distance-to-mean map `d -> m(d)` used by the decision rules.
///
/// `gain` is 1 for the ideal fusion-center link and `alpha * mu~` under the
/// mean-value approximation of the noisy link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanModel {
    scale: f64,
    inv_spread: f64,
}

impl MeanModel {
    pub fn ideal(arena: &Arena, params: &DiffusionParams, released: f64) -> Result<Self> {
        Self::with_gain(arena, params, released, 1.0)
    }

    /// Mean gateway counts under the mean-value approximation.
    pub fn noisy(arena: &Arena, params: &DiffusionParams, released: f64) -> Result<Self> {
        Self::with_gain(arena, params, released, gateway_gain(arena, params))
    }

    pub fn with_gain(
        arena: &Arena,
        params: &DiffusionParams,
        released: f64,
        gain: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(released >= 0.0) {
            return Err(Error::param("released", "must be >= 0"));
        }
        let peak = gain * mean_count(0.0, arena, params, released)?;
        let t = arena.sampling_time(params);
        Ok(MeanModel {
            scale: peak,
            inv_spread: 1.0 / (4.0 * params.d * t),
        })
    }

    pub fn mean(&self, d: f64) -> f64 {
        self.scale * (-d * d * self.inv_spread).exp()
    }

    pub fn as_fn(&self) -> impl Fn(f64) -> f64 + Copy + '_ {
        move |d| self.mean(d)
    }
}
