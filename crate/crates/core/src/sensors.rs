//! Sensor random walks up to the moment the stored molecules are released.
//!
//! Sensors are injected at the center of the area and diffuse as independent
//! Gaussian random walks, mirrored back at the boundary. A sensor that comes
//! within the capture radius of the abnormality activates and stops.
//! Collaborative sensors release once a quorum has activated; non-collaborative
//! sensors release at a fixed timeout with however many have activated by
//! then. Releases happen at the next slot boundary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::medium::{Arena, DiffusionParams, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Release as soon as a quorum of sensors has activated.
    Collaborative,
    /// Release at a fixed timeout, whatever the number of activations.
    NonCollaborative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// Number of injected sensors.
    pub n_sensors: usize,
    /// Sensor diffusion coefficient (m^2/s).
    pub diffusion: f64,
    /// Walk time step (s).
    pub dt: f64,
    pub capture_radius: f64,
    /// Slot duration (s).
    pub slot: f64,
    /// Activations needed before collaborative sensors release.
    pub quorum: usize,
    /// Non-collaborative walking time (s), a multiple of `dt`.
    pub timeout: f64,
    /// Molecules of each type stored per sensor.
    pub molecules_per_sensor: f64,
    /// Collaborative runs fail if no quorum forms within this time (s).
    pub max_horizon: f64,
}

impl SensorParams {
    /// Defaults tied to the channel: sensors diffuse like the molecules, a
    /// slot lasts twice the sampling time, 100 steps per slot and a capture
    /// radius of `w / 200`. The quorum times the per-sensor load equals the
    /// channel's released molecule count.
    pub fn defaults(arena: &Arena, params: &DiffusionParams) -> Self {
        let slot = 2.0 * arena.sampling_time(params);
        let quorum = 10;
        SensorParams {
            n_sensors: 100,
            diffusion: params.d,
            dt: slot / 100.0,
            capture_radius: arena.w() / 200.0,
            slot,
            quorum,
            timeout: 20.0 * slot,
            molecules_per_sensor: params.molecules / quorum as f64,
            max_horizon: 1000.0 * slot,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("diffusion", self.diffusion),
            ("dt", self.dt),
            ("capture_radius", self.capture_radius),
            ("slot", self.slot),
            ("timeout", self.timeout),
            ("max_horizon", self.max_horizon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.molecules_per_sensor >= 0.0) {
            return Err(Error::param("molecules_per_sensor", "must be >= 0"));
        }
        if self.n_sensors == 0 {
            return Err(Error::param("n_sensors", "need at least one sensor"));
        }
        if self.quorum == 0 || self.quorum > self.n_sensors {
            return Err(Error::param(
                "quorum",
                format!("must be in 1..={}, got {}", self.n_sensors, self.quorum),
            ));
        }
        let steps = self.timeout / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::param(
                "timeout",
                "must be a whole number of walk steps",
            ));
        }
        Ok(())
    }

    fn timeout_steps(&self) -> u64 {
        (self.timeout / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseEvent {
    /// Slot boundary at which the molecules enter the medium (s).
    pub release_time: f64,
    /// Number of activated sensors that release.
    pub n_released: usize,
    pub location: Point,
}

impl ReleaseEvent {
    /// Molecules of each type entering the medium.
    pub fn molecules(&self, params: &SensorParams) -> f64 {
        self.n_released as f64 * params.molecules_per_sensor
    }
}

/// First slot boundary `nT` with `(n - 1) T < t <= nT`, and never before the
/// first slot ends.
pub fn next_slot_boundary(t: f64, slot: f64) -> f64 {
    let n = (t / slot).ceil().max(1.0);
    n * slot
}

/// Mirrors a coordinate back into `[0, w]`, folding as often as needed.
pub fn reflect(x: f64, w: f64) -> f64 {
    let period = 2.0 * w;
    let r = x.rem_euclid(period);
    if r > w {
        period - r
    } else {
        r
    }
}

struct Walkers {
    pos: Vec<Point>,
    active: Vec<bool>,
    activated: usize,
}

impl Walkers {
    fn new(n: usize, start: Point) -> Self {
        Walkers {
            pos: vec![start; n],
            active: vec![false; n],
            activated: 0,
        }
    }

    fn capture(&mut self, target: &Point, radius: f64) {
        for (p, a) in self.pos.iter().zip(self.active.iter_mut()) {
            if !*a && p.distance(target) <= radius {
                *a = true;
                self.activated += 1;
            }
        }
    }

    fn step(&mut self, step: &Normal<f64>, w: f64, rng: &mut ChaCha8Rng) {
        for (p, a) in self.pos.iter_mut().zip(&self.active) {
            if !*a {
                p.x = reflect(p.x + step.sample(rng), w);
                p.y = reflect(p.y + step.sample(rng), w);
            }
        }
    }
}

/// Simulates the sensor walks until the molecules are released.
pub fn walk_until_release(
    params: &SensorParams,
    arena: &Arena,
    abnormality: Point,
    strategy: Strategy,
    seed: u64,
) -> Result<ReleaseEvent> {
    params.validate()?;
    if !arena.contains(&abnormality) {
        return Err(Error::OutsideArea {
            x: abnormality.x,
            y: abnormality.y,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, (2.0 * params.diffusion * params.dt).sqrt())
        .map_err(|e| Error::param("dt", e.to_string()))?;
    let mut walkers = Walkers::new(params.n_sensors, arena.center());
    let w = arena.w();
    walkers.capture(&abnormality, params.capture_radius);
    match strategy {
        Strategy::Collaborative => {
            let max_steps = (params.max_horizon / params.dt).ceil() as u64;
            let mut n = 0u64;
            while walkers.activated < params.quorum {
                if n >= max_steps {
                    return Err(Error::QuorumTimeout {
                        needed: params.quorum,
                        horizon: params.max_horizon,
                    });
                }
                walkers.step(&step, w, &mut rng);
                n += 1;
                walkers.capture(&abnormality, params.capture_radius);
            }
            let trigger = n as f64 * params.dt;
            Ok(ReleaseEvent {
                release_time: next_slot_boundary(trigger, params.slot),
                n_released: params.quorum,
                location: abnormality,
            })
        }
        Strategy::NonCollaborative => {
            for _ in 0..params.timeout_steps() {
                walkers.step(&step, w, &mut rng);
                walkers.capture(&abnormality, params.capture_radius);
            }
            Ok(ReleaseEvent {
                release_time: next_slot_boundary(params.timeout, params.slot),
                n_released: walkers.activated,
                location: abnormality,
            })
        }
    }
}

/// Non-collaborative release conditioned on exactly `quorum` activations,
/// for like-for-like comparison with the collaborative strategy. Runs with
/// other counts are rejected; seeds are drawn from `seed` onwards.
pub fn walk_conditioned_on_quorum(
    params: &SensorParams,
    arena: &Arena,
    abnormality: Point,
    seed: u64,
    max_attempts: u64,
) -> Result<ReleaseEvent> {
    for attempt in 0..max_attempts {
        let event = walk_until_release(
            params,
            arena,
            abnormality,
            Strategy::NonCollaborative,
            seed.wrapping_add(attempt),
        )?;
        if event.n_released == params.quorum {
            return Ok(event);
        }
    }
    Err(Error::Degenerate(format!(
        "no run out of {max_attempts} activated exactly {} sensors",
        params.quorum
    )))
}
