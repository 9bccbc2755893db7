//! Partitions of the observing area into decision clusters.
//!
//! Radial clusters are cells of the `(d1, d2)` distance plane, with
//! intervals `[j w/L, (j+1) w/L)` measured from FC1 and FC2. Grid clusters
//! are the `L x L` square cells of the area.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::medium::{Arena, FusionCenter, Point};

pub const DEFAULT_RASTER: usize = 1000;

/// Closed-left interval index of `value` on a grid of step `w / l`.
fn interval_index(value: f64, w: f64, l: usize) -> usize {
    let u = value * l as f64 / w;
    // Values that land on a boundary up to rounding belong to the upper cell.
    (u + 1e-9).floor().max(0.0) as usize
}

/// A radial cluster: the pair of distance-interval indices w.r.t. FC1/FC2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RadialCell {
    pub j1: usize,
    pub j2: usize,
}

impl fmt::Display for RadialCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r({},{})", self.j1, self.j2)
    }
}

/// Prior over the radial hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadialPrior {
    /// `1 / N_p` for every member of the hypothesis set.
    #[default]
    Uniform,
    /// Proportional to the cluster area.
    AreaWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialScheme {
    l: usize,
    w: f64,
    psi: Vec<RadialCell>,
    /// Raster pixels falling in each member of `psi`.
    areas: Vec<usize>,
    ladder1: Vec<usize>,
    ladder2: Vec<usize>,
}

/// Indicator point of the radial cell with radii `r1` (from FC1 at `[w,0]`)
/// and `r2` (from FC2 at the origin), if the two circles meet inside the area.
pub fn radial_indicator_point(r1: f64, r2: f64, w: f64) -> Option<Point> {
    let tol = 1e-9 * w;
    let x = (r2 * r2 - r1 * r1 + w * w) / (2.0 * w);
    let y2 = r2 * r2 - x * x;
    if y2 < -tol * w || x < -tol || x > w + tol {
        return None;
    }
    let y = y2.max(0.0).sqrt();
    if y > w + tol {
        return None;
    }
    Some(Point::new(x.clamp(0.0, w), y.min(w)))
}

impl RadialScheme {
    pub fn build(arena: &Arena, l: usize) -> Result<Self> {
        Self::build_with_raster(arena, l, DEFAULT_RASTER)
    }

    /// Enumerates the non-empty `(j1, j2)` cells by rasterizing the area at
    /// `raster x raster` pixel centers and keeps those whose indicator point
    /// exists inside the area.
    pub fn build_with_raster(arena: &Arena, l: usize, raster: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::param("L", format!("need L >= 2, got {l}")));
        }
        if raster < 1 {
            return Err(Error::param("raster", "resolution must be >= 1"));
        }
        let w = arena.w();
        let fc1 = arena.fc_position(FusionCenter::Fc1);
        let fc2 = arena.fc_position(FusionCenter::Fc2);
        let mut cells: BTreeMap<RadialCell, usize> = BTreeMap::new();
        let step = w / raster as f64;
        for a in 0..raster {
            for b in 0..raster {
                let p = Point::new((a as f64 + 0.5) * step, (b as f64 + 0.5) * step);
                let cell = RadialCell {
                    j1: interval_index(p.distance(&fc1), w, l),
                    j2: interval_index(p.distance(&fc2), w, l),
                };
                *cells.entry(cell).or_default() += 1;
            }
        }
        let (psi, areas): (Vec<_>, Vec<_>) = cells
            .into_iter()
            .filter(|(c, _)| {
                let r1 = (c.j1 as f64 + 0.5) * w / l as f64;
                let r2 = (c.j2 as f64 + 0.5) * w / l as f64;
                radial_indicator_point(r1, r2, w).is_some()
            })
            .unzip();
        if psi.is_empty() {
            return Err(Error::Degenerate(
                "radial scheme has no feasible cluster".into(),
            ));
        }
        Ok(Self::assemble(l, w, psi, areas))
    }

    /// Scheme restricted to an explicit set of cells, each of which must
    /// have its indicator point inside the area.
    pub fn from_cells(arena: &Arena, l: usize, cells: &[RadialCell]) -> Result<Self> {
        if l < 2 {
            return Err(Error::param("L", format!("need L >= 2, got {l}")));
        }
        let w = arena.w();
        let mut psi = cells.to_vec();
        psi.sort_unstable();
        psi.dedup();
        if psi.is_empty() {
            return Err(Error::Degenerate("radial scheme has no cluster".into()));
        }
        for c in &psi {
            let r = |j: usize| (j as f64 + 0.5) * w / l as f64;
            if radial_indicator_point(r(c.j1), r(c.j2), w).is_none() {
                return Err(Error::Degenerate(format!(
                    "cell {c} has no indicator point in the area"
                )));
            }
        }
        let areas = vec![1; psi.len()];
        Ok(Self::assemble(l, w, psi, areas))
    }

    fn assemble(l: usize, w: f64, psi: Vec<RadialCell>, areas: Vec<usize>) -> Self {
        let ladder = |pick: fn(&RadialCell) -> usize| {
            let mut v: Vec<usize> = psi.iter().map(pick).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let ladder1 = ladder(|c| c.j1);
        let ladder2 = ladder(|c| c.j2);
        RadialScheme {
            l,
            w,
            psi,
            areas,
            ladder1,
            ladder2,
        }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// The hypothesis set, sorted by `(j1, j2)`.
    pub fn psi(&self) -> &[RadialCell] {
        &self.psi
    }

    pub fn n_p(&self) -> usize {
        self.psi.len()
    }

    pub fn radius(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.w / self.l as f64
    }

    /// Interval indices (ascending) that the given fusion center can decide.
    pub fn ladder(&self, fc: FusionCenter) -> &[usize] {
        match fc {
            FusionCenter::Fc1 => &self.ladder1,
            FusionCenter::Fc2 => &self.ladder2,
            FusionCenter::Fc3 => &[],
        }
    }

    /// Distinct IP radii in ascending order.
    pub fn radii(&self) -> Vec<f64> {
        let mut all: Vec<usize> = self.ladder1.iter().chain(&self.ladder2).copied().collect();
        all.sort_unstable();
        all.dedup();
        all.into_iter().map(|j| self.radius(j)).collect()
    }

    pub fn contains(&self, cell: &RadialCell) -> bool {
        self.psi.binary_search(cell).is_ok()
    }

    pub fn index_of(&self, cell: &RadialCell) -> Option<usize> {
        self.psi.binary_search(cell).ok()
    }

    pub fn indicator_point(&self, cell: &RadialCell) -> Option<Point> {
        radial_indicator_point(self.radius(cell.j1), self.radius(cell.j2), self.w)
    }

    pub fn prior(&self, kind: RadialPrior) -> Vec<f64> {
        match kind {
            RadialPrior::Uniform => vec![1.0 / self.psi.len() as f64; self.psi.len()],
            RadialPrior::AreaWeighted => {
                let total: usize = self.areas.iter().sum();
                self.areas
                    .iter()
                    .map(|&a| a as f64 / total as f64)
                    .collect()
            }
        }
    }

    /// Member of the hypothesis set closest to `cell` in the `(d1, d2)`
    /// plane. Ties go to the smaller radii.
    pub fn snap(&self, cell: RadialCell) -> RadialCell {
        if self.contains(&cell) {
            return cell;
        }
        let key = |c: &RadialCell| {
            let dj1 = c.j1 as i64 - cell.j1 as i64;
            let dj2 = c.j2 as i64 - cell.j2 as i64;
            (dj1 * dj1 + dj2 * dj2, c.j1 + c.j2, c.j1)
        };
        *self
            .psi
            .iter()
            .min_by_key(|c| key(c))
            .expect("psi is non-empty")
    }

    pub fn locate(&self, arena: &Arena, p: &Point) -> Result<RadialCell> {
        if !arena.contains(p) {
            return Err(Error::OutsideArea { x: p.x, y: p.y });
        }
        Ok(RadialCell {
            j1: interval_index(arena.distance_to(FusionCenter::Fc1, p), self.w, self.l),
            j2: interval_index(arena.distance_to(FusionCenter::Fc2, p), self.w, self.l),
        })
    }
}

/// A grid cluster with 1-based indices along x and y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCell {
    pub ix: usize,
    pub iy: usize,
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g({},{})", self.ix, self.iy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScheme {
    l: usize,
    w: f64,
}

impl GridScheme {
    pub fn build(arena: &Arena, l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::param("L", format!("need L >= 2, got {l}")));
        }
        Ok(GridScheme { l, w: arena.w() })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// IP coordinate along one axis for 1-based index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - 0.5) * self.w / self.l as f64
    }

    /// `s L / w + 1/2`; an integer exactly at IP coordinates.
    pub fn index_of_coordinate(&self, s: f64) -> f64 {
        s * self.l as f64 / self.w + 0.5
    }

    pub fn indicator_point(&self, cell: GridCell) -> Point {
        Point::new(self.coordinate(cell.ix), self.coordinate(cell.iy))
    }

    /// All cells, x-major.
    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (1..=self.l).flat_map(move |ix| (1..=self.l).map(move |iy| GridCell { ix, iy }))
    }

    pub fn n_cells(&self) -> usize {
        self.l * self.l
    }

    pub fn cell_index(&self, cell: GridCell) -> usize {
        (cell.ix - 1) * self.l + (cell.iy - 1)
    }

    pub fn locate(&self, arena: &Arena, p: &Point) -> Result<GridCell> {
        if !arena.contains(p) {
            return Err(Error::OutsideArea { x: p.x, y: p.y });
        }
        let axis = |s: f64| interval_index(s, self.w, self.l).min(self.l - 1) + 1;
        Ok(GridCell {
            ix: axis(p.x),
            iy: axis(p.y),
        })
    }
}
