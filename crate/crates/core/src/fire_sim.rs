//! Stochastic cellular wildfire propagation.
//!
//! Each cell carries a fuel amount and a burning flag. One fire step burns
//! `beta` fuel from every burning cell (extinguishing it when the fuel runs
//! out) and lets every fueled, non-burning cell ignite with probability
//!
//! ```text
//! p(s) = 1 - prod_{s'} (1 - P(s, s') * B(s'))
//! ```
//!
//! where `P(s, s') = clamp(alpha * w(s, s') / d(s, s')^2, 0, 1)` for sources
//! within a Chebyshev radius of `max_offset` cells and zero beyond it. The
//! update is synchronous: every probability is evaluated on the time-t grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer cell coordinates; `x` grows east, `y` grows north.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FireGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    fuel: Vec<f64>,
    burning: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationParams {
    /// Fuel consumed by a burning cell per fire step.
    pub beta: f64,
    /// Ignition proportionality constant in `P = alpha / d^2`.
    pub alpha: f64,
    /// Chebyshev radius (cells) beyond which a burning cell cannot ignite another.
    pub max_offset: usize,
    /// Seconds of simulated time per fire step.
    pub step_duration: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            beta: 1.0,
            alpha: 0.09,
            max_offset: 2,
            step_duration: 2.5,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::arg(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.step_duration > 0.0) {
            return Err(Error::arg("step_duration must be positive"));
        }
        Ok(())
    }
}

/// Directional spread bias. `direction` is the bearing (radians, counterclockwise
/// from east) the wind blows toward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wind {
    pub direction: f64,
    pub strength: f64,
}

impl Wind {
    pub const fn calm() -> Self {
        Wind {
            direction: 0.0,
            strength: 0.0,
        }
    }

    /// Multiplicative bias for spread along `bearing`; never negative.
    pub fn bias(&self, bearing: f64) -> f64 {
        (1.0 + self.strength * (bearing - self.direction).cos()).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedPattern {
    /// Every cell within `radius` cells (Euclidean, center to center).
    Circular { center: Cell, radius: f64 },
    /// Center cell plus arms of `arm` cells to the west, north and south.
    TShape { center: Cell, arm: usize },
    /// Circular seed after removing all fuel from the northern half of the grid.
    ArcNoFuelHalf { center: Cell, radius: f64 },
}

/// Precomputed per-offset ignition probabilities for one (params, wind) pair.
///
/// Entry `(dx, dy, p)` is the probability that a burning source at
/// `target - (dx, dy)` ignites `target`.
#[derive(Clone, Debug)]
pub struct SpreadKernel {
    offsets: Vec<(isize, isize, f64)>,
}

impl SpreadKernel {
    pub fn new(params: &PropagationParams, wind: &Wind) -> Self {
        let r = params.max_offset as isize;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let d2 = (dx * dx + dy * dy) as f64;
                let bearing = (dy as f64).atan2(dx as f64);
                let p = (params.alpha * wind.bias(bearing) / d2).clamp(0.0, 1.0);
                offsets.push((dx, dy, p));
            }
        }
        SpreadKernel { offsets }
    }

    pub fn offsets(&self) -> &[(isize, isize, f64)] {
        &self.offsets
    }
}

impl FireGrid {
    /// A fuel-free, non-burning grid.
    pub fn empty(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("grid dimensions must be positive"));
        }
        if !(cell_size > 0.0) {
            return Err(Error::arg("cell_size must be positive"));
        }
        Ok(FireGrid {
            width,
            height,
            cell_size,
            fuel: vec![0.0; width * height],
            burning: vec![false; width * height],
        })
    }

    /// Grid with every cell's fuel drawn uniformly from `[fuel_min, fuel_max]`.
    pub fn new<R: Rng + ?Sized>(
        width: usize,
        height: usize,
        cell_size: f64,
        fuel_min: f64,
        fuel_max: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(fuel_min >= 0.0 && fuel_min <= fuel_max) || !fuel_max.is_finite() {
            return Err(Error::arg(format!(
                "fuel bounds must satisfy 0 <= min <= max, got [{fuel_min}, {fuel_max}]"
            )));
        }
        let mut grid = Self::empty(width, height, cell_size)?;
        if fuel_min == fuel_max {
            grid.fuel.fill(fuel_min);
        } else {
            for f in &mut grid.fuel {
                *f = rng.random_range(fuel_min..=fuel_max);
            }
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    fn check(&self, cell: Cell) -> Result<usize> {
        if self.contains(cell) {
            Ok(self.index(cell))
        } else {
            Err(Error::arg(format!(
                "cell ({}, {}) outside {}x{} grid",
                cell.x, cell.y, self.width, self.height
            )))
        }
    }

    pub fn fuel(&self, cell: Cell) -> f64 {
        self.fuel[self.index(cell)]
    }

    pub fn is_burning(&self, cell: Cell) -> bool {
        self.burning[self.index(cell)]
    }

    pub fn fuel_slice(&self) -> &[f64] {
        &self.fuel
    }

    pub fn burning_slice(&self) -> &[bool] {
        &self.burning
    }

    pub fn burning_count(&self) -> usize {
        self.burning.iter().filter(|&&b| b).count()
    }

    /// Sets a cell's fuel; a burning cell whose fuel drops to zero is extinguished.
    pub fn set_fuel(&mut self, cell: Cell, fuel: f64) -> Result<()> {
        let i = self.check(cell)?;
        if !(fuel >= 0.0) {
            return Err(Error::arg("fuel must be non-negative"));
        }
        self.fuel[i] = fuel;
        if fuel == 0.0 {
            self.burning[i] = false;
        }
        Ok(())
    }

    /// Marks a cell burning. Cells without fuel cannot burn and are left untouched.
    pub fn ignite(&mut self, cell: Cell) -> Result<bool> {
        let i = self.check(cell)?;
        if self.fuel[i] > 0.0 {
            self.burning[i] = true;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// World coordinates (meters) of a cell center.
    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.x as f64 + 0.5) * self.cell_size,
            (cell.y as f64 + 0.5) * self.cell_size,
        )
    }

    /// The cell containing a world point, if any. For a square lattice this is
    /// also the cell whose center is nearest to the point.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<Cell> {
        let cx = (x / self.cell_size).floor();
        let cy = (y / self.cell_size).floor();
        if cx >= 0.0 && cy >= 0.0 && (cx as usize) < self.width && (cy as usize) < self.height {
            Some(Cell::new(cx as usize, cy as usize))
        } else {
            None
        }
    }

    pub fn apply_seed(&mut self, pattern: &SeedPattern) -> Result<()> {
        let cells = self.seed_cells(pattern)?;
        if let SeedPattern::ArcNoFuelHalf { .. } = pattern {
            let first_row = self.height / 2;
            for y in first_row..self.height {
                for x in 0..self.width {
                    let i = self.index(Cell::new(x, y));
                    self.fuel[i] = 0.0;
                    self.burning[i] = false;
                }
            }
        }
        for c in cells {
            self.ignite(c)?;
        }
        Ok(())
    }

    /// Cells a pattern would mark burning, ignoring fuel.
    pub fn seed_cells(&self, pattern: &SeedPattern) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        match *pattern {
            SeedPattern::Circular { center, radius } | SeedPattern::ArcNoFuelHalf { center, radius } => {
                self.check(center)?;
                if !(radius >= 0.0) {
                    return Err(Error::arg("seed radius must be non-negative"));
                }
                let r = radius.floor() as isize;
                let (cx, cy) = (center.x as isize, center.y as isize);
                for dy in -r..=r {
                    for dx in -r..=r {
                        if ((dx * dx + dy * dy) as f64) <= radius * radius {
                            out.push(self.offset_cell(cx + dx, cy + dy)?);
                        }
                    }
                }
            }
            SeedPattern::TShape { center, arm } => {
                self.check(center)?;
                let (cx, cy) = (center.x as isize, center.y as isize);
                out.push(center);
                for k in 1..=arm as isize {
                    out.push(self.offset_cell(cx - k, cy)?);
                    out.push(self.offset_cell(cx, cy + k)?);
                    out.push(self.offset_cell(cx, cy - k)?);
                }
            }
        }
        Ok(out)
    }

    fn offset_cell(&self, x: isize, y: isize) -> Result<Cell> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return Err(Error::arg(format!(
                "seed pattern reaches cell ({x}, {y}) outside {}x{} grid",
                self.width, self.height
            )));
        }
        Ok(Cell::new(x as usize, y as usize))
    }

    pub fn ignition_probability(
        &self,
        params: &PropagationParams,
        wind: &Wind,
        cell: Cell,
    ) -> Result<f64> {
        self.check(cell)?;
        Ok(self.ignition_probability_with(&SpreadKernel::new(params, wind), cell))
    }

    /// Ignition probability using a precomputed kernel; `cell` must be in the grid.
    pub fn ignition_probability_with(&self, kernel: &SpreadKernel, cell: Cell) -> f64 {
        let i = self.index(cell);
        if self.fuel[i] <= 0.0 || self.burning[i] {
            return 0.0;
        }
        let (x, y) = (cell.x as isize, cell.y as isize);
        let (w, h) = (self.width as isize, self.height as isize);
        let mut survive = 1.0;
        for &(dx, dy, p) in kernel.offsets() {
            let (sx, sy) = (x - dx, y - dy);
            if sx < 0 || sy < 0 || sx >= w || sy >= h {
                continue;
            }
            if self.burning[(sy * w + sx) as usize] {
                survive *= 1.0 - p;
            }
        }
        1.0 - survive
    }

    /// One synchronous fire step.
    pub fn step<R: Rng + ?Sized>(&self, params: &PropagationParams, wind: &Wind, rng: &mut R) -> FireGrid {
        self.step_with(&SpreadKernel::new(params, wind), params.beta, rng)
    }

    pub fn step_with<R: Rng + ?Sized>(&self, kernel: &SpreadKernel, beta: f64, rng: &mut R) -> FireGrid {
        let mut next = self.clone();
        if !self.burning.iter().any(|&b| b) {
            return next;
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let cell = Cell::new(x, y);
                let i = self.index(cell);
                if self.burning[i] {
                    let f = (self.fuel[i] - beta).max(0.0);
                    next.fuel[i] = f;
                    next.burning[i] = f > 0.0;
                } else if self.fuel[i] > 0.0 {
                    let p = self.ignition_probability_with(kernel, cell);
                    if p > 0.0 && rng.random::<f64>() < p {
                        next.burning[i] = true;
                    }
                }
            }
        }
        next
    }

    /// Number of whole fire steps that fit in `seconds`.
    pub fn steps_in(seconds: f64, params: &PropagationParams) -> usize {
        if seconds <= 0.0 {
            return 0;
        }
        // 1e-9 absorbs representation error such as 30 / 2.5.
        (seconds / params.step_duration + 1e-9).floor() as usize
    }

    /// Advances the fire by `floor(seconds / step_duration)` steps.
    pub fn pre_grow<R: Rng + ?Sized>(
        &self,
        seconds: f64,
        params: &PropagationParams,
        wind: &Wind,
        rng: &mut R,
    ) -> Result<FireGrid> {
        if !(seconds >= 0.0) {
            return Err(Error::arg("pre-growth duration must be non-negative"));
        }
        let kernel = SpreadKernel::new(params, wind);
        let mut grid = self.clone();
        for _ in 0..Self::steps_in(seconds, params) {
            grid = grid.step_with(&kernel, params.beta, rng);
        }
        Ok(grid)
    }
}
