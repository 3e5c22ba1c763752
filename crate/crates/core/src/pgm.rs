//! Plain-text (P2) PGM snapshots of fire and belief maps.
//!
//! Rows are written north-first so that the image appears with north up.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fire_sim::{Cell, FireGrid};
use crate::sensing::BeliefMap;

/// Encodes a `width x height` raster; `pixel(x, y)` uses the grid convention
/// (`y` grows north).
pub fn encode(width: usize, height: usize, pixel: impl Fn(usize, usize) -> u8) -> String {
    let mut out = String::with_capacity(width * height * 4 + 32);
    let _ = writeln!(out, "P2\n{width} {height}\n255");
    for y in (0..height).rev() {
        let row: Vec<String> = (0..width).map(|x| pixel(x, y).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Fuel scaled linearly so that the grid maximum maps to 255.
pub fn fuel_pgm(grid: &FireGrid) -> String {
    let max = grid.fuel_slice().iter().cloned().fold(0.0f64, f64::max);
    encode(grid.width(), grid.height(), |x, y| {
        if max <= 0.0 {
            0
        } else {
            (grid.fuel(Cell::new(x, y)) / max * 255.0).round().clamp(0.0, 255.0) as u8
        }
    })
}

pub fn burning_pgm(grid: &FireGrid) -> String {
    encode(grid.width(), grid.height(), |x, y| {
        if grid.is_burning(Cell::new(x, y)) {
            255
        } else {
            0
        }
    })
}

pub fn belief_fire_pgm(belief: &BeliefMap) -> String {
    encode(belief.width(), belief.height(), |x, y| {
        if belief.fire(x, y) {
            255
        } else {
            0
        }
    })
}

pub fn belief_time_pgm(belief: &BeliefMap) -> String {
    encode(belief.width(), belief.height(), |x, y| belief.time_since(x, y))
}

/// Writes `<stem>_fuel.pgm` and `<stem>_burning.pgm` into `dir`.
pub fn write_grid(dir: &Path, stem: &str, grid: &FireGrid) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}_fuel.pgm")), fuel_pgm(grid))?;
    std::fs::write(dir.join(format!("{stem}_burning.pgm")), burning_pgm(grid))?;
    Ok(())
}

/// Writes `<stem>_fire.pgm` and `<stem>_time.pgm` into `dir`.
pub fn write_belief(dir: &Path, stem: &str, belief: &BeliefMap) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}_fire.pgm")), belief_fire_pgm(belief))?;
    std::fs::write(dir.join(format!("{stem}_time.pgm")), belief_time_pgm(belief))?;
    Ok(())
}
