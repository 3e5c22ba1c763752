//! Sensor models: the polar observation image and the shared belief map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::aircraft::AircraftState;
use crate::error::{Error, Result};
use crate::fire_sim::FireGrid;
use crate::neuralnet::Tensor;

/// Radius around an aircraft inside which belief cells are refreshed, meters.
pub const VISIT_RADIUS: f64 = 100.0;
/// Saturation value of the time-since-visited counter.
pub const MAX_TIME_SINCE: u8 = 255;

/// Range cutpoints of the polar observation.
///
/// Interval widths grow linearly from the first bin to the last with a fixed
/// last/first ratio, and are scaled so that the outermost cutpoint sits at the
/// maximum range.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeBins {
    cutpoints: Vec<f64>,
}

impl RangeBins {
    pub fn new(bins: usize, max_range: f64, width_ratio: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::arg("at least one range bin is required"));
        }
        if !(max_range > 0.0) || !(width_ratio >= 1.0) {
            return Err(Error::arg("max_range must be positive and width_ratio >= 1"));
        }
        let slope = if bins > 1 {
            (width_ratio - 1.0) / (bins - 1) as f64
        } else {
            0.0
        };
        let raw: Vec<f64> = (0..bins).map(|k| 1.0 + slope * k as f64).collect();
        let total: f64 = raw.iter().sum();
        let mut cutpoints = Vec::with_capacity(bins + 1);
        let mut acc = 0.0;
        cutpoints.push(0.0);
        for w in &raw[..bins - 1] {
            acc += w * max_range / total;
            cutpoints.push(acc);
        }
        cutpoints.push(max_range);
        Ok(RangeBins { cutpoints })
    }

    /// 40 bins out to 500 m with a 1:10 first-to-last width ratio.
    pub fn standard() -> Self {
        Self::new(40, 500.0, 10.0).expect("standard range bins")
    }

    pub fn len(&self) -> usize {
        self.cutpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn widths(&self) -> Vec<f64> {
        self.cutpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.cutpoints[i] + self.cutpoints[i + 1])
    }

    pub fn max_range(&self) -> f64 {
        *self.cutpoints.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolarSpec {
    pub range_bins: usize,
    pub angle_bins: usize,
    pub max_range: f64,
    pub width_ratio: f64,
}

impl Default for PolarSpec {
    fn default() -> Self {
        PolarSpec {
            range_bins: 40,
            angle_bins: 30,
            max_range: 500.0,
            width_ratio: 10.0,
        }
    }
}

/// Relative bearing (counterclockwise from the heading) at the center of
/// angle sector `j` out of `sectors`. Sectors tile `[-pi, pi)`.
pub fn sector_center(j: usize, sectors: usize) -> f64 {
    -PI + (j as f64 + 0.5) * 2.0 * PI / sectors as f64
}

/// Renders fire observations on a polar raster around the aircraft.
#[derive(Clone, Debug)]
pub struct PolarSensor {
    bins: RangeBins,
    angle_bins: usize,
    /// Body-frame (downrange, crossrange) of each bin center, row-major by range.
    offsets: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarObservation {
    range_bins: usize,
    angle_bins: usize,
    values: Vec<bool>,
}

impl PolarObservation {
    pub fn shape(&self) -> (usize, usize) {
        (self.range_bins, self.angle_bins)
    }

    pub fn get(&self, range: usize, angle: usize) -> bool {
        self.values[range * self.angle_bins + angle]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// `range x angle x 1` image with burning bins set to one.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec(
            vec![self.range_bins, self.angle_bins, 1],
            self.values.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("observation shape")
    }
}

impl PolarSensor {
    pub fn new(spec: &PolarSpec) -> Result<Self> {
        if spec.angle_bins == 0 {
            return Err(Error::arg("at least one angle bin is required"));
        }
        let bins = RangeBins::new(spec.range_bins, spec.max_range, spec.width_ratio)?;
        Ok(Self::with_bins(bins, spec.angle_bins))
    }

    pub fn with_bins(bins: RangeBins, angle_bins: usize) -> Self {
        let mut offsets = Vec::with_capacity(bins.len() * angle_bins);
        for i in 0..bins.len() {
            let r = bins.center(i);
            for j in 0..angle_bins {
                let (s, c) = sector_center(j, angle_bins).sin_cos();
                offsets.push((r * c, r * s));
            }
        }
        PolarSensor {
            bins,
            angle_bins,
            offsets,
        }
    }

    pub fn standard() -> Self {
        Self::with_bins(RangeBins::standard(), 30)
    }

    pub fn bins(&self) -> &RangeBins {
        &self.bins
    }

    pub fn angle_bins(&self) -> usize {
        self.angle_bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bins.len(), self.angle_bins)
    }

    /// Each bin takes the burning flag of the grid cell nearest its center
    /// point; points off the grid read as not burning.
    pub fn render(&self, grid: &FireGrid, state: &AircraftState) -> PolarObservation {
        let values = self
            .offsets
            .iter()
            .map(|&(d, c)| {
                let (x, y) = state.to_world(d, c);
                grid.cell_at(x, y).is_some_and(|cell| grid.is_burning(cell))
            })
            .collect();
        PolarObservation {
            range_bins: self.bins.len(),
            angle_bins: self.angle_bins,
            values,
        }
    }
}

/// Shared map of believed fire locations and per-cell staleness.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefMap {
    width: usize,
    height: usize,
    cell_size: f64,
    fire: Vec<bool>,
    time_since: Vec<u8>,
}

impl BeliefMap {
    /// No believed fire and every counter saturated.
    pub fn new(width: usize, height: usize, cell_size: f64) -> Self {
        BeliefMap {
            width,
            height,
            cell_size,
            fire: vec![false; width * height],
            time_since: vec![MAX_TIME_SINCE; width * height],
        }
    }

    /// Belief initialized to the grid's current burning cells, all counters saturated.
    pub fn from_grid(grid: &FireGrid) -> Self {
        let mut b = Self::new(grid.width(), grid.height(), grid.cell_size());
        b.fire.copy_from_slice(grid.burning_slice());
        b
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

    pub fn fire(&self, x: usize, y: usize) -> bool {
        self.fire[y * self.width + x]
    }

    pub fn time_since(&self, x: usize, y: usize) -> u8 {
        self.time_since[y * self.width + x]
    }

    pub fn fire_slice(&self) -> &[bool] {
        &self.fire
    }

    pub fn time_slice(&self) -> &[u8] {
        &self.time_since
    }

    /// Cells whose centers lie within `radius` of any aircraft.
    pub fn visited_mask(&self, aircraft: &[AircraftState], radius: f64) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        let cs = self.cell_size;
        let r2 = radius * radius;
        for a in aircraft {
            let lo_x = ((a.x - radius) / cs - 0.5).floor().max(0.0);
            let hi_x = ((a.x + radius) / cs - 0.5).ceil();
            let lo_y = ((a.y - radius) / cs - 0.5).floor().max(0.0);
            let hi_y = ((a.y + radius) / cs - 0.5).ceil();
            if hi_x < 0.0 || hi_y < 0.0 {
                continue;
            }
            let hi_x = (hi_x as usize).min(self.width.saturating_sub(1));
            let hi_y = (hi_y as usize).min(self.height.saturating_sub(1));
            for y in lo_y as usize..=hi_y {
                let cy = (y as f64 + 0.5) * cs - a.y;
                for x in lo_x as usize..=hi_x {
                    let cx = (x as f64 + 0.5) * cs - a.x;
                    if cx * cx + cy * cy <= r2 {
                        mask[y * self.width + x] = true;
                    }
                }
            }
        }
        mask
    }

    /// Refreshes cells near the aircraft from the true grid and ages the rest.
    /// Returns the number of visited cells that flipped from not-burning to
    /// burning.
    pub fn update(&mut self, grid: &FireGrid, aircraft: &[AircraftState]) -> Result<usize> {
        self.update_with_radius(grid, aircraft, VISIT_RADIUS)
    }

    pub fn update_with_radius(
        &mut self,
        grid: &FireGrid,
        aircraft: &[AircraftState],
        radius: f64,
    ) -> Result<usize> {
        if grid.width() != self.width || grid.height() != self.height {
            return Err(Error::ShapeMismatch {
                expected: vec![self.width, self.height],
                actual: vec![grid.width(), grid.height()],
            });
        }
        let mask = self.visited_mask(aircraft, radius);
        let truth = grid.burning_slice();
        let mut discovered = 0;
        for i in 0..mask.len() {
            if mask[i] {
                if truth[i] && !self.fire[i] {
                    discovered += 1;
                }
                self.fire[i] = truth[i];
                self.time_since[i] = 0;
            } else {
                self.time_since[i] = self.time_since[i].saturating_add(1);
            }
        }
        Ok(discovered)
    }

    /// Belief resampled into an ownship-centered, heading-aligned image.
    ///
    /// Columns run downrange and rows run crossrange (left positive), one
    /// cell per pixel, with the aircraft at the image center. Pixels that fall
    /// off the map read as no fire and maximum staleness.
    pub fn ego_image(&self, state: &AircraftState, out_width: usize, out_height: usize) -> EgoBeliefImage {
        let cs = self.cell_size;
        let mut data = Vec::with_capacity(out_width * out_height * 2);
        for v in 0..out_height {
            let c = (v as f64 + 0.5 - out_height as f64 / 2.0) * cs;
            for u in 0..out_width {
                let d = (u as f64 + 0.5 - out_width as f64 / 2.0) * cs;
                let (x, y) = state.to_world(d, c);
                let (cx, cy) = ((x / cs).floor(), (y / cs).floor());
                if cx >= 0.0 && cy >= 0.0 && (cx as usize) < self.width && (cy as usize) < self.height {
                    let i = cy as usize * self.width + cx as usize;
                    data.push(if self.fire[i] { 1.0 } else { 0.0 });
                    data.push(self.time_since[i] as f32 / MAX_TIME_SINCE as f32);
                } else {
                    data.push(0.0);
                    data.push(1.0);
                }
            }
        }
        EgoBeliefImage(
            Tensor::from_vec(vec![out_height, out_width, 2], data).expect("ego image shape"),
        )
    }
}

/// Two-channel (fire, normalized staleness) image, shape `rows x cols x 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoBeliefImage(pub Tensor<f32>);

impl EgoBeliefImage {
    pub fn pixel(&self, row: usize, col: usize) -> (f32, f32) {
        let w = self.0.shape()[1];
        let i = (row * w + col) * 2;
        (self.0.data()[i], self.0.data()[i + 1])
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.0
    }
}
