//! Three-layer intensity map built from one lidar sweep, and the centered
//! region-of-interest window the detector runs on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{world_to_grid, GridSpec, IntensityGrid, Pose2D, Vec2};

/// Fixed-point scale for per-cell intensity sums. Integer accumulation makes
/// the map independent of point order.
const FIXED_SCALE: f64 = (1u64 << 24) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl LidarPoint {
    pub const fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }
}

/// One sweep in the robot frame, stamped with the robot's world pose.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloudFrame {
    pub points: Vec<LidarPoint>,
    pub timestamp: f64,
    pub pose: Pose2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Average intensity of the points in the cell.
    #[default]
    Mean,
    Sum,
    /// Sum divided by the cell area.
    SumOverS2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Lidar mount height above the ground, meters.
    pub lidar_height: f64,
    /// Layer half-height, meters.
    pub half_height: f64,
    pub max_intensity: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            lidar_height: 0.5,
            half_height: 0.2,
            max_intensity: 255.0,
            normalization: Normalization::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Low,
    Mid,
    High,
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_height > 0.0) {
            return Err(Error::InvalidConfig("layer half-height must be positive".into()));
        }
        if !(self.lidar_height - self.half_height > 0.0) {
            return Err(Error::InvalidConfig(
                "lidar height must exceed the layer half-height so the low layer is non-empty".into(),
            ));
        }
        if !(self.max_intensity > 0.0 && self.max_intensity.is_finite()) {
            return Err(Error::InvalidConfig("max intensity must be positive".into()));
        }
        Ok(())
    }

    /// Height band a point falls in. Interior boundaries belong to the lower
    /// layer; `z <= 0` and `z >= h + 2Δ` belong to none.
    pub fn layer_of(&self, z: f64) -> Option<Layer> {
        let h = self.lidar_height;
        let d = self.half_height;
        if z <= 0.0 || z >= h + 2.0 * d {
            None
        } else if z <= h - d {
            Some(Layer::Low)
        } else if z <= h + d {
            Some(Layer::Mid)
        } else {
            Some(Layer::High)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerIntensityMap {
    pub low: IntensityGrid,
    pub mid: IntensityGrid,
    pub high: IntensityGrid,
    pub spec: GridSpec,
    pub config: LayerConfig,
    /// Points rejected for being non-finite or outside `[0, max_intensity]`.
    pub skipped: usize,
}

impl MultiLayerIntensityMap {
    pub fn layer(&self, layer: Layer) -> &IntensityGrid {
        match layer {
            Layer::Low => &self.low,
            Layer::Mid => &self.mid,
            Layer::High => &self.high,
        }
    }

    /// Cell-wise `low + mid + high`.
    pub fn layer_sum(&self) -> IntensityGrid {
        let mut out = self.low.clone();
        for ((o, m), h) in out
            .as_mut_slice()
            .iter_mut()
            .zip(self.mid.as_slice())
            .zip(self.high.as_slice())
        {
            *o += m + h;
        }
        out
    }
}

#[derive(Clone)]
struct Accumulator {
    sums: Vec<i64>,
    counts: Vec<u32>,
}

impl Accumulator {
    fn new(cells: usize) -> Self {
        Self {
            sums: vec![0; cells],
            counts: vec![0; cells],
        }
    }

    fn finish(&self, size: usize, norm: Normalization, cell_size: f64) -> IntensityGrid {
        let area = cell_size * cell_size;
        let values = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(&sum, &count)| {
                if count == 0 {
                    return 0.0;
                }
                let total = sum as f64 / FIXED_SCALE;
                match norm {
                    Normalization::Mean => total / count as f64,
                    Normalization::Sum => total,
                    Normalization::SumOverS2 => total / area,
                }
            })
            .collect();
        IntensityGrid::from_vec(size, values).expect("accumulator sized to grid")
    }
}

/// Bins each point into the layer matching its height at the cell under its
/// `(x, y)`, aggregating per `config.normalization`.
pub fn build_layers(frame: &PointCloudFrame, spec: &GridSpec, config: &LayerConfig) -> MultiLayerIntensityMap {
    let n = spec.n;
    let mut acc = [Accumulator::new(n * n), Accumulator::new(n * n), Accumulator::new(n * n)];
    let mut skipped = 0;
    for p in &frame.points {
        if !p.is_finite() || p.intensity < 0.0 || p.intensity > config.max_intensity {
            skipped += 1;
            continue;
        }
        let Some(layer) = config.layer_of(p.z) else { continue };
        let Some(cell) = world_to_grid(Vec2::new(p.x, p.y), spec) else { continue };
        let idx = cell.r as usize * n + cell.c as usize;
        let a = &mut acc[layer as usize];
        a.sums[idx] += (p.intensity * FIXED_SCALE).round() as i64;
        a.counts[idx] += 1;
    }
    let [low, mid, high] = acc.map(|a| a.finish(n, config.normalization, spec.cell_size));
    MultiLayerIntensityMap {
        low,
        mid,
        high,
        spec: *spec,
        config: *config,
        skipped,
    }
}

/// Read-only centered `m x m` window over the three layers.
#[derive(Debug, Clone, Copy)]
pub struct RoiView<'a> {
    map: &'a MultiLayerIntensityMap,
    m: usize,
    offset: usize,
}

impl<'a> RoiView<'a> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn parent(&self) -> &'a MultiLayerIntensityMap {
        self.map
    }

    #[inline]
    pub fn value(&self, layer: Layer, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.m && c < self.m);
        self.map.layer(layer).at(r + self.offset, c + self.offset)
    }

    pub fn low(&self, r: usize, c: usize) -> f64 {
        self.value(Layer::Low, r, c)
    }

    pub fn mid(&self, r: usize, c: usize) -> f64 {
        self.value(Layer::Mid, r, c)
    }

    pub fn high(&self, r: usize, c: usize) -> f64 {
        self.value(Layer::High, r, c)
    }
}

/// Offset of a centered `m`-window in an `n`-grid, validating `m`.
pub fn roi_offset(n: usize, m: usize) -> Result<usize> {
    if m == 0 || m >= n || m % 2 != 0 {
        return Err(Error::InvalidRoi { m, n });
    }
    Ok(n / 2 - m / 2)
}

pub fn extract_roi(map: &MultiLayerIntensityMap, m: usize) -> Result<RoiView<'_>> {
    let offset = roi_offset(map.spec.n, m)?;
    Ok(RoiView { map, m, offset })
}
