//! Per-frame perception chain: layers, detection, extrapolation, nav map and
//! short-horizon accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrap::{build_extrapolation_set, ExtrapolationSet};
use crate::grid::{BinaryGrid, GridSpec, IntensityGrid};
use crate::layers::{build_layers, extract_roi, roi_offset, LayerConfig, MultiLayerIntensityMap, PointCloudFrame};
use crate::nav::{accumulate_mapping, accumulate_transparent, compose_nav_map, NavMap, TonHistory};
use crate::ton::{apply_condition, denoise, extract_tons, Ton, TonCondition, TonMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    pub grid: GridSpec,
    /// ROI side in cells.
    pub roi: usize,
    pub layers: LayerConfig,
    pub ton: TonCondition,
    /// Half-length of extrapolated segments, meters.
    pub robot_radius: f64,
    pub occupancy_threshold: f64,
    pub extrap_weight: f64,
    pub mapping_weight: f64,
    pub t_past: usize,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                n: 200,
                cell_size: 0.05,
            },
            roi: 80,
            layers: LayerConfig::default(),
            ton: TonCondition::default(),
            robot_radius: 0.3,
            occupancy_threshold: 50.0,
            extrap_weight: 255.0,
            mapping_weight: 255.0,
            t_past: 10,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        roi_offset(self.grid.n, self.roi)?;
        self.layers.validate()?;
        self.ton.validate(self.layers.max_intensity)?;
        let ok = self.robot_radius > 0.0
            && self.occupancy_threshold >= 0.0
            && self.extrap_weight >= 0.0
            && self.mapping_weight >= 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid perception config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub layers: MultiLayerIntensityMap,
    /// Denoised TON mask of this frame.
    pub mask: TonMask,
    pub tons: Vec<Ton>,
    pub extrap: ExtrapolationSet,
    pub nav: NavMap,
    /// This frame's mask united with the history moved into this frame.
    pub transparent: BinaryGrid,
}

/// Stateful perception: owns the TON history.
#[derive(Debug, Clone)]
pub struct Perception {
    cfg: PerceptionConfig,
    history: TonHistory,
}

impl Perception {
    pub fn new(cfg: PerceptionConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            history: TonHistory::new(cfg.t_past),
        })
    }

    pub fn config(&self) -> &PerceptionConfig {
        &self.cfg
    }

    pub fn history(&self) -> &TonHistory {
        &self.history
    }

    /// Stateless part: everything up to the nav map.
    pub fn detect(&self, frame: &PointCloudFrame) -> Result<(MultiLayerIntensityMap, TonMask, Vec<Ton>, ExtrapolationSet, NavMap)> {
        let c = &self.cfg;
        let layers = build_layers(frame, &c.grid, &c.layers);
        let roi = extract_roi(&layers, c.roi)?;
        let mask = denoise(&apply_condition(&roi, &c.ton), &c.ton);
        let tons = extract_tons(&mask);
        let extrap = build_extrapolation_set(&tons, c.roi, c.robot_radius, c.grid.cell_size);
        let nav = compose_nav_map(&layers, &extrap, c.occupancy_threshold, c.extrap_weight)?;
        Ok((layers, mask, tons, extrap, nav))
    }

    pub fn process(&mut self, frame: &PointCloudFrame) -> Result<FrameOutput> {
        let (layers, mask, tons, extrap, nav) = self.detect(frame)?;
        let transparent = accumulate_transparent(&mask, &self.history, &frame.pose, &self.cfg.grid)?;
        self.history.push(mask.clone(), frame.pose, frame.timestamp)?;
        Ok(FrameOutput {
            layers,
            mask,
            tons,
            extrap,
            nav,
            transparent,
        })
    }

    /// Accumulated intensity map for `layers` observed at `frame`'s pose,
    /// using the history before that frame was pushed.
    pub fn mapping(&self, layers: &MultiLayerIntensityMap, frame: &PointCloudFrame) -> Result<IntensityGrid> {
        accumulate_mapping(layers, &self.history, &frame.pose, self.cfg.mapping_weight)
    }

    pub fn reset(&mut self) {
        self.history = TonHistory::new(self.cfg.t_past);
    }
}
