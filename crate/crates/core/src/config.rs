//! Tracker configuration, loadable from TOML. Every key is optional and
//! falls back to its default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::FanSearchParams;
use crate::error::{Error, Result};
use crate::flow::{ConfidenceParams, FlowParams};
use crate::optimizer::OptimizerSchedule;
use crate::segmentation::HistogramParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub schedule: OptimizerSchedule,
    /// Fan parameters not set per stage (interval, threshold, cutoff).
    pub fan: FanSearchParams,
    pub flow: FlowParams,
    pub confidence: ConfidenceParams,
    pub histogram: HistogramParams,
    pub n_cnt: usize,
    pub n_in: usize,
    /// Pixels added around the projected bounding box.
    pub roi_margin: usize,
    /// Off: contour energy only, no optical flow.
    pub use_interior: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            schedule: OptimizerSchedule::default(),
            fan: FanSearchParams::default(),
            flow: FlowParams::default(),
            confidence: ConfidenceParams::default(),
            histogram: HistogramParams::default(),
            n_cnt: 200,
            n_in: 200,
            roi_margin: 40,
            use_interior: true,
        }
    }
}

impl TrackerConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        for s in &self.schedule.stages {
            FanSearchParams { a_reg: s.a_reg, l_src: s.l_src, ..self.fan }.validate()?;
        }
        self.flow.validate()?;
        let h = &self.histogram;
        if !(1..=256).contains(&h.bins)
            || !(0.0..=1.0).contains(&h.learn_rate_f)
            || !(0.0..=1.0).contains(&h.learn_rate_b)
        {
            return Err(Error::Config("histogram bins must be 1..=256 and rates in [0, 1]".into()));
        }
        let c = &self.confidence;
        if c.patch.is_multiple_of(2) {
            return Err(Error::Config("confidence patch must be odd".into()));
        }
        if ![c.eta_i, c.eta_g, c.eta_s].iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(Error::Config("confidence scales must be positive and finite".into()));
        }
        if self.n_cnt == 0 {
            return Err(Error::Config("n_cnt must be positive".into()));
        }
        Ok(())
    }
}
