use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grain::GrainDistribution;
use crate::sccc::{rows_for_rate, DecoderSchedule, Mode};
use crate::trellis::ChannelModel;

use super::LlrGaussianModel;

/// Simulation settings. Loaded from a flat `key = value` file; every key is
/// optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub p2: f64,
    pub rate: f64,
    pub mode: Mode,
    pub blocks: usize,
    pub seed: u64,
    /// Seed of the interleavers and the puncture/repeat map.
    pub code_seed: u64,
    pub ber_target: f64,
    pub gauss_mean: f64,
    pub gauss_var: f64,
    /// Overrides the mode's inner iteration count.
    pub inner_iters: Option<usize>,
    /// Overrides the mode's outer iteration cap.
    pub outer_iters: Option<usize>,
    /// Stop as soon as the decisions match the transmitted data.
    pub genie_stop: bool,
    pub channel_model: ChannelModel,
    pub rate_step: f64,
    pub rate_min: f64,
    pub rate_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p2: 0.25,
            rate: 0.25,
            mode: Mode::Iterative,
            blocks: 20,
            seed: 1,
            code_seed: 2014,
            ber_target: 1e-5,
            gauss_mean: 1.0,
            gauss_var: 1.69,
            inner_iters: None,
            outer_iters: None,
            genie_stop: true,
            channel_model: ChannelModel::Exact,
            rate_step: 0.01,
            rate_min: 0.20,
            rate_max: 0.50,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        GrainDistribution::from_p2(self.p2)?;
        let domain = |msg: String| Err(Error::Domain(msg));
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return domain(format!("rate {} outside (0, 1)", self.rate));
        }
        if !(self.ber_target > 0.0 && self.ber_target < 1.0) {
            return domain(format!("BER target {} outside (0, 1)", self.ber_target));
        }
        if self.blocks == 0 {
            return domain("at least one block is required".into());
        }
        LlrGaussianModel::new(self.gauss_mean, self.gauss_var)?;
        if !(self.rate_step > 0.0
            && self.rate_min > 0.0
            && self.rate_min <= self.rate_max
            && self.rate_max < 1.0)
        {
            return domain(format!(
                "bad rate grid {}..{} step {}",
                self.rate_min, self.rate_max, self.rate_step
            ));
        }
        if self.outer_iters == Some(0) || self.inner_iters == Some(0) {
            return domain("iteration counts must be positive".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> DecoderSchedule {
        let mut s = DecoderSchedule::for_mode(self.mode);
        if let Some(n) = self.inner_iters {
            s.inner_iters = n;
        }
        if let Some(n) = self.outer_iters {
            s.outer_iters = if self.mode == Mode::NonIterative {
                1
            } else {
                n
            };
        }
        s
    }

    pub fn gaussian(&self) -> LlrGaussianModel {
        LlrGaussianModel {
            mean: self.gauss_mean,
            variance: self.gauss_var,
        }
    }

    pub fn rows(&self) -> usize {
        rows_for_rate(self.rate)
    }

    /// Candidate rates `rate_min, rate_min + step, ...` up to `rate_max`.
    pub fn rate_grid(&self) -> Vec<f64> {
        let n = ((self.rate_max - self.rate_min) / self.rate_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.rate_min + i as f64 * self.rate_step) * 1e6).round() / 1e6)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.rows(), 256);
        assert_eq!(cfg.schedule().inner_iters, 8);
    }

    #[test]
    fn parses_flat_file() {
        let cfg = SimConfig::from_toml_str(
            "p2 = 0.4\nmode = \"non-iterative\"\nblocks = 3\ngauss_var = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.p2, 0.4);
        assert_eq!(cfg.mode, Mode::NonIterative);
        assert_eq!(cfg.schedule().outer_iters, 1);
        assert_eq!(cfg.schedule().inner_iters, 30);
        assert!(SimConfig::from_toml_str("p2 = 0.7").is_err());
        assert!(SimConfig::from_toml_str("bogus = 1").is_err());
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn grid() {
        let cfg = SimConfig {
            rate_min: 0.2,
            rate_max: 0.3,
            rate_step: 0.02,
            ..SimConfig::default()
        };
        assert_eq!(cfg.rate_grid(), vec![0.2, 0.22, 0.24, 0.26, 0.28, 0.3]);
    }
}
