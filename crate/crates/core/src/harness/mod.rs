//! Block simulation, rate search and result files.

mod config;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::SimConfig;

use crate::clip_llr;
use crate::detector::{LlrFrame, TdmrDetector};
use crate::error::{Error, Result};
use crate::grain::{write_bits, GrainDistribution, GrainGenerator};
use crate::sccc::{bit_to_polarity, DecoderSchedule, Mode, SccCodec, IMAGE_COLS, USER_BITS};

/// Gaussian model of detector LLRs used as the decoder's channel density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlrGaussianModel {
    pub mean: f64,
    pub variance: f64,
}

impl LlrGaussianModel {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite() {
            Ok(Self { mean, variance })
        } else {
            Err(Error::Domain(format!(
                "Gaussian LLR model needs positive mean and variance, got ({mean}, {variance})"
            )))
        }
    }
}

impl Default for LlrGaussianModel {
    fn default() -> Self {
        Self {
            mean: 1.0,
            variance: 1.69,
        }
    }
}

/// Treat a detector LLR as an observation of `N(±μ, σ²)`: `2μℓ/σ²`, clipped.
pub fn llr_to_channel(llr: f64, model: &LlrGaussianModel) -> f64 {
    clip_llr(2.0 * model.mean * llr / model.variance)
}

/// Outcome of one simulated block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockResult {
    pub block: u64,
    pub bit_errors: usize,
    /// Detector/decoder iterations run.
    pub outer_iters: usize,
    /// Inner/outer decoder exchanges run, summed over outer iterations.
    pub sccc_iters: usize,
}

/// Shared, immutable state for all blocks of one `(p2, rate)` point.
pub struct Simulation {
    config: SimConfig,
    schedule: DecoderSchedule,
    codec: SccCodec,
    detector: TdmrDetector,
    generator: GrainGenerator,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let dist = GrainDistribution::from_p2(config.p2)?;
        let codec = SccCodec::new(config.rate, config.code_seed)?;
        let mut pool_rng = block_rng(config.seed, u64::MAX);
        let generator = GrainGenerator::new(dist, &mut pool_rng)?;
        Ok(Self {
            schedule: config.schedule(),
            detector: TdmrDetector::with_model(dist, config.channel_model),
            codec,
            generator,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn codec(&self) -> &SccCodec {
        &self.codec
    }

    pub fn schedule(&self) -> &DecoderSchedule {
        &self.schedule
    }

    /// Simulate block `index`: fresh data and grain image, then detection and
    /// decoding until the decisions are correct or the iteration cap is hit.
    pub fn run_block(&self, index: u64) -> Result<BlockResult> {
        let mut rng = block_rng(self.config.seed, index);
        let user: Vec<u8> = (0..self.codec.user_len())
            .map(|_| rng.gen_range(0..2u8))
            .collect();
        let coded = self.codec.encode(&user)?;
        let rows = self.codec.coded_len() / IMAGE_COLS;
        let image = self.generator.generate(rows, IMAGE_COLS, &mut rng)?;
        let polarity: Vec<i8> = coded.iter().map(|&b| bit_to_polarity(b)).collect();
        let written = write_bits(&image, &polarity)?;

        let gauss = self.config.gaussian();
        let known = self.config.genie_stop.then_some(user.as_slice());
        let mut decoder = self.codec.decoder();
        let mut apriori = LlrFrame::zeros(coded.len());
        let mut result = BlockResult {
            block: index,
            bit_errors: user.len(),
            outer_iters: 0,
            sccc_iters: 0,
        };
        for _ in 0..self.schedule.outer_iters {
            let detected = self.detector.detect_image(&written, &apriori)?;
            let channel: Vec<f64> = detected
                .values()
                .iter()
                .map(|&l| llr_to_channel(l, &gauss))
                .collect();
            let outcome = decoder.decode(&channel, self.schedule.inner_iters, known)?;
            result.outer_iters += 1;
            result.sccc_iters += outcome.iterations;
            result.bit_errors = outcome
                .bits
                .iter()
                .zip(&user)
                .filter(|(a, b)| a != b)
                .count();
            if self.config.genie_stop && result.bit_errors == 0 {
                break;
            }
            apriori = LlrFrame::new(outcome.feedback);
        }
        Ok(result)
    }

    /// Run blocks `0..blocks` in parallel batches. With `stop_on_error`, no
    /// new batch starts once a block has failed.
    pub fn run_blocks(&self, blocks: usize, stop_on_error: bool) -> Result<Vec<BlockResult>> {
        let batch = if stop_on_error {
            rayon::current_num_threads().max(1)
        } else {
            blocks.max(1)
        };
        let mut results = Vec::with_capacity(blocks);
        let mut next = 0;
        while next < blocks {
            let end = (next + batch).min(blocks);
            let mut part = (next as u64..end as u64)
                .into_par_iter()
                .map(|i| self.run_block(i))
                .collect::<Result<Vec<_>>>()?;
            part.sort_by_key(|r| r.block);
            let failed = part.iter().any(|r| r.bit_errors > 0);
            results.extend(part);
            next = end;
            if stop_on_error && failed {
                break;
            }
        }
        Ok(results)
    }

    /// Run the configured number of blocks and summarize.
    pub fn run(&self) -> Result<SimReport> {
        let start = Instant::now();
        let results = self.run_blocks(self.config.blocks, false)?;
        Ok(SimReport::from_blocks(
            self,
            &results,
            start.elapsed().as_secs_f64(),
        ))
    }
}

/// Per-block generator: the master seed selects the key, the block index the stream.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Simulate one block of a configuration.
pub fn run_block(config: &SimConfig, index: u64) -> Result<BlockResult> {
    Simulation::new(config.clone())?.run_block(index)
}

/// Summary of one `(p2, rate)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub p2: f64,
    /// User bits per transmitted bit actually achieved by the codeword length.
    pub rate: f64,
    pub requested_rate: f64,
    pub user_bits_per_grain: f64,
    pub mode: Mode,
    pub blocks: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub avg_outer_iters: f64,
    pub max_outer_iters: usize,
    pub seed: u64,
    pub wall_secs: f64,
}

#[derive(Serialize)]
struct CsvRow {
    p2: f64,
    rate: f64,
    user_bits_per_grain: f64,
    mode: String,
    blocks: usize,
    bit_errors: usize,
    ber: f64,
    avg_outer_iters: f64,
    max_outer_iters: usize,
    seed: u64,
    wall_secs: f64,
}

impl SimReport {
    pub fn from_blocks(sim: &Simulation, results: &[BlockResult], wall_secs: f64) -> Self {
        let cfg = sim.config();
        let rate = sim.codec().effective_rate();
        let bit_errors: usize = results.iter().map(|r| r.bit_errors).sum();
        let blocks = results.len();
        let bits = (blocks * sim.codec().user_len()).max(1);
        let outer: usize = results.iter().map(|r| r.outer_iters).sum();
        Self {
            p2: cfg.p2,
            rate,
            requested_rate: cfg.rate,
            user_bits_per_grain: 2.0 * rate,
            mode: cfg.mode,
            blocks,
            bit_errors,
            ber: bit_errors as f64 / bits as f64,
            avg_outer_iters: if blocks > 0 {
                outer as f64 / blocks as f64
            } else {
                0.0
            },
            max_outer_iters: results.iter().map(|r| r.outer_iters).max().unwrap_or(0),
            seed: cfg.seed,
            wall_secs,
        }
    }

    /// Whether this point meets the BER target. When the target cannot be
    /// resolved with the bits simulated, zero errors are required.
    pub fn passes(&self, ber_target: f64, budget: usize) -> bool {
        let resolvable = ber_target * (budget * USER_BITS) as f64 >= 1.0;
        if resolvable {
            self.blocks >= budget && self.ber <= ber_target
        } else {
            self.blocks >= budget && self.bit_errors == 0
        }
    }

    fn csv_row(&self) -> CsvRow {
        CsvRow {
            p2: self.p2,
            rate: self.rate,
            user_bits_per_grain: self.user_bits_per_grain,
            mode: self.mode.to_string(),
            blocks: self.blocks,
            bit_errors: self.bit_errors,
            ber: self.ber,
            avg_outer_iters: self.avg_outer_iters,
            max_outer_iters: self.max_outer_iters,
            seed: self.seed,
            wall_secs: self.wall_secs,
        }
    }
}

/// Write reports as CSV, one row per point.
pub fn write_csv(path: &Path, reports: &[SimReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Configuration and results in one JSON document.
#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub config: &'a SimConfig,
    pub schedule: DecoderSchedule,
    pub reports: &'a [SimReport],
    pub best_rate: Option<f64>,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest<'_>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, manifest)?;
    Ok(())
}

/// Points tried by a rate search and the best passing rate.
#[derive(Clone, Debug, Serialize)]
pub struct RateSearch {
    /// Highest passing rate (achieved, not requested), or 0 if none passed.
    pub best_rate: f64,
    pub points: Vec<SimReport>,
}

/// Sweep the configured rate grid upward from `rate_min` and report the
/// highest rate that meets the BER target with `block_budget` blocks. The
/// sweep stops at the first failing rate.
pub fn rate_search(base: &SimConfig, block_budget: usize) -> Result<RateSearch> {
    let mut points = Vec::new();
    let mut best_rate = 0.0;
    let zero_error_rule = base.ber_target * ((block_budget * USER_BITS) as f64) < 1.0;
    for rate in base.rate_grid() {
        let cfg = SimConfig {
            rate,
            blocks: block_budget,
            ..base.clone()
        };
        let sim = Simulation::new(cfg)?;
        let start = Instant::now();
        let results = sim.run_blocks(block_budget, zero_error_rule)?;
        let report = SimReport::from_blocks(&sim, &results, start.elapsed().as_secs_f64());
        let pass = report.passes(base.ber_target, block_budget);
        log::info!(
            "p2={} {} rate={:.4}: {} errors in {} blocks, {}",
            base.p2,
            base.mode,
            report.rate,
            report.bit_errors,
            report.blocks,
            if pass { "pass" } else { "fail" }
        );
        points.push(report);
        if !pass {
            break;
        }
        best_rate = points.last().map_or(0.0, |r| r.rate);
    }
    Ok(RateSearch { best_rate, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_mapping() {
        let m = LlrGaussianModel::default();
        assert_eq!(llr_to_channel(0.0, &m), 0.0);
        assert!((llr_to_channel(1.0, &m) - 2.0 / 1.69).abs() < 1e-12);
        assert_eq!(llr_to_channel(100.0, &m), 100.0);
        assert_eq!(llr_to_channel(-100.0, &m), -100.0);
        assert!(LlrGaussianModel::new(0.0, 1.0).is_err());
    }

    #[test]
    fn block_streams_differ() {
        let a: u64 = block_rng(3, 0).gen();
        let b: u64 = block_rng(3, 1).gen();
        let c: u64 = block_rng(3, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
