use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use tdmr_core::grain::{generate_grain_image, GrainDistribution};
use tdmr_core::harness::{
    rate_search, write_csv, write_manifest, RunManifest, SimConfig, Simulation,
};
use tdmr_core::sccc::Mode;
use tdmr_core::trellis::{channel_table, transition_table, ChannelModel};

#[derive(Parser)]
#[command(
    name = "tdmr",
    version,
    about = "Two-row grain detector with iterative SCCC decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate blocks at one (p2, rate) point.
    Run(SimArgs),
    /// Search the rate grid for the highest rate meeting the BER target.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        /// Grid step.
        #[arg(long)]
        rate_step: Option<f64>,
        #[arg(long)]
        rate_min: Option<f64>,
        #[arg(long)]
        rate_max: Option<f64>,
    },
    /// Generate a grain image and print it with its grain frequencies.
    Gen {
        #[arg(long, default_value_t = 0.25)]
        p2: f64,
        #[arg(long, default_value_t = 16)]
        rows: usize,
        #[arg(long, default_value_t = 16)]
        cols: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the image here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the state transition table and the channel output table.
    Tables {
        #[arg(long, default_value_t = ChannelModel::Exact)]
        channel_model: ChannelModel,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Base settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ber_target: Option<f64>,
    #[arg(long)]
    gauss_mean: Option<f64>,
    #[arg(long)]
    gauss_var: Option<f64>,
    #[arg(long)]
    channel_model: Option<ChannelModel>,
    /// CSV output; a JSON manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                SimConfig::load(path).with_context(|| format!("loading {}", path.display()))?
            }
            None => SimConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(
            p2,
            rate,
            mode,
            blocks,
            seed,
            ber_target,
            gauss_mean,
            gauss_var,
            channel_model
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let sim = Simulation::new(cfg.clone())?;
            info!(
                "p2={} rate={:.4} ({} rows) mode={} blocks={}",
                cfg.p2,
                sim.codec().effective_rate(),
                cfg.rows(),
                cfg.mode,
                cfg.blocks
            );
            let report = sim.run()?;
            println!(
                "p2={} rate={:.4} mode={} blocks={} bit_errors={} ber={:.3e} avg_outer_iters={:.2} max_outer_iters={} wall_secs={:.1}",
                report.p2,
                report.rate,
                report.mode,
                report.blocks,
                report.bit_errors,
                report.ber,
                report.avg_outer_iters,
                report.max_outer_iters,
                report.wall_secs
            );
            if let Some(out) = &args.out {
                let reports = [report];
                write_csv(out, &reports)?;
                write_manifest(
                    &out.with_extension("json"),
                    &RunManifest {
                        config: &cfg,
                        schedule: cfg.schedule(),
                        reports: &reports,
                        best_rate: None,
                    },
                )?;
            }
        }
        Command::Sweep {
            sim,
            rate_step,
            rate_min,
            rate_max,
        } => {
            let mut cfg = sim.config()?;
            cfg.rate_step = rate_step.unwrap_or(cfg.rate_step);
            cfg.rate_min = rate_min.unwrap_or(cfg.rate_min);
            cfg.rate_max = rate_max.unwrap_or(cfg.rate_max);
            cfg.validate()?;
            let search = rate_search(&cfg, cfg.blocks)?;
            for r in &search.points {
                println!(
                    "rate={:.4} bit_errors={} blocks={} avg_outer_iters={:.2}",
                    r.rate, r.bit_errors, r.blocks, r.avg_outer_iters
                );
            }
            println!(
                "p2={} mode={} best_rate={:.4} user_bits_per_grain={:.4}",
                cfg.p2,
                cfg.mode,
                search.best_rate,
                2.0 * search.best_rate
            );
            if let Some(out) = &sim.out {
                write_csv(out, &search.points)?;
                write_manifest(
                    &out.with_extension("json"),
                    &RunManifest {
                        config: &cfg,
                        schedule: cfg.schedule(),
                        reports: &search.points,
                        best_rate: Some(search.best_rate),
                    },
                )?;
            }
        }
        Command::Gen {
            p2,
            rows,
            cols,
            seed,
            out,
        } => {
            let dist = GrainDistribution::from_p2(p2)?;
            let image = generate_grain_image(dist, rows, cols, seed)?;
            let freq = image.grain_frequencies();
            let target = dist.as_array();
            match out {
                Some(path) => std::fs::write(&path, image.to_string())?,
                None => print!("{image}"),
            }
            for (name, (f, t)) in ["1x1", "2x1", "1x2", "2x2"]
                .iter()
                .zip(freq.iter().zip(target))
            {
                eprintln!("{name}: {f:.4} (target {t:.4})");
            }
        }
        Command::Tables { channel_model } => {
            println!("{}", transition_table().dump());
            println!("{}", channel_table(channel_model).dump());
        }
    }
    Ok(())
}
