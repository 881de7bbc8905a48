mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Gridded spatiotemporal count prediction with geographically and
/// temporally weighted neural networks.
#[derive(Parser, Debug)]
#[command(name = "gtwnn", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for all outputs.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Master seed from which the shuffle, init, NAS and synth seeds derive.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the effective configuration to this file before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a raw event CSV and histogram it into a grid container.
    Ingest(IngestArgs),
    /// Generate a synthetic grid container.
    Synth(SynthArgs),
    /// Correlation diagnostics and the architecture they recommend.
    Diagnose(DiagnoseArgs),
    /// Train one architecture and report its test metrics.
    Train(TrainArgs),
    /// Bayesian-optimization search over depth and width.
    Search(SearchArgs),
    /// Evaluate a checkpoint and write actual, predicted and difference maps.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// bng, utm17n or local.
    #[arg(long)]
    crs: Option<String>,
    /// monthly or daily.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    seed_n: Option<usize>,
    #[arg(long)]
    skip_inactive_cells: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    t_steps: Option<usize>,
    /// Comma-separated AR coefficients; pass an empty string for none.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    coeffs: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    anisotropy: Option<f64>,
    #[arg(long)]
    base_rate: Option<f64>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Architecture tag.
    #[arg(long)]
    arch: Option<String>,
    /// Spatial loss bandwidth in km.
    #[arg(long)]
    bandwidth_h: Option<f64>,
    /// Temporal loss bandwidth in time steps.
    #[arg(long)]
    bandwidth_ht: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    skip_inactive_cells: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Comma-separated hidden-layer widths.
    #[arg(long, value_delimiter = ',')]
    neurons: Option<Vec<usize>>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    budget: Option<usize>,
    /// Inclusive depth range as `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Inclusive width range as `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    neurons_range: Option<Vec<usize>>,
    /// Use one width for all hidden layers.
    #[arg(long)]
    shared_neurons: bool,
    #[arg(long)]
    record_wall_time: bool,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    skip_inactive_cells: bool,
}

fn apply_model_args(cfg: &mut RunConfig, m: &ModelArgs) -> Result<()> {
    if let Some(tag) = &m.arch {
        cfg.model.architecture = tag.parse()?;
    }
    if let Some(h) = m.bandwidth_h {
        cfg.model.bandwidth_h = Some(h);
    }
    if let Some(ht) = m.bandwidth_ht {
        cfg.model.bandwidth_ht = ht;
    }
    if let Some(e) = m.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = m.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = m.learning_rate {
        cfg.train.adam.alpha = lr;
    }
    cfg.grid.skip_inactive_cells |= m.skip_inactive_cells;
    Ok(())
}

fn pair(flag: &str, v: &[usize]) -> Result<(usize, usize)> {
    match *v {
        [lo, hi] => Ok((lo, hi)),
        _ => anyhow::bail!("--{flag} takes two comma-separated values, got {}", v.len()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds.master = seed;
    }

    match &cli.command {
        Command::Ingest(a) => {
            if let Some(p) = &a.input {
                cfg.input = Some(p.clone());
            }
            if let Some(c) = &a.crs {
                cfg.grid.crs = c.parse()?;
            }
            if let Some(r) = &a.resolution {
                cfg.grid.resolution = match r.as_str() {
                    "monthly" => gtwnn_core::ingest::TimeResolution::Monthly,
                    "daily" => gtwnn_core::ingest::TimeResolution::Daily,
                    other => {
                        anyhow::bail!("unknown time resolution `{other}` (valid: monthly, daily)")
                    }
                };
            }
            if let Some(n) = a.seed_n {
                cfg.grid.seed_n = n;
            }
            cfg.grid.skip_inactive_cells |= a.skip_inactive_cells;
        }
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            s.rows = a.rows.unwrap_or(s.rows);
            s.cols = a.cols.unwrap_or(s.cols);
            s.t_steps = a.t_steps.unwrap_or(s.t_steps);
            if let Some(c) = &a.coeffs {
                s.temporal_coeffs = c.clone();
            }
            s.spatial_kernel_radius = a.radius.unwrap_or(s.spatial_kernel_radius);
            s.anisotropy = a.anisotropy.unwrap_or(s.anisotropy);
            s.base_rate = a.base_rate.unwrap_or(s.base_rate);
        }
        Command::Diagnose(a) => {
            cfg.diagnose.alpha = a.alpha.unwrap_or(cfg.diagnose.alpha);
        }
        Command::Train(a) => {
            apply_model_args(&mut cfg, &a.model)?;
            if let Some(n) = &a.neurons {
                cfg.model.neurons = n.clone();
            }
        }
        Command::Search(a) => {
            apply_model_args(&mut cfg, &a.model)?;
            cfg.search.budget = a.budget.unwrap_or(cfg.search.budget);
            if let Some(l) = &a.layers {
                cfg.search.layers_range = Some(pair("layers", l)?);
            }
            if let Some(n) = &a.neurons_range {
                cfg.search.neurons_range = pair("neurons-range", n)?;
            }
            if a.shared_neurons {
                cfg.search.per_layer_neurons = false;
            }
            cfg.search.record_wall_time |= a.record_wall_time;
        }
        Command::Evaluate(a) => {
            cfg.eval.epsilon = a.epsilon.unwrap_or(cfg.eval.epsilon);
            cfg.grid.skip_inactive_cells |= a.skip_inactive_cells;
        }
    }

    if let Some(path) = &cli.save_config {
        std::fs::write(path, cfg.to_toml()?)?;
    }

    match &cli.command {
        Command::Ingest(_) => commands::ingest(&cfg),
        Command::Synth(_) => commands::synth(&cfg),
        Command::Diagnose(a) => commands::diagnose(&cfg, &a.grid),
        Command::Train(a) => commands::train(&cfg, &a.grid),
        Command::Search(a) => commands::search(&cfg, &a.grid),
        Command::Evaluate(a) => commands::evaluate(&cfg, &a.grid, &a.checkpoint),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
