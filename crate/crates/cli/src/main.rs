//! `magseq`: simulate magnetometer records, train the sequence model, and
//! compare it with the Kalman/RTS baseline. Every output is a plot-ready CSV.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::error;

use commands::{BaselineArgs, CompareArgs, EvaluateArgs, GenerateArgs, TrainArgs};
use config::RunConfig;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

const CONFIG_HELP: &str = "\
Config file (--config): one JSON object with optional keys
  physics     {kappa, mu, tau, n_steps, gamma_b, sigma_b}, defaults to the reference physics
  train       {eta, batch_size, epochs, hidden, seed, adam_beta1, adam_beta2, adam_eps,
               normalize_inputs, clip_norm, lr_decay}, overrides the full or desk defaults
  paths       {dataset, model, output}, used when the matching flag is absent
  desk_scale  bool, same as --desk-scale
Flags override file values.

Exit codes: 0 success, 2 usage/config/I-O error, 3 numeric failure (divergence, non-finite data).";

#[derive(Parser, Debug)]
#[command(
    name = "magseq",
    version,
    about = "Magnetic field tracking: simulation, sequence model, Kalman baseline"
)]
#[command(after_help = CONFIG_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for dataset generation or training (overrides `train.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Use the scaled-down training defaults (m = 32, M = 64, 20 epochs).
    #[arg(long, global = true)]
    desk_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset of (signal, field) records.
    #[command(
        after_help = "Outputs: the binary dataset file; with --record-csv, record 0 as `t,signal,field`."
    )]
    Generate {
        /// Number of records.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also export the first record as CSV.
        #[arg(long, value_name = "PATH")]
        record_csv: Option<PathBuf>,
    },
    /// Train the encoder/decoder model on a dataset.
    #[command(after_help = "Outputs: checkpoint at OUT, metadata at OUT.json, \
per-epoch loss at OUT.loss.csv (or --loss-csv) with schema `epoch,loss`.")]
    Train {
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        loss_csv: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Hidden units per LSTM.
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// ADAM learning rate.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Error curve of a trained model on a test dataset.
    #[command(after_help = "Outputs: OUT with schema `t,error,error_normalized`; \
OUT.samples.csv (or --samples-out) with schema `record_id,t,B_true,B_est`.")]
    Evaluate {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Number of sample trajectories to export.
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, value_name = "PATH")]
        samples_out: Option<PathBuf>,
    },
    /// Kalman filter and RTS smoother error curves.
    #[command(after_help = "Outputs: OUT with schema `t,error_smoothed,error_filtered`.")]
    Baseline {
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Model against smoother on the same records.
    #[command(
        after_help = "Outputs: OUT with schema `t,error_rnn,error_smoothed,error_filtered`; \
OUT.summary.csv (or --summary) with schema `metric,value` and metrics records, mid_rnn, \
mid_smoothed, mid_filtered, ratio_rnn_to_smoother, ratio_standard_error, edge_start_rnn, \
edge_end_rnn, edge_start_smoothed, edge_end_smoothed, teacher_mse, autoregressive_mse."
    )]
    Compare {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.common;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = RunConfig::load(common.config.as_deref(), common.desk_scale)?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }

    match cli.command {
        Command::Generate {
            count,
            out,
            record_csv,
        } => commands::generate(
            &cfg,
            GenerateArgs {
                count: count as usize,
                seed: cfg.train.seed,
                out,
                record_csv,
            },
        ),
        Command::Train {
            dataset,
            out,
            loss_csv,
            epochs,
            hidden,
            batch_size,
            eta,
        } => {
            let t = &mut cfg.train;
            t.epochs = epochs.unwrap_or(t.epochs);
            t.hidden = hidden.unwrap_or(t.hidden);
            t.batch_size = batch_size.unwrap_or(t.batch_size);
            t.eta = eta.unwrap_or(t.eta);
            t.validate()?;
            commands::train(
                &cfg,
                TrainArgs {
                    dataset,
                    out,
                    loss_csv,
                },
            )
        }
        Command::Evaluate {
            model,
            dataset,
            out,
            samples,
            samples_out,
        } => commands::evaluate(
            &cfg,
            EvaluateArgs {
                model,
                dataset,
                out,
                samples,
                samples_out,
            },
        ),
        Command::Baseline { dataset, out } => commands::baseline(&cfg, BaselineArgs { dataset, out }),
        Command::Compare {
            model,
            dataset,
            out,
            summary,
        } => commands::compare_cmd(
            &cfg,
            CompareArgs {
                model,
                dataset,
                out,
                summary,
            },
        ),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<magseq::Error>())
        .any(magseq::Error::is_numeric);
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            error!("{err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
