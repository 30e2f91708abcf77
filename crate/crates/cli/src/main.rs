//! `fuzzy-cgan`: train and evaluate regression CGANs and the dense baseline.

mod seeds;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fuzzy_cgan::datasets::Catalog;
use fuzzy_cgan::harness::{
    best_per_dataset, execute, improvement_percent, read_results, summary_csv, ExperimentConfig, ModelKind,
    Overrides, SummaryRow,
};
use fuzzy_cgan::InjectionMode;
use log::info;

#[derive(Parser)]
#[command(name = "fuzzy-cgan", version, about = "Fuzzy-logic-injected conditional GANs for tabular regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one dataset / model / injection over several seeds.
    Run(RunArgs),
    /// Summarize the result files in a directory.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Dataset name from the catalog (abalone, ailerons, bank, census, pumadyn).
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "cgan", value_parser = parse_model)]
    model: ModelKind,
    /// Fuzzy injection point: none, fri, fci or fdi.
    #[arg(long, default_value = "none", value_parser = parse_injection)]
    inject: InjectionMode,
    /// Seeds: `0..4` and `0..=4` are inclusive ranges; `1,3,5` is a list.
    #[arg(long, default_value = "0..4", value_parser = seeds::parse_seed_list)]
    seeds: seeds::SeedList,
    /// Training fraction.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Learning rate for every optimizer in the run.
    #[arg(long)]
    lr: Option<f64>,
    /// TOML file of hyperparameter overrides. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding `<dataset>.csv` files. Defaults to $FUZZY_CGAN_DATA or ./data.
    #[arg(long, conflicts_with = "catalog")]
    data_dir: Option<PathBuf>,
    /// TOML catalog mapping dataset names to files and shapes.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write trained parameters under `<out>/checkpoints`.
    #[arg(long)]
    checkpoints: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: fuzzy_cgan::Error| e.to_string())
}

fn parse_injection(s: &str) -> Result<InjectionMode, String> {
    s.parse().map_err(|e: fuzzy_cgan::Error| e.to_string())
}

fn run(args: RunArgs) -> Result<()> {
    let mut overrides = match &args.config {
        Some(path) => Overrides::from_toml_file(path)?,
        None => Overrides::default(),
    };
    overrides.merge(Overrides {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        ..Overrides::default()
    });
    let catalog = match (&args.catalog, &args.data_dir) {
        (Some(path), _) => Catalog::from_toml_file(path)?,
        (None, Some(dir)) => Catalog::builtin(dir),
        (None, None) => Catalog::from_env(),
    };
    let config = ExperimentConfig {
        dataset: args.dataset.to_ascii_lowercase(),
        model: args.model,
        injection: args.inject,
        seeds: args.seeds.0,
        split: args.split,
        overrides,
        out_dir: args.out,
        workers: args.workers,
        save_checkpoints: args.checkpoints,
    };
    let result = execute(&config, &catalog)?;
    let a = &result.aggregate;
    println!(
        "{}: nmae {:.6} ± {:.6}  nmse {:.6} ± {:.6}  mae {:.6}  mse {:.6}  ({}/{} seeds)",
        config.stem(),
        a.nmae.mean,
        a.nmae.std,
        a.nmse.mean,
        a.nmse.std,
        a.mae.mean,
        a.mse.mean,
        a.completed,
        result.seeds.len()
    );
    info!("results written to {}", config.out_dir.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let results = read_results(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    if results.is_empty() {
        bail!("no result files in {}", args.input.display());
    }
    match args.format {
        Format::Csv => print!("{}", summary_csv(&results)?),
        Format::Json => {
            let rows: Vec<SummaryRow> = results.iter().map(SummaryRow::from).collect();
            let best: Vec<serde_json::Value> = best_per_dataset(&results)
                .into_iter()
                .map(|b| {
                    let dnn = results.iter().find(|r| {
                        r.config.model == ModelKind::Dnn && r.config.dataset == b.config.dataset
                    });
                    serde_json::json!({
                        "dataset": b.config.dataset,
                        "injection": b.config.injection,
                        "nmae_mean": b.aggregate.nmae.mean,
                        "nmse_mean": b.aggregate.nmse.mean,
                        "dnn_nmae_mean": dnn.map(|d| d.aggregate.nmae.mean),
                        "nmae_improvement_percent":
                            dnn.map(|d| improvement_percent(d.aggregate.nmae.mean, b.aggregate.nmae.mean)),
                    })
                })
                .collect();
            let doc = serde_json::json!({ "results": rows, "best_per_dataset": best });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Report(args) => report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
