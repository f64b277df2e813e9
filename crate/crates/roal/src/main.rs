use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use roal::checkpoint::load_checkpoint;
use roal::config::RunConfig;
use roal::dataset::{load_omniglot, save_cache};
use roal::driver::{self, load_split};
use roal::report;
use roal::roal_core::model::ModelKind;
use roal::{Error, Result};

#[derive(Parser)]
#[command(name = "roal", version, about = "Active one-shot learning with memory-augmented Q-networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint, curve and metrics under --out.
    Train(TrainArgs),
    /// Evaluate a checkpoint greedily on the held-out classes.
    Eval(EvalArgs),
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Key-value config file; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    classes: Option<usize>,
    /// Class margin sampling pool multiplier; 0 disables it.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["0", "2", "3"]))]
    cms_multiplier: Option<String>,
    #[arg(long)]
    batches: Option<u64>,
    /// Episodes per batch.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Omniglot directory, dataset cache file, or synth[:classes:samples:noise:seed].
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eval_batches: Option<u64>,
    /// Any other config key, as key=value. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    batches: u64,
    /// Defaults to the data the checkpoint was trained on.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Subcommand)]
enum DataCommand {
    /// Preprocess an Omniglot tree into a cache file.
    Prepare {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add 90, 180 and 270 degree rotations as new classes.
        #[arg(long)]
        rotations: bool,
    },
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let flags: [(&str, Option<String>); 9] = [
        ("model", args.model.map(|m| m.to_string())),
        ("classes", args.classes.map(|v| v.to_string())),
        ("cms_multiplier", args.cms_multiplier),
        ("batches", args.batches.map(|v| v.to_string())),
        ("batch_size", args.batch_size.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("data", args.data),
        ("out", args.out.map(|p| p.display().to_string())),
        ("eval_batches", args.eval_batches.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in &args.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    let out = driver::run(&cfg)?;
    info!("wrote {}", cfg.out.display());
    if let Some(m) = &out.eval {
        for row in m.rows().iter().filter(|r| [1, 2, 5, 10].contains(&r.instance_index)) {
            info!(
                "instance {}: accuracy {:.1}% requests {:.1}%",
                row.instance_index,
                row.accuracy_pct.unwrap_or(f64::NAN),
                row.request_pct.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let ck = load_checkpoint(&args.checkpoint, None)?;
    let data = match args.data.or_else(|| ck.extra("data").map(String::from)) {
        Some(d) => d,
        None => return Err(Error::Config("checkpoint does not record its data; pass --data".into())),
    };
    let train_classes = ck.extra("train_classes").map(|v| v.parse()).transpose().map_err(|_| Error::Config("bad train_classes in checkpoint".into()))?;
    let split_seed = ck.extra("split_seed").and_then(|v| v.parse().ok()).unwrap_or(0);
    let split = load_split(&data, train_classes, split_seed)?;
    let net = ck.network()?;
    let metrics = driver::evaluate(&net, &ck.config, &split.test, args.batches)?;
    report::write_metrics_file(&metrics, &args.csv)?;
    info!(
        "{} episodes on {} held-out classes: accuracy {:.1}% requests {:.1}%; wrote {}",
        metrics.episodes(),
        split.test.num_classes(),
        metrics.overall_accuracy_pct().unwrap_or(f64::NAN),
        metrics.overall_request_pct().unwrap_or(f64::NAN),
        args.csv.display()
    );
    Ok(())
}

fn prepare(src: PathBuf, out: PathBuf, rotations: bool) -> Result<()> {
    let ds = load_omniglot(&src, rotations)?;
    save_cache(&ds, &out)?;
    info!("{} classes ({} images) written to {}", ds.num_classes(), ds.classes().iter().map(|c| c.len()).sum::<usize>(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Data { command: DataCommand::Prepare { src, out, rotations } } => prepare(src, out, rotations),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
