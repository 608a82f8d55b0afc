use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use litm::checkpoint;
use litm::config::{load_run, load_synth};
use litm::dataset_file::{self, load_embeddings_csv};
use litm::evaluate::{evaluate_embeddings, evaluate_model, StageSelection};
use litm::metrics;
use litm::report::{cmc_csv, epoch_table, epochs_csv, eval_table, stage_table, summarize};
use litm::run::{train_to_files, Outputs};
use litm::LitmError;
use litm_core::data::generate;
use litm_core::RandomSource;

/// Triplet-loss metric learning with incremental margins and hard identity
/// sampling, on synthetic descriptor-bag datasets.
#[derive(Parser)]
#[command(name = "litm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset.
    Gen(GenArgs),
    /// Train a model; writes a checkpoint and a JSON-lines metrics log.
    Train(TrainArgs),
    /// Retrieval evaluation on a seeded query/gallery split.
    Eval(EvalArgs),
    /// Summarize a metrics log per stage and per epoch.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Move a share of every identity's samples to this second file.
    #[arg(long)]
    holdout: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5, requires = "holdout")]
    holdout_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    metrics: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also save a checkpoint every N epochs, as `<out>.epoch<E>`.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Write the hard identity sets of every GHIS epoch to this file.
    #[arg(long)]
    ghis_dump: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "embeddings")]
    checkpoint: Option<PathBuf>,
    #[arg(long, required_unless_present = "embeddings")]
    data: Option<PathBuf>,
    /// Evaluate embeddings from a CSV file (`identity,v1,v2,...`) instead.
    #[arg(long, conflicts_with_all = ["checkpoint", "data", "stage"])]
    embeddings: Option<PathBuf>,
    /// Share of each identity's samples used as queries.
    #[arg(long)]
    split: f64,
    /// Stage index, `final` or `all`.
    #[arg(long, default_value = "final")]
    stage: StageSelection,
    /// JSON report destination.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    /// Seed of the query/gallery split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the CMC curve as CSV.
    #[arg(long)]
    cmc_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    metrics: PathBuf,
    /// Epochs averaged in the per-stage table.
    #[arg(long, default_value_t = 1)]
    tail: usize,
    /// Print the per-epoch table too.
    #[arg(long)]
    epochs: bool,
    /// Write per-epoch curves as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn write_file(path: &Path, text: &str) -> Result<(), LitmError> {
    std::fs::write(path, text).map_err(|e| LitmError::io(path, e))
}

fn gen(args: GenArgs) -> Result<(), LitmError> {
    let mut cfg = load_synth(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let data = generate(&cfg)?.dataset;
    match &args.holdout {
        None => {
            dataset_file::save(&args.out, &data)?;
            println!("{} identities x {} samples -> {}", cfg.n_ids, cfg.samples_per_id, args.out.display());
        }
        Some(holdout) => {
            let mut rng = RandomSource::new(cfg.seed).fork();
            let (held, kept) = data
                .split_per_identity(args.holdout_fraction, &mut rng)
                .map_err(|e| LitmError::Config(e.to_string()))?;
            dataset_file::save(&args.out, &kept)?;
            dataset_file::save(holdout, &held)?;
            println!(
                "{} identities: {} samples -> {}, {} held out -> {}",
                cfg.n_ids,
                kept.len(),
                args.out.display(),
                held.len(),
                holdout.display()
            );
        }
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), LitmError> {
    let mut run = load_run(&args.config)?;
    if let Some(seed) = args.seed {
        run.train.seed = seed;
    }
    if args.checkpoint_every.is_some() {
        run.train.checkpoint_every = args.checkpoint_every;
    }
    let data = dataset_file::load(&args.data)?;
    let outputs = Outputs { checkpoint: &args.out, metrics: &args.metrics, ghis_dump: args.ghis_dump.as_deref() };
    let iterations = train_to_files(&run, &data, &outputs)?;
    println!("{iterations} iterations; checkpoint -> {}", args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), LitmError> {
    let docs = match &args.embeddings {
        Some(path) => vec![evaluate_embeddings(&load_embeddings_csv(path)?, args.split, args.k_max, args.seed)?],
        None => {
            let (cfg, params) = checkpoint::load(args.checkpoint.as_deref().expect("required by clap"))?;
            let data = dataset_file::load(args.data.as_deref().expect("required by clap"))?;
            evaluate_model(&cfg, &params, &data, args.split, args.stage, args.k_max, args.seed)?
        }
    };
    let json = match docs.as_slice() {
        [one] => serde_json::to_string_pretty(one),
        many => serde_json::to_string_pretty(many),
    }
    .expect("reports serialize");
    write_file(&args.out, &(json + "\n"))?;
    if let Some(path) = &args.cmc_csv {
        write_file(path, &cmc_csv(&docs))?;
    }
    print!("{}", eval_table(&docs));
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), LitmError> {
    let rows = metrics::load(&args.metrics)?;
    let summaries = summarize(&rows);
    print!("{}", stage_table(&summaries, args.tail));
    if args.epochs {
        println!();
        print!("{}", epoch_table(&summaries));
    }
    if let Some(path) = &args.csv {
        write_file(path, &epochs_csv(&summaries))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
