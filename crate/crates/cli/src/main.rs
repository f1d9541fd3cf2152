use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kge_cli::cfg::{resolve_data_paths, resolve_train, usage, CliResult, FileConfig, TrainInputs};
use kge_cli::commands::{self, SplitChoice};

/// Knowledge-graph embeddings with adversarial negative sampling.
#[derive(Parser)]
#[command(name = "kge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a per-pass report CSV.
    Train(Box<TrainArgs>),
    /// Link prediction: raw and filtered mean rank / hits@10.
    EvalLp(EvalLpArgs),
    /// Triplet classification with per-relation thresholds.
    EvalTc(EvalTcArgs),
    /// Print generator negative samples for random train positives.
    SampleNegatives(SampleArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Train triples TSV (head<TAB>relation<TAB>tail).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation triples TSV.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Test triples TSV.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Valid/test files carry a fourth 1/-1 label column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    labeled: Option<bool>,
    /// Flat key = value config file merged under explicit flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl DataArgs {
    fn file_config(&self) -> CliResult<FileConfig> {
        match &self.config {
            Some(path) => FileConfig::load(path),
            None => Ok(FileConfig::default()),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Scorer: unstructured | se | transe | transh | transr | transd.
    #[arg(long)]
    model: Option<String>,
    /// Training regime: random | gan-scratch | gan-pretrain.
    #[arg(long)]
    regime: Option<String>,
    /// Corruption side strategy: unif | bern.
    #[arg(long)]
    strategy: Option<String>,
    /// Dissimilarity norm: l1 | l2.
    #[arg(long)]
    norm: Option<String>,
    /// Margin of the ranking loss.
    #[arg(long)]
    gamma: Option<f64>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f32>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Outer training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Generator passes per epoch (adversarial regimes).
    #[arg(long = "g-passes")]
    g_passes: Option<usize>,
    /// Discriminator passes per epoch.
    #[arg(long = "d-passes")]
    d_passes: Option<usize>,
    /// L2 coefficient on generator parameters.
    #[arg(long = "l2-gen")]
    l2_gen: Option<f32>,
    /// RNG seed; identical seeds give byte-identical outputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Hyperparameter preset: wn18 | fb15k | wn11 | fb13.
    #[arg(long)]
    preset: Option<String>,
    /// Initialize the discriminator from an existing checkpoint.
    #[arg(long = "init-from")]
    init_from: Option<PathBuf>,
    /// Random-sampling warmup epochs for gan-pretrain without --init-from.
    #[arg(long = "pretrain-epochs")]
    pretrain_epochs: Option<usize>,
    /// Output directory for model.ckpt and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mask the gold entity out of the generator's sampling distribution.
    #[arg(long = "exclude-gold", num_args = 0..=1, default_missing_value = "true")]
    exclude_gold: Option<bool>,
    /// Report validation metrics every N epochs.
    #[arg(long = "valid-every")]
    valid_every: Option<usize>,
    /// Generator embedding width (defaults to --dim).
    #[arg(long = "gen-dim")]
    gen_dim: Option<usize>,
    /// Generator hidden width (defaults to --dim).
    #[arg(long = "gen-hidden")]
    gen_hidden: Option<usize>,
}

#[derive(Args)]
struct EvalLpArgs {
    /// Model checkpoint to evaluate.
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Split to rank: valid | test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Write per-triple ranks to this CSV.
    #[arg(long = "dump-ranks")]
    dump_ranks: Option<PathBuf>,
}

#[derive(Args)]
struct EvalTcArgs {
    /// Model checkpoint to evaluate.
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Write fitted per-relation thresholds to this file.
    #[arg(long = "thresholds-out")]
    thresholds_out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Checkpoint with generator parameters (adversarial regimes).
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// How many train positives to sample.
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    /// RNG seed for picking positives and sampling replacements.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => {
            let file = args.data.file_config()?;
            let inputs = TrainInputs {
                train: args.data.train.clone(),
                valid: args.data.valid.clone(),
                test: args.data.test.clone(),
                labeled: args.data.labeled,
                model: args.model.clone(),
                regime: args.regime.clone(),
                strategy: args.strategy.clone(),
                norm: args.norm.clone(),
                gamma: args.gamma,
                dim: args.dim,
                lr: args.lr,
                batch: args.batch,
                epochs: args.epochs,
                g_passes: args.g_passes,
                d_passes: args.d_passes,
                l2_gen: args.l2_gen,
                seed: args.seed,
                preset: args.preset.clone(),
                init_from: args.init_from.clone(),
                pretrain_epochs: args.pretrain_epochs,
                out: args.out.clone(),
                exclude_gold: args.exclude_gold,
                valid_every: args.valid_every,
                gen_dim: args.gen_dim,
                gen_hidden: args.gen_hidden,
            };
            let resolved = resolve_train(&inputs, &file)?;
            commands::cmd_train(&resolved)
        }
        Command::EvalLp(args) => {
            let file = args.data.file_config()?;
            let data = resolve_data_paths(
                args.data.train,
                args.data.valid,
                args.data.test,
                args.data.labeled,
                &file,
                None,
            )?;
            let split = SplitChoice::parse(&args.split)
                .ok_or_else(|| usage(format!("unknown split '{}' (valid | test)", args.split)))?;
            commands::cmd_eval_lp(&args.ckpt, &data, split, args.dump_ranks.as_deref())
        }
        Command::EvalTc(args) => {
            let file = args.data.file_config()?;
            let data = resolve_data_paths(
                args.data.train,
                args.data.valid,
                args.data.test,
                args.data.labeled,
                &file,
                Some(true),
            )?;
            commands::cmd_eval_tc(&args.ckpt, &data, args.thresholds_out.as_deref())
        }
        Command::SampleNegatives(args) => {
            let file = args.data.file_config()?;
            let data = resolve_data_paths(
                args.data.train,
                args.data.valid,
                args.data.test,
                args.data.labeled,
                &file,
                None,
            )?;
            commands::cmd_sample_negatives(&args.ckpt, &data, args.n, args.seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
