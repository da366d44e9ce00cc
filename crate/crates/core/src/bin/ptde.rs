use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ptde::dataset::{load_manifest, load_split, load_video_bag, Split};
use ptde::loss::{DEFAULT_LAMBDA1, DEFAULT_LAMBDA2};
use ptde::metrics::{per_category_eval, roc_curve, score_bags, DEFAULT_THRESHOLD};
use ptde::synth::{generate_synthetic, SynthSpec, DEFAULT_TEST_COUNTS, DEFAULT_TRAIN_COUNTS};
use ptde::trainer::{
    train, TrainConfig, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_PAIRS_PER_EPOCH,
};
use ptde::{load_checkpoint, save_checkpoint, FusionMode, Result};

#[derive(Parser)]
#[command(name = "ptde", version, about = "Package-theft segment scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with mock extractor output
    Synth(SynthArgs),
    /// Train a scoring head on the train split
    Train(TrainArgs),
    /// Print per-segment scores for one video, one per line
    Score(ScoreArgs),
    /// Evaluate the test split and print a JSON report
    Eval(EvalArgs),
    /// Export the test-split ROC curve
    Roc(RocArgs),
}

fn parse_counts(s: &str) -> std::result::Result<[usize; 4], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "expected four counts: theft,pickup,delivery,irrelevant".to_owned())
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, env = "PTDE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.3)]
    theft_fraction: f64,
    #[arg(long, default_value_t = 32)]
    segment_length: usize,
    #[arg(long, default_value_t = 4)]
    min_segments: usize,
    #[arg(long, default_value_t = 8)]
    max_segments: usize,
    /// Per-category train videos: theft,pickup,delivery,irrelevant
    #[arg(long, value_parser = parse_counts)]
    train_counts: Option<[usize; 4]>,
    #[arg(long, value_parser = parse_counts)]
    test_counts: Option<[usize; 4]>,
    /// Skip pose files
    #[arg(long)]
    no_pose: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_checkpoint: PathBuf,
    /// Run log path; defaults to the checkpoint path with a `.log` suffix
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value = "global-local")]
    fusion: FusionMode,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA1, allow_negative_numbers = true)]
    lambda1: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA2, allow_negative_numbers = true)]
    lambda2: f64,
    #[arg(long, env = "PTDE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PAIRS_PER_EPOCH)]
    pairs_per_epoch: usize,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    video_id: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_svg: Option<PathBuf>,
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        seed: args.seed,
        train_counts: args.train_counts.unwrap_or(DEFAULT_TRAIN_COUNTS),
        test_counts: args.test_counts.unwrap_or(DEFAULT_TEST_COUNTS),
        min_segments: args.min_segments,
        max_segments: args.max_segments,
        feature_dim: args.dim,
        separation: args.separation,
        noise: args.noise,
        theft_fraction: args.theft_fraction,
        segment_length: args.segment_length,
        with_pose: !args.no_pose,
        ..SynthSpec::default()
    };
    let path = generate_synthetic(&spec, &args.out_dir)?;
    println!("{}", path.display());
    Ok(())
}

fn default_log_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let bags = load_split(&manifest, Split::Train, args.fusion)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        pairs_per_epoch: args.pairs_per_epoch,
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        seed: args.seed,
        fusion_mode: args.fusion,
        ..TrainConfig::default()
    };
    let run = train(&bags, &config)?;
    save_checkpoint(&run.head, &run.config, &args.out_checkpoint)?;
    let log = args
        .log
        .unwrap_or_else(|| default_log_path(&args.out_checkpoint));
    run.write_log(&log)?;
    if let Some(last) = run.history.last() {
        eprintln!(
            "trained {} epochs on {} bags; final objective {:.6} (hinge {:.6})",
            last.epoch,
            bags.len(),
            last.total,
            last.hinge
        );
    }
    Ok(())
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let (head, config) = load_checkpoint(&args.checkpoint)?;
    let manifest = load_manifest(&args.manifest)?;
    let bag = load_video_bag(&manifest, &args.video_id, config.fusion_mode)?;
    for s in head.score_segments(&bag.segments)? {
        println!("{s}");
    }
    Ok(())
}

fn test_scores(checkpoint: &Path, manifest: &Path) -> Result<Vec<ptde::metrics::ScoredVideo>> {
    let (head, config) = load_checkpoint(checkpoint)?;
    let manifest = load_manifest(manifest)?;
    let bags = load_split(&manifest, Split::Test, config.fusion_mode)?;
    score_bags(&head, &bags)
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let scored = test_scores(&args.checkpoint, &args.manifest)?;
    let report = per_category_eval(&scored, args.threshold)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

fn roc_cmd(args: RocArgs) -> Result<()> {
    let scored = test_scores(&args.checkpoint, &args.manifest)?;
    let scores: Vec<f64> = scored
        .iter()
        .flat_map(|v| v.scores.iter().copied())
        .collect();
    let labels: Vec<bool> = scored
        .iter()
        .flat_map(|v| v.labels.iter().copied())
        .collect();
    let roc = roc_curve(&scores, &labels)?;
    roc.write_csv(&args.out_csv)?;
    if let Some(svg) = &args.out_svg {
        roc.write_svg(svg)?;
    }
    eprintln!("auc {:.6} over {} segments", roc.area(), scores.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Roc(a) => roc_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
