use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fsncd::data::{generate_synthetic, io, EpisodeConfig, LabeledEmbeddings, SplitManifest};
use fsncd::eval::{run_episodes, Method, MethodParams, RunConfig, Scenario};
use fsncd::ukc::DEFAULT_MAX_OUTER;
use fsncd::{ClassId, Metric};

#[derive(Parser)]
#[command(name = "fsncd", version, about = "Few-shot novel category discovery over embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a clustering method over sampled episodes and write a JSON report.
    Run(RunArgs),
    /// Write a synthetic dataset: embeddings.emb, labels.lbl and split.json.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Shc,
    Ukc,
    Protonet,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Episodic,
    Realtime,
    Largescale,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, default_value_t = 5)]
    way: usize,
    #[arg(long, default_value_t = 5)]
    shot: usize,
    /// Novel classes mixed into every query set.
    #[arg(long, default_value_t = 5)]
    new: usize,
    /// Queries per class.
    #[arg(long, default_value_t = 15)]
    queries: usize,
    #[arg(long, default_value_t = 600)]
    episodes: usize,
    #[arg(long, default_value_t = fsncd::ukc::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = fsncd::shc::DEFAULT_THRESHOLD)]
    threshold: usize,
    #[arg(long, value_enum, default_value = "episodic")]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = fsncd::scalable::DEFAULT_SUBSAMPLE)]
    subsample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "cosine")]
    metric: MetricArg,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> fsncd::Result<()> {
    let embeddings = io::load_embeddings(&args.embeddings)?;
    let labels = io::load_labels(&args.labels)?;
    let data = LabeledEmbeddings::new(embeddings.normalize_rows()?, labels)?;
    let split = io::load_split(&args.split)?;
    let cfg = RunConfig {
        episode: EpisodeConfig {
            way: args.way,
            shot: args.shot,
            n_new: args.new,
            q_per_class: args.queries,
            episodes: args.episodes,
            seed: args.seed,
        },
        scenario: match args.scenario {
            ScenarioArg::Episodic => Scenario::Episodic,
            ScenarioArg::Realtime => Scenario::Realtime,
            ScenarioArg::Largescale => Scenario::LargeScale,
        },
        params: MethodParams {
            alpha: args.alpha,
            threshold: args.threshold,
            subsample: args.subsample,
            metric: match args.metric {
                MetricArg::Cosine => Metric::Cosine,
                MetricArg::Euclidean => Metric::SquaredEuclidean,
            },
            max_outer: DEFAULT_MAX_OUTER,
        },
    };
    let method = match args.method {
        MethodArg::Shc => Method::Shc,
        MethodArg::Ukc => Method::Ukc,
        MethodArg::Protonet => Method::Protonet,
    };
    let report = run_episodes(&data, &split, &cfg, method)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match args.output {
        Some(path) => fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn synth(args: SynthArgs) -> fsncd::Result<()> {
    let data = generate_synthetic(args.classes, args.per_class, args.dim, args.noise, args.seed)?;
    let half = (args.classes / 2) as ClassId;
    let base: BTreeSet<ClassId> = (0..half).collect();
    let novel: BTreeSet<ClassId> = (half..args.classes as ClassId).collect();
    let split = SplitManifest::new(base, novel)?;
    fs::create_dir_all(&args.out)?;
    io::write_embeddings(args.out.join("embeddings.emb"), &data.embeddings)?;
    io::write_labels(args.out.join("labels.lbl"), &data.labels)?;
    io::write_split(args.out.join("split.json"), &split)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
