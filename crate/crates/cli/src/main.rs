use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};

use licon::converter::convert_all;
use licon::io::{read_jsonl, write_json, write_jsonl};
use licon::loss::{cons_loss, cons_loss_grad, joint_loss, LossConfig, PropPair, DEFAULT_EPSILON};
use licon::metric::{self, FlipStrategy, PredictionRecord, PredictionSet};
use licon::relations::{
    build_graph, ImageId, ImplicationGraph, Proposition, PropositionSet, RelationRecord,
};
use licon::synth::{generate, GenerateConfig, KindDistribution, SyntheticDataset};
use licon::trainer::sweep::lambda_sweep;
use licon::trainer::{train_run, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "licon",
    version,
    about = "Logical-implication consistency tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark directory.
    Generate(GenerateArgs),
    /// Train the logistic toy model and dump held-out metrics and predictions.
    TrainToy(TrainArgs),
    /// Train over a grid of lambdas and seeds; write one CSV row per run.
    Sweep(SweepArgs),
    /// Evaluate the consistency loss and its gradient at one point.
    LossEval(LossArgs),
    /// Score predictions against propositions and relations.
    Score(ScoreArgs),
    /// Apply a flip-correction baseline to a prediction file.
    Flip(FlipArgs),
    /// Rewrite binary questions as declarative propositions.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    worlds: usize,
    #[arg(long, default_value_t = 12)]
    attrs: usize,
    #[arg(long, default_value_t = 8)]
    queries: usize,
    /// Attribute pool size per world.
    #[arg(long, default_value_t = 4)]
    focus: usize,
    /// Steer relation kinds toward the Introspect label shares.
    #[arg(long)]
    match_distribution: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainingFlags {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_pairs: usize,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
}

impl TrainingFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_pairs: self.batch_pairs,
            dropout_rate: self.dropout,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    training: TrainingFlags,
    /// Output directory for metrics.json and predictions.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.01,0.05,0.1,0.25,0.5,1.0"
    )]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[command(flatten)]
    training: TrainingFlags,
    #[arg(long)]
    out_csv: PathBuf,
    /// Optional per-lambda mean/std table.
    #[arg(long)]
    summary_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[arg(long)]
    pi1: f64,
    #[arg(long)]
    pi2: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Task loss added to the weighted consistency term.
    #[arg(long, default_value_t = 0.0)]
    vqa_loss: f64,
}

#[derive(Debug, Args)]
struct Inputs {
    #[arg(long)]
    propositions: PathBuf,
    #[arg(long)]
    relations: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
}

impl Inputs {
    fn load(&self) -> anyhow::Result<(PropositionSet, ImplicationGraph, PredictionSet)> {
        let props: PropositionSet = read_jsonl::<Proposition>(&self.propositions)?
            .into_iter()
            .collect::<licon::Result<_>>()?;
        let records: Vec<RelationRecord> = read_jsonl(&self.relations)?;
        let graph = build_graph(&props, &records)?;
        let preds =
            PredictionSet::from_records(read_jsonl::<PredictionRecord>(&self.predictions)?)?;
        preds.check_against(&props)?;
        // Score only the images the prediction file covers.
        let images: BTreeSet<ImageId> = preds.iter().map(|((img, _), _)| img.clone()).collect();
        Ok((props.restrict(&images), graph.restrict(&images), preds))
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FlipArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_parser = parse_strategy)]
    strategy: FlipStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrected prediction file.
    #[arg(long)]
    out: PathBuf,
}

fn parse_strategy(s: &str) -> Result<FlipStrategy, String> {
    s.parse().map_err(|e: licon::Error| e.to_string())
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Proposition JSON Lines.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rejected rows with reasons; defaults to `<out>.errors.jsonl`.
    #[arg(long)]
    errors: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => run_generate(a),
        Command::TrainToy(a) => run_train(a),
        Command::Sweep(a) => run_sweep(a),
        Command::LossEval(a) => run_loss(a),
        Command::Score(a) => run_score(a),
        Command::Flip(a) => run_flip(a),
        Command::Convert(a) => run_convert(a),
    }
}

fn load_dataset(dir: &Path) -> anyhow::Result<SyntheticDataset> {
    SyntheticDataset::read_dir(dir)
        .with_context(|| format!("loading dataset from {}", dir.display()))
}

fn run_generate(a: GenerateArgs) -> anyhow::Result<()> {
    let cfg = GenerateConfig {
        seed: a.seed,
        n_worlds: a.worlds,
        n_attr: a.attrs,
        queries_per_world: a.queries,
        focus_attrs: a.focus,
        match_distribution: a.match_distribution.then_some(KindDistribution::INTROSPECT),
    };
    let ds = generate(&cfg)?;
    ds.write_dir(&a.out)?;
    let c = ds.kind_counts();
    println!(
        "worlds={} propositions={} relations={}",
        ds.worlds.len(),
        ds.propositions().len(),
        c.total()
    );
    for k in licon::relations::RelationKind::ALL {
        println!(
            "{:<11} {:>3} {:>6}  {:>5.1}%",
            k.as_str(),
            k.symbol(),
            c.get(k),
            100.0 * c.fraction(k)
        );
    }
    println!("out={}", a.out.display());
    Ok(())
}

fn run_train(a: TrainArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = TrainConfig {
        lambda: a.lambda,
        seed: a.seed,
        ..a.training.config()
    };
    let run = train_run(&ds, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    write_json(a.out.join("metrics.json"), &run.history)?;
    write_jsonl(
        a.out.join("predictions.jsonl"),
        &run.heldout_predictions.to_records(),
    )?;
    let last = run.history.epochs.last().expect("epochs > 0");
    println!(
        "lambda={} seed={} train_loss={:.6} accuracy={:.4} consistency={:.4}",
        cfg.lambda, cfg.seed, last.train_loss, last.accuracy, last.consistency
    );
    print!("{}", run.history.final_report);
    Ok(())
}

fn run_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.data)?;
    let table = lambda_sweep(&ds, &a.lambdas, &a.seeds, &a.training.config())?;
    table.write_csv(BufWriter::new(File::create(&a.out_csv)?))?;
    if let Some(path) = &a.summary_csv {
        table.write_summary_csv(BufWriter::new(File::create(path)?))?;
    }
    print!("{}", table.render_table());
    Ok(())
}

fn run_loss(a: LossArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&a.pi1) || !(0.0..=1.0).contains(&a.pi2) {
        bail!("pi1 and pi2 must lie in [0, 1]");
    }
    let cfg = LossConfig {
        lambda: a.lambda,
        epsilon: a.epsilon,
    };
    cfg.validate()?;
    let pair = PropPair::new(a.pi1, a.pi2);
    let (g1, g2) = cons_loss_grad(pair, &cfg);
    println!("cons_loss={:.12}", cons_loss(pair, &cfg));
    println!("grad_pi1={g1:.12}");
    println!("grad_pi2={g2:.12}");
    println!("joint_loss={:.12}", joint_loss(a.vqa_loss, &[pair], &cfg));
    Ok(())
}

fn run_score(a: ScoreArgs) -> anyhow::Result<()> {
    let (props, graph, preds) = a.inputs.load()?;
    let report = metric::report(&graph, &props, &preds)?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    print!("{report}");
    Ok(())
}

fn run_flip(a: FlipArgs) -> anyhow::Result<()> {
    let (props, graph, preds) = a.inputs.load()?;
    let before = metric::report(&graph, &props, &preds)?;
    let flipped = metric::flip_correction(&graph, &props, &preds, a.strategy, a.seed)?;
    let after = metric::report(&graph, &props, &flipped)?;
    write_jsonl(&a.out, &flipped.to_records())?;
    println!("{:<8} {:>10} {:>12}", "", "accuracy", "consistency");
    println!(
        "{:<8} {:>9.2}% {:>11.2}%",
        "before",
        100.0 * before.accuracy,
        100.0 * before.consistency
    );
    println!(
        "{:<8} {:>9.2}% {:>11.2}%",
        "after",
        100.0 * after.accuracy,
        100.0 * after.consistency
    );
    Ok(())
}

fn run_convert(a: ConvertArgs) -> anyhow::Result<()> {
    let props: Vec<Proposition> = read_jsonl(&a.input)?;
    let (ok, rejected) = convert_all(&props);
    write_jsonl(&a.out, &ok)?;
    let errors = a.errors.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".errors.jsonl");
        p.into()
    });
    write_jsonl(&errors, &rejected)?;
    println!("converted={} rejected={}", ok.len(), rejected.len());
    if !rejected.is_empty() {
        println!("errors={}", errors.display());
    }
    Ok(())
}
