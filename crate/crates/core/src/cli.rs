//! The `recgnn` command line: argument parsing and the six commands.
//!
//! Every command resolves its settings as defaults < `--config` file <
//! flags, and every artifact depends only on the arguments, so repeating a
//! command line reproduces its files byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{read_task_jsonl, write_jsonl};
use crate::error::{Error, Result};
use crate::export::{dot_frame, trace_jsonl, write_csv, write_text};
use crate::graph::{Graph, TaskTag};
use crate::manifest::Manifest;
use crate::model::{ConvType, GruStateInput};
use crate::taskgen::{generate, split_dataset};
use crate::train::{
    eval_graphs, evaluate, extrapolation_suite, mean_std, rounds_for_size, run_seeds, stabilization_sweep,
    train_observed, ExtrapolationSpec, DEFAULT_GRAPHS_PER_SIZE, DEFAULT_SIZES, DEFAULT_SWEEP_ROUNDS,
};

#[derive(Debug, Parser)]
#[command(name = "recgnn", version, about = "Recurrent GNNs that extrapolate graph algorithms to larger graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a JSON-lines dataset of one task.
    Generate(GenerateArgs),
    /// Train one model per seed and keep the best validation checkpoint of each.
    Train(TrainArgs),
    /// F1 table over graph sizes, mean ± std over checkpoints.
    Extrapolate(ExtrapolateArgs),
    /// Accuracy versus number of executed rounds on fixed graphs.
    SweepRounds(SweepArgs),
    /// Per-round predictions of one graph as JSON lines and DOT frames.
    Trace(TraceArgs),
    /// Accuracy and F1 of one checkpoint on a dataset.
    Eval(EvalArgs),
}

/// Overrides shared by every command that reads a `RunConfig`.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Flat key-value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub task: Option<TaskTag>,
    /// Nodes per graph.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of graphs.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Training dataset (JSON lines). Without `--val` it is split by `train_fraction`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<TaskTag>,
    #[arg(long)]
    pub conv: Option<ConvType>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train a single seed (shorthand for `--seeds s`).
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Drop the input-feature skip connection.
    #[arg(long)]
    pub no_skip: bool,
    /// Feed the raw state instead of the skip output to the GRU.
    #[arg(long)]
    pub raw_gru_state: bool,
    #[arg(long)]
    pub decoder_sees_input: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Print one line per epoch.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct ExtrapolateArgs {
    /// Checkpoint files, one per training seed.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub task: TaskTag,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES.to_vec())]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_GRAPHS_PER_SIZE)]
    pub graphs_per_size: usize,
    /// Fixed round count for every size (default: ⌈1.2·n⌉).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Seed of the held-out evaluation graphs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub checkpoints: Vec<PathBuf>,
    /// Evaluation graphs; generated from `--n/--count/--seed` when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_GRAPHS_PER_SIZE)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_ROUNDS.to_vec())]
    pub rounds: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset holding the graph to trace; generated from `--n/--seed` when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Line of `--data` to trace.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rounds to execute (default: ⌈1.2·n⌉).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Rounds to render as DOT (default: all).
    #[arg(long, value_delimiter = ',')]
    pub frames: Option<Vec<usize>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset; generated from `--n/--count/--seed` when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_GRAPHS_PER_SIZE)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rounds to execute (default: ⌈1.2·n⌉ of the largest graph).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Also write the metrics row as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("recgnn: {e}");
            1
        }
    }
}

/// Runs one parsed command, writing human-readable progress to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Extrapolate(a) => cmd_extrapolate(a, out),
        Command::SweepRounds(a) => cmd_sweep_rounds(a, out),
        Command::Trace(a) => cmd_trace(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) {
    // Progress output is best effort; a closed stdout must not fail a run.
    let _ = writeln!(out, "{text}");
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(t) = a.task {
        cfg.task = t;
    }
    if let Some(n) = a.n {
        cfg.graph_size = n;
    }
    if let Some(c) = a.count {
        cfg.num_graphs = c;
    }
    if let Some(s) = a.seed {
        cfg.data_seed = s;
    }
    let graphs = generate(&cfg.generator())?;
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &graphs)?;
    let nodes: usize = graphs.iter().map(Graph::num_nodes).sum();
    let positives: usize = graphs
        .iter()
        .map(|g| g.labels().iter().filter(|&&l| l == 1).count())
        .sum();
    say(
        out,
        format_args!(
            "wrote {} {} graphs of size {} to {}: {} nodes, {} labelled 1 ({:.3})",
            graphs.len(),
            cfg.task,
            cfg.graph_size,
            a.out.display(),
            nodes,
            positives,
            positives as f64 / nodes as f64
        ),
    );
    Ok(())
}

/// Settings of `train` after applying flags over the config file.
pub fn resolve_train_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = a.config.load()?;
    if let Some(v) = a.task {
        cfg.task = v;
    }
    if let Some(v) = a.conv {
        cfg.conv = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.seed {
        cfg.seeds = vec![v];
    }
    if let Some(v) = &a.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = a.lr {
        cfg.initial_lr = v;
    }
    if let Some(v) = a.l2 {
        cfg.l2_coeff = v;
    }
    if let Some(v) = a.dropout {
        cfg.dropout = v;
    }
    if let Some(v) = a.rounds {
        cfg.train_rounds = v;
    }
    if let Some(v) = a.weight_decay {
        cfg.weight_decay = v;
    }
    if let Some(v) = a.train_fraction {
        cfg.train_fraction = v;
    }
    if a.no_skip {
        cfg.skip_input = false;
    }
    if a.raw_gru_state {
        cfg.gru_state = GruStateInput::RawState;
    }
    if a.decoder_sees_input {
        cfg.decoder_sees_input = true;
    }
    if let Some(v) = &a.out_dir {
        cfg.out_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("checkpoint-seed{seed}.txt"))
}

pub fn history_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("history-seed{seed}.csv"))
}

#[derive(serde::Serialize)]
struct SeedSummary {
    seed: u64,
    status: String,
    best_epoch: Option<usize>,
    best_val_loss: Option<f64>,
    val_accuracy: Option<f64>,
    val_f1: Option<f64>,
}

pub fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_train_config(&a)?;
    let data = read_task_jsonl(&a.data, cfg.task)?;
    let (train_set, val_set) = match &a.val {
        Some(v) => (data, read_task_jsonl(v, cfg.task)?),
        None => split_dataset(&data, cfg.train_fraction)?,
    };
    let dir = cfg.out_dir.clone();
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new("train", &cfg);
    manifest.add_input("train_data", &a.data)?;
    if let Some(v) = &a.val {
        manifest.add_input("val_data", v)?;
    }
    say(
        out,
        format_args!(
            "training {} on {} ({} train / {} validation graphs), seeds {:?}",
            cfg.conv,
            cfg.task,
            train_set.len(),
            val_set.len(),
            cfg.seeds
        ),
    );
    let model_cfg = cfg.model();
    let train_cfg = cfg.train();
    let verbose = a.verbose;
    let runs = run_seeds(&cfg.seeds, |seed| {
        let outcome = train_observed(model_cfg, &train_cfg, seed, &train_set, &val_set, |r| {
            if verbose {
                say(
                    out,
                    format_args!(
                        "  seed {seed} epoch {:>4}  val_loss {:.5}  val_acc {:.4}  lr {:.2e}",
                        r.epoch, r.val_loss, r.val_accuracy, r.lr
                    ),
                );
            }
        })?;
        let ckpt = checkpoint_path(&dir, seed);
        outcome.best.save(&ckpt)?;
        let hist = history_path(&dir, seed);
        write_csv(&hist, &outcome.history)?;
        let best = outcome.history[outcome.best.epoch];
        say(
            out,
            format_args!(
                "seed {seed}: best epoch {} val_loss {:.5} val_acc {:.4} -> {}",
                best.epoch,
                best.val_loss,
                best.val_accuracy,
                ckpt.display()
            ),
        );
        Ok((ckpt, hist, best))
    })?;

    let mut summary = Vec::new();
    for (seed, result) in &runs.runs {
        match result {
            Ok((ckpt, hist, best)) => {
                manifest.add_output(&format!("checkpoint_seed{seed}"), ckpt)?;
                manifest.add_output(&format!("history_seed{seed}"), hist)?;
                summary.push(SeedSummary {
                    seed: *seed,
                    status: "ok".into(),
                    best_epoch: Some(best.epoch),
                    best_val_loss: Some(best.val_loss),
                    val_accuracy: Some(best.val_accuracy),
                    val_f1: Some(best.val_f1),
                });
            }
            Err(e) => {
                say(out, format_args!("seed {seed} FAILED: {e}"));
                summary.push(SeedSummary {
                    seed: *seed,
                    status: format!("failed: {e}"),
                    best_epoch: None,
                    best_val_loss: None,
                    val_accuracy: None,
                    val_f1: None,
                });
            }
        }
    }
    let summary_path = dir.join("summary.csv");
    write_csv(&summary_path, &summary)?;
    manifest.add_output("summary", &summary_path)?;
    cfg.save(&dir.join("config.toml"))?;
    manifest.save(&dir.join("manifest.toml"))?;
    let (mean, std) = runs.aggregate(|(_, _, best)| best.val_accuracy);
    say(
        out,
        format_args!("validation accuracy {mean:.4} ± {std:.4} over {} seed(s)", runs.successes().count()),
    );
    let failed = runs.failed_seeds();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("training failed for seeds {failed:?}")))
    }
}

fn load_checkpoints(paths: &[PathBuf]) -> Result<Vec<Checkpoint>> {
    paths.iter().map(|p| Checkpoint::load(p)).collect()
}

pub fn cmd_extrapolate(a: ExtrapolateArgs, out: &mut dyn Write) -> Result<()> {
    let checkpoints = load_checkpoints(&a.checkpoints)?;
    let spec = ExtrapolationSpec {
        sizes: a.sizes.clone(),
        graphs_per_size: a.graphs_per_size,
        rounds_override: a.rounds,
        eval_seed: a.seed,
    };
    if a.sizes.iter().any(|&n| n >= 10_000) {
        say(out, format_args!("note: sizes of 10,000 nodes take minutes per checkpoint"));
    }
    let (rows, _) = extrapolation_suite(&checkpoints, a.task, &spec)?;
    ensure_parent(&a.out)?;
    write_csv(&a.out, &rows)?;
    for r in &rows {
        say(
            out,
            format_args!(
                "n={:<6} rounds={:<6} F1 {:.2} ± {:.2}  accuracy {:.2} ± {:.2}",
                r.n, r.rounds, r.f1_mean, r.f1_std, r.accuracy_mean, r.accuracy_std
            ),
        );
    }
    Ok(())
}

/// Graphs from a dataset file or freshly generated held-out ones.
fn eval_data(task: TaskTag, data: &Option<PathBuf>, n: usize, count: usize, seed: u64) -> Result<Vec<Graph>> {
    match data {
        Some(path) => read_task_jsonl(path, task),
        None => eval_graphs(task, n, count, seed),
    }
}

#[derive(serde::Serialize)]
struct SweepRow {
    rounds: usize,
    checkpoints: usize,
    accuracy_mean: f64,
    accuracy_std: f64,
    f1_mean: f64,
    f1_std: f64,
}

pub fn cmd_sweep_rounds(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let checkpoints = load_checkpoints(&a.checkpoints)?;
    let task = checkpoints[0].task;
    let graphs = eval_data(task, &a.data, a.n, a.count, a.seed)?;
    let mut curves = Vec::new();
    for c in &checkpoints {
        c.expect_task(task)?;
        curves.push(stabilization_sweep(&c.model()?, &graphs, &a.rounds)?);
    }
    let rows: Vec<SweepRow> = a
        .rounds
        .iter()
        .enumerate()
        .map(|(k, &rounds)| {
            let accs: Vec<f64> = curves.iter().map(|c| c[k].accuracy).collect();
            let f1s: Vec<f64> = curves.iter().map(|c| c[k].f1).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&accs);
            let (f1_mean, f1_std) = mean_std(&f1s);
            SweepRow {
                rounds,
                checkpoints: curves.len(),
                accuracy_mean,
                accuracy_std,
                f1_mean,
                f1_std,
            }
        })
        .collect();
    ensure_parent(&a.out)?;
    write_csv(&a.out, &rows)?;
    for r in &rows {
        say(
            out,
            format_args!("rounds={:<6} accuracy {:.4} ± {:.4}", r.rounds, r.accuracy_mean, r.accuracy_std),
        );
    }
    Ok(())
}

pub fn cmd_trace(a: TraceArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let graph = match &a.data {
        Some(path) => {
            let graphs = read_task_jsonl(path, ckpt.task)?;
            let len = graphs.len();
            graphs
                .into_iter()
                .nth(a.index)
                .ok_or_else(|| Error::usage(format!("--index {} but the dataset has {len} graphs", a.index)))?
        }
        None => eval_graphs(ckpt.task, a.n, 1, a.seed)?.remove(0),
    };
    let rounds = match a.rounds {
        Some(r) => r,
        None => rounds_for_size(graph.num_nodes())?,
    };
    let model = ckpt.model()?;
    let (_, trace) = model.forward_trace(&graph, rounds)?;
    ensure_dir(&a.out_dir)?;
    write_text(&a.out_dir.join("trace.jsonl"), &trace_jsonl(&graph, &trace))?;
    let frames: Vec<usize> = match &a.frames {
        Some(f) => f.clone(),
        None => (0..=rounds).collect(),
    };
    for &r in &frames {
        let frame = trace
            .frames
            .get(r)
            .ok_or_else(|| Error::usage(format!("frame {r} requested but only {rounds} rounds ran")))?;
        let dot = dot_frame(&graph, &frame.predictions, r)?;
        write_text(&a.out_dir.join(format!("frame-{r:05}.dot")), &dot)?;
    }
    let last = trace.frames.last().expect("round 0 is always recorded");
    let correct = last
        .predictions
        .iter()
        .zip(graph.labels())
        .filter(|(p, l)| p == l)
        .count();
    say(
        out,
        format_args!(
            "traced {} rounds on a {}-node {} graph: {} frames, {} DOT files, final {correct}/{} correct",
            rounds,
            graph.num_nodes(),
            graph.task(),
            trace.frames.len(),
            frames.len(),
            graph.num_nodes()
        ),
    );
    Ok(())
}

pub fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let graphs = eval_data(ckpt.task, &a.data, a.n, a.count, a.seed)?;
    let largest = graphs.iter().map(Graph::num_nodes).max().unwrap_or(1);
    let rounds = match a.rounds {
        Some(r) => r,
        None => rounds_for_size(largest)?,
    };
    let row = evaluate(&ckpt.model()?, &graphs, rounds)?;
    if let Some(path) = &a.out {
        ensure_parent(path)?;
        write_csv(path, &[row])?;
    }
    say(
        out,
        format_args!(
            "{} graphs, {} nodes, {} rounds: accuracy {:.4} F1 {:.4}",
            row.graphs, row.nodes, row.rounds, row.accuracy, row.f1
        ),
    );
    Ok(())
}
