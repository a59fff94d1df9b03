//! Training loop with validation-based model selection, plus the evaluation
//! protocols: extrapolation tables, round sweeps and multi-seed aggregation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::graph::{Graph, TaskTag};
use crate::model::{Model, ModelConfig};
use crate::nn::{clip_gradients, Adam, AdamConfig, OptimizerState, PlateauScheduler};
use crate::taskgen::{class_weights, gen_task};

/// Sizes of the extrapolation table.
pub const DEFAULT_SIZES: [usize; 5] = [10, 50, 100, 1000, 10000];
/// Round counts of the stabilization sweep.
pub const DEFAULT_SWEEP_ROUNDS: [usize; 10] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000];
pub const DEFAULT_GRAPHS_PER_SIZE: usize = 10;
/// Evaluation graphs are drawn from seeds with the top bit set, a namespace
/// that small user-chosen training seeds never reach.
pub const EVAL_SEED_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub l2_coeff: f64,
    pub clip_max_norm: f64,
    pub clip_max_value: f64,
    pub train_rounds: usize,
    pub seeds: Vec<u64>,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub min_lr: f64,
    /// Coupled Adam weight decay; 0 disables it.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            initial_lr: 0.0004,
            l2_coeff: 0.0001,
            clip_max_norm: 5.0,
            clip_max_value: 1.0,
            train_rounds: 12,
            seeds: vec![0, 1, 2, 3, 4],
            scheduler_factor: 0.7,
            scheduler_patience: 20,
            min_lr: 1e-5,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_lr", self.initial_lr),
            ("clip_max_norm", self.clip_max_norm),
            ("clip_max_value", self.clip_max_value),
            ("scheduler_factor", self.scheduler_factor),
            ("min_lr", self.min_lr),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.l2_coeff >= 0.0 && self.l2_coeff.is_finite()) {
            return Err(Error::Config(format!("l2_coeff must be non-negative, got {}", self.l2_coeff)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.scheduler_factor >= 1.0 {
            return Err(Error::Config("scheduler_factor must be below 1".into()));
        }
        if self.scheduler_patience == 0 {
            return Err(Error::Config("scheduler_patience must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's steps (dropout active); empty for
    /// the epoch-0 evaluation of the initial parameters.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_f1: f64,
    pub lr: f64,
    /// Smallest validation loss seen so far.
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the smallest validation loss.
    pub best: Checkpoint,
    pub history: Vec<EpochRecord>,
}

/// Node-level binary F1 with class 1 as positive; 0 when undefined.
pub fn f1_score(preds: &[u8], labels: &[u8]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::usage(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut counts = Confusion::default();
    counts.add(preds, labels);
    Ok(counts.f1())
}

/// `⌈1.2·n⌉` rounds for graphs of size `n`.
pub fn rounds_for_size(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::usage("graph size must be positive"));
    }
    // Integer form of ceil(1.2 n) avoids 1.2 being inexact in binary.
    Ok((6 * n).div_ceil(5))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, preds: &[u8], labels: &[u8]) {
        for (&p, &l) in preds.iter().zip(labels) {
            match (p == 1, l == 1) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => self.tn += 1,
            }
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// Node-level metrics pooled over every node of every graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalRow {
    /// Largest graph size in the evaluated set.
    pub n: usize,
    pub rounds: usize,
    pub graphs: usize,
    pub nodes: usize,
    pub accuracy: f64,
    pub f1: f64,
}

fn check_dataset(config: &ModelConfig, graphs: &[Graph], what: &str) -> Result<()> {
    if graphs.is_empty() {
        return Err(Error::usage(format!("{what} set is empty")));
    }
    for (i, g) in graphs.iter().enumerate() {
        if g.features().cols() != config.in_dim {
            return Err(Error::Config(format!(
                "{what} graph {i} has {} features per node, model expects {}",
                g.features().cols(),
                config.in_dim
            )));
        }
    }
    Ok(())
}

/// Evaluation-mode metrics of `model` on `graphs` after `rounds` rounds.
pub fn evaluate(model: &Model, graphs: &[Graph], rounds: usize) -> Result<EvalRow> {
    check_dataset(model.config(), graphs, "evaluation")?;
    let mut counts = Confusion::default();
    for g in graphs {
        counts.add(&model.predict(g, rounds)?, g.labels());
    }
    Ok(EvalRow {
        n: graphs.iter().map(Graph::num_nodes).max().unwrap_or(0),
        rounds,
        graphs: graphs.len(),
        nodes: counts.total(),
        accuracy: counts.accuracy(),
        f1: counts.f1(),
    })
}

/// Mean evaluation-mode loss (cross-entropy + L2) and pooled metrics.
fn validate_model(
    model: &Model,
    graphs: &[Graph],
    rounds: usize,
    weights: &[f64; 2],
    l2: f64,
) -> Result<(f64, Confusion)> {
    let mut total = 0.0;
    let mut counts = Confusion::default();
    for g in graphs {
        let out = model.forward(g, rounds)?;
        let (ce, _) = crate::nn::weighted_cross_entropy(&out.logits, g.labels(), weights)?;
        let (l2_loss, _) = crate::nn::l2_state_loss(&out.states, l2)?;
        total += ce + l2_loss;
        let preds: Vec<u8> = out.logits.argmax_rows().into_iter().map(|c| c as u8).collect();
        counts.add(&preds, g.labels());
    }
    Ok((total / graphs.len() as f64, counts))
}

/// Trains one model with seed `seed`, one graph per optimizer step.
///
/// The seed drives parameter initialization, the per-epoch shuffle and
/// dropout, in that order, from a single stream. Class weights come from the
/// training set and are used for the validation loss too.
pub fn train(
    model_cfg: ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    train_set: &[Graph],
    val_set: &[Graph],
) -> Result<TrainOutcome> {
    train_observed(model_cfg, train_cfg, seed, train_set, val_set, |_| {})
}

/// [`train`] with a callback after every history row (for progress output).
pub fn train_observed(
    model_cfg: ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    train_set: &[Graph],
    val_set: &[Graph],
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    check_dataset(&model_cfg, train_set, "training")?;
    check_dataset(&model_cfg, val_set, "validation")?;
    let task = train_set[0].task();
    if let Some(g) = train_set.iter().chain(val_set).find(|g| g.task() != task) {
        return Err(Error::Config(format!(
            "mixed tasks in training data: {task} and {}",
            g.task()
        )));
    }
    let weights = class_weights(train_set)?;
    let rounds = train_cfg.train_rounds;
    let l2 = train_cfg.l2_coeff;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new(model_cfg, &mut rng)?;
    let mut optimizer = OptimizerState {
        adam: Adam::new(
            model.params(),
            AdamConfig {
                weight_decay: train_cfg.weight_decay,
                ..AdamConfig::default()
            },
        ),
        scheduler: PlateauScheduler::new(
            train_cfg.initial_lr,
            train_cfg.scheduler_factor,
            train_cfg.scheduler_patience,
            train_cfg.min_lr,
        ),
    };

    let (val_loss, counts) = validate_model(&model, val_set, rounds, &weights, l2)?;
    let mut best = Checkpoint {
        config: model_cfg,
        task,
        seed,
        epoch: 0,
        val_loss,
        params: model.params().clone(),
    };
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        val_loss,
        val_accuracy: counts.accuracy(),
        val_f1: counts.f1(),
        lr: optimizer.lr(),
        best_val_loss: val_loss,
    }];
    progress(&history[0]);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=train_cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let g = &train_set[i];
            let (loss, mut grads) = model.loss_and_gradient(g, rounds, &weights, l2, Some(&mut rng))?;
            let total = loss.total();
            if !total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    graph: i,
                    loss: total,
                });
            }
            epoch_loss += total;
            clip_gradients(&mut grads, train_cfg.clip_max_norm, train_cfg.clip_max_value);
            optimizer.step(model.params_mut(), &grads);
        }
        let (val_loss, counts) = validate_model(&model, val_set, rounds, &weights, l2)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                graph: usize::MAX,
                loss: val_loss,
            });
        }
        if val_loss < best.val_loss {
            best.val_loss = val_loss;
            best.epoch = epoch;
            best.params = model.params().clone();
        }
        let lr = optimizer.lr();
        optimizer.scheduler.step(val_loss);
        let record = EpochRecord {
            epoch,
            train_loss: Some(epoch_loss / train_set.len() as f64),
            val_loss,
            val_accuracy: counts.accuracy(),
            val_f1: counts.f1(),
            lr,
            best_val_loss: best.val_loss,
        };
        progress(&record);
        history.push(record);
    }
    Ok(TrainOutcome { best, history })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Outcome of running a protocol once per seed; failures do not stop the others.
#[derive(Debug)]
pub struct SeedRuns<T> {
    pub runs: Vec<(u64, Result<T>)>,
}

impl<T> SeedRuns<T> {
    pub fn successes(&self) -> impl Iterator<Item = (u64, &T)> {
        self.runs
            .iter()
            .filter_map(|(s, r)| r.as_ref().ok().map(|t| (*s, t)))
    }

    pub fn failed_seeds(&self) -> Vec<u64> {
        self.runs
            .iter()
            .filter(|(_, r)| r.is_err())
            .map(|(s, _)| *s)
            .collect()
    }

    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|(_, r)| r.is_ok())
    }

    /// Mean and sample std of `metric` over the successful runs.
    pub fn aggregate(&self, metric: impl Fn(&T) -> f64) -> (f64, f64) {
        let values: Vec<f64> = self.successes().map(|(_, t)| metric(t)).collect();
        mean_std(&values)
    }
}

/// Runs `protocol` for every seed in order.
pub fn run_seeds<T>(seeds: &[u64], mut protocol: impl FnMut(u64) -> Result<T>) -> Result<SeedRuns<T>> {
    if seeds.is_empty() {
        return Err(Error::usage("run_seeds needs at least one seed"));
    }
    Ok(SeedRuns {
        runs: seeds.iter().map(|&s| (s, protocol(s))).collect(),
    })
}

/// Held-out evaluation graphs of size `n`: the same for every checkpoint.
pub fn eval_graphs(task: TaskTag, n: usize, count: usize, eval_seed: u64) -> Result<Vec<Graph>> {
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED_BASE ^ eval_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ n as u64);
    (0..count).map(|_| gen_task(task, n, &mut rng)).collect()
}

/// One row of the extrapolation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationRow {
    pub n: usize,
    pub rounds: usize,
    pub graphs: usize,
    pub checkpoints: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone)]
pub struct ExtrapolationSpec {
    pub sizes: Vec<usize>,
    pub graphs_per_size: usize,
    /// Fixed round count for every size instead of [`rounds_for_size`].
    pub rounds_override: Option<usize>,
    pub eval_seed: u64,
}

impl Default for ExtrapolationSpec {
    fn default() -> Self {
        ExtrapolationSpec {
            sizes: DEFAULT_SIZES.to_vec(),
            graphs_per_size: DEFAULT_GRAPHS_PER_SIZE,
            rounds_override: None,
            eval_seed: 0,
        }
    }
}

/// Evaluates every checkpoint on fresh graphs of each size; the rows hold
/// mean ± sample std over checkpoints, `per_checkpoint[i][k]` the raw rows.
pub fn extrapolation_suite(
    checkpoints: &[Checkpoint],
    task: TaskTag,
    spec: &ExtrapolationSpec,
) -> Result<(Vec<ExtrapolationRow>, Vec<Vec<EvalRow>>)> {
    if checkpoints.is_empty() {
        return Err(Error::usage("no checkpoints to evaluate"));
    }
    if spec.sizes.is_empty() || spec.graphs_per_size == 0 {
        return Err(Error::usage("need at least one size and one graph per size"));
    }
    let models = checkpoints
        .iter()
        .map(|c| {
            c.expect_task(task)?;
            c.model()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut per_checkpoint = vec![Vec::new(); models.len()];
    for &n in &spec.sizes {
        let graphs = eval_graphs(task, n, spec.graphs_per_size, spec.eval_seed)?;
        let rounds = match spec.rounds_override {
            Some(r) => r,
            None => rounds_for_size(n)?,
        };
        let mut f1s = Vec::new();
        let mut accs = Vec::new();
        for (i, m) in models.iter().enumerate() {
            let row = evaluate(m, &graphs, rounds)?;
            f1s.push(row.f1);
            accs.push(row.accuracy);
            per_checkpoint[i].push(row);
        }
        let (f1_mean, f1_std) = mean_std(&f1s);
        let (accuracy_mean, accuracy_std) = mean_std(&accs);
        rows.push(ExtrapolationRow {
            n,
            rounds,
            graphs: graphs.len(),
            checkpoints: models.len(),
            f1_mean,
            f1_std,
            accuracy_mean,
            accuracy_std,
        });
    }
    Ok((rows, per_checkpoint))
}

/// Accuracy after a given number of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rounds: usize,
    pub accuracy: f64,
    pub f1: f64,
}

/// Accuracy versus executed rounds on fixed graphs, from a single forward
/// pass per graph up to the largest requested round count.
pub fn stabilization_sweep(model: &Model, graphs: &[Graph], round_counts: &[usize]) -> Result<Vec<SweepPoint>> {
    if !model.config().conv.is_recurrent() {
        return Err(Error::Config("the round sweep needs a recurrent model".into()));
    }
    check_dataset(model.config(), graphs, "sweep")?;
    if round_counts.is_empty() {
        return Err(Error::usage("no round counts given"));
    }
    let mut sorted: Vec<usize> = round_counts.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let max = *sorted.last().expect("non-empty");
    let mut counts = vec![Confusion::default(); sorted.len()];
    for g in graphs {
        let mut failure = None;
        model.forward_observed(g, max, |round, h| {
            if let Ok(k) = sorted.binary_search(&round) {
                match model.decode(h, g.features()) {
                    Ok(logits) => {
                        let preds: Vec<u8> = logits.argmax_rows().into_iter().map(|c| c as u8).collect();
                        counts[k].add(&preds, g.labels());
                    }
                    Err(e) => failure = Some(e),
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    // Report in the caller's order.
    round_counts
        .iter()
        .map(|r| {
            let k = sorted.binary_search(r).expect("present");
            Ok(SweepPoint {
                rounds: *r,
                accuracy: counts[k].accuracy(),
                f1: counts[k].f1(),
            })
        })
        .collect()
}
