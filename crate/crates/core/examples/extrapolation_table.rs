//! Train a few seeds on size-10 graphs and evaluate them on much larger
//! graphs with ⌈1.2·n⌉ rounds, reporting F1 as mean ± std over seeds.
//!
//! cargo run --release --example extrapolation_table -- [task] [epochs]

use recgnn::model::{ConvType, ModelConfig};
use recgnn::taskgen::{generate, split_dataset, GeneratorConfig};
use recgnn::train::{extrapolation_suite, run_seeds, train, ExtrapolationSpec, TrainConfig};
use recgnn::TaskTag;

fn main() -> recgnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let task: TaskTag = args.next().map(|s| s.parse()).transpose()?.unwrap_or(TaskTag::Distance);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let graphs = generate(&GeneratorConfig {
        task,
        num_graphs: 200,
        graph_size: 10,
        seed: 1,
    })?;
    let (train_set, val_set) = split_dataset(&graphs, 0.8)?;
    let cfg = TrainConfig {
        epochs,
        seeds: vec![0, 1, 2],
        ..TrainConfig::default()
    };
    let model_cfg = ModelConfig::new(ConvType::RecGruE, task.in_dim());
    let runs = run_seeds(&cfg.seeds, |seed| Ok(train(model_cfg, &cfg, seed, &train_set, &val_set)?.best))?;
    let checkpoints: Vec<_> = runs.successes().map(|(_, c)| c.clone()).collect();
    let spec = ExtrapolationSpec {
        sizes: vec![10, 50, 100, 500],
        graphs_per_size: 5,
        ..ExtrapolationSpec::default()
    };
    let (rows, _) = extrapolation_suite(&checkpoints, task, &spec)?;
    println!("{task}, RecGRU-E, {} seeds", checkpoints.len());
    println!("{:>6} {:>7}  F1", "n", "rounds");
    for r in rows {
        println!("{:>6} {:>7}  {:.2} ± {:.2}", r.n, r.rounds, r.f1_mean, r.f1_std);
    }
    Ok(())
}
