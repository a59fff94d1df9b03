//! Accuracy on size-10 Distance graphs as the number of rounds grows to
//! 10,000, for a model trained with and without the L2 state loss.
//!
//! cargo run --release --example stabilization_sweep -- [epochs]

use recgnn::model::{ConvType, ModelConfig};
use recgnn::taskgen::{generate, split_dataset, GeneratorConfig};
use recgnn::train::{stabilization_sweep, train, TrainConfig, DEFAULT_SWEEP_ROUNDS};
use recgnn::TaskTag;

fn main() -> recgnn::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let graphs = generate(&GeneratorConfig {
        task: TaskTag::Distance,
        num_graphs: 200,
        graph_size: 10,
        seed: 1,
    })?;
    let (train_set, val_set) = split_dataset(&graphs, 0.8)?;
    let model_cfg = ModelConfig::new(ConvType::RecGruE, 1);
    let mut curves = Vec::new();
    for l2_coeff in [1e-4, 0.0] {
        let cfg = TrainConfig {
            epochs,
            l2_coeff,
            ..TrainConfig::default()
        };
        let best = train(model_cfg, &cfg, 0, &train_set, &val_set)?.best;
        curves.push(stabilization_sweep(&best.model()?, &val_set, &DEFAULT_SWEEP_ROUNDS)?);
    }
    println!("{:>7}  {:>8}  {:>8}", "rounds", "L2", "no L2");
    for (a, b) in curves[0].iter().zip(&curves[1]) {
        println!("{:>7}  {:>8.3}  {:>8.3}", a.rounds, a.accuracy, b.accuracy);
    }
    Ok(())
}
