//! Train each recurrent convolution on size-10 graphs and compare accuracy
//! on size-100 graphs with 120 rounds.
//!
//! cargo run --release --example convolution_comparison -- [task] [epochs]

use recgnn::model::{ConvType, ModelConfig};
use recgnn::taskgen::{generate, split_dataset, GeneratorConfig};
use recgnn::train::{eval_graphs, evaluate, train, TrainConfig};
use recgnn::TaskTag;

fn main() -> recgnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let task: TaskTag = args.next().map(|s| s.parse()).transpose()?.unwrap_or(TaskTag::PrefixSum);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let graphs = generate(&GeneratorConfig {
        task,
        num_graphs: 200,
        graph_size: 10,
        seed: 1,
    })?;
    let (train_set, val_set) = split_dataset(&graphs, 0.8)?;
    let test = eval_graphs(task, 100, 10, 0)?;
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    for conv in [ConvType::RecGin, ConvType::RecGinE, ConvType::RecGru, ConvType::RecGruE] {
        let best = train(ModelConfig::new(conv, task.in_dim()), &cfg, 0, &train_set, &val_set)?.best;
        let row = evaluate(&best.model()?, &test, 120)?;
        println!(
            "{conv:<9} {:>6} parameters  n=100 accuracy {:.3}  F1 {:.3}",
            best.params.num_scalars(),
            row.accuracy,
            row.f1
        );
    }
    Ok(())
}
