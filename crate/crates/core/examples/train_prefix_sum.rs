//! Train RecGRU-E on Prefix Sum graphs of size 10 and watch the validation
//! loss; the best epoch becomes the checkpoint.
//!
//! cargo run --release --example train_prefix_sum -- [epochs]

use recgnn::model::{ConvType, ModelConfig};
use recgnn::taskgen::{generate, split_dataset, GeneratorConfig};
use recgnn::train::{train_observed, TrainConfig};
use recgnn::TaskTag;

fn main() -> recgnn::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let graphs = generate(&GeneratorConfig {
        task: TaskTag::PrefixSum,
        num_graphs: 200,
        graph_size: 10,
        seed: 1,
    })?;
    let (train_set, val_set) = split_dataset(&graphs, 0.8)?;
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let outcome = train_observed(
        ModelConfig::new(ConvType::RecGruE, TaskTag::PrefixSum.in_dim()),
        &cfg,
        0,
        &train_set,
        &val_set,
        |r| {
            if r.epoch % 5 == 0 {
                println!(
                    "epoch {:>4}  train {:>8}  val {:.5}  val acc {:.3}  lr {:.2e}",
                    r.epoch,
                    r.train_loss.map_or("-".to_string(), |l| format!("{l:.5}")),
                    r.val_loss,
                    r.val_accuracy,
                    r.lr
                );
            }
        },
    )?;
    let best = outcome.history[outcome.best.epoch];
    println!(
        "best epoch {} with validation loss {:.5} and accuracy {:.3}",
        best.epoch, best.val_loss, best.val_accuracy
    );
    Ok(())
}
