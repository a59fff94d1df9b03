//! Save a model as a text checkpoint, load it back and confirm that the
//! reloaded model computes exactly the same logits.
//!
//! cargo run --release --example checkpoint_roundtrip

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use recgnn::model::{ConvType, Model, ModelConfig};
use recgnn::taskgen::gen_prefix_sum;
use recgnn::{Checkpoint, TaskTag};

fn main() -> recgnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = Model::new(ModelConfig::new(ConvType::RecGruE, 2), &mut rng)?;
    let ckpt = Checkpoint {
        config: *model.config(),
        task: TaskTag::PrefixSum,
        seed: 11,
        epoch: 0,
        val_loss: f64::NAN,
        params: model.params().clone(),
    };
    let path = std::env::temp_dir().join("recgnn-example-checkpoint.txt");
    ckpt.save(&path)?;
    let loaded = Checkpoint::load(&path)?;

    let graph = gen_prefix_sum(50, &mut rng)?;
    let a = model.forward(&graph, 60)?;
    let b = loaded.model()?.forward(&graph, 60)?;
    let text = std::fs::read_to_string(&path).map_err(|e| recgnn::Error::Io { path: path.clone(), source: e })?;
    println!("{} lines, {} parameters", text.lines().count(), loaded.params.num_scalars());
    println!("identical logits after reload: {}", a == b);
    println!("{}", text.lines().take(8).collect::<Vec<_>>().join("\n"));
    Ok(())
}
