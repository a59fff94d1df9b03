//! Relabel the nodes of a graph and check that every convolution produces
//! the same per-node outputs, bit for bit.
//!
//! cargo run --release --example permutation_equivariance

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use recgnn::graph::invert_permutation;
use recgnn::model::{ConvType, Model, ModelConfig};
use recgnn::taskgen::gen_distance;

fn main() -> recgnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let graph = gen_distance(40, &mut rng)?;
    let mut perm: Vec<usize> = (0..40).collect();
    perm.shuffle(&mut rng);
    let relabelled = graph.permute(&perm)?;
    let back = invert_permutation(&perm);
    for conv in ConvType::ALL {
        let model = Model::new(ModelConfig::new(conv, 1), &mut rng)?;
        let a = model.forward(&graph, 48)?;
        let b = model.forward(&relabelled, 48)?;
        let exact = b.logits == a.logits.select_rows(&back) && b.states == a.states.select_rows(&back);
        println!("{conv:<13} equivariant: {exact}");
    }
    Ok(())
}
