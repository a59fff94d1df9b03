//! Compare the hand-written backward pass of every convolution against
//! central finite differences of the full loss.
//!
//! Biases are randomized first: with the zero initialization every node
//! whose input is zero sits exactly on a ReLU kink, where finite
//! differences see a one-sided slope.
//!
//! cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recgnn::model::{ConvType, Model, ModelConfig};
use recgnn::nn::gradcheck::check_param_gradients;
use recgnn::taskgen::gen_path_finding;

fn main() -> recgnn::Result<()> {
    let graph = gen_path_finding(6, &mut ChaCha8Rng::seed_from_u64(7))?;
    let weights = [0.6, 3.0];
    for conv in ConvType::ALL {
        let mut cfg = ModelConfig::new(conv, 1);
        cfg.dropout = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = Model::new(cfg, &mut rng)?;
        for name in model.params().names().to_vec() {
            if name.rsplit('.').next().is_some_and(|s| s.starts_with('b')) {
                let id = model.params().find(&name).expect("registered");
                for b in model.params_mut().get_mut(id).data_mut() {
                    *b = rng.gen_range(-0.5..0.5);
                }
            }
        }
        let (_, grads) = model.loss_and_gradient(&graph, 3, &weights, 1e-4, None)?;
        let loss = |p: &recgnn::nn::ParameterSet| {
            let mut m = model.clone();
            *m.params_mut() = p.clone();
            m.loss(&graph, 3, &weights, 1e-4).expect("valid graph").total()
        };
        match check_param_gradients(model.params(), &grads, loss, 1e-4) {
            Ok(r) => println!("{conv:<13} ok   {} scalars, max relative error {:.2e}", r.checked, r.max_rel_error),
            Err(r) => println!(
                "{conv:<13} FAIL {}: analytic {:e} vs numeric {:e}",
                r.worst_name, r.worst_analytic, r.worst_numeric
            ),
        }
    }
    Ok(())
}
