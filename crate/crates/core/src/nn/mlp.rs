use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::params::{ParamId, ParameterSet};

/// One-hidden-layer perceptron: `W2 · dropout(relu(W1 · x + b1)) + b2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Hidden width is `hidden_factor * in_dim`.
    pub hidden_factor: usize,
    pub dropout: f64,
}

impl MlpSpec {
    pub fn new(in_dim: usize, out_dim: usize, hidden_factor: usize, dropout: f64) -> Self {
        MlpSpec {
            in_dim,
            out_dim,
            hidden_factor,
            dropout,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_factor * self.in_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden_factor == 0 {
            return Err(Error::usage(format!("degenerate MLP spec {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::usage(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Matrix,
    pub pre: Matrix,
    /// Hidden activations after relu and dropout.
    pub hidden: Matrix,
    /// Per-entry dropout multiplier (0 or `1/(1-p)`), present in training mode.
    pub mask: Option<Vec<f64>>,
}

/// Inverted-dropout mask for `len` entries.
pub(crate) fn dropout_mask(len: usize, p: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

impl Mlp {
    /// Registers `{prefix}.w1`, `.b1`, `.w2`, `.b2`.
    pub fn register(
        params: &mut ParameterSet,
        prefix: &str,
        spec: MlpSpec,
        rng: &mut dyn RngCore,
    ) -> Result<Mlp> {
        spec.validate()?;
        let h = spec.hidden_dim();
        Ok(Mlp {
            spec,
            w1: params.register_weight(format!("{prefix}.w1"), spec.in_dim, h, rng),
            b1: params.register_bias(format!("{prefix}.b1"), h),
            w2: params.register_weight(format!("{prefix}.w2"), h, spec.out_dim, rng),
            b2: params.register_bias(format!("{prefix}.b2"), spec.out_dim),
        })
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.spec.in_dim {
            return Err(Error::usage(format!(
                "MLP expects {} input columns, got {}",
                self.spec.in_dim,
                input.cols()
            )));
        }
        Ok(())
    }

    /// Forward pass; dropout is active only when `rng` is given.
    pub fn forward(
        &self,
        params: &ParameterSet,
        input: &Matrix,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(Matrix, MlpCache)> {
        self.check_input(input)?;
        let mut pre = input.matmul(params.get(self.w1));
        pre.add_row_inplace(params.get(self.b1));
        let mut hidden = pre.map(|x| x.max(0.0));
        let mask = match rng {
            Some(rng) if self.spec.dropout > 0.0 => {
                let mask = dropout_mask(hidden.data().len(), self.spec.dropout, rng);
                for (h, m) in hidden.data_mut().iter_mut().zip(&mask) {
                    *h *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        let mut out = hidden.matmul(params.get(self.w2));
        out.add_row_inplace(params.get(self.b2));
        Ok((
            out,
            MlpCache {
                input: input.clone(),
                pre,
                hidden,
                mask,
            },
        ))
    }

    /// Evaluation-mode forward without recording anything.
    pub fn infer(&self, params: &ParameterSet, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut hidden = input.matmul(params.get(self.w1));
        hidden.add_row_inplace(params.get(self.b1));
        for x in hidden.data_mut() {
            *x = x.max(0.0);
        }
        let mut out = hidden.matmul(params.get(self.w2));
        out.add_row_inplace(params.get(self.b2));
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads`; returns the input gradient.
    pub fn backward(
        &self,
        params: &ParameterSet,
        cache: &MlpCache,
        grad_out: &Matrix,
        grads: &mut ParameterSet,
    ) -> Matrix {
        cache.hidden.matmul_tn_acc(grad_out, grads.get_mut(self.w2));
        grad_out.sum_rows_acc(grads.get_mut(self.b2));
        let mut grad_pre = grad_out.matmul_nt(params.get(self.w2));
        for (i, (g, &p)) in grad_pre.data_mut().iter_mut().zip(cache.pre.data()).enumerate() {
            let m = cache.mask.as_ref().map_or(1.0, |m| m[i]);
            if p <= 0.0 {
                *g = 0.0;
            } else {
                *g *= m;
            }
        }
        cache.input.matmul_tn_acc(&grad_pre, grads.get_mut(self.w1));
        grad_pre.sum_rows_acc(grads.get_mut(self.b1));
        grad_pre.matmul_nt(params.get(self.w1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_param_gradients, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = ParameterSet::new();
        let mlp = Mlp::register(&mut params, "m", MlpSpec::new(3, 2, 2, 0.0), &mut rng).unwrap();
        params.fill_zero();
        let x = random_matrix(4, 3, &mut rng);
        let (out, _) = mlp.forward(&params, &x, None).unwrap();
        assert_eq!(out, Matrix::zeros(4, 2));
    }

    #[test]
    fn identity_weights_pass_nonnegative_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = ParameterSet::new();
        let mlp = Mlp::register(&mut params, "m", MlpSpec::new(3, 3, 1, 0.0), &mut rng).unwrap();
        params.fill_zero();
        for id in [mlp.w1, mlp.w2] {
            for i in 0..3 {
                params.get_mut(id).set(i, i, 1.0);
            }
        }
        let x = Matrix::from_rows(&[vec![0.5, 2.0, 0.0], vec![1.0, 0.0, 3.0]]).unwrap();
        assert_eq!(mlp.infer(&params, &x).unwrap(), x);
        let neg = Matrix::from_rows(&[vec![-1.0, 2.0, -3.0]]).unwrap();
        assert_eq!(
            mlp.infer(&params, &neg).unwrap(),
            Matrix::from_rows(&[vec![0.0, 2.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = ParameterSet::new();
        let mlp = Mlp::register(&mut params, "m", MlpSpec::new(3, 2, 2, 0.0), &mut rng).unwrap();
        assert!(mlp.forward(&params, &Matrix::zeros(2, 4), None).is_err());
        assert!(Mlp::register(&mut params, "bad", MlpSpec::new(3, 2, 0, 0.0), &mut rng).is_err());
        assert!(Mlp::register(&mut params, "bad2", MlpSpec::new(3, 2, 1, 1.0), &mut rng).is_err());
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParameterSet::new();
        let mlp = Mlp::register(&mut params, "m", MlpSpec::new(3, 2, 4, 0.5), &mut rng).unwrap();
        let x = random_matrix(5, 3, &mut rng);
        let (eval, cache) = mlp.forward(&params, &x, None).unwrap();
        assert!(cache.mask.is_none());
        assert_eq!(eval, mlp.infer(&params, &x).unwrap());
        let (train, cache) = mlp.forward(&params, &x, Some(&mut rng)).unwrap();
        let mask = cache.mask.unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
        assert_ne!(train, eval);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ParameterSet::new();
        let mlp = Mlp::register(&mut params, "m", MlpSpec::new(3, 2, 2, 0.0), &mut rng).unwrap();
        for p in params.values_mut() {
            for x in p.data_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
        }
        let x = random_matrix(4, 3, &mut rng);
        let probe = random_matrix(4, 2, &mut rng);
        let loss = |p: &ParameterSet| -> f64 {
            let out = mlp.infer(p, &x).unwrap();
            out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        };
        let mut grads = params.zeros_like();
        let (_, cache) = mlp.forward(&params, &x, None).unwrap();
        let gx = mlp.backward(&params, &cache, &probe, &mut grads);
        check_param_gradients(&params, &grads, loss, 1e-4).unwrap();

        // Input gradient.
        for k in 0..x.data().len() {
            let h = 1e-6;
            let mut xp = x.clone();
            xp.data_mut()[k] += h;
            let mut xm = x.clone();
            xm.data_mut()[k] -= h;
            let f = |m: &Matrix| -> f64 {
                let out = mlp.infer(&params, m).unwrap();
                out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            };
            let numeric = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((numeric - gx.data()[k]).abs() <= 1e-6 * (1.0 + numeric.abs()));
        }
    }
}
