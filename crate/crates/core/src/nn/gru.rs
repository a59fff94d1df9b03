//! Gated recurrent unit cell with explicit backward pass.
//!
//! ```text
//! r  = σ(x·W_r + h·U_r + b_r)
//! z  = σ(x·W_z + h·U_z + b_z)
//! ñ  = tanh(x·W_n + b_in + r ⊙ (h·U_n + b_hn))
//! h' = (1 − z) ⊙ ñ + z ⊙ h
//! ```

use rand::RngCore;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::params::{ParamId, ParameterSet};

#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_n: ParamId,
    pub u_n: ParamId,
    pub b_in: ParamId,
    pub b_hn: ParamId,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub input: Matrix,
    pub state: Matrix,
    pub reset: Matrix,
    pub update: Matrix,
    pub candidate: Matrix,
    /// `h·U_n + b_hn`, before the reset gate is applied.
    pub hidden_candidate: Matrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GruCell {
    pub fn register(
        params: &mut ParameterSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut dyn RngCore,
    ) -> GruCell {
        let (i, h) = (input_dim, hidden_dim);
        GruCell {
            input_dim,
            hidden_dim,
            w_r: params.register_weight(format!("{prefix}.w_r"), i, h, rng),
            u_r: params.register_weight(format!("{prefix}.u_r"), h, h, rng),
            b_r: params.register_bias(format!("{prefix}.b_r"), h),
            w_z: params.register_weight(format!("{prefix}.w_z"), i, h, rng),
            u_z: params.register_weight(format!("{prefix}.u_z"), h, h, rng),
            b_z: params.register_bias(format!("{prefix}.b_z"), h),
            w_n: params.register_weight(format!("{prefix}.w_n"), i, h, rng),
            u_n: params.register_weight(format!("{prefix}.u_n"), h, h, rng),
            b_in: params.register_bias(format!("{prefix}.b_in"), h),
            b_hn: params.register_bias(format!("{prefix}.b_hn"), h),
        }
    }

    fn gates(&self, params: &ParameterSet, x: &Matrix, h: &Matrix) -> Result<GruCache> {
        if x.rows() != h.rows() || x.cols() != self.input_dim || h.cols() != self.hidden_dim {
            return Err(Error::usage(format!(
                "GRU expects input n x {} and state n x {}, got {:?} and {:?}",
                self.input_dim,
                self.hidden_dim,
                x.shape(),
                h.shape()
            )));
        }
        let affine = |w: ParamId, u: ParamId, b: ParamId| {
            let mut a = x.matmul(params.get(w));
            a.add_assign(&h.matmul(params.get(u)));
            a.add_row_inplace(params.get(b));
            a
        };
        let reset = affine(self.w_r, self.u_r, self.b_r).map(sigmoid);
        let update = affine(self.w_z, self.u_z, self.b_z).map(sigmoid);
        let mut hidden_candidate = h.matmul(params.get(self.u_n));
        hidden_candidate.add_row_inplace(params.get(self.b_hn));
        let mut candidate = x.matmul(params.get(self.w_n));
        candidate.add_row_inplace(params.get(self.b_in));
        for ((c, &r), &g) in candidate
            .data_mut()
            .iter_mut()
            .zip(reset.data())
            .zip(hidden_candidate.data())
        {
            *c = (*c + r * g).tanh();
        }
        Ok(GruCache {
            input: x.clone(),
            state: h.clone(),
            reset,
            update,
            candidate,
            hidden_candidate,
        })
    }

    fn combine(cache: &GruCache) -> Matrix {
        let mut out = cache.candidate.clone();
        for ((o, &z), &h) in out
            .data_mut()
            .iter_mut()
            .zip(cache.update.data())
            .zip(cache.state.data())
        {
            *o = (1.0 - z) * *o + z * h;
        }
        out
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        input: &Matrix,
        state: &Matrix,
    ) -> Result<(Matrix, GruCache)> {
        let cache = self.gates(params, input, state)?;
        Ok((Self::combine(&cache), cache))
    }

    pub fn infer(&self, params: &ParameterSet, input: &Matrix, state: &Matrix) -> Result<Matrix> {
        Ok(Self::combine(&self.gates(params, input, state)?))
    }

    /// Accumulates parameter gradients; returns `(d input, d state)`.
    pub fn backward(
        &self,
        params: &ParameterSet,
        cache: &GruCache,
        grad_out: &Matrix,
        grads: &mut ParameterSet,
    ) -> (Matrix, Matrix) {
        let len = grad_out.data().len();
        let (rows, cols) = grad_out.shape();
        let mut d_cand_pre = vec![0.0; len];
        let mut d_update_pre = vec![0.0; len];
        let mut d_reset_pre = vec![0.0; len];
        let mut d_hidden_cand = vec![0.0; len];
        let mut d_state = vec![0.0; len];
        for k in 0..len {
            let g = grad_out.data()[k];
            let z = cache.update.data()[k];
            let n = cache.candidate.data()[k];
            let h = cache.state.data()[k];
            let r = cache.reset.data()[k];
            let hc = cache.hidden_candidate.data()[k];
            let dn = g * (1.0 - z);
            let dz = g * (h - n);
            d_state[k] = g * z;
            let da_n = dn * (1.0 - n * n);
            d_cand_pre[k] = da_n;
            d_hidden_cand[k] = da_n * r;
            d_reset_pre[k] = da_n * hc * r * (1.0 - r);
            d_update_pre[k] = dz * z * (1.0 - z);
        }
        let as_matrix = |v: Vec<f64>| Matrix::from_vec(rows, cols, v).expect("sized");
        let d_cand_pre = as_matrix(d_cand_pre);
        let d_update_pre = as_matrix(d_update_pre);
        let d_reset_pre = as_matrix(d_reset_pre);
        let d_hidden_cand = as_matrix(d_hidden_cand);
        let mut d_state = as_matrix(d_state);

        let x = &cache.input;
        let h = &cache.state;
        x.matmul_tn_acc(&d_cand_pre, grads.get_mut(self.w_n));
        d_cand_pre.sum_rows_acc(grads.get_mut(self.b_in));
        h.matmul_tn_acc(&d_hidden_cand, grads.get_mut(self.u_n));
        d_hidden_cand.sum_rows_acc(grads.get_mut(self.b_hn));
        for (dp, w, u, b) in [
            (&d_update_pre, self.w_z, self.u_z, self.b_z),
            (&d_reset_pre, self.w_r, self.u_r, self.b_r),
        ] {
            x.matmul_tn_acc(dp, grads.get_mut(w));
            h.matmul_tn_acc(dp, grads.get_mut(u));
            dp.sum_rows_acc(grads.get_mut(b));
        }

        let mut d_input = d_cand_pre.matmul_nt(params.get(self.w_n));
        d_input.add_assign(&d_update_pre.matmul_nt(params.get(self.w_z)));
        d_input.add_assign(&d_reset_pre.matmul_nt(params.get(self.w_r)));
        d_state.add_assign(&d_hidden_cand.matmul_nt(params.get(self.u_n)));
        d_state.add_assign(&d_update_pre.matmul_nt(params.get(self.u_z)));
        d_state.add_assign(&d_reset_pre.matmul_nt(params.get(self.u_r)));
        (d_input, d_state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_param_gradients, random_matrix, randomize, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(seed: u64, d: usize) -> (ParameterSet, GruCell, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let gru = GruCell::register(&mut params, "gru", d, d, &mut rng);
        (params, gru, rng)
    }

    #[test]
    fn zero_everything_stays_zero() {
        let (mut params, gru, _) = cell(0, 4);
        params.fill_zero();
        let zero = Matrix::zeros(3, 4);
        assert_eq!(gru.infer(&params, &zero, &zero).unwrap(), zero);
    }

    #[test]
    fn saturated_update_gate_carries_the_state() {
        let (mut params, gru, mut rng) = cell(1, 4);
        params.get_mut(gru.b_z).data_mut().fill(1e3);
        let x = random_matrix(3, 4, &mut rng);
        let h = random_matrix(3, 4, &mut rng);
        let out = gru.infer(&params, &x, &h).unwrap();
        for (a, b) in out.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let (params, gru, _) = cell(2, 4);
        assert!(gru.infer(&params, &Matrix::zeros(3, 4), &Matrix::zeros(2, 4)).is_err());
        assert!(gru.infer(&params, &Matrix::zeros(3, 3), &Matrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut params, gru, mut rng) = cell(3, 4);
        randomize(&mut params, 0.8, &mut rng);
        let x = random_matrix(5, 4, &mut rng);
        let h = random_matrix(5, 4, &mut rng);
        let probe = random_matrix(5, 4, &mut rng);
        let objective = |p: &ParameterSet, x: &Matrix, h: &Matrix| -> f64 {
            let out = gru.infer(p, x, h).unwrap();
            out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = gru.forward(&params, &x, &h).unwrap();
        let mut grads = params.zeros_like();
        let (dx, dh) = gru.backward(&params, &cache, &probe, &mut grads);
        check_param_gradients(&params, &grads, |p| objective(p, &x, &h), 1e-4).unwrap();

        let step = 1e-6;
        for (target, analytic) in [(0, &dx), (1, &dh)] {
            for k in 0..20 {
                let mut up = [x.clone(), h.clone()];
                let mut down = [x.clone(), h.clone()];
                up[target].data_mut()[k] += step;
                down[target].data_mut()[k] -= step;
                let numeric = (objective(&params, &up[0], &up[1])
                    - objective(&params, &down[0], &down[1]))
                    / (2.0 * step);
                assert!(relative_error(analytic.data()[k], numeric) < 1e-4);
            }
        }
    }
}
