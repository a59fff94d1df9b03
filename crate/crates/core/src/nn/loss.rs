use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mean over nodes of `weight[y] * -log softmax(logits)[y]`, with its exact gradient.
pub fn weighted_cross_entropy(
    logits: &Matrix,
    labels: &[u8],
    weights: &[f64; 2],
) -> Result<(f64, Matrix)> {
    let n = logits.rows();
    if logits.cols() != 2 {
        return Err(Error::usage(format!(
            "expected 2 logits per node, got {}",
            logits.cols()
        )));
    }
    if labels.len() != n {
        return Err(Error::usage(format!(
            "{} labels for {n} rows of logits",
            labels.len()
        )));
    }
    if !weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
        return Err(Error::usage(format!("class weights must be positive, got {weights:?}")));
    }
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, 2)));
    }
    let mut grad = Matrix::zeros(n, 2);
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    for (v, &y) in labels.iter().enumerate() {
        let y = usize::from(y);
        if y > 1 {
            return Err(Error::usage(format!("label {y} at node {v} is not 0 or 1")));
        }
        let row = logits.row(v);
        let max = row[0].max(row[1]);
        let e0 = (row[0] - max).exp();
        let e1 = (row[1] - max).exp();
        let log_z = max + (e0 + e1).ln();
        total += weights[y] * (log_z - row[y]);
        let p = [e0 / (e0 + e1), e1 / (e0 + e1)];
        let g = grad.row_mut(v);
        for c in 0..2 {
            let target = if c == y { 1.0 } else { 0.0 };
            g[c] = weights[y] * inv_n * (p[c] - target);
        }
    }
    Ok((total * inv_n, grad))
}

/// `coefficient * mean_v ‖h_v‖²` and its gradient `coefficient * 2/n * h`.
pub fn l2_state_loss(states: &Matrix, coefficient: f64) -> Result<(f64, Matrix)> {
    if coefficient.is_nan() || coefficient < 0.0 {
        return Err(Error::usage(format!(
            "L2 coefficient must be non-negative, got {coefficient}"
        )));
    }
    let n = states.rows();
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, states.cols())));
    }
    let loss = coefficient * states.squared_norm() / n as f64;
    let mut grad = states.clone();
    grad.scale(2.0 * coefficient / n as f64);
    Ok((loss, grad))
}
