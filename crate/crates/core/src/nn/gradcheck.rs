//! Central finite-difference oracle for analytic gradients.
//!
//! Only ever evaluates the scalar loss, so it is independent of every
//! backward routine it is used to check.

use rand::{Rng, RngCore};

use crate::matrix::Matrix;
use crate::nn::params::ParameterSet;

/// Finite-difference step relative to `max(1, |θ|)`.
pub const FD_STEP: f64 = 1e-6;
/// Gradients smaller than this are compared on an absolute scale.
pub const MAGNITUDE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_name: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Relative error with the denominator floored at [`MAGNITUDE_FLOOR`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Central difference of `loss` with respect to flat scalar `k`.
pub fn numeric_partial(
    params: &ParameterSet,
    k: usize,
    loss: &impl Fn(&ParameterSet) -> f64,
) -> f64 {
    let mut probe = params.clone();
    let theta = *probe.flat_mut(k);
    let h = FD_STEP * theta.abs().max(1.0);
    *probe.flat_mut(k) = theta + h;
    let up = loss(&probe);
    *probe.flat_mut(k) = theta - h;
    let down = loss(&probe);
    (up - down) / (2.0 * h)
}

/// Compares every scalar of `analytic` against central differences of `loss`.
pub fn check_param_gradients(
    params: &ParameterSet,
    analytic: &ParameterSet,
    loss: impl Fn(&ParameterSet) -> f64,
    tolerance: f64,
) -> Result<GradCheckReport, GradCheckReport> {
    let flat = analytic.to_flat();
    let mut names = Vec::with_capacity(flat.len());
    for (name, m) in analytic.iter() {
        for i in 0..m.data().len() {
            names.push(format!("{name}[{i}]"));
        }
    }
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst_name: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for (k, &a) in flat.iter().enumerate() {
        let n = numeric_partial(params, k, &loss);
        let err = relative_error(a, n);
        report.checked += 1;
        if err >= report.max_rel_error {
            report.max_rel_error = err;
            report.worst_name = names[k].clone();
            report.worst_analytic = a;
            report.worst_numeric = n;
        }
    }
    if report.max_rel_error < tolerance {
        Ok(report)
    } else {
        Err(report)
    }
}

/// Entries uniform in `[-1, 1)`.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Overwrites every parameter (biases included) with uniform values in `±scale`.
pub fn randomize(params: &mut ParameterSet, scale: f64, rng: &mut dyn RngCore) {
    for m in params.values_mut() {
        for x in m.data_mut() {
            *x = rng.gen_range(-scale..scale);
        }
    }
}
