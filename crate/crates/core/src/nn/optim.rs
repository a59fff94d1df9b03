//! Adam, reduce-on-plateau scheduling and gradient clipping.

use crate::nn::params::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 weight decay added to the gradient; off by default.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    first_moment: ParameterSet,
    second_moment: ParameterSet,
    steps: u64,
}

impl Adam {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        Adam {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParameterSet, grads: &ParameterSet, lr: f64) {
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.steps += 1;
        let t = self.steps as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        let moments = self.first_moment.values_mut().zip(self.second_moment.values_mut());
        for ((p, (m, v)), (_, g)) in params.values_mut().zip(moments).zip(grads.iter()) {
            for (((theta, m), v), &g) in p
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                let g = g + weight_decay * *theta;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Multiplies the learning rate by `factor` (never below `min_lr`) after
/// `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauScheduler {
            factor,
            patience,
            min_lr,
            lr: initial_lr,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn bad_epochs(&self) -> usize {
        self.bad_epochs
    }

    /// Records one epoch's validation loss; returns true when the rate was reduced.
    pub fn step(&mut self, validation_loss: f64) -> bool {
        if validation_loss < self.best {
            self.best = validation_loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.bad_epochs = 0;
            let reduced = (self.lr * self.factor).max(self.min_lr);
            let changed = reduced < self.lr;
            self.lr = reduced;
            return changed;
        }
        false
    }
}

/// Adam moments plus the learning-rate schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub adam: Adam,
    pub scheduler: PlateauScheduler,
}

impl OptimizerState {
    pub fn lr(&self) -> f64 {
        self.scheduler.lr()
    }

    pub fn step(&mut self, params: &mut ParameterSet, grads: &ParameterSet) {
        let lr = self.scheduler.lr();
        self.adam.step(params, grads, lr);
    }
}

/// Clamps every entry to `±max_value`, then rescales the whole gradient so
/// its global norm is at most `max_norm`.
pub fn clip_gradients(grads: &mut ParameterSet, max_norm: f64, max_value: f64) {
    for m in grads.values_mut() {
        for g in m.data_mut() {
            *g = g.clamp(-max_value, max_value);
        }
    }
    let norm = grads.global_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for m in grads.values_mut() {
            m.scale(scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn scalar(value: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.register("theta", Matrix::filled(1, 1, value));
        p
    }

    fn value(p: &ParameterSet) -> f64 {
        p.to_flat()[0]
    }

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut p = scalar(0.25);
        let mut adam = Adam::new(&p, AdamConfig::default());
        adam.step(&mut p, &scalar(0.0), 0.1);
        assert_eq!(value(&p), 0.25);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [1e-3, 0.5, -7.0, 300.0] {
            let mut p = scalar(1.0);
            let mut adam = Adam::new(&p, AdamConfig::default());
            adam.step(&mut p, &scalar(g), 0.0004);
            let delta = 1.0 - value(&p);
            // eps shrinks the step by a relative eps/|g|.
            assert!((delta.abs() / 0.0004 - 1.0).abs() < 1e-4, "g={g}: {delta}");
            assert_eq!(delta.signum(), g.signum());
        }
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        // Scalar oracle: replay the textbook recurrence independently.
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.0004);
        let mut p = scalar(0.0);
        let mut adam = Adam::new(&p, AdamConfig::default());
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 0.0f64);
        let mut previous = 0.0;
        for t in 1..=100 {
            adam.step(&mut p, &scalar(1.0), lr);
            m = b1 * m + (1.0 - b1);
            v = b2 * v + (1.0 - b2);
            theta -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            assert!(value(&p) < previous);
            assert!((value(&p) - theta).abs() < 1e-15);
            previous = value(&p);
        }
    }

    #[test]
    fn scheduler_keeps_rate_while_improving() {
        let mut s = PlateauScheduler::new(0.0004, 0.7, 20, 1e-5);
        for i in 0..100 {
            s.step(1.0 - i as f64 * 1e-3);
        }
        assert_eq!(s.lr(), 0.0004);
    }

    #[test]
    fn scheduler_reduces_after_patience() {
        let mut s = PlateauScheduler::new(0.0004, 0.7, 20, 1e-5);
        s.step(1.0);
        for _ in 0..19 {
            assert!(!s.step(1.0));
        }
        assert_eq!(s.lr(), 0.0004);
        assert!(s.step(1.0));
        assert!((s.lr() - 0.00028).abs() < 1e-18);
        assert_eq!(s.bad_epochs(), 0);
    }

    #[test]
    fn scheduler_floors_at_min_lr() {
        let mut s = PlateauScheduler::new(0.0004, 0.7, 20, 1e-5);
        s.step(1.0);
        for _ in 0..20 * 50 {
            s.step(2.0);
        }
        assert_eq!(s.lr(), 1e-5);
    }

    #[test]
    fn clipping_examples() {
        let mut inside = ParameterSet::new();
        inside.register("g", Matrix::from_vec(1, 2, vec![0.3, -0.4]).unwrap());
        let before = inside.clone();
        clip_gradients(&mut inside, 5.0, 1.0);
        assert_eq!(inside, before);

        let mut big = scalar(10.0);
        clip_gradients(&mut big, 5.0, 1.0);
        assert_eq!(value(&big), 1.0);

        let mut v = ParameterSet::new();
        v.register("g", Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap());
        clip_gradients(&mut v, 1.0, 100.0);
        let flat = v.to_flat();
        assert!((flat[0] - 0.6).abs() < 1e-15 && (flat[1] - 0.8).abs() < 1e-15);
    }
}
