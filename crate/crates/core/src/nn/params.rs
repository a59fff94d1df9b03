use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Handle to one tensor inside a [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors in registration order.
///
/// Registration order is the flat iteration order used by the optimizer,
/// gradient clipping, checkpoints and finite-difference checks. Biases are
/// stored as `1 x m` matrices; weights as `in x out` so that a layer computes
/// `x · W + b` on row vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "parameter '{name}' registered twice"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Registers an `rows x cols` weight with uniform Glorot initialization.
    pub fn register_weight(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut dyn RngCore,
    ) -> ParamId {
        self.register(name, glorot_uniform(rows, cols, rng))
    }

    pub fn register_bias(&mut self, name: impl Into<String>, cols: usize) -> ParamId {
        self.register(name, Matrix::zeros(1, cols))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|m| m.data().len()).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.values.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParameterSet {
        ParameterSet {
            names: self.names.clone(),
            values: self
                .values
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for m in &mut self.values {
            m.data_mut().fill(0.0);
        }
    }

    /// All scalars in flat order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|m| m.data().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::usage(format!(
                "expected {} scalars, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for m in &mut self.values {
            let len = m.data().len();
            m.data_mut().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Mutable access to scalar `k` of the flat order.
    pub fn flat_mut(&mut self, mut k: usize) -> &mut f64 {
        for m in &mut self.values {
            let len = m.data().len();
            if k < len {
                return &mut m.data_mut()[k];
            }
            k -= len;
        }
        panic!("flat index out of range");
    }

    pub fn global_norm(&self) -> f64 {
        self.values
            .iter()
            .map(Matrix::squared_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Matrix::is_finite)
    }

    /// Checks that `other` has the same names and shapes.
    pub fn check_compatible(&self, other: &ParameterSet) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Config("parameter names differ".into()));
        }
        for (name, (a, b)) in self.names.iter().zip(self.values.iter().zip(&other.values)) {
            if a.shape() != b.shape() {
                return Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    b.shape(),
                    a.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut dyn RngCore) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_round_trip_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ParameterSet::new();
        let w = p.register_weight("w", 2, 3, &mut rng);
        let b = p.register_bias("b", 3);
        assert_eq!(p.num_scalars(), 9);
        assert!(p.get(b).data().iter().all(|&x| x == 0.0));
        let flat = p.to_flat();
        assert_eq!(&flat[..6], p.get(w).data());
        *p.flat_mut(7) = 5.0;
        assert_eq!(p.get(b).get(0, 1), 5.0);
        let mut q = p.zeros_like();
        q.set_flat(&p.to_flat()).unwrap();
        assert_eq!(p, q);
        assert!(q.set_flat(&[0.0]).is_err());
    }

    #[test]
    fn glorot_bounds_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bound = (6.0f64 / 12.0).sqrt();
        let mut sum = 0.0;
        let mut count = 0usize;
        // 10,000 draws of a 6x6 weight.
        while count < 10_000 {
            let m = glorot_uniform(6, 6, &mut rng);
            assert!(m.data().iter().all(|x| x.abs() <= bound));
            sum += m.data().iter().sum::<f64>();
            count += 36;
        }
        assert!((sum / count as f64).abs() < 0.02);
    }

    #[test]
    fn same_seed_same_values() {
        let a = glorot_uniform(4, 5, &mut ChaCha8Rng::seed_from_u64(3));
        let b = glorot_uniform(4, 5, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
