//! Neighborhood sums whose result depends only on the multiset of summands.
//!
//! Floating-point addition is commutative but not associative, so summing
//! three or more neighbor messages in index order would make the output
//! depend on node labelling. Segments of length three or more are summed
//! per column in ascending value order instead, which keeps the forward pass
//! exactly permutation-equivariant.

use crate::graph::Graph;
use crate::matrix::Matrix;

/// Sums `rows` (a `len x width` row-major block) into `out` in canonical order.
pub(crate) fn canonical_sum(rows: &[f64], width: usize, out: &mut [f64], scratch: &mut Vec<f64>) {
    let len = rows.len().checked_div(width).unwrap_or(0);
    debug_assert_eq!(out.len(), width);
    match len {
        0 => out.fill(0.0),
        1 => out.copy_from_slice(&rows[..width]),
        2 => {
            for (j, o) in out.iter_mut().enumerate() {
                *o = rows[j] + rows[width + j];
            }
        }
        _ => {
            for (j, o) in out.iter_mut().enumerate() {
                scratch.clear();
                scratch.extend((0..len).map(|e| rows[e * width + j]));
                scratch.sort_unstable_by(f64::total_cmp);
                *o = scratch.iter().sum();
            }
        }
    }
}

/// `out[v] = Σ_{w ∈ N(v)} x[w]`.
pub fn sum_neighbors(graph: &Graph, x: &Matrix) -> Matrix {
    let width = x.cols();
    let mut out = Matrix::zeros(graph.num_nodes(), width);
    let mut block = Vec::new();
    let mut scratch = Vec::new();
    for v in 0..graph.num_nodes() {
        block.clear();
        for &w in graph.neighbors_unchecked(v) {
            block.extend_from_slice(x.row(w));
        }
        canonical_sum(&block, width, out.row_mut(v), &mut scratch);
    }
    out
}

/// Adjoint of [`sum_neighbors`]: `out[w] = Σ_{v ∈ N(w)} grad[v]`.
pub fn sum_neighbors_backward(graph: &Graph, grad: &Matrix) -> Matrix {
    let width = grad.cols();
    let mut out = Matrix::zeros(graph.num_nodes(), width);
    let data = out.data_mut();
    for v in 0..graph.num_nodes() {
        let g = grad.row(v);
        for &w in graph.neighbors_unchecked(v) {
            for (o, gv) in data[w * width..(w + 1) * width].iter_mut().zip(g) {
                *o += gv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TaskTag;

    #[test]
    fn canonical_sum_ignores_order() {
        let rows = [1e16, 1.0, -1e16, 1.0, 3.0, 0.5];
        let mut a = [0.0; 1];
        let mut b = [0.0; 1];
        let mut scratch = Vec::new();
        canonical_sum(&rows, 1, &mut a, &mut scratch);
        let reversed: Vec<f64> = rows.iter().rev().copied().collect();
        canonical_sum(&reversed, 1, &mut b, &mut scratch);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn neighbor_sum_on_a_star() {
        let g = Graph::new(
            4,
            [(0, 1), (0, 2), (0, 3)],
            Matrix::zeros(4, 1),
            vec![0; 4],
            TaskTag::Distance,
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let s = sum_neighbors(&g, &x);
        assert_eq!(s.data(), &[9.0, 1.0, 1.0, 1.0]);
        let back = sum_neighbors_backward(&g, &x);
        assert_eq!(back.data(), &[9.0, 1.0, 1.0, 1.0]);
    }
}
