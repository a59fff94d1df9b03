//! Edge MLP, graph convolutions and the recurrent block (skip MLP + convolution).

use rand::RngCore;

use crate::error::Result;
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::model::aggregate::{canonical_sum, sum_neighbors, sum_neighbors_backward};
use crate::model::config::GruStateInput;
use crate::nn::mlp::dropout_mask;
use crate::nn::{GruCache, GruCell, Mlp, MlpCache, ParameterSet};

/// Per-edge perceptron on `(z_v ∥ z_w)`, summed over the neighbors `w` of `v`.
///
/// The first layer is linear in the concatenation, so it is evaluated once
/// per node (`z·W1_recv`, `z·W1_send`) and combined per edge. The second
/// layer is linear too, so hidden activations are summed per receiver
/// before it is applied: `m_v = (Σ_e hidden_e)·W2 + deg(v)·b2`.
#[derive(Debug, Clone)]
pub struct EdgeMlp {
    pub mlp: Mlp,
}

#[derive(Debug, Clone)]
pub struct EdgeCache {
    z: Matrix,
    /// Pre-activations, one row per directed edge in CSR order.
    pre: Matrix,
    mask: Option<Vec<f64>>,
    hidden_sum: Matrix,
}

impl EdgeMlp {
    fn split_first_layer(&self, params: &ParameterSet) -> (Matrix, Matrix) {
        let w1 = params.get(self.mlp.w1);
        let d = w1.rows() / 2;
        let h = w1.cols();
        let recv = Matrix::from_vec(d, h, w1.data()[..d * h].to_vec()).expect("sized");
        let send = Matrix::from_vec(d, h, w1.data()[d * h..].to_vec()).expect("sized");
        (recv, send)
    }

    /// Aggregated messages; `record` keeps what the backward pass needs.
    pub fn forward(
        &self,
        params: &ParameterSet,
        graph: &Graph,
        z: &Matrix,
        rng: Option<&mut dyn RngCore>,
        record: bool,
    ) -> (Matrix, Option<EdgeCache>) {
        let n = graph.num_nodes();
        let hidden = self.mlp.spec.hidden_dim();
        let (w_recv, w_send) = self.split_first_layer(params);
        let mut recv = z.matmul(&w_recv);
        recv.add_row_inplace(params.get(self.mlp.b1));
        let send = z.matmul(&w_send);

        let edges = graph.num_directed_edges();
        let mask = match rng {
            Some(rng) if self.mlp.spec.dropout > 0.0 => {
                Some(dropout_mask(edges * hidden, self.mlp.spec.dropout, rng))
            }
            _ => None,
        };
        let mut pre_all = if record {
            Matrix::zeros(edges, hidden)
        } else {
            Matrix::zeros(0, hidden)
        };
        let mut hidden_sum = Matrix::zeros(n, hidden);
        let offsets = graph.csr_offsets();
        let neighbors = graph.csr_neighbors();
        let mut block = Vec::new();
        let mut scratch = Vec::new();
        for v in 0..n {
            block.clear();
            let rv = recv.row(v);
            for e in offsets[v]..offsets[v + 1] {
                let sw = send.row(neighbors[e]);
                for j in 0..hidden {
                    let pre = rv[j] + sw[j];
                    if record {
                        pre_all.set(e, j, pre);
                    }
                    let mut act = pre.max(0.0);
                    if let Some(mask) = &mask {
                        act *= mask[e * hidden + j];
                    }
                    block.push(act);
                }
            }
            canonical_sum(&block, hidden, hidden_sum.row_mut(v), &mut scratch);
        }

        let mut messages = hidden_sum.matmul(params.get(self.mlp.w2));
        let b2 = params.get(self.mlp.b2);
        for v in 0..n {
            let deg = graph.degree(v) as f64;
            for (m, b) in messages.row_mut(v).iter_mut().zip(b2.data()) {
                *m += deg * b;
            }
        }
        let cache = record.then(|| EdgeCache {
            z: z.clone(),
            pre: pre_all,
            mask,
            hidden_sum,
        });
        (messages, cache)
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. `z`.
    pub fn backward(
        &self,
        params: &ParameterSet,
        graph: &Graph,
        cache: &EdgeCache,
        grad_messages: &Matrix,
        grads: &mut ParameterSet,
    ) -> Matrix {
        let n = graph.num_nodes();
        let hidden = self.mlp.spec.hidden_dim();
        cache
            .hidden_sum
            .matmul_tn_acc(grad_messages, grads.get_mut(self.mlp.w2));
        {
            let db2 = grads.get_mut(self.mlp.b2);
            for v in 0..n {
                let deg = graph.degree(v) as f64;
                for (b, g) in db2.data_mut().iter_mut().zip(grad_messages.row(v)) {
                    *b += deg * g;
                }
            }
        }
        let grad_sum = grad_messages.matmul_nt(params.get(self.mlp.w2));
        let mut grad_recv = Matrix::zeros(n, hidden);
        let mut grad_send = Matrix::zeros(n, hidden);
        let offsets = graph.csr_offsets();
        let neighbors = graph.csr_neighbors();
        for v in 0..n {
            let gs = grad_sum.row(v);
            for e in offsets[v]..offsets[v + 1] {
                let w = neighbors[e];
                let pre = cache.pre.row(e);
                for j in 0..hidden {
                    if pre[j] <= 0.0 {
                        continue;
                    }
                    let m = cache.mask.as_ref().map_or(1.0, |m| m[e * hidden + j]);
                    let g = gs[j] * m;
                    grad_recv.data_mut()[v * hidden + j] += g;
                    grad_send.data_mut()[w * hidden + j] += g;
                }
            }
        }
        grad_recv.sum_rows_acc(grads.get_mut(self.mlp.b1));
        let d = cache.z.cols();
        let mut d_recv = Matrix::zeros(d, hidden);
        let mut d_send = Matrix::zeros(d, hidden);
        cache.z.matmul_tn_acc(&grad_recv, &mut d_recv);
        cache.z.matmul_tn_acc(&grad_send, &mut d_send);
        {
            let dw1 = grads.get_mut(self.mlp.w1).data_mut();
            for (o, g) in dw1.iter_mut().zip(d_recv.data().iter().chain(d_send.data())) {
                *o += g;
            }
        }
        let (w_recv, w_send) = self.split_first_layer(params);
        let mut grad_z = grad_recv.matmul_nt(&w_recv);
        grad_z.add_assign(&grad_send.matmul_nt(&w_send));
        grad_z
    }
}

#[derive(Debug, Clone)]
pub enum Conv {
    Gin {
        edge: Option<EdgeMlp>,
        node: Mlp,
        epsilon: f64,
    },
    Gru {
        edge: Option<EdgeMlp>,
        cell: GruCell,
        state: GruStateInput,
    },
}

#[derive(Debug, Clone)]
pub enum ConvCache {
    Gin {
        edge: Option<EdgeCache>,
        node: MlpCache,
    },
    Gru {
        edge: Option<EdgeCache>,
        cell: GruCache,
    },
}

/// Skip MLP followed by a graph convolution; one application is one round.
#[derive(Debug, Clone)]
pub struct Block {
    pub skip: Mlp,
    pub skip_input: bool,
    pub conv: Conv,
}

#[derive(Debug, Clone)]
pub struct StepCache {
    skip: MlpCache,
    conv: ConvCache,
}

fn messages(
    edge: &Option<EdgeMlp>,
    params: &ParameterSet,
    graph: &Graph,
    z: &Matrix,
    rng: Option<&mut dyn RngCore>,
    record: bool,
) -> (Matrix, Option<EdgeCache>) {
    match edge {
        Some(edge) => edge.forward(params, graph, z, rng, record),
        None => (sum_neighbors(graph, z), None),
    }
}

fn messages_backward(
    edge: &Option<EdgeMlp>,
    cache: &Option<EdgeCache>,
    params: &ParameterSet,
    graph: &Graph,
    grad: &Matrix,
    grads: &mut ParameterSet,
) -> Matrix {
    match (edge, cache) {
        (Some(edge), Some(cache)) => edge.backward(params, graph, cache, grad, grads),
        _ => sum_neighbors_backward(graph, grad),
    }
}

impl Block {
    fn skip_input(&self, features: &Matrix, state: &Matrix) -> Matrix {
        if self.skip_input {
            features.hconcat(state)
        } else {
            state.clone()
        }
    }

    /// Evaluation-mode step.
    pub fn infer(
        &self,
        params: &ParameterSet,
        graph: &Graph,
        features: &Matrix,
        state: &Matrix,
    ) -> Result<Matrix> {
        let z = self.skip.infer(params, &self.skip_input(features, state))?;
        match &self.conv {
            Conv::Gin {
                edge,
                node,
                epsilon,
            } => {
                let (agg, _) = messages(edge, params, graph, &z, None, false);
                node.infer(params, &gin_combine(&z, &agg, *epsilon))
            }
            Conv::Gru {
                edge,
                cell,
                state: wiring,
            } => {
                let (m, _) = messages(edge, params, graph, &z, None, false);
                let prev = match wiring {
                    GruStateInput::SkipOutput => &z,
                    GruStateInput::RawState => state,
                };
                cell.infer(params, &m, prev)
            }
        }
    }

    /// Recording step; dropout is active when `rng` is given.
    pub fn forward(
        &self,
        params: &ParameterSet,
        graph: &Graph,
        features: &Matrix,
        state: &Matrix,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<(Matrix, StepCache)> {
        let (z, skip) = self.skip.forward(
            params,
            &self.skip_input(features, state),
            crate::nn::reborrow(&mut rng),
        )?;
        let (out, conv) = match &self.conv {
            Conv::Gin {
                edge,
                node,
                epsilon,
            } => {
                let (agg, edge_cache) =
                    messages(edge, params, graph, &z, crate::nn::reborrow(&mut rng), true);
                let (out, node_cache) =
                    node.forward(params, &gin_combine(&z, &agg, *epsilon), rng)?;
                (
                    out,
                    ConvCache::Gin {
                        edge: edge_cache,
                        node: node_cache,
                    },
                )
            }
            Conv::Gru {
                edge,
                cell,
                state: wiring,
            } => {
                let (m, edge_cache) = messages(edge, params, graph, &z, rng, true);
                let prev = match wiring {
                    GruStateInput::SkipOutput => &z,
                    GruStateInput::RawState => state,
                };
                let (out, cell_cache) = cell.forward(params, &m, prev)?;
                (
                    out,
                    ConvCache::Gru {
                        edge: edge_cache,
                        cell: cell_cache,
                    },
                )
            }
        };
        Ok((out, StepCache { skip, conv }))
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the incoming state.
    pub fn backward(
        &self,
        params: &ParameterSet,
        graph: &Graph,
        cache: &StepCache,
        grad_out: &Matrix,
        grads: &mut ParameterSet,
    ) -> Matrix {
        let mut grad_raw_state: Option<Matrix> = None;
        let grad_z = match (&self.conv, &cache.conv) {
            (
                Conv::Gin {
                    edge,
                    node,
                    epsilon,
                },
                ConvCache::Gin {
                    edge: edge_cache,
                    node: node_cache,
                },
            ) => {
                let grad_pre = node.backward(params, node_cache, grad_out, grads);
                let mut grad_z =
                    messages_backward(edge, edge_cache, params, graph, &grad_pre, grads);
                let mut direct = grad_pre;
                direct.scale(1.0 + epsilon);
                grad_z.add_assign(&direct);
                grad_z
            }
            (
                Conv::Gru {
                    edge,
                    cell,
                    state: wiring,
                },
                ConvCache::Gru {
                    edge: edge_cache,
                    cell: cell_cache,
                },
            ) => {
                let (grad_m, grad_prev) = cell.backward(params, cell_cache, grad_out, grads);
                let mut grad_z =
                    messages_backward(edge, edge_cache, params, graph, &grad_m, grads);
                match wiring {
                    GruStateInput::SkipOutput => grad_z.add_assign(&grad_prev),
                    GruStateInput::RawState => grad_raw_state = Some(grad_prev),
                }
                grad_z
            }
            _ => unreachable!("cache does not match convolution"),
        };
        let grad_skip_in = self.skip.backward(params, &cache.skip, &grad_z, grads);
        let mut grad_state = if self.skip_input {
            let in_dim = grad_skip_in.cols() - grad_z.cols();
            grad_skip_in.columns(in_dim, grad_skip_in.cols())
        } else {
            grad_skip_in
        };
        if let Some(raw) = grad_raw_state {
            grad_state.add_assign(&raw);
        }
        grad_state
    }
}

fn gin_combine(z: &Matrix, agg: &Matrix, epsilon: f64) -> Matrix {
    let mut out = z.clone();
    if epsilon != 0.0 {
        out.scale(1.0 + epsilon);
    }
    out.add_assign(agg);
    out
}
