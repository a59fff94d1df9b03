//! Encoder → recurrent block applied `rounds` times → decoder.
//!
//! The recurrent block concatenates the input features to the current state,
//! maps the result through a skip MLP and applies one graph convolution. All
//! rounds share one set of block parameters, so the number of rounds can be
//! chosen freely at inference time. The non-recurrent baseline instead owns
//! `baseline_layers` separately parameterized blocks and ignores `rounds`.

pub mod aggregate;
pub mod config;
pub mod conv;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::nn::{l2_state_loss, weighted_cross_entropy, GruCell, Mlp, MlpCache, MlpSpec, ParameterSet};

pub use config::{ConvType, GruStateInput, ModelConfig};
pub use conv::{Block, Conv, EdgeMlp, StepCache};

/// Final logits and node states of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Matrix,
    pub states: Matrix,
}

/// Snapshot of the decoded predictions after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFrame {
    pub round: usize,
    pub predictions: Vec<u8>,
    pub logits: Matrix,
    /// Mean Euclidean norm of the node states.
    pub mean_state_norm: f64,
}

/// One frame per executed round, starting with round 0 (encoder output).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardTrace {
    pub frames: Vec<TraceFrame>,
}

/// Everything recorded by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    encoder: MlpCache,
    steps: Vec<(usize, StepCache)>,
    decoder: MlpCache,
    pub states: Matrix,
    pub logits: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cross_entropy: f64,
    pub l2: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.cross_entropy + self.l2
    }
}

#[derive(Debug, Clone)]
struct Layout {
    encoder: Mlp,
    blocks: Vec<Block>,
    decoder: Mlp,
}

impl Layout {
    fn register(config: &ModelConfig, params: &mut ParameterSet, rng: &mut dyn RngCore) -> Result<Layout> {
        config.validate()?;
        let d = config.embed_dim;
        let spec = |in_dim, out_dim| MlpSpec::new(in_dim, out_dim, config.hidden_factor, config.dropout);
        let encoder = Mlp::register(params, "encoder", spec(config.in_dim, d), rng)?;
        let block_count = if config.conv.is_recurrent() {
            1
        } else {
            config.baseline_layers
        };
        let mut blocks = Vec::with_capacity(block_count);
        for i in 0..block_count {
            let prefix = if config.conv.is_recurrent() {
                "recurrent".to_string()
            } else {
                format!("layer{i}")
            };
            let skip_in = if config.skip_input { config.in_dim + d } else { d };
            let skip = Mlp::register(params, &format!("{prefix}.skip"), spec(skip_in, d), rng)?;
            let edge = if config.conv.has_edge_mlp() {
                Some(EdgeMlp {
                    mlp: Mlp::register(params, &format!("{prefix}.edge"), spec(2 * d, d), rng)?,
                })
            } else {
                None
            };
            let conv = if config.conv.uses_gru() {
                Conv::Gru {
                    edge,
                    cell: GruCell::register(params, &format!("{prefix}.gru"), d, d, rng),
                    state: config.gru_state,
                }
            } else {
                Conv::Gin {
                    edge,
                    node: Mlp::register(params, &format!("{prefix}.node"), spec(d, d), rng)?,
                    epsilon: config.gin_epsilon,
                }
            };
            blocks.push(Block {
                skip,
                skip_input: config.skip_input,
                conv,
            });
        }
        let decoder_in = if config.decoder_sees_input { d + config.in_dim } else { d };
        let decoder = Mlp::register(params, "decoder", spec(decoder_in, config.out_classes), rng)?;
        Ok(Layout {
            encoder,
            blocks,
            decoder,
        })
    }
}

/// A model: configuration, parameters and the wiring between them.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParameterSet,
    layout: Layout,
}

/// Deterministic Glorot-initialized parameters for `config`.
pub fn init_parameters(config: &ModelConfig, rng: &mut dyn RngCore) -> Result<ParameterSet> {
    let mut params = ParameterSet::new();
    Layout::register(config, &mut params, rng)?;
    Ok(params)
}

impl Model {
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Model> {
        let mut params = ParameterSet::new();
        let layout = Layout::register(&config, &mut params, rng)?;
        Ok(Model {
            config,
            params,
            layout,
        })
    }

    /// Rebuilds a model around existing parameters (names and shapes must match).
    pub fn from_parts(config: ModelConfig, params: ParameterSet) -> Result<Model> {
        let mut fresh = ParameterSet::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let layout = Layout::register(&config, &mut fresh, &mut rng)?;
        fresh.check_compatible(&params)?;
        Ok(Model {
            config,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParameterSet {
        self.params
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.blocks.len()
    }

    pub fn block(&self, index: usize) -> Option<&Block> {
        self.layout.blocks.get(index)
    }

    fn check_graph(&self, graph: &Graph) -> Result<()> {
        if graph.features().cols() != self.config.in_dim {
            return Err(Error::usage(format!(
                "model expects {} input features, graph has {}",
                self.config.in_dim,
                graph.features().cols()
            )));
        }
        Ok(())
    }

    /// Block indices applied for `rounds` (the baseline ignores `rounds`).
    fn schedule(&self, rounds: usize) -> Vec<usize> {
        if self.config.conv.is_recurrent() {
            vec![0; rounds]
        } else {
            (0..self.layout.blocks.len()).collect()
        }
    }

    pub fn encode(&self, features: &Matrix) -> Result<Matrix> {
        self.layout.encoder.infer(&self.params, features)
    }

    /// One evaluation-mode application of block `block`.
    pub fn recurrent_step(&self, graph: &Graph, state: &Matrix, block: usize) -> Result<Matrix> {
        self.check_graph(graph)?;
        let b = self
            .layout
            .blocks
            .get(block)
            .ok_or_else(|| Error::usage(format!("no block {block}")))?;
        if state.shape() != (graph.num_nodes(), self.config.embed_dim) {
            return Err(Error::usage(format!(
                "state has shape {:?}, expected ({}, {})",
                state.shape(),
                graph.num_nodes(),
                self.config.embed_dim
            )));
        }
        b.infer(&self.params, graph, graph.features(), state)
    }

    pub fn decode(&self, states: &Matrix, features: &Matrix) -> Result<Matrix> {
        if states.cols() != self.config.embed_dim {
            return Err(Error::usage(format!(
                "decoder expects {} state columns, got {}",
                self.config.embed_dim,
                states.cols()
            )));
        }
        if self.config.decoder_sees_input {
            self.layout.decoder.infer(&self.params, &states.hconcat(features))
        } else {
            self.layout.decoder.infer(&self.params, states)
        }
    }

    /// Evaluation-mode forward pass.
    pub fn forward(&self, graph: &Graph, rounds: usize) -> Result<ForwardOutput> {
        self.forward_observed(graph, rounds, |_, _| {})
    }

    /// Evaluation-mode forward pass calling `observe(round, state)` for round 0
    /// (the encoder output) and after every executed round.
    ///
    /// When a round reproduces its input state bit for bit, every later round
    /// would too, so the remaining rounds are reported without recomputation.
    pub fn forward_observed(
        &self,
        graph: &Graph,
        rounds: usize,
        mut observe: impl FnMut(usize, &Matrix),
    ) -> Result<ForwardOutput> {
        self.check_graph(graph)?;
        let x = graph.features();
        let mut h = self.encode(x)?;
        observe(0, &h);
        let schedule = self.schedule(rounds);
        let recurrent = self.config.conv.is_recurrent();
        let mut t = 0;
        while t < schedule.len() {
            let next = self.layout.blocks[schedule[t]].infer(&self.params, graph, x, &h)?;
            t += 1;
            let fixed = recurrent && bitwise_equal(&next, &h);
            h = next;
            observe(t, &h);
            if fixed {
                while t < schedule.len() {
                    t += 1;
                    observe(t, &h);
                }
            }
        }
        let logits = self.decode(&h, x)?;
        Ok(ForwardOutput { logits, states: h })
    }

    /// Forward pass recording decoded predictions after every round.
    pub fn forward_trace(&self, graph: &Graph, rounds: usize) -> Result<(ForwardOutput, ForwardTrace)> {
        let mut frames = Vec::new();
        let mut failure = None;
        let out = self.forward_observed(graph, rounds, |round, h| {
            match self.decode(h, graph.features()) {
                Ok(logits) => {
                    let predictions = logits.argmax_rows().into_iter().map(|c| c as u8).collect();
                    let n = h.rows().max(1) as f64;
                    let mean_state_norm = (0..h.rows())
                        .map(|v| h.row(v).iter().map(|x| x * x).sum::<f64>().sqrt())
                        .sum::<f64>()
                        / n;
                    frames.push(TraceFrame {
                        round,
                        predictions,
                        logits,
                        mean_state_norm,
                    });
                }
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((out, ForwardTrace { frames }))
    }

    /// Recording forward pass; dropout is active when `rng` is given.
    pub fn forward_train(
        &self,
        graph: &Graph,
        rounds: usize,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Tape> {
        self.check_graph(graph)?;
        let x = graph.features();
        let (mut h, encoder) = self.layout.encoder.forward(&self.params, x, crate::nn::reborrow(&mut rng))?;
        let schedule = self.schedule(rounds);
        let mut steps = Vec::with_capacity(schedule.len());
        for &b in &schedule {
            let (next, cache) =
                self.layout.blocks[b].forward(&self.params, graph, x, &h, crate::nn::reborrow(&mut rng))?;
            steps.push((b, cache));
            h = next;
        }
        let decoder_input = if self.config.decoder_sees_input {
            h.hconcat(x)
        } else {
            h.clone()
        };
        let (logits, decoder) = self.layout.decoder.forward(&self.params, &decoder_input, rng)?;
        Ok(Tape {
            encoder,
            steps,
            decoder,
            states: h,
            logits,
        })
    }

    /// Loss of a recorded pass and the gradient of every parameter,
    /// propagated through all unrolled rounds.
    pub fn backward(
        &self,
        graph: &Graph,
        tape: &Tape,
        class_weights: &[f64; 2],
        l2_coeff: f64,
    ) -> Result<(LossBreakdown, ParameterSet)> {
        let (cross_entropy, grad_logits) =
            weighted_cross_entropy(&tape.logits, graph.labels(), class_weights)?;
        let (l2, grad_l2) = l2_state_loss(&tape.states, l2_coeff)?;
        let mut grads = self.params.zeros_like();
        let grad_dec_in = self
            .layout
            .decoder
            .backward(&self.params, &tape.decoder, &grad_logits, &mut grads);
        let mut grad_h = if self.config.decoder_sees_input {
            grad_dec_in.columns(0, self.config.embed_dim)
        } else {
            grad_dec_in
        };
        grad_h.add_assign(&grad_l2);
        for (b, cache) in tape.steps.iter().rev() {
            grad_h = self.layout.blocks[*b].backward(&self.params, graph, cache, &grad_h, &mut grads);
        }
        self.layout
            .encoder
            .backward(&self.params, &tape.encoder, &grad_h, &mut grads);
        Ok((LossBreakdown { cross_entropy, l2 }, grads))
    }

    /// Training-mode loss and gradient for one graph.
    pub fn loss_and_gradient(
        &self,
        graph: &Graph,
        rounds: usize,
        class_weights: &[f64; 2],
        l2_coeff: f64,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(LossBreakdown, ParameterSet)> {
        let tape = self.forward_train(graph, rounds, rng)?;
        self.backward(graph, &tape, class_weights, l2_coeff)
    }

    /// Evaluation-mode loss.
    pub fn loss(
        &self,
        graph: &Graph,
        rounds: usize,
        class_weights: &[f64; 2],
        l2_coeff: f64,
    ) -> Result<LossBreakdown> {
        let out = self.forward(graph, rounds)?;
        let (cross_entropy, _) = weighted_cross_entropy(&out.logits, graph.labels(), class_weights)?;
        let (l2, _) = l2_state_loss(&out.states, l2_coeff)?;
        Ok(LossBreakdown { cross_entropy, l2 })
    }

    /// Argmax class per node.
    pub fn predict(&self, graph: &Graph, rounds: usize) -> Result<Vec<u8>> {
        Ok(self
            .forward(graph, rounds)?
            .logits
            .argmax_rows()
            .into_iter()
            .map(|c| c as u8)
            .collect())
    }
}

fn bitwise_equal(a: &Matrix, b: &Matrix) -> bool {
    a.shape() == b.shape()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}
