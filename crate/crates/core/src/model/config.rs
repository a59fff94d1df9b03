use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Graph convolution used inside the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConvType {
    /// Recurrent GIN: `Θ1((1+ε)·z_v + Σ z_w)`.
    #[serde(rename = "recgin")]
    RecGin,
    /// Recurrent GIN with an edge MLP: `Θ1((1+ε)·z_v + Σ Θ2(z_v ∥ z_w))`.
    #[serde(rename = "recgin_e")]
    RecGinE,
    /// Recurrent GRU: `GRU(Σ z_w, z_v)`.
    #[serde(rename = "recgru")]
    RecGru,
    /// Recurrent GRU with an edge MLP: `GRU(Σ Θ(z_v ∥ z_w), z_v)`.
    #[serde(rename = "recgru_e")]
    RecGruE,
    /// Fixed stack of separately parameterized GIN layers.
    #[serde(rename = "baseline_gin")]
    BaselineGin,
}

impl ConvType {
    pub const ALL: [ConvType; 5] = [
        ConvType::RecGin,
        ConvType::RecGinE,
        ConvType::RecGru,
        ConvType::RecGruE,
        ConvType::BaselineGin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConvType::RecGin => "recgin",
            ConvType::RecGinE => "recgin_e",
            ConvType::RecGru => "recgru",
            ConvType::RecGruE => "recgru_e",
            ConvType::BaselineGin => "baseline_gin",
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != ConvType::BaselineGin
    }

    pub fn has_edge_mlp(self) -> bool {
        matches!(self, ConvType::RecGinE | ConvType::RecGruE)
    }

    pub fn uses_gru(self) -> bool {
        matches!(self, ConvType::RecGru | ConvType::RecGruE)
    }
}

impl fmt::Display for ConvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConvType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "recgin" => Ok(ConvType::RecGin),
            "recgin_e" | "recgine" => Ok(ConvType::RecGinE),
            "recgru" => Ok(ConvType::RecGru),
            "recgru_e" | "recgrue" => Ok(ConvType::RecGruE),
            "baseline_gin" | "gin" | "baseline" => Ok(ConvType::BaselineGin),
            other => Err(Error::usage(format!("unknown convolution '{other}'"))),
        }
    }
}

/// What the GRU receives as its previous state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GruStateInput {
    /// The skip-MLP output `z`, which already mixes `h^t` with the input features.
    SkipOutput,
    /// The raw recurrent state `h^t`.
    RawState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub conv: ConvType,
    pub in_dim: usize,
    pub embed_dim: usize,
    pub hidden_factor: usize,
    pub dropout: f64,
    pub gin_epsilon: f64,
    pub out_classes: usize,
    /// Depth of the non-recurrent baseline; ignored by recurrent models.
    pub baseline_layers: usize,
    /// Concatenate the input features to the state before every recurrent step.
    pub skip_input: bool,
    pub gru_state: GruStateInput,
    /// Feed the input features to the decoder alongside the final state.
    pub decoder_sees_input: bool,
}

impl ModelConfig {
    pub fn new(conv: ConvType, in_dim: usize) -> Self {
        ModelConfig {
            conv,
            in_dim,
            embed_dim: 6,
            hidden_factor: 4,
            dropout: 0.2,
            gin_epsilon: 0.0,
            out_classes: 2,
            baseline_layers: 10,
            skip_input: true,
            gru_state: GruStateInput::SkipOutput,
            decoder_sees_input: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 {
            return Err(Error::Config("in_dim must be at least 1".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be at least 1".into()));
        }
        if self.hidden_factor == 0 {
            return Err(Error::Config("hidden_factor must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.out_classes != 2 {
            return Err(Error::Config("only binary node classification is supported".into()));
        }
        if self.conv == ConvType::BaselineGin && self.baseline_layers == 0 {
            return Err(Error::Config("baseline needs at least one layer".into()));
        }
        if !self.gin_epsilon.is_finite() {
            return Err(Error::Config("gin_epsilon must be finite".into()));
        }
        Ok(())
    }
}
