//! Run configuration: every generator, model and training knob in one flat
//! key-value file (TOML syntax, no tables).
//!
//! Values are resolved as built-in defaults, then the file, then
//! command-line flags; the resolved record is what manifests store.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TaskTag;
use crate::model::{ConvType, GruStateInput, ModelConfig};
use crate::taskgen::GeneratorConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskTag,
    pub num_graphs: usize,
    pub graph_size: usize,
    pub data_seed: u64,
    pub train_fraction: f64,

    pub conv: ConvType,
    pub embed_dim: usize,
    pub hidden_factor: usize,
    pub dropout: f64,
    pub gin_epsilon: f64,
    pub baseline_layers: usize,
    pub skip_input: bool,
    pub gru_state: GruStateInput,
    pub decoder_sees_input: bool,

    pub epochs: usize,
    pub initial_lr: f64,
    pub l2_coeff: f64,
    pub clip_max_norm: f64,
    pub clip_max_value: f64,
    pub train_rounds: usize,
    pub seeds: Vec<u64>,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub min_lr: f64,
    pub weight_decay: f64,

    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::new(ConvType::RecGruE, TaskTag::PrefixSum.in_dim());
        let train = TrainConfig::default();
        RunConfig {
            task: TaskTag::PrefixSum,
            num_graphs: 200,
            graph_size: 10,
            data_seed: 1,
            train_fraction: 0.8,
            conv: model.conv,
            embed_dim: model.embed_dim,
            hidden_factor: model.hidden_factor,
            dropout: model.dropout,
            gin_epsilon: model.gin_epsilon,
            baseline_layers: model.baseline_layers,
            skip_input: model.skip_input,
            gru_state: model.gru_state,
            decoder_sees_input: model.decoder_sees_input,
            epochs: train.epochs,
            initial_lr: train.initial_lr,
            l2_coeff: train.l2_coeff,
            clip_max_norm: train.clip_max_norm,
            clip_max_value: train.clip_max_value,
            train_rounds: train.train_rounds,
            seeds: train.seeds,
            scheduler_factor: train.scheduler_factor,
            scheduler_patience: train.scheduler_patience,
            min_lr: train.min_lr,
            weight_decay: train.weight_decay,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// Parses a config file; keys it omits keep their defaults.
    pub fn parse(text: &str, context: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::parse(context, e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    pub fn render(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot render config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::export::write_text(path, &self.render()?)
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            task: self.task,
            num_graphs: self.num_graphs,
            graph_size: self.graph_size,
            seed: self.data_seed,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            conv: self.conv,
            in_dim: self.task.in_dim(),
            embed_dim: self.embed_dim,
            hidden_factor: self.hidden_factor,
            dropout: self.dropout,
            gin_epsilon: self.gin_epsilon,
            out_classes: 2,
            baseline_layers: self.baseline_layers,
            skip_input: self.skip_input,
            gru_state: self.gru_state,
            decoder_sees_input: self.decoder_sees_input,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            initial_lr: self.initial_lr,
            l2_coeff: self.l2_coeff,
            clip_max_norm: self.clip_max_norm,
            clip_max_value: self.clip_max_value,
            train_rounds: self.train_rounds,
            seeds: self.seeds.clone(),
            scheduler_factor: self.scheduler_factor,
            scheduler_patience: self.scheduler_patience,
            min_lr: self.min_lr,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator().validate().map_err(as_config)?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        self.model().validate()?;
        self.train().validate()?;
        // TOML integers are signed 64-bit.
        if let Some(s) = self.seeds.iter().chain([&self.data_seed]).find(|&&s| s > i64::MAX as u64) {
            return Err(Error::Config(format!("seed {s} exceeds the supported range")));
        }
        Ok(())
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Usage(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_hyperparameter_table() {
        let c = RunConfig::default();
        assert_eq!(c.embed_dim, 6);
        assert_eq!(c.hidden_factor, 4);
        assert_eq!(c.dropout, 0.2);
        assert_eq!(c.weight_decay, 0.0);
        assert_eq!(c.train_rounds, 12);
        assert_eq!(c.seeds.len(), 5);
        assert_eq!((c.num_graphs, c.graph_size), (200, 10));
        assert!(c.l2_coeff > 0.0);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_and_partial_files() {
        let c = RunConfig {
            task: TaskTag::Distance,
            conv: ConvType::RecGinE,
            gru_state: GruStateInput::RawState,
            seeds: vec![7, 8],
            initial_lr: 1.0 / 3.0,
            ..Default::default()
        };
        let text = c.render().unwrap();
        assert_eq!(RunConfig::parse(&text, "mem").unwrap(), c);
        assert!(text.lines().all(|l| !l.starts_with('[')), "flat file: {text}");

        let partial = RunConfig::parse("task = \"path_finding\"\nepochs = 3\n", "mem").unwrap();
        assert_eq!(partial.task, TaskTag::PathFinding);
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.embed_dim, 6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::parse("embedding = 6\n", "mem"), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::parse("conv = \"lstm\"\n", "mem"), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::parse("seeds = []\n", "mem"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("num_graphs = 0\n", "mem"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("train_fraction = 1.0\n", "mem"), Err(Error::Config(_))));
    }

    #[test]
    fn derived_configs_follow_the_task_schema() {
        let c = RunConfig {
            task: TaskTag::PrefixSum,
            ..Default::default()
        };
        assert_eq!(c.model().in_dim, 2);
        let d = RunConfig {
            task: TaskTag::Distance,
            ..Default::default()
        };
        assert_eq!(d.model().in_dim, 1);
    }
}
