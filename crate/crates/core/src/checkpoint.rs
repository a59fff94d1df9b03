//! Versioned plain-text checkpoints.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! `parse(render(c))` reproduces every parameter bit for bit. Layout:
//!
//! ```text
//! recgnn-checkpoint 1
//! task prefix_sum
//! seed 3
//! epoch 41
//! val_loss 0.0123
//! config.conv recgru_e
//! ...
//! params 14
//! param encoder.w1 2 8
//! 0.1 -0.25 ...
//! ...
//! end
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::TaskTag;
use crate::matrix::Matrix;
use crate::model::{ConvType, GruStateInput, Model, ModelConfig};
use crate::nn::ParameterSet;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "recgnn-checkpoint";

/// A trained model together with the facts needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    /// Task (and therefore feature schema) the model was trained on.
    pub task: TaskTag,
    pub seed: u64,
    /// Epoch the parameters were taken from (0 = initialization).
    pub epoch: usize,
    pub val_loss: f64,
    pub params: ParameterSet,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model> {
        Model::from_parts(self.config, self.params.clone())
    }

    /// Fails with a config error unless the checkpoint was trained on `task`.
    pub fn expect_task(&self, task: TaskTag) -> Result<()> {
        if self.task == task {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "checkpoint was trained on {}, not {task}",
                self.task
            )))
        }
    }

    pub fn render(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(format!("{MAGIC} {FORMAT_VERSION}"));
        line(format!("task {}", self.task));
        line(format!("seed {}", self.seed));
        line(format!("epoch {}", self.epoch));
        line(format!("val_loss {}", self.val_loss));
        line(format!("config.conv {}", c.conv));
        line(format!("config.in_dim {}", c.in_dim));
        line(format!("config.embed_dim {}", c.embed_dim));
        line(format!("config.hidden_factor {}", c.hidden_factor));
        line(format!("config.dropout {}", c.dropout));
        line(format!("config.gin_epsilon {}", c.gin_epsilon));
        line(format!("config.out_classes {}", c.out_classes));
        line(format!("config.baseline_layers {}", c.baseline_layers));
        line(format!("config.skip_input {}", c.skip_input));
        line(format!("config.gru_state {}", gru_state_name(c.gru_state)));
        line(format!("config.decoder_sees_input {}", c.decoder_sees_input));
        line(format!("params {}", self.params.len()));
        for (name, m) in self.params.iter() {
            line(format!("param {name} {} {}", m.rows(), m.cols()));
            let values: Vec<String> = m.data().iter().map(|x| x.to_string()).collect();
            line(values.join(" "));
        }
        line("end".to_string());
        out
    }

    pub fn parse(text: &str, context: &str) -> Result<Checkpoint> {
        let mut cur = Cursor {
            lines: text.lines().enumerate(),
            context,
            line: 0,
        };
        let header = cur.next("header")?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| cur.err("not a checkpoint file"))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(cur.err(format!("unsupported checkpoint version '{version}'")));
        }

        let task: TaskTag = cur.value("task")?;
        let seed = cur.value("seed")?;
        let epoch = cur.value("epoch")?;
        let val_loss = cur.value("val_loss")?;
        let conv: ConvType = cur.value("config.conv")?;
        let in_dim = cur.value("config.in_dim")?;
        let mut config = ModelConfig::new(conv, in_dim);
        config.embed_dim = cur.value("config.embed_dim")?;
        config.hidden_factor = cur.value("config.hidden_factor")?;
        config.dropout = cur.value("config.dropout")?;
        config.gin_epsilon = cur.value("config.gin_epsilon")?;
        config.out_classes = cur.value("config.out_classes")?;
        config.baseline_layers = cur.value("config.baseline_layers")?;
        config.skip_input = cur.value("config.skip_input")?;
        let gru = cur.field("config.gru_state")?;
        config.gru_state = parse_gru_state(gru).ok_or_else(|| cur.err(format!("invalid gru_state '{gru}'")))?;
        config.decoder_sees_input = cur.value("config.decoder_sees_input")?;
        config.validate()?;

        let count: usize = cur.value("params")?;
        let mut params = ParameterSet::new();
        for _ in 0..count {
            let head = cur.field("param")?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(cur.err(format!("malformed parameter header '{head}'")));
            };
            let rows: usize = rows.parse().map_err(|_| cur.err("invalid row count"))?;
            let cols: usize = cols.parse().map_err(|_| cur.err("invalid column count"))?;
            let body = cur.next("parameter values")?;
            let data = body
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| cur.err(format!("invalid number: {e}")))?;
            if data.len() != rows * cols {
                return Err(cur.err(format!(
                    "{name}: expected {} values, found {}",
                    rows * cols,
                    data.len()
                )));
            }
            if params.find(name).is_some() {
                return Err(cur.err(format!("duplicate parameter '{name}'")));
            }
            params.register(name, Matrix::from_vec(rows, cols, data)?);
        }
        let end = cur.next("end")?;
        if end != "end" {
            return Err(cur.err(format!("expected 'end', found '{end}'")));
        }
        // Shapes must fit the declared architecture.
        Model::from_parts(config, params.clone())?;
        if task.in_dim() != config.in_dim {
            return Err(Error::Config(format!(
                "{context}: task {task} has {} input features, config declares {}",
                task.in_dim(),
                config.in_dim
            )));
        }
        Ok(Checkpoint {
            config,
            task,
            seed,
            epoch,
            val_loss,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::parse(&text, &path.display().to_string())
    }
}

struct Cursor<'a, I> {
    lines: I,
    context: &'a str,
    line: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Cursor<'a, I> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(format!("{}:{}", self.context, self.line), message)
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err(format!("unexpected end of file, expected {what}"))),
        }
    }

    /// The value of a `key value` line.
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next(key)?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected '{key} <value>', found '{l}'"))),
        }
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.trim()
            .parse()
            .map_err(|_| self.err(format!("invalid value '{v}' for {key}")))
    }
}

fn gru_state_name(s: GruStateInput) -> &'static str {
    match s {
        GruStateInput::SkipOutput => "skip_output",
        GruStateInput::RawState => "raw_state",
    }
}

fn parse_gru_state(s: &str) -> Option<GruStateInput> {
    match s.trim() {
        "skip_output" => Some(GruStateInput::SkipOutput),
        "raw_state" => Some(GruStateInput::RawState),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::randomize;
    use crate::taskgen::gen_prefix_sum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(conv: ConvType) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = ModelConfig::new(conv, 2);
        let mut model = Model::new(config, &mut rng).unwrap();
        randomize(model.params_mut(), 1.0, &mut rng);
        Checkpoint {
            config,
            task: TaskTag::PrefixSum,
            seed: 99,
            epoch: 7,
            val_loss: 0.1 + 0.2,
            params: model.into_params(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for conv in ConvType::ALL {
            let c = sample(conv);
            let text = c.render();
            let back = Checkpoint::parse(&text, "mem").unwrap();
            assert_eq!(back, c);
            assert_eq!(back.render(), text);
            let g = gen_prefix_sum(9, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let a = c.model().unwrap().forward(&g, 11).unwrap();
            let b = back.model().unwrap().forward(&g, 11).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn awkward_floats_survive() {
        let mut c = sample(ConvType::RecGin);
        let id = c.params.find("encoder.b1").unwrap();
        let values = [-0.0, f64::MIN_POSITIVE, 5e-324, 1.0 / 3.0, -1e300];
        c.params.get_mut(id).data_mut()[..5].copy_from_slice(&values);
        let back = Checkpoint::parse(&c.render(), "mem").unwrap();
        for (a, b) in back.params.get(id).data()[..5].iter().zip(values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_corruption() {
        let text = sample(ConvType::RecGruE).render();
        assert!(Checkpoint::parse("", "mem").is_err());
        assert!(Checkpoint::parse(&text.replace("recgnn-checkpoint 1", "recgnn-checkpoint 9"), "mem").is_err());
        assert!(Checkpoint::parse(&text.replace("\nend\n", "\n"), "mem").is_err());
        assert!(Checkpoint::parse(&text.replace("config.conv recgru_e", "config.conv recgin"), "mem").is_err());
        assert!(Checkpoint::parse(&text.replace("task prefix_sum", "task distance"), "mem").is_err());
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::parse(&truncated, "mem").is_err());
    }

    #[test]
    fn task_check() {
        let c = sample(ConvType::RecGruE);
        assert!(c.expect_task(TaskTag::PrefixSum).is_ok());
        assert!(matches!(c.expect_task(TaskTag::Distance), Err(Error::Config(_))));
    }
}
