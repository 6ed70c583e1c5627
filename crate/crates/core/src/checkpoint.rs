//! JSON checkpoints.
//!
//! ```json
//! {
//!   "format": "trendcast-checkpoint",
//!   "version": 1,
//!   "seed": 0,
//!   "schema": { ... },
//!   "model_config": { ... },
//!   "parameters": [ { "name": "input.weight", "shape": [74, 128], "data": [ ... ] }, ... ]
//! }
//! ```
//!
//! Parameters are listed in a fixed order and floats are written in
//! shortest round-trip form, so a reload predicts bitwise identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::data::FeatureSchema;
use crate::error::{Error, Result};
use crate::model::{Linear, Model, ModelConfig, ModelParams, TrendBlock};

pub const FORMAT: &str = "trendcast-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub schema: FeatureSchema,
    pub model_config: ModelConfig,
    pub parameters: Vec<NamedTensor>,
}

fn embedded_names(schema: &FeatureSchema) -> Vec<&'static str> {
    schema.embeddings.iter().map(|v| v.feature.name()).collect()
}

impl Checkpoint {
    pub fn new(model: &Model, schema: &FeatureSchema, seed: u64) -> Self {
        let params = model.params();
        let parameters = params
            .names(&embedded_names(schema))
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            seed,
            schema: schema.clone(),
            model_config: model.config().clone(),
            parameters,
        }
    }

    /// Rebuilds the model, checking names and shapes.
    pub fn model(&self) -> Result<Model> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint: format `{}`", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} unsupported (expected {VERSION})",
                self.version
            )));
        }
        let mut tensors = Vec::with_capacity(self.parameters.len());
        for p in &self.parameters {
            let t = Tensor::new(p.shape.clone(), p.data.clone())
                .map_err(|_| Error::Checkpoint(format!("parameter `{}` has inconsistent shape", p.name)))?;
            if t.shape().len() != 2 {
                return Err(Error::Checkpoint(format!("parameter `{}` is not a matrix", p.name)));
            }
            tensors.push(t);
        }
        let n_embed = self.schema.embeddings.len();
        let n_main = self.model_config.main_block_widths.len();
        let expected = n_embed + 2 * (n_main + 2) + if self.model_config.trend_block_enabled { 4 } else { 0 };
        if tensors.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameter tensors, found {}",
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let embeddings: Vec<Tensor> = it.by_ref().take(n_embed).collect();
        let mut pair = || Linear {
            weight: it.next().expect("counted"),
            bias: it.next().expect("counted"),
        };
        let input = pair();
        let main_hidden = (0..n_main).map(|_| pair()).collect();
        let main_output = pair();
        let trend = self.model_config.trend_block_enabled.then(|| TrendBlock {
            hidden: pair(),
            output: pair(),
        });
        let params = ModelParams {
            embeddings,
            input,
            main_hidden,
            main_output,
            trend,
        };
        let names = params.names(&embedded_names(&self.schema));
        for (want, got) in names.iter().zip(&self.parameters) {
            if *want != got.name {
                return Err(Error::Checkpoint(format!(
                    "expected parameter `{want}`, found `{}`",
                    got.name
                )));
            }
        }
        Model::from_parts(self.model_config.clone(), params, &self.schema).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Writes `model` with its schema and training seed.
pub fn save_model(path: impl AsRef<Path>, model: &Model, schema: &FeatureSchema, seed: u64) -> Result<()> {
    Checkpoint::new(model, schema, seed).save(path)
}

/// Reads a checkpoint back into a model and the schema it was trained with.
pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, FeatureSchema)> {
    let ckpt = Checkpoint::load(path)?;
    let model = ckpt.model()?;
    Ok((model, ckpt.schema))
}
