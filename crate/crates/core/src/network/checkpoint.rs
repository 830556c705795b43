//! Parameter checkpoints as JSON. Floats round-trip exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetworkConfig, Parameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "batle-parameters";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: NetworkConfig,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn from_parameters(params: &Parameters) -> Self {
        Self {
            format: FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: params.config.clone(),
            tensors: params
                .named_tensors()
                .into_iter()
                .map(|(name, shape, values)| Tensor {
                    name,
                    shape,
                    values: values.to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_parameters(self) -> Result<Parameters> {
        if self.format != FORMAT {
            return Err(Error::InvalidInput(format!(
                "not a parameter checkpoint (format `{}`)",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let mut params = Parameters::zeros(&self.config)?;
        let expected: Vec<(String, Vec<usize>)> = params
            .named_tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint holds {} tensors, configuration needs {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        let slots = params.tensors_mut(|_| true);
        for ((slot, (name, shape)), t) in slots.into_iter().zip(&expected).zip(&self.tensors) {
            if &t.name != name || &t.shape != shape || t.values.len() != slot.len() {
                return Err(Error::Shape(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                    t.name, t.shape
                )));
            }
            slot.copy_from_slice(&t.values);
        }
        Ok(params)
    }
}

pub fn save_checkpoint(path: &Path, params: &Parameters) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(BufWriter::new(file), &Checkpoint::from_parameters(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Parameters> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
    ckpt.into_parameters()
}
