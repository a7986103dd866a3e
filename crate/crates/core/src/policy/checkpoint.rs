//! Versioned JSON checkpoints: every named tensor with its shape and
//! row-major values, the Adam state, and the hash of the producing config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Dense, Mlp, OptimizerState, PolicyParameters};
use crate::error::{Error, Result};
use crate::io::export;

pub const FORMAT: &str = "fdi-grid-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDocument {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<NamedTensor>,
    pub second_moment: Vec<NamedTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointDocument {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub config_hash: String,
    /// Training seed of the producing run.
    pub seed: u64,
    pub global_step: u64,
    pub architecture: Architecture,
    pub tensors: Vec<NamedTensor>,
    pub optimizer: Option<OptimizerDocument>,
}

/// Policy plus optimizer state recovered from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub seed: u64,
    pub global_step: u64,
    pub policy: PolicyParameters,
    pub optimizer: Option<OptimizerState>,
}

fn named(architecture: &Architecture, tensors: impl Iterator<Item = Vec<f64>>) -> Vec<NamedTensor> {
    architecture
        .tensor_shapes()
        .into_iter()
        .zip(tensors)
        .map(|((name, shape), values)| NamedTensor { name, shape, values })
        .collect()
}

impl Checkpoint {
    pub fn to_document(&self) -> CheckpointDocument {
        let arch = &self.policy.architecture;
        CheckpointDocument {
            format: FORMAT.into(),
            version: VERSION,
            tool_version: export::TOOL_VERSION.into(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            global_step: self.global_step,
            architecture: arch.clone(),
            tensors: named(arch, self.policy.tensors().map(<[f64]>::to_vec)),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerDocument {
                learning_rate: o.learning_rate,
                beta1: o.beta1,
                beta2: o.beta2,
                epsilon: o.epsilon,
                step: o.step,
                first_moment: named(arch, o.first_moment.iter().cloned()),
                second_moment: named(arch, o.second_moment.iter().cloned()),
            }),
        }
    }

    pub fn from_document(doc: CheckpointDocument) -> Result<Self> {
        if doc.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", doc.format)));
        }
        if doc.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {VERSION})",
                doc.version
            )));
        }
        let arch = doc.architecture;
        let tensors = check_tensors(&arch, doc.tensors, "tensors")?;
        let policy = assemble(&arch, tensors);
        let optimizer = doc
            .optimizer
            .map(|o| -> Result<OptimizerState> {
                Ok(OptimizerState {
                    learning_rate: o.learning_rate,
                    beta1: o.beta1,
                    beta2: o.beta2,
                    epsilon: o.epsilon,
                    step: o.step,
                    first_moment: check_tensors(&arch, o.first_moment, "optimizer.first_moment")?,
                    second_moment: check_tensors(&arch, o.second_moment, "optimizer.second_moment")?,
                })
            })
            .transpose()?;
        Ok(Checkpoint {
            config_hash: doc.config_hash,
            seed: doc.seed,
            global_step: doc.global_step,
            policy,
            optimizer,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        export::write_file(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: CheckpointDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_document(doc)
    }

    /// Loads and additionally requires the stored architecture to equal `expected`.
    pub fn load_for(path: &Path, expected: &Architecture) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if &ckpt.policy.architecture != expected {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: checkpoint has {:?}, expected {expected:?}",
                ckpt.policy.architecture
            )));
        }
        Ok(ckpt)
    }
}

fn check_tensors(arch: &Architecture, tensors: Vec<NamedTensor>, field: &str) -> Result<Vec<Vec<f64>>> {
    let expected = arch.tensor_shapes();
    if tensors.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{field}: expected {} tensors, found {}",
            expected.len(),
            tensors.len()
        )));
    }
    tensors
        .into_iter()
        .zip(expected)
        .map(|(t, (name, shape))| {
            if t.name != name || t.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "{field}: expected `{name}` with shape {shape:?}, found `{}` with shape {:?}",
                    t.name, t.shape
                )));
            }
            if t.values.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!(
                    "{field}: `{name}` holds {} values for shape {shape:?}",
                    t.values.len()
                )));
            }
            Ok(t.values)
        })
        .collect()
}

fn assemble(arch: &Architecture, tensors: Vec<Vec<f64>>) -> PolicyParameters {
    let mut it = tensors.into_iter();
    let mut build = |sizes: Vec<usize>| Mlp {
        layers: sizes
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weight: it.next().expect("checked count"),
                bias: it.next().expect("checked count"),
            })
            .collect(),
    };
    let actor = build(arch.actor_sizes());
    let critic = build(arch.critic_sizes());
    PolicyParameters { architecture: arch.clone(), actor, critic }
}
