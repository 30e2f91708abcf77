//! Parameter checkpoints.
//!
//! A checkpoint is a JSON document:
//!
//! ```json
//! {
//!   "format": "fuzzy-cgan-checkpoint",
//!   "version": 1,
//!   "records": [
//!     { "name": "generator/x_branch.weight", "rows": 7, "cols": 100, "values": [ ... ] }
//!   ]
//! }
//! ```
//!
//! Records keep network order. Names are `<network>/<tensor>`; values are
//! row-major `f64` written with shortest round-trip formatting, so a
//! write/read cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkParameters;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "fuzzy-cgan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub records: Vec<CheckpointRecord>,
}

impl Checkpoint {
    pub fn from_networks(networks: &[(&str, &NetworkParameters)]) -> Self {
        let records = networks
            .iter()
            .flat_map(|(net, params)| {
                params.iter().map(move |(name, t)| CheckpointRecord {
                    name: format!("{net}/{name}"),
                    rows: t.rows(),
                    cols: t.cols(),
                    values: t.data().to_vec(),
                })
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            records,
        }
    }

    /// Tensors of `network`, in recorded order.
    pub fn network(&self, network: &str) -> Result<NetworkParameters> {
        let prefix = format!("{network}/");
        let mut params = NetworkParameters::new();
        for rec in &self.records {
            if let Some(name) = rec.name.strip_prefix(&prefix) {
                params.push(name, Tensor::new(rec.rows, rec.cols, rec.values.clone())?);
            }
        }
        if params.is_empty() {
            return Err(Error::State(format!("checkpoint has no network {network:?}")));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::State(format!("not a checkpoint: format {:?}", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::State(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::harness::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
