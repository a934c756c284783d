//! Checkpoint directories: `header.json` plus `params.f64`, the flat
//! parameter vector as little-endian f64 in layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::norm::Normalization;
use super::spec::{NetSpec, INIT_SCHEME};
use super::{Network, NnError};

pub const CHECKPOINT_FORMAT: &str = "voltpred-checkpoint/1";
pub const HEADER_FILE: &str = "header.json";
pub const PARAMS_FILE: &str = "params.f64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub spec: NetSpec,
    pub param_count: usize,
    pub seed: u64,
    pub init: String,
    pub train_config_hash: String,
    pub blob_sha256: String,
    pub normalization: Normalization,
    /// Epoch the parameters come from (0 for an untrained net).
    pub epoch: usize,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub net: Network,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn blob(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|v| v.to_le_bytes()).collect()
}

impl Checkpoint {
    pub fn new(net: Network, normalization: Normalization, seed: u64, train_config_hash: String) -> Self {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            spec: net.spec().clone(),
            param_count: net.params().len(),
            seed,
            init: INIT_SCHEME.into(),
            train_config_hash,
            blob_sha256: sha256_hex(&blob(net.params())),
            normalization,
            epoch: 0,
            val_acc: 0.0,
        };
        Checkpoint { header, net }
    }

    pub fn save(&self, dir: &Path) -> Result<(), NnError> {
        fs::create_dir_all(dir)?;
        let bytes = blob(self.net.params());
        let mut header = self.header.clone();
        header.blob_sha256 = sha256_hex(&bytes);
        header.param_count = self.net.params().len();
        fs::write(dir.join(PARAMS_FILE), bytes)?;
        let text = serde_json::to_string_pretty(&header).map_err(|e| NnError::CorruptCheckpoint(e.to_string()))?;
        fs::write(dir.join(HEADER_FILE), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, NnError> {
        let corrupt = |m: String| NnError::CorruptCheckpoint(m);
        let text = fs::read_to_string(dir.join(HEADER_FILE))?;
        let header: CheckpointHeader = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(corrupt(format!("unknown format {:?}", header.format)));
        }
        let bytes = fs::read(dir.join(PARAMS_FILE))?;
        if sha256_hex(&bytes) != header.blob_sha256 {
            return Err(corrupt("parameter blob checksum mismatch".into()));
        }
        if bytes.len() != header.param_count * 8 || header.spec.param_count() != header.param_count {
            return Err(corrupt(format!(
                "blob holds {} bytes, header expects {} parameters",
                bytes.len(),
                header.param_count
            )));
        }
        if header.normalization.dim() != header.spec.input_dim
            || header.normalization.std.len() != header.spec.input_dim
        {
            return Err(corrupt("normalization width differs from input width".into()));
        }
        let params = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let net = Network::new(header.spec.clone(), params).map_err(|e| corrupt(e.to_string()))?;
        Ok(Checkpoint { header, net })
    }

    /// Loads and rejects a checkpoint built for a different feature width.
    pub fn load_for(dir: &Path, input_dim: usize) -> Result<Self, NnError> {
        let ck = Self::load(dir)?;
        if ck.header.spec.input_dim != input_dim {
            return Err(NnError::DimensionMismatch { expected: input_dim, got: ck.header.spec.input_dim });
        }
        Ok(ck)
    }
}
