use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::io::{sha256_hex, write_atomic};
use crate::model::{ModelDims, ModelParams};
use crate::nn::checkpoint;
use crate::pipeline::Preprocessor;
use crate::rng::RngState;
use crate::subword::Segmenter;

/// A saved model with everything needed to translate or resume.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub preprocessor: Preprocessor,
    pub rng: Option<RngState>,
    pub info: CheckpointInfo,
}

/// Training progress and dev scores; also written as a JSON sidecar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub updates: u64,
    pub epoch: u64,
    pub instances: u64,
    pub dev_bleu: Option<f64>,
    pub dev_ce_bits: Option<f64>,
    pub config_hash: Option<String>,
    /// Filled in on save.
    #[serde(default)]
    pub sha256: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    dims: ModelDims,
    src_vocab: Vec<String>,
    tgt_vocab: Vec<String>,
    segmenter: serde_json::Value,
    info: CheckpointInfo,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Meta {
            dims: *self.model.dims(),
            src_vocab: self.preprocessor.src_vocab.tokens().to_vec(),
            tgt_vocab: self.preprocessor.tgt_vocab.tokens().to_vec(),
            segmenter: self.preprocessor.segmenter.to_json(),
            info: CheckpointInfo {
                sha256: None,
                ..self.info.clone()
            },
        };
        checkpoint::encode(
            self.model.params(),
            self.rng,
            self.info.updates,
            self.info.epoch,
            serde_json::to_value(meta).expect("meta serializes"),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (manifest, params) = checkpoint::decode(bytes)?;
        let meta: Meta = serde_json::from_value(manifest.meta)
            .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        let preprocessor = Preprocessor {
            segmenter: Segmenter::from_json(&meta.segmenter)?,
            src_vocab: Vocabulary::from_tokens(meta.src_vocab)?,
            tgt_vocab: Vocabulary::from_tokens(meta.tgt_vocab)?,
        };
        if preprocessor.src_vocab.len() != meta.dims.src_vocab
            || preprocessor.tgt_vocab.len() != meta.dims.tgt_vocab
        {
            return Err(Error::Checkpoint(
                "vocabulary sizes disagree with model dimensions".into(),
            ));
        }
        Ok(Checkpoint {
            model: ModelParams::from_parts(meta.dims, params)?,
            preprocessor,
            rng: manifest.rng,
            info: CheckpointInfo {
                sha256: Some(sha256_hex(bytes)),
                ..meta.info
            },
        })
    }

    /// Writes the binary file and its `.json` sidecar, both atomically.
    /// Returns the SHA-256 of the binary.
    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        let hash = sha256_hex(&bytes);
        write_atomic(path, &bytes)?;
        let info = CheckpointInfo {
            sha256: Some(hash.clone()),
            ..self.info.clone()
        };
        let json = serde_json::to_vec_pretty(&info)?;
        write_atomic(&sidecar_path(path), &json)?;
        Ok(hash)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
