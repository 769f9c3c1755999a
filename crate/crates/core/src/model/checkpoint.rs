use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::autodiff::Tensor;
use crate::corpus::TruncationLimits;
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// Self-contained model container: a JSON manifest (config, truncation
/// limits, embedded tokenizer text, run metadata, tensor directory) followed
/// by little-endian f64 payloads. save -> load -> save is byte-identical.
///
/// Layout: 8-byte little-endian manifest length, manifest JSON, payload.
/// Tensor offsets are byte offsets into the payload.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub limits: TruncationLimits,
    pub tokenizer_text: String,
    /// Trainer bookkeeping (epoch counters, optimizer scalars); free-form.
    pub extra: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: ModelConfig,
    limits: TruncationLimits,
    tokenizer: String,
    extra: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

impl Checkpoint {
    pub fn from_params(
        params: &ModelParams,
        limits: TruncationLimits,
        tokenizer_text: String,
    ) -> Self {
        Self {
            config: params.config().clone(),
            limits,
            tokenizer_text,
            extra: serde_json::Value::Null,
            tensors: params
                .iter()
                .map(|(name, t)| (name.clone(), t.clone()))
                .collect(),
        }
    }

    /// Extracts the model parameters (ignoring any optimizer tensors).
    pub fn params(&self) -> Result<ModelParams> {
        let wanted: BTreeMap<String, Tensor> = self
            .config
            .tensor_shapes()
            .into_iter()
            .map(|(name, _)| {
                self.tensors
                    .get(&name)
                    .cloned()
                    .map(|t| (name.clone(), t))
                    .ok_or(Error::Checkpoint {
                        message: format!("missing parameter tensor {name}"),
                    })
            })
            .collect::<Result<_>>()?;
        ModelParams::from_tensors(self.config.clone(), wanted)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let display = path.display().to_string();
        let mut payload: Vec<u8> = Vec::new();
        let mut entries = Vec::new();
        for (name, tensor) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: tensor.shape().to_vec(),
                offset: payload.len() as u64,
            });
            for v in tensor.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            limits: self.limits,
            tokenizer: self.tokenizer_text.clone(),
            extra: self.extra.clone(),
            tensors: entries,
        };
        let manifest_bytes = serde_json::to_vec(&manifest).map_err(|e| Error::Checkpoint {
            message: format!("manifest serialization: {e}"),
        })?;

        let mut file = fs::File::create(path).map_err(|e| Error::io(&display, e))?;
        file.write_all(&(manifest_bytes.len() as u64).to_le_bytes())
            .and_then(|_| file.write_all(&manifest_bytes))
            .and_then(|_| file.write_all(&payload))
            .map_err(|e| Error::io(&display, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let bytes = fs::read(path).map_err(|e| Error::io(&display, e))?;
        let fail = |message: String| Error::Checkpoint { message };
        if bytes.len() < 8 {
            return Err(fail(format!("{display}: file too short")));
        }
        let manifest_len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let manifest_end = 8 + manifest_len;
        if bytes.len() < manifest_end {
            return Err(fail(format!("{display}: truncated manifest")));
        }
        let manifest: Manifest = serde_json::from_slice(&bytes[8..manifest_end])
            .map_err(|e| fail(format!("{display}: manifest parse: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(fail(format!(
                "{display}: unsupported format version {}",
                manifest.format_version
            )));
        }
        let payload = &bytes[manifest_end..];
        let mut tensors = BTreeMap::new();
        for entry in manifest.tensors {
            let n: usize = entry.shape.iter().product();
            let start = entry.offset as usize;
            let end = start + n * 8;
            if end > payload.len() {
                return Err(fail(format!(
                    "{display}: tensor {} overruns payload",
                    entry.name
                )));
            }
            let data: Vec<f64> = payload[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let tensor = Tensor::new(entry.shape, data)
                .map_err(|e| fail(format!("{display}: tensor {}: {e}", entry.name)))?;
            tensors.insert(entry.name, tensor);
        }
        Ok(Self {
            config: manifest.config,
            limits: manifest.limits,
            tokenizer_text: manifest.tokenizer,
            extra: manifest.extra,
            tensors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::TokenLevel;
    use tempfile::tempdir;

    fn tiny_params() -> ModelParams {
        ModelParams::init(&ModelConfig {
            token_level: TokenLevel::Word,
            vocab_size: 10,
            embedding_dim: 3,
            encoder_hidden_dim: 2,
            decoder_hidden_dim: 4,
            use_copy: true,
            bidirectional_encoder: true,
            seed: 2,
        })
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let mut ckpt = Checkpoint::from_params(
            &tiny_params(),
            TruncationLimits::default(),
            "word v1 4\n#vocab\n<pad>\t0\n<unk>\t1\n<s>\t2\n</s>\t3\n".to_string(),
        );
        ckpt.extra = serde_json::json!({"epoch": 3, "best_val_loss": 0.25});
        ckpt.save(&p1).unwrap();
        let loaded = Checkpoint::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn loaded_params_are_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let params = tiny_params();
        Checkpoint::from_params(&params, TruncationLimits::default(), String::new())
            .save(&path)
            .unwrap();
        let loaded = Checkpoint::load(&path).unwrap().params().unwrap();
        assert!(params.bits_eq(&loaded));
    }

    #[test]
    fn missing_tensor_is_reported() {
        let params = tiny_params();
        let mut ckpt =
            Checkpoint::from_params(&params, TruncationLimits::default(), String::new());
        ckpt.tensors.remove("copy.w");
        let err = ckpt.params().unwrap_err();
        assert!(err.to_string().contains("copy.w"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let params = tiny_params();
        Checkpoint::from_params(&params, TruncationLimits::default(), String::new())
            .save(&path)
            .unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
