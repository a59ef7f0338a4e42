//! Checkpoint directories: `manifest.json` plus a raw `params.bin` blob of
//! little-endian `f32` values.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StcnError};
use crate::model::{Model, ModelConfig};
use crate::real::Real;
use crate::train::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    pub blob_bytes: u64,
    pub params: Vec<ParamEntry>,
}

fn ckpt_err(param: &str, message: impl Into<String>) -> StcnError {
    StcnError::Checkpoint {
        param: param.to_string(),
        message: message.into(),
    }
}

/// Builds the manifest and blob for `model` without touching the filesystem.
pub fn encode<F: Real>(model: &Model<F>, train: Option<&TrainConfig>) -> (Manifest, Vec<u8>) {
    let mut blob = Vec::with_capacity(model.num_params() * 4);
    let mut params = Vec::new();
    for p in model.store().iter() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.shape.clone(),
            offset: blob.len() as u64,
        });
        for v in &p.value {
            blob.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model: model.config().clone(),
        train: train.cloned(),
        blob_bytes: blob.len() as u64,
        params,
    };
    (manifest, blob)
}

/// Rebuilds a model from a manifest and blob, validating the parameter index.
pub fn decode<F: Real>(manifest: &Manifest, blob: &[u8]) -> Result<Model<F>> {
    if manifest.format_version != FORMAT_VERSION {
        return Err(ckpt_err(
            "<manifest>",
            format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }
    if manifest.blob_bytes != blob.len() as u64 {
        return Err(ckpt_err(
            "<blob>",
            format!("manifest declares {} bytes, blob has {}", manifest.blob_bytes, blob.len()),
        ));
    }
    let mut model = Model::<F>::new(manifest.model.clone(), 0)?;

    let mut index: HashMap<&str, &ParamEntry> = HashMap::new();
    let mut expected_offset = 0u64;
    for e in &manifest.params {
        if index.insert(e.name.as_str(), e).is_some() {
            return Err(ckpt_err(&e.name, "listed more than once"));
        }
        if e.offset != expected_offset {
            return Err(ckpt_err(
                &e.name,
                format!("offset {} is not contiguous (expected {expected_offset})", e.offset),
            ));
        }
        expected_offset += 4 * e.shape.iter().product::<usize>() as u64;
    }
    if expected_offset != blob.len() as u64 {
        return Err(ckpt_err(
            "<blob>",
            format!("parameter index covers {expected_offset} bytes, blob has {}", blob.len()),
        ));
    }

    for p in model.store_mut().iter_mut() {
        let e = index
            .remove(p.name.as_str())
            .ok_or_else(|| ckpt_err(&p.name, "missing from checkpoint"))?;
        if e.shape != p.shape {
            return Err(ckpt_err(
                &p.name,
                format!("shape {:?} does not match expected {:?}", e.shape, p.shape),
            ));
        }
        let start = e.offset as usize;
        for (i, v) in p.value.iter_mut().enumerate() {
            let at = start + 4 * i;
            let raw = f32::from_le_bytes(blob[at..at + 4].try_into().expect("4-byte slice"));
            if !raw.is_finite() {
                return Err(ckpt_err(&p.name, format!("non-finite value at element {i}")));
            }
            *v = F::lit(raw as f64);
        }
    }
    if let Some(name) = index.keys().min() {
        return Err(ckpt_err(name, "not a parameter of the configured model"));
    }
    Ok(model)
}

/// Writes `dir/manifest.json` and `dir/params.bin`, creating `dir` if needed.
pub fn save_checkpoint<F: Real>(
    model: &Model<F>,
    train: Option<&TrainConfig>,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (manifest, blob) = encode(model, train);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ckpt_err("<manifest>", e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    fs::write(dir.join(BLOB_FILE), blob)?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let text = fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
    serde_json::from_str(&text).map_err(|e| ckpt_err("<manifest>", e.to_string()))
}

pub fn load_checkpoint<F: Real>(dir: impl AsRef<Path>) -> Result<(Model<F>, Manifest)> {
    let manifest = read_manifest(&dir)?;
    let blob = fs::read(dir.as_ref().join(BLOB_FILE))?;
    let model = decode(&manifest, &blob)?;
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::ObsConfig;
    use crate::tcn::TcnConfig;

    fn model() -> Model<f32> {
        let cfg = ModelConfig {
            variant: crate::model::Variant::Stcn,
            tcn: TcnConfig {
                layers: 2,
                blocks: 1,
                filters: 4,
            },
            latent_dims: vec![2, 1],
            obs: ObsConfig::normal(),
            input_dim: 2,
        };
        Model::new(cfg, 3).unwrap()
    }

    #[test]
    fn blob_length_matches_index() {
        let (m, blob) = encode(&model(), None);
        let total: usize = m.params.iter().map(|e| 4 * e.shape.iter().product::<usize>()).sum();
        assert_eq!(total, blob.len());
        assert_eq!(m.blob_bytes as usize, blob.len());
    }

    #[test]
    fn decode_is_exact() {
        let src = model();
        let (m, blob) = encode(&src, Some(&TrainConfig::default()));
        let back: Model<f32> = decode(&m, &blob).unwrap();
        assert_eq!(back.store(), src.store());
    }

    #[test]
    fn errors_name_the_parameter() {
        let (m, blob) = encode(&model(), None);
        let name = m.params[2].name.clone();

        let mut bad = m.clone();
        bad.params[2].offset += 4;
        let e = decode::<f32>(&bad, &blob).unwrap_err().to_string();
        assert!(e.contains(&name), "{e}");

        let mut bad = m.clone();
        bad.params[2].shape = vec![bad.params[2].shape.iter().product(), 1];
        let e = decode::<f32>(&bad, &blob).unwrap_err().to_string();
        assert!(e.contains(&name), "{e}");

        let mut bad = m.clone();
        bad.params[2].name = "renamed".into();
        let e = decode::<f32>(&bad, &blob).unwrap_err().to_string();
        assert!(e.contains(&name), "{e}");

        let mut bad = m.clone();
        bad.format_version = 99;
        assert!(decode::<f32>(&bad, &blob).unwrap_err().to_string().contains("version"));
    }
}
