//! Checkpoints: a `manifest.json` listing every parameter plus one raw
//! little-endian `f64` blob per parameter in the same directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ParamStore, Result, Tensor, TensorError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub entries: Vec<CheckpointEntry>,
    /// Free-form metadata, e.g. the model config that produced the weights.
    #[serde(default)]
    pub metadata: serde_json::Value,
    /// SHA-256 over every blob in entry order.
    pub content_hash: String,
}

fn blob_name(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{:04}_{}.bin", index, clean)
}

fn encode(t: &Tensor) -> Vec<u8> {
    t.data().iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn save_checkpoint(dir: &Path, params: &ParamStore, metadata: serde_json::Value) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let mut hasher = Sha256::new();
    let mut entries = Vec::with_capacity(params.len());
    for (i, (name, t)) in params.names().iter().zip(params.tensors()).enumerate() {
        let file = blob_name(i, name);
        let bytes = encode(t);
        hasher.update(&bytes);
        fs::write(dir.join(&file), &bytes)?;
        entries.push(CheckpointEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            dtype: "f64".into(),
            file,
        });
    }
    let manifest = CheckpointManifest {
        format_version: 1,
        entries,
        metadata,
        content_hash: hex::encode(hasher.finalize()),
    };
    let tmp = dir.join(format!("{}.tmp", MANIFEST_FILE));
    fs::write(&tmp, serde_json::to_vec_pretty(&manifest)?)?;
    fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<(ParamStore, CheckpointManifest)> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let mut store = ParamStore::new();
    let mut hasher = Sha256::new();
    for e in &manifest.entries {
        if e.dtype != "f64" {
            return Err(TensorError::Checkpoint(format!("unsupported dtype {} for {}", e.dtype, e.name)));
        }
        let bytes = fs::read(dir.join(&e.file))?;
        let n: usize = e.shape.iter().product();
        if bytes.len() != n * 8 {
            return Err(TensorError::Checkpoint(format!(
                "{}: expected {} bytes, found {}",
                e.file,
                n * 8,
                bytes.len()
            )));
        }
        hasher.update(&bytes);
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.add(e.name.clone(), Tensor::new(&e.shape, data)?);
    }
    let hash = hex::encode(hasher.finalize());
    if hash != manifest.content_hash {
        return Err(TensorError::Checkpoint(format!(
            "content hash mismatch: manifest {} vs blobs {}",
            manifest.content_hash, hash
        )));
    }
    Ok((store, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        store.add("layer0/w", Tensor::randn(&[3, 4], 1.0, &mut rng));
        store.add("b", Tensor::randn(&[4], 1.0, &mut rng));
        store.add("s", Tensor::scalar(-0.0));
        let dir = tempfile::tempdir().unwrap();
        let saved = save_checkpoint(dir.path(), &store, serde_json::json!({"k": 1})).unwrap();
        let (loaded, manifest) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(saved, manifest);
        assert_eq!(loaded.names(), store.names());
        for (a, b) in loaded.tensors().iter().zip(store.tensors()) {
            assert_eq!(a.shape(), b.shape());
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        let raw = fs::read(dir.path().join(&manifest.entries[1].file)).unwrap();
        assert_eq!(raw.len(), 4 * 8);
        assert_eq!(f64::from_le_bytes(raw[..8].try_into().unwrap()), store.tensors()[1].data()[0]);
    }

    #[test]
    fn corrupted_blob_is_detected() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::from_vec(vec![1.0, 2.0]));
        let dir = tempfile::tempdir().unwrap();
        let m = save_checkpoint(dir.path(), &store, serde_json::Value::Null).unwrap();
        fs::write(dir.path().join(&m.entries[0].file), 7.0f64.to_le_bytes().repeat(2)).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(TensorError::Checkpoint(_))));
    }
}
