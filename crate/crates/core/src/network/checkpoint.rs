//! Versioned binary container: magic, version, JSON header, raw little-endian f32 blobs.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::ParamSet;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GLSFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        Ok(Tensor::from_slice(&self.data, self.shape.as_slice(), device)?.to_dtype(dtype)?)
    }
}

/// In-memory checkpoint: free-form metadata plus named tensors in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    tensors: Vec<NamedTensor>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, t: &Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(corrupt(format!("duplicate tensor `{name}`")));
        }
        self.tensors.push(NamedTensor {
            name,
            shape: t.dims().to_vec(),
            data: t.flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()?,
        });
        Ok(())
    }

    pub fn push_params(&mut self, prefix: &str, params: &ParamSet) -> Result<()> {
        for (name, var) in params.iter() {
            self.push_tensor(format!("{prefix}.{name}"), var.as_tensor())?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor(&self, name: &str, dtype: DType, device: &Device) -> Result<Tensor> {
        self.get(name)
            .ok_or_else(|| corrupt(format!("missing tensor `{name}`")))?
            .to_tensor(dtype, device)
    }

    /// Overwrites every parameter of `params` from `prefix.*`; shapes must match exactly.
    pub fn load_params(&self, prefix: &str, params: &ParamSet) -> Result<()> {
        for (name, var) in params.iter() {
            let full = format!("{prefix}.{name}");
            let entry = self.get(&full).ok_or_else(|| corrupt(format!("missing tensor `{full}`")))?;
            if entry.shape != var.dims() {
                return Err(corrupt(format!(
                    "tensor `{full}` has shape {:?}, network expects {:?}",
                    entry.shape,
                    var.dims()
                )));
            }
            var.set(&entry.to_tensor(var.dtype(), var.device())?)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        let payload: usize = self.tensors.iter().map(|t| t.data.len() * 4).sum();
        let mut out = Vec::with_capacity(20 + header.len() + payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = 20usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(&bytes[20..header_end]).map_err(|e| corrupt(format!("malformed header: {e}")))?;
        let mut pos = header_end;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let end = pos.checked_add(n * 4).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt(format!("truncated tensor `{}`", entry.name)))?;
            let data = bytes[pos..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            pos = end;
            tensors.push(NamedTensor {
                name: entry.name,
                shape: entry.shape,
                data,
            });
        }
        if pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        // write-then-rename so a crash never leaves a torn checkpoint behind
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Short content hash identifying a checkpoint file.
pub fn checkpoint_id(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..8]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_roundtrip_exactly() {
        let mut c = Checkpoint::new(serde_json::json!({"kind": "test", "x": 0.1}));
        let t = Tensor::new(&[[1.5f32, -0.0, f32::MIN_POSITIVE], [3.0, 1e-30, 7.25]], &Device::Cpu).unwrap();
        c.push_tensor("a", &t).unwrap();
        let bytes = c.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let c = Checkpoint::new(serde_json::json!(null));
        let mut bytes = c.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
        bytes.push(0);
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
