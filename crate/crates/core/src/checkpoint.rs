//! Model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | bytes            | content                                          |
//! |------------------|--------------------------------------------------|
//! | 8                | magic `HSCKPT\0\0`                               |
//! | 4                | format version (`u32`, currently 1)              |
//! | 8                | header length `h` (`u64`)                        |
//! | `h`              | UTF-8 JSON header: model config, class set, vocabulary, and `[name, shape]` for every parameter in order |
//! | 8 per value      | parameter values as `f64`, tensors in header order, row-major |
//!
//! Values are stored bit-exactly, so save → load → save reproduces the same
//! bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classes::ClassSet;
use crate::error::{io_err, Error, Result};
use crate::params::ParamStore;
use crate::sense::{ModelConfig, SenseModel};
use crate::tensor::Tensor;
use crate::text::Vocabulary;

pub const MAGIC: &[u8; 8] = b"HSCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    classes: ClassSet,
    vocab: Vocabulary,
    params: Vec<(String, Vec<usize>)>,
}

pub fn to_bytes(model: &SenseModel) -> Vec<u8> {
    let store = model.params();
    let header = Header {
        config: model.config().clone(),
        classes: model.classes().clone(),
        vocab: model.vocab().clone(),
        params: store
            .names()
            .iter()
            .zip(store.tensors())
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + store.numel() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in store.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<SenseModel> {
    let cur = &mut bytes;
    if take(cur, 8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(cur, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(take(cur, 8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(cur, len)?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut model = SenseModel::new(header.config, header.classes, header.vocab)?;
    let mut store = ParamStore::new();
    for (name, shape) in header.params {
        let n: usize = shape.iter().product();
        let raw = take(cur, n * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.add(name, Tensor::new(shape, data)?);
    }
    if !cur.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", cur.len())));
    }
    model.set_params(store)?;
    Ok(model)
}

pub fn save(model: &SenseModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(io_err(path))
}

pub fn load(path: impl AsRef<Path>) -> Result<SenseModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;
    use crate::sense::ModelMode;

    fn model() -> SenseModel {
        let vocab = Vocabulary::from_tokens(&["hate", "nothate", "x"], 10).unwrap();
        let mut enc = EncoderConfig::new(vocab.len());
        enc.d_model = 4;
        enc.n_heads = 2;
        enc.n_layers = 1;
        enc.d_ff = 8;
        enc.max_len = 6;
        let mut cfg = ModelConfig::new(enc, ModelMode::Sense);
        cfg.temperature = 0.3;
        SenseModel::new(cfg, ClassSet::binary(), vocab).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise_stable() {
        let m = model();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.config(), m.config());
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = to_bytes(&model());
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
        let mut ver = bytes;
        ver[8] = 9;
        assert!(from_bytes(&ver).is_err());
    }
}
