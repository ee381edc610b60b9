//! Model checkpoints: a little-endian `f32` tensor file plus a JSON sidecar
//! with the shape and tokenization settings needed to rebuild the model.
//!
//! Binary layout: magic `AKGPARAM`, `u32` version, `u32` tensor count, then
//! for each tensor `u64` rows, `u64` cols and `rows * cols` `f32` values in
//! row-major order. Tensors are stored in [`ParameterStore::params`] order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::decoder::DecoderKind;
use crate::error::{Error, Result};
use crate::params::{ModelShape, Param, ParameterStore};

const MAGIC: &[u8; 8] = b"AKGPARAM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub k: usize,
    pub m: usize,
    pub dim: usize,
    pub num_anchors: usize,
    pub num_relations: usize,
    pub max_distance: u32,
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub decoder: String,
    pub seed: u64,
    pub vocab_size: usize,
    pub distance_buckets: usize,
    #[serde(default = "yes")]
    pub use_distances: bool,
}

fn yes() -> bool {
    true
}

impl CheckpointMeta {
    pub fn new(shape: &ModelShape, num_anchors: usize, max_distance: u32, seed: u64) -> Self {
        Self {
            k: shape.k,
            m: shape.m,
            dim: shape.dim,
            num_anchors,
            num_relations: shape.num_relations,
            max_distance,
            encoder_hidden: shape.hidden,
            encoder_layers: shape.layers,
            decoder: shape.decoder.to_string(),
            seed,
            vocab_size: shape.vocab_size,
            distance_buckets: shape.distance_buckets,
            use_distances: shape.use_distances,
        }
    }

    pub fn shape(&self) -> Result<ModelShape> {
        Ok(ModelShape {
            vocab_size: self.vocab_size,
            distance_buckets: self.distance_buckets,
            k: self.k,
            m: self.m,
            dim: self.dim,
            hidden: self.encoder_hidden,
            layers: self.encoder_layers,
            num_relations: self.num_relations,
            decoder: self.decoder.parse::<DecoderKind>()?,
            use_distances: self.use_distances,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint metadata serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))
    }
}

pub fn write_params<W: Write>(store: &ParameterStore<f32>, mut w: W) -> Result<()> {
    let params = store.params();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params {
        w.write_all(&(p.rows as u64).to_le_bytes())?;
        w.write_all(&(p.cols as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(p.value.len() * 4);
        for v in &p.value {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads tensors into a store allocated from `shape`, checking every
/// tensor's dimensions.
pub fn read_params<R: Read>(shape: ModelShape, mut r: R) -> Result<ParameterStore<f32>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a parameter file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported parameter file version {version}")));
    }
    let mut store = ParameterStore::<f32>::init(shape, 0)?;
    let count = read_u32(&mut r)? as usize;
    let mut params: Vec<&mut Param<f32>> = store.params_mut();
    if count != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "parameter file has {count} tensors, model has {}",
            params.len()
        )));
    }
    for (i, p) in params.iter_mut().enumerate() {
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        if rows != p.rows || cols != p.cols {
            return Err(Error::ShapeMismatch(format!(
                "tensor {i} is {rows}x{cols}, model expects {}x{}",
                p.rows, p.cols
            )));
        }
        let mut buf = vec![0u8; rows * cols * 4];
        r.read_exact(&mut buf)?;
        for (v, b) in p.value.iter_mut().zip(buf.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().expect("4-byte chunk"));
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after the last tensor".into()));
    }
    Ok(store)
}
