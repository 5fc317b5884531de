//! Reader and writer for precomputed deep feature maps.
//!
//! Little-endian layout: magic `MLHF`, `u32` version (= 1), `u32` layer count,
//! then per layer `u32` M, N, D followed by `M·N·D` `f32` values in `(m, n, d)`
//! row-major order with `d` fastest. One file per frame, named
//! `<frame_index:08>.mlhf`.

use std::path::{Path, PathBuf};

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::features::{resize_layer, FeatureLayer};

pub const MAGIC: &[u8; 4] = b"MLHF";
pub const VERSION: u32 = 1;

pub fn frame_file_name(frame_index: usize) -> String {
    format!("{frame_index:08}.mlhf")
}

pub fn frame_file(dir: impl AsRef<Path>, frame_index: usize) -> PathBuf {
    dir.as_ref().join(frame_file_name(frame_index))
}

pub fn encode(layers: &[Array3<f32>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for layer in layers {
        let (m, n, d) = layer.dim();
        for v in [m, n, d] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in layer.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated file: wanted {len} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Array3<f32>>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected MLHF".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(16));
    for index in 0..count {
        let (m, n, d) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if m == 0 || n == 0 || d == 0 {
            return Err(Error::Format(format!("layer {index} has zero size {m}x{n}x{d}")));
        }
        let len = m
            .checked_mul(n)
            .and_then(|v| v.checked_mul(d))
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::Format(format!("layer {index} size overflows")))?;
        let raw = r.take(len)?;
        let values: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        layers.push(Array3::from_shape_vec((m, n, d), values).expect("length checked"));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(layers)
}

pub fn write_file(path: impl AsRef<Path>, layers: &[Array3<f32>]) -> Result<()> {
    std::fs::write(path, encode(layers))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<Array3<f32>>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Resource {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode(&bytes)
}

/// Loads a deep-feature file and resizes every layer to `expected_spatial`.
/// Layer ids follow file order starting at 0; weights default to 1.
pub fn load_deep_layers(path: impl AsRef<Path>, expected_spatial: (usize, usize)) -> Result<Vec<FeatureLayer>> {
    let raw = read_file(path)?;
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(id, a)| {
            let layer = FeatureLayer::new(a.mapv(f64::from), id, 1.0);
            resize_layer(&layer, expected_spatial)
        })
        .collect())
}
