//! Model file: magic, format version, JSON architecture header, then named
//! little-endian parameter blobs with shape headers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::error::{NetError, Result};
use super::model::{build_layer, LayerSpec, Model, Segment};
use super::scalar::Scalar;
use super::tensor::Tensor;

pub const MAGIC: [u8; 8] = *b"WEAKCHEM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    precision: String,
    layers: Vec<LayerSpec>,
    segments: Vec<Segment>,
    meta: BTreeMap<String, serde_json::Value>,
}

pub fn model_to_bytes<S: Scalar>(model: &Model<S>) -> Vec<u8> {
    let header = Header {
        precision: S::NAME.to_string(),
        layers: model.layers.iter().map(|l| l.spec.clone()).collect(),
        segments: model.segments.clone(),
        meta: model.meta.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let blobs: Vec<(String, &Tensor<S>)> = model
        .layers
        .iter()
        .flat_map(|l| {
            l.spec
                .op
                .param_shapes()
                .into_iter()
                .zip(&l.params)
                .map(move |((name, _), t)| (format!("{}/{}", l.spec.name, name), t))
        })
        .collect();
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (name, t) in blobs {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            v.write_le(&mut out);
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NetError::Format(format!("file truncated at byte {}", self.bytes.len())))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn read_values<S: Scalar>(raw: &[u8], precision: &str) -> Result<Vec<S>> {
    match precision {
        "f32" => Ok(raw.chunks_exact(4).map(|c| S::of(f32::read_le(c) as f64)).collect()),
        "f64" => Ok(raw.chunks_exact(8).map(|c| S::of(f64::read_le(c))).collect()),
        other => Err(NetError::Format(format!("unknown precision {other:?}"))),
    }
}

/// Parses a model file. Parameters stored at a different precision are
/// converted.
pub fn model_from_bytes<S: Scalar>(bytes: &[u8]) -> Result<Model<S>> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(NetError::Format("bad magic bytes".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(NetError::Version {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let len = cur.u64()? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(len)?).map_err(|e| NetError::Format(format!("architecture header: {e}")))?;
    let width = match header.precision.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(NetError::Format(format!("unknown precision {other:?}"))),
    };
    let count = cur.u32()? as usize;
    let mut blobs = BTreeMap::new();
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|e| NetError::Format(e.to_string()))?
            .to_string();
        let ndim = cur.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| cur.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = read_values::<S>(cur.take(n * width)?, &header.precision)?;
        blobs.insert(name, Tensor { shape, data });
    }
    if cur.at != bytes.len() {
        return Err(NetError::Format(format!("{} trailing bytes", bytes.len() - cur.at)));
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    for spec in header.layers {
        let lname = spec.name.clone();
        let mut missing = None;
        let layer = build_layer(&layers, spec, |op, i, shape, _| {
            let key = format!("{}/{}", lname, op.param_shapes()[i].0);
            match blobs.remove(&key) {
                Some(t) if t.shape == shape => t,
                _ => {
                    missing.get_or_insert(key);
                    Tensor::zeros(shape)
                }
            }
        })
        .map_err(|e| NetError::Format(e.to_string()))?;
        if let Some(key) = missing {
            return Err(NetError::Format(format!("parameter {key} missing or misshapen")));
        }
        layers.push(layer);
    }
    if let Some(extra) = blobs.keys().next() {
        return Err(NetError::Format(format!("unexpected parameter {extra}")));
    }
    Model::assemble(layers, header.segments, header.meta).map_err(|e| NetError::Format(e.to_string()))
}

pub fn save_model<S: Scalar>(model: &Model<S>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<Model<S>> {
    model_from_bytes(&std::fs::read(path)?)
}
