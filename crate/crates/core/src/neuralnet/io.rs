//! Binary weight files.
//!
//! Layout (all integers `u32`, all values `f32`, little-endian):
//!
//! ```text
//! magic "WFQN" | version | rows cols channels continuous_inputs
//! | conv_layers image_dense continuous_dense merge_dense
//! | per tensor: rank, dims[rank], values[prod(dims)]
//! ```
//!
//! Tensors follow [`QNetwork::params`] order. The architecture is
//! recovered from the tensor shapes.

use std::path::Path;

use super::network::{NetworkSpec, QNetwork, ACTIONS};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WFQN";
pub const VERSION: u32 = 1;

fn put(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub fn to_bytes(net: &QNetwork<f32>) -> Vec<u8> {
    let spec = net.spec();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put(&mut buf, VERSION);
    for d in spec.image_shape {
        put(&mut buf, d as u32);
    }
    put(&mut buf, spec.continuous_inputs as u32);
    put(&mut buf, spec.conv_layers as u32);
    put(&mut buf, spec.image_dense.len() as u32);
    put(&mut buf, spec.continuous_dense.len() as u32);
    put(&mut buf, spec.merge_dense.len() as u32);
    for (shape, values) in net.param_shapes().iter().zip(net.params()) {
        put(&mut buf, shape.len() as u32);
        for &d in shape {
            put(&mut buf, d as u32);
        }
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.pos + n > self.buf.len() {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> std::result::Result<(Vec<usize>, Vec<f32>), String> {
        let rank = self.u32()? as usize;
        if rank == 0 || rank > 4 {
            return Err(format!("bad tensor rank {rank}"));
        }
        let dims = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = dims.iter().product();
        let raw = self.take(n * 4)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok((dims, values))
    }
}

pub fn from_bytes(buf: &[u8]) -> std::result::Result<QNetwork<f32>, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let image_shape = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let continuous_inputs = r.u32()? as usize;
    let counts = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    if counts.iter().any(|&c| c > 64) {
        return Err("implausible layer count".into());
    }
    let tensors = (0..2 * (counts.iter().sum::<usize>() + 1))
        .map(|_| r.tensor())
        .collect::<Result<Vec<_>, _>>()?;
    if r.pos != buf.len() {
        return Err("trailing bytes".into());
    }

    let conv_filters = if counts[0] > 0 { tensors[0].0[3] } else { 0 };
    let mut idx = 2 * counts[0];
    let mut widths = |n: usize| {
        let v: Vec<usize> = (0..n).map(|k| tensors[idx + 2 * k].0[0]).collect();
        idx += 2 * n;
        v
    };
    let spec = NetworkSpec {
        image_shape,
        continuous_inputs,
        conv_filters,
        conv_layers: counts[0],
        image_dense: widths(counts[1]),
        continuous_dense: widths(counts[2]),
        merge_dense: widths(counts[3]),
    };
    let mut net = QNetwork::<f32>::zeroed(spec).map_err(|e| e.to_string())?;
    let expected = net.param_shapes();
    if expected.last().map(|s| s[0]) != Some(ACTIONS) {
        return Err("network must have two outputs".into());
    }
    for (k, ((dims, _), want)) in tensors.iter().zip(&expected).enumerate() {
        if dims != want {
            return Err(format!("tensor {k} has shape {dims:?}, expected {want:?}"));
        }
    }
    net.load_params(tensors.into_iter().map(|(_, v)| v).collect())
        .map_err(|e| e.to_string())?;
    Ok(net)
}

pub fn save(net: &QNetwork<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<QNetwork<f32>> {
    let buf = std::fs::read(path)?;
    from_bytes(&buf).map_err(|message| Error::WeightFormat {
        path: path.to_path_buf(),
        message,
    })
}
