//! Binary checkpoint: magic `RACW`, version, a length-prefixed JSON config
//! block, then every tensor as (name, rank, dims, f32 payload). Adam moment
//! buffers are stored as tensors prefixed `adam.m.` / `adam.v.`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, NetworkConfig, NetworkState, Tensor};
use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RACW";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigBlock {
    network: NetworkConfig,
    adam_step: u64,
}

fn put_tensor<T: Scalar>(out: &mut Vec<u8>, name: &str, t: &Tensor<T>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
}

pub fn encode_checkpoint<T: Scalar>(state: &NetworkState<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let block = serde_json::to_vec(&ConfigBlock {
        network: state.config().clone(),
        adam_step: state.adam.step,
    })
    .expect("config serializes");
    out.extend_from_slice(&(block.len() as u64).to_le_bytes());
    out.extend_from_slice(&block);
    let params = state.params();
    out.extend_from_slice(&((params.len() * 3) as u32).to_le_bytes());
    for p in params {
        put_tensor(&mut out, &p.name, p);
    }
    for m in &state.adam.first_moment {
        put_tensor(&mut out, &format!("adam.m.{}", m.name), m);
    }
    for v in &state.adam.second_moment {
        put_tensor(&mut out, &format!("adam.v.{}", v.name), v);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated {what}: need {n} bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, v: u64) -> Result<usize> {
        usize::try_from(v).map_err(|_| self.err(format!("length {v} too large")))
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<NetworkState<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic, expected \"RACW\""));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        r.pos = 4;
        return Err(r.err(format!("unsupported version {version}")));
    }
    let block_len = r.u64("config length")?;
    let block_len = r.len(block_len)?;
    let block_at = r.pos;
    let block: ConfigBlock = serde_json::from_slice(r.take(block_len, "config block")?).map_err(|e| Error::Parse {
        offset: block_at as u64,
        message: format!("config block: {e}"),
    })?;
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Parse {
                offset: name_at as u64,
                message: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = r.u64("dim")?;
            dims.push(r.len(d)?);
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| r.err("tensor size overflows"))?;
        let payload_at = r.pos;
        let payload = r.take(numel, "tensor payload")?;
        let mut data = Vec::with_capacity(numel / 4);
        for (i, c) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Parse {
                    offset: (payload_at + i * 4) as u64,
                    message: format!("non-finite value in `{name}`"),
                });
            }
            data.push(T::from_f32(v).unwrap_or_else(T::nan));
        }
        tensors.push(Tensor { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    if !count.is_multiple_of(3) {
        return Err(Error::Dimension(format!("{count} tensors is not params + two moment sets")));
    }
    let n = count / 3;
    let mut second: Vec<Tensor<T>> = tensors.split_off(2 * n);
    let mut first: Vec<Tensor<T>> = tensors.split_off(n);
    let params = tensors;
    for (prefix, moments) in [("adam.m.", &mut first), ("adam.v.", &mut second)] {
        for (m, p) in moments.iter_mut().zip(&params) {
            match m.name.strip_prefix(prefix) {
                Some(rest) if rest == p.name => m.name = p.name.clone(),
                _ => {
                    return Err(Error::Dimension(format!(
                        "moment tensor `{}` does not match parameter `{}`",
                        m.name, p.name
                    )))
                }
            }
        }
    }
    let adam = AdamState {
        step: block.adam_step,
        first_moment: first,
        second_moment: second,
    };
    NetworkState::from_parts(block.network, params, adam)
}

pub fn write_checkpoint<T: Scalar>(state: &NetworkState<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_checkpoint(state))
}

pub fn read_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<NetworkState<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
