//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `SCLP`, `u32` version, `u32` tensor count,
//! then per tensor a `u16` name length, the UTF-8 name, a `u8` rank, `rank`
//! `u64` dimensions and the `f64` payload. Non-tensor state (configuration,
//! seed, step) is carried in tensors under the `meta/` prefix.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Result, SculptError};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"SCLP";
pub const VERSION: u32 = 1;

const META_CONFIG: &str = "meta/config_json";
const META_SEED: &str = "meta/seed";
const META_STEP: &str = "meta/step";
const META_SIZES: &str = "meta/size_histogram";
const PARAM: &str = "param/";
const EMA: &str = "ema/";
const ADAM_M: &str = "adam_m/";
const ADAM_V: &str = "adam_v/";

/// Full training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_json: String,
    pub params: IndexMap<String, Tensor>,
    pub ema: IndexMap<String, Tensor>,
    pub adam_m: IndexMap<String, Tensor>,
    pub adam_v: IndexMap<String, Tensor>,
    pub seed: u64,
    pub step: u64,
    /// `size_histogram[n]` counts training ligands with `n` atoms.
    pub size_histogram: Vec<f64>,
}

impl Checkpoint {
    fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let bytes: Vec<f64> = self.config_json.bytes().map(f64::from).collect();
        out.push((META_CONFIG.to_string(), Tensor::new(vec![bytes.len()], bytes).unwrap()));
        let seed = vec![(self.seed >> 32) as f64, (self.seed & 0xffff_ffff) as f64];
        out.push((META_SEED.to_string(), Tensor::new(vec![2], seed).unwrap()));
        out.push((META_STEP.to_string(), Tensor::new(vec![1], vec![self.step as f64]).unwrap()));
        out.push((
            META_SIZES.to_string(),
            Tensor::new(vec![self.size_histogram.len()], self.size_histogram.clone()).unwrap(),
        ));
        for (prefix, map) in [
            (PARAM, &self.params),
            (EMA, &self.ema),
            (ADAM_M, &self.adam_m),
            (ADAM_V, &self.adam_v),
        ] {
            for (name, t) in map {
                out.push((format!("{prefix}{name}"), t.clone()));
            }
        }
        out
    }

    fn from_tensors(tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut cp = Checkpoint {
            config_json: String::new(),
            params: IndexMap::new(),
            ema: IndexMap::new(),
            adam_m: IndexMap::new(),
            adam_v: IndexMap::new(),
            seed: 0,
            step: 0,
            size_histogram: Vec::new(),
        };
        let mut have_config = false;
        for (name, t) in tensors {
            match name.as_str() {
                META_CONFIG => {
                    let bytes: Vec<u8> = t.data().iter().map(|&b| b as u8).collect();
                    cp.config_json = String::from_utf8(bytes)
                        .map_err(|_| SculptError::Checkpoint("config is not UTF-8".into()))?;
                    have_config = true;
                }
                META_SEED => {
                    let d = t.data();
                    if d.len() != 2 {
                        return Err(SculptError::Checkpoint("malformed seed".into()));
                    }
                    cp.seed = ((d[0] as u64) << 32) | (d[1] as u64);
                }
                META_STEP => cp.step = t.data().first().copied().unwrap_or(0.0) as u64,
                META_SIZES => cp.size_histogram = t.into_data(),
                _ => {
                    let (map, rest) = if let Some(r) = name.strip_prefix(PARAM) {
                        (&mut cp.params, r)
                    } else if let Some(r) = name.strip_prefix(EMA) {
                        (&mut cp.ema, r)
                    } else if let Some(r) = name.strip_prefix(ADAM_M) {
                        (&mut cp.adam_m, r)
                    } else if let Some(r) = name.strip_prefix(ADAM_V) {
                        (&mut cp.adam_v, r)
                    } else {
                        return Err(SculptError::Checkpoint(format!("unknown tensor {name:?}")));
                    };
                    map.insert(rest.to_string(), t);
                }
            }
        }
        if !have_config {
            return Err(SculptError::Checkpoint("missing configuration".into()));
        }
        Ok(cp)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_tensors(&self.to_tensors())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_tensors(decode_tensors(bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| SculptError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| SculptError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Encodes named tensors; refuses non-finite payloads.
pub fn encode_tensors(tensors: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        if !t.is_finite() {
            return Err(SculptError::Checkpoint(format!(
                "tensor {name:?} contains non-finite values; refusing to save"
            )));
        }
        let name_bytes = name.as_bytes();
        let len = u16::try_from(name_bytes.len())
            .map_err(|_| SculptError::Checkpoint(format!("tensor name too long: {name:?}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(SculptError::Checkpoint(format!(
                "truncated payload at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(SculptError::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(SculptError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| SculptError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or_else(|| {
            SculptError::Checkpoint(format!("tensor {name:?} too large"))
        })?)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(SculptError::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut params = IndexMap::new();
        params.insert("w".to_string(), Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        Checkpoint {
            config_json: "{\"a\":1}".into(),
            ema: params.clone(),
            adam_m: params.clone(),
            adam_v: params.clone(),
            params,
            seed: u64::MAX - 3,
            step: 17,
            size_histogram: vec![0.0, 2.0, 1.0],
        }
    }

    #[test]
    fn round_trip_bit_exact() {
        let cp = sample();
        let back = Checkpoint::from_bytes(&cp.to_bytes().unwrap()).unwrap();
        assert_eq!(back, cp);
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("not a checkpoint"));
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4] = 9;
        assert!(Checkpoint::from_bytes(&bytes).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn truncation_rejected() {
        let bytes = sample().to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn nan_refused_on_save() {
        let mut cp = sample();
        cp.params.insert("bad".into(), Tensor::new(vec![1], vec![f64::NAN]).unwrap());
        assert!(cp.to_bytes().is_err());
    }
}
