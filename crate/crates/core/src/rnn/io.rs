//! Binary parameter container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8  | magic `SQIDSPRM` |
//! | 4  | format version (u32, currently 1) |
//! | 4  | layers (u32) |
//! | 4  | hidden width (u32) |
//! | 4  | input width (u32) |
//! | 4  | flags (u32): bit 0 feature dropout, bit 1 adversarially trained |
//! | 8  | training seed (u64) |
//! | 4  | training epochs (u32) |
//! | 8  | parameter count (u64) |
//! | 8n | parameters (f64) in [`ModelParams`] order |

use super::params::{ModelParams, TrainingMeta};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 8] = b"SQIDSPRM";
pub const PARAMS_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 5 + 8 + 4 + 8;

pub fn serialize_model(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    for dim in [params.layers(), params.hidden(), params.input_width()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let flags = u32::from(params.meta.feature_dropout) | (u32::from(params.meta.adversarially_trained) << 1);
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&params.meta.seed.to_le_bytes());
    out.extend_from_slice(&params.meta.epochs.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses a parameter block; returns the parameters and the bytes consumed.
pub fn deserialize_model_prefix(bytes: &[u8]) -> Result<(ModelParams, usize)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != PARAMS_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = cur.u32()?;
    if version != PARAMS_VERSION {
        return Err(Error::Format(format!(
            "parameter format version {version} (expected {PARAMS_VERSION})"
        )));
    }
    let layers = cur.u32()? as usize;
    let hidden = cur.u32()? as usize;
    let input = cur.u32()? as usize;
    let flags = cur.u32()?;
    let meta = TrainingMeta {
        feature_dropout: flags & 1 != 0,
        adversarially_trained: flags & 2 != 0,
        seed: cur.u64()?,
        epochs: cur.u32()?,
    };
    let count = cur.u64()? as usize;
    if layers == 0 || hidden == 0 || input == 0 {
        return Err(Error::Format("zero model dimension".into()));
    }
    let expected = ModelParams::count_for(layers, hidden, input);
    if count != expected {
        return Err(Error::Format(format!(
            "parameter count {count} does not match dimensions ({expected})"
        )));
    }
    let raw = cur.take(count.checked_mul(8).ok_or_else(|| Error::Format("overflow".into()))?)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ModelParams::from_values(layers, hidden, input, meta, values)?;
    Ok((params, cur.pos))
}

pub fn deserialize_model(bytes: &[u8]) -> Result<ModelParams> {
    let (params, used) = deserialize_model_prefix(bytes)?;
    if used != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - used
        )));
    }
    Ok(params)
}

/// Fails with a dimension error unless the model takes `width` inputs.
pub fn expect_input_width(params: &ModelParams, width: usize) -> Result<()> {
    if params.input_width() != width {
        return Err(Error::Dimension {
            expected: width,
            got: params.input_width(),
        });
    }
    Ok(())
}
