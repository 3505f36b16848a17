//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic      8 bytes  "KSPCKPT\0"
//! version    u32      1
//! mode       u8       0 = control, 1 = experimental
//! image_size u32
//! widths     3 x u32
//! hidden     u32
//! tensors    u32 count, then per tensor:
//!              name   u16 length + UTF-8 bytes
//!              ndim   u8, dims u32 each
//!              data   f64 bit patterns
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::InputMode;

use super::{Architecture, ModelParams};

const MAGIC: &[u8; 8] = b"KSPCKPT\0";
const VERSION: u32 = 1;

pub fn write_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match params.mode {
        InputMode::Control => 0,
        InputMode::Experimental => 1,
    });
    out.extend_from_slice(&(params.image_size as u32).to_le_bytes());
    for w in params.arch.widths {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.arch.hidden as u32).to_le_bytes());
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in ModelParams::tensor_names().into_iter().zip(tensors) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.ndim() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
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

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8)?.try_into().unwrap())))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let mode = match r.u8()? {
        0 => InputMode::Control,
        1 => InputMode::Experimental,
        m => return Err(Error::Checkpoint(format!("unknown mode tag {m}"))),
    };
    let image_size = r.u32()? as usize;
    let widths = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let hidden = r.u32()? as usize;
    let mut params = ModelParams::zeros(mode, Architecture { widths, hidden }, image_size)
        .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
    let count = r.u32()? as usize;
    let names = ModelParams::tensor_names();
    if count != names.len() {
        return Err(Error::Checkpoint(format!("expected {} tensors, found {count}", names.len())));
    }
    for (name, t) in names.into_iter().zip(params.tensors_mut()) {
        let len = r.u16()? as usize;
        let got = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if got != name {
            return Err(Error::Checkpoint(format!("expected tensor {name}, found {got}")));
        }
        let ndim = r.u8()? as usize;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims != t.shape() {
            return Err(Error::Checkpoint(format!(
                "{name}: stored shape {dims:?}, header implies {:?}",
                t.shape()
            )));
        }
        for v in t.data_mut() {
            *v = r.f64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(params)
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let tmp = path.with_extension("bin.tmp");
    fs::write(&tmp, write_checkpoint(params))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    read_checkpoint(&bytes)
}
