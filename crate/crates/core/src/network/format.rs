//! The `DNZ1` weight file.
//!
//! ```text
//! magic        4 bytes  "DNZ1"
//! variant      u8       0 = plain, 1 = vst_binned
//! peak         f64
//! has_tag      u8       0 or 1
//! tag_len      u32      present when has_tag = 1
//! tag          tag_len bytes of UTF-8
//! depth        u32
//! per layer    u32 out_ch, u32 in_ch, u32 kernel_h (3), u32 kernel_w (3)
//! per layer    out_ch * in_ch * 9 f64 kernels in [out][in][ky][kx] order,
//!              then out_ch f64 biases
//! ```
//!
//! Integers and floats are little-endian. Kernels are applied as cross-correlation
//! (no flip). The fixed box layer of the stabilized variant is implied by the variant
//! byte and not stored.

use std::fs;
use std::path::Path;

use super::conv::{KERNEL, TAPS};
use super::{LayerWeights, ModelWeights, Variant};
use crate::error::{format_err, Error, Result};
use crate::imaging::Peak;

const MAGIC: &[u8; 4] = b"DNZ1";

pub fn write_weights(w: &ModelWeights) -> Result<Vec<u8>> {
    w.validate()?;
    let mut out = Vec::with_capacity(64 + w.parameter_count() * 8);
    out.extend_from_slice(MAGIC);
    out.push(match w.variant {
        Variant::Plain => 0,
        Variant::VstBinned => 1,
    });
    out.extend_from_slice(&w.peak.value().to_le_bytes());
    match &w.class_tag {
        None => out.push(0),
        Some(tag) => {
            out.push(1);
            out.extend_from_slice(&(tag.len() as u32).to_le_bytes());
            out.extend_from_slice(tag.as_bytes());
        }
    }
    out.extend_from_slice(&(w.layers.len() as u32).to_le_bytes());
    for layer in &w.layers {
        for v in [layer.out_ch, layer.in_ch, KERNEL, KERNEL] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    for layer in &w.layers {
        for v in layer.kernels.iter().chain(&layer.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_weights(w: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_weights(w)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights> {
    read_weights(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return format_err(self.pos as u64, format!("file truncated while reading {what}"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| overflow(self.pos))?, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn overflow(pos: usize) -> Error {
    Error::Format {
        offset: pos as u64,
        message: "layer dimensions overflow".into(),
    }
}

pub fn read_weights(bytes: &[u8]) -> Result<ModelWeights> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return format_err(0, "bad magic; not a DNZ1 weight file");
    }
    let variant = match r.u8("variant")? {
        0 => Variant::Plain,
        1 => Variant::VstBinned,
        other => return format_err(4, format!("unknown variant tag {other}")),
    };
    let peak_pos = r.pos;
    let peak = Peak::new(r.f64("peak")?).map_err(|e| Error::Format {
        offset: peak_pos as u64,
        message: e.to_string(),
    })?;
    let class_tag = match r.u8("class tag flag")? {
        0 => None,
        1 => {
            let len = r.u32("class tag length")? as usize;
            let pos = r.pos;
            let raw = r.take(len, "class tag")?;
            Some(String::from_utf8(raw.to_vec()).map_err(|_| Error::Format {
                offset: pos as u64,
                message: "class tag is not UTF-8".into(),
            })?)
        }
        other => return format_err(r.pos as u64 - 1, format!("bad class tag flag {other}")),
    };
    let depth = r.u32("depth")? as usize;
    let mut dims = Vec::with_capacity(depth.min(1024));
    for _ in 0..depth {
        let pos = r.pos;
        let out_ch = r.u32("layer dims")? as usize;
        let in_ch = r.u32("layer dims")? as usize;
        let kh = r.u32("layer dims")? as usize;
        let kw = r.u32("layer dims")? as usize;
        if kh != KERNEL || kw != KERNEL {
            return format_err(pos as u64, format!("kernel size {kh}x{kw} is not 3x3"));
        }
        dims.push((out_ch, in_ch));
    }
    let mut layers = Vec::with_capacity(depth);
    for (out_ch, in_ch) in dims {
        let taps = out_ch
            .checked_mul(in_ch)
            .and_then(|v| v.checked_mul(TAPS))
            .ok_or_else(|| overflow(r.pos))?;
        let kernels = r.f64s(taps, "kernels")?;
        let biases = r.f64s(out_ch, "biases")?;
        layers.push(LayerWeights {
            out_ch,
            in_ch,
            kernels,
            biases,
        });
    }
    if r.pos != bytes.len() {
        return format_err(r.pos as u64, "trailing bytes after weights");
    }
    let weights = ModelWeights {
        layers,
        peak,
        variant,
        class_tag,
    };
    weights.validate().map_err(|e| Error::Format {
        offset: 0,
        message: e.to_string(),
    })?;
    Ok(weights)
}
