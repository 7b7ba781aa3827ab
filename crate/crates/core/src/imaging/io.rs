//! 8-bit PGM (P5) read/write and 8-bit PNG read.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::Image;
use crate::error::{domain, format_err, Error, Result};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Load an 8-bit PGM or PNG as a `[0, 1]` grayscale image. RGB is reduced to BT.601 luma.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<Image> {
    read_grayscale(&fs::read(path)?)
}

pub fn read_grayscale(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        return read_png(bytes);
    }
    let (height, width, pixels) = read_pgm_raw(bytes)?;
    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Image::from_raw(height, width, data))
}

/// Load every `.pgm` and `.png` file in `dir` (not recursive), sorted by file name.
/// Names are the file stems.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, Image)>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| {
        p.is_file()
            && p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
    });
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let img = load_grayscale(&p).map_err(|e| match e {
                Error::Format { offset, message } => Error::Format {
                    offset,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })?;
            Ok((name, img))
        })
        .collect()
}

/// Load a PGM without rescaling: each byte is returned as-is (photon counts).
pub fn load_pgm_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    read_pgm_raw(&fs::read(path)?)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0B | 0x0C => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return format_err(start as u64, format!("expected {what}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format {
                offset: start as u64,
                message: format!("{what} out of range"),
            })
    }
}

pub fn read_pgm_raw(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return format_err(0, "missing P5 magic (only binary 8-bit PGM is supported)");
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_whitespace_and_comments();
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return format_err(
            maxval_offset as u64,
            format!("unsupported maxval {maxval}; only 8-bit (255) is supported"),
        );
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return format_err(cur.pos as u64, "expected single whitespace before raster");
    }
    let start = cur.pos + 1;
    let needed = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format {
            offset: 0,
            message: "image dimensions overflow".into(),
        })?;
    if bytes.len() - start < needed {
        return format_err(
            bytes.len() as u64,
            format!("raster truncated: {} of {needed} bytes", bytes.len() - start),
        );
    }
    Ok((height, width, bytes[start..start + needed].to_vec()))
}

fn read_png(bytes: &[u8]) -> Result<Image> {
    let png_err = |e: png::DecodingError| Error::Format {
        offset: 0,
        message: format!("png: {e}"),
    };
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Format {
        offset: 0,
        message: "png: image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return format_err(
            24,
            format!("unsupported png bit depth {:?}; only 8-bit", info.bit_depth),
        );
    }
    let (height, width) = (info.height as usize, info.width as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return format_err(25, format!("unsupported png color type {other:?}")),
    };
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        let line = &buf[y * info.line_size..y * info.line_size + width * channels];
        for px in line.chunks_exact(channels) {
            let v = match px {
                [g] => f64::from(*g),
                [r, g, b] => LUMA_R * f64::from(*r) + LUMA_G * f64::from(*g) + LUMA_B * f64::from(*b),
                _ => unreachable!(),
            };
            data.push(v / 255.0);
        }
    }
    Ok(Image::from_raw(height, width, data))
}

/// Encode raw bytes as a binary PGM with maxval 255.
pub fn write_pgm(path: impl AsRef<Path>, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != height * width {
        return domain("pgm raster length does not match dimensions");
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Save a `[0, 1]` image as PGM; values are clamped and rounded to the nearest level.
pub fn save_pgm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let pixels: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    write_pgm(path, img.height(), img.width(), &pixels)
}
