//! Netpbm graymap and pixmap I/O (P2, P3, P5, P6). Colour images are reduced
//! to luminance on load.

use std::path::Path;

use crate::error::{Error, Result};
use crate::vq::GrayImage;

pub fn parse_pnm(data: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let magic = token(data, &mut pos)?;
    let (channels, binary) = match magic.as_str() {
        "P2" => (1, false),
        "P5" => (1, true),
        "P3" => (3, false),
        "P6" => (3, true),
        other => return Err(Error::Format(format!("unsupported netpbm magic `{other}`"))),
    };
    let width = number(data, &mut pos)?;
    let height = number(data, &mut pos)?;
    let maxval = number(data, &mut pos)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65_535 {
        return Err(Error::Format(format!("bad header {width}x{height} max {maxval}")));
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Format("image too large".into()))?;
    let mut raw = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let body = data
            .get(pos..pos + need)
            .ok_or_else(|| Error::Format("truncated raster".into()))?;
        if wide {
            raw.extend(body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize));
        } else {
            raw.extend(body.iter().map(|&b| b as usize));
        }
    } else {
        for _ in 0..count {
            raw.push(number(data, &mut pos)?);
        }
    }
    if raw.iter().any(|&v| v > maxval) {
        return Err(Error::Format("sample exceeds maxval".into()));
    }
    let scale = maxval as f64;
    let pixels = if channels == 1 {
        raw.iter().map(|&v| v as f64 / scale).collect()
    } else {
        raw.chunks(3)
            .map(|c| (0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64) / scale)
            .collect()
    };
    GrayImage::new(width, height, pixels)
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_pnm(&std::fs::read(path)?)
}

/// Binary 8-bit graymap.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}

fn skip_space(data: &[u8], pos: &mut usize) {
    while *pos < data.len() {
        match data[*pos] {
            b'#' => {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn token(data: &[u8], pos: &mut usize) -> Result<String> {
    skip_space(data, pos);
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("unexpected end of header".into()));
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn number(data: &[u8], pos: &mut usize) -> Result<usize> {
    let t = token(data, pos)?;
    t.parse().map_err(|_| Error::Format(format!("expected a number, found `{t}`")))
}
