//! Minimal PGM (P2/P5) grayscale reading and writing, 8-bit only. Covers
//! raster test-signal ingestion and magnitude image export.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, top row first.
    pub pixels: Vec<u16>,
}

/// Pulls the next whitespace-delimited token, skipping #-comments to end of
/// line. Returns the token and the remaining input.
fn next_token(mut bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    loop {
        while let Some((&b, rest)) = bytes.split_first() {
            if b.is_ascii_whitespace() {
                bytes = rest;
            } else {
                break;
            }
        }
        if bytes.first() == Some(&b'#') {
            match bytes.iter().position(|&b| b == b'\n') {
                Some(p) => bytes = &bytes[p + 1..],
                None => bytes = &[],
            }
            continue;
        }
        break;
    }
    if bytes.is_empty() {
        return Err(Error::PgmFormat("unexpected end of header".into()));
    }
    let end = bytes
        .iter()
        .position(|b| b.is_ascii_whitespace())
        .unwrap_or(bytes.len());
    Ok((&bytes[..end], &bytes[end..]))
}

fn parse_number(token: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::PgmFormat(format!("bad {what}")))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let (magic, rest) = next_token(bytes)?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::PgmFormat("magic is not P2 or P5".into())),
    };
    let (tok, rest) = next_token(rest)?;
    let width = parse_number(tok, "width")?;
    let (tok, rest) = next_token(rest)?;
    let height = parse_number(tok, "height")?;
    let (tok, rest) = next_token(rest)?;
    let maxval = parse_number(tok, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::PgmFormat("zero dimension".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::PgmFormat(format!("unsupported bit depth: maxval {maxval}")));
    }
    let count = width * height;
    let pixels = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if rest.is_empty() {
            return Err(Error::PgmFormat("missing raster".into()));
        }
        let data = &rest[1..];
        if data.len() < count {
            return Err(Error::PgmFormat(format!(
                "raster has {} bytes, needs {count}",
                data.len()
            )));
        }
        data[..count].iter().map(|&b| b as u16).collect()
    } else {
        let mut vals = Vec::with_capacity(count);
        let mut cur = rest;
        for _ in 0..count {
            let (tok, next) = next_token(cur)?;
            vals.push(parse_number(tok, "pixel")? as u16);
            cur = next;
        }
        vals
    };
    if let Some(&bad) = pixels.iter().find(|&&p| p > maxval as u16) {
        return Err(Error::PgmFormat(format!("pixel {bad} above maxval {maxval}")));
    }
    Ok(Pgm { width, height, maxval: maxval as u16, pixels })
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    parse_pgm(&std::fs::read(path)?)
}

/// Canonical P5 encoding: "P5\n{w} {h}\n{max}\n" + raster. parse -> encode
/// round-trips byte-exactly on its own output.
pub fn encode_p5(img: &Pgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend(img.pixels.iter().map(|&p| p as u8));
    out
}

pub fn write_p5(path: &Path, img: &Pgm) -> Result<()> {
    Ok(std::fs::write(path, encode_p5(img))?)
}

/// Renders nonnegative magnitudes as an 8-bit image scaled so the largest
/// value maps to 255 (all-zero input stays black).
pub fn magnitude_image(values: &[f64], width: usize, height: usize) -> Result<Pgm> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let peak = values.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
    let pixels = values
        .iter()
        .map(|v| {
            if peak == 0.0 {
                0
            } else {
                (v.abs() / peak * 255.0).round() as u16
            }
        })
        .collect();
    Ok(Pgm { width, height, maxval: 255, pixels })
}
