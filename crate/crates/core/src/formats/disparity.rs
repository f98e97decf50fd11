//! Disparity maps as 16-bit binary PGM.
//!
//! Stored sample = round(disparity × 256), big-endian, maxval 65535; a
//! stored 0 marks an invalid pixel. The 1/256 px fixed-point grid makes
//! every representable disparity exact in both directions, so reading a
//! written map reproduces it bit for bit.

use crate::stereo::DisparityMap;

use super::FormatError;

/// Largest disparity the fixed-point encoding can hold.
pub const MAX_DISPARITY: f64 = 65535.0 / 256.0;

fn structure(msg: impl Into<String>) -> FormatError {
    FormatError::Structure(msg.into())
}

/// Pull the next header token, skipping whitespace and `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String, FormatError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(structure("truncated PGM header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Parse a 16-bit binary PGM into a disparity map.
pub fn parse_disparity(bytes: &[u8]) -> Result<DisparityMap, FormatError> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(structure(format!(
            "expected binary PGM magic \"P5\", got {magic:?}"
        )));
    }
    let width: usize = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| structure("bad PGM width"))?;
    let height: usize = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| structure("bad PGM height"))?;
    let maxval: u32 = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| structure("bad PGM maxval"))?;
    if maxval != 65535 {
        return Err(structure(format!(
            "disparity PGM requires maxval 65535, got {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the samples
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(structure("missing separator after PGM maxval"));
    }
    pos += 1;
    let n_pixels = width
        .checked_mul(height)
        .ok_or_else(|| structure("PGM dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() != n_pixels * 2 {
        return Err(structure(format!(
            "PGM payload holds {} bytes, expected {} for {width}x{height}",
            payload.len(),
            n_pixels * 2
        )));
    }
    let mut values = Vec::with_capacity(n_pixels);
    let mut valid = Vec::with_capacity(n_pixels);
    for chunk in payload.chunks_exact(2) {
        let raw = u16::from_be_bytes([chunk[0], chunk[1]]);
        valid.push(raw != 0);
        values.push(raw as f64 / 256.0);
    }
    DisparityMap::from_parts(width, height, values, valid)
        .map_err(|e| structure(format!("{e}")))
}

/// Serialize a disparity map as 16-bit binary PGM.
///
/// Valid disparities must round into the encoding's range; a valid pixel
/// that rounds to 0 (below 1/512 px) cannot be distinguished from invalid
/// and is rejected rather than silently dropped.
pub fn write_disparity(map: &DisparityMap) -> Result<Vec<u8>, FormatError> {
    let header = format!("P5\n{} {}\n65535\n", map.width(), map.height());
    let mut out = Vec::with_capacity(header.len() + map.width() * map.height() * 2);
    out.extend_from_slice(header.as_bytes());
    for y in 0..map.height() {
        for x in 0..map.width() {
            let raw = match map.get(x, y) {
                None => 0u16,
                Some(d) => {
                    let scaled = (d * 256.0).round();
                    if !(1.0..=65535.0).contains(&scaled) {
                        return Err(structure(format!(
                            "disparity {d} at ({x}, {y}) outside the encodable range \
                             [1/256, {MAX_DISPARITY}]"
                        )));
                    }
                    scaled as u16
                }
            };
            out.extend_from_slice(&raw.to_be_bytes());
        }
    }
    Ok(out)
}
