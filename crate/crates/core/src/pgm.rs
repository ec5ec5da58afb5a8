//! Binary PGM (P5, 8-bit) reading and writing.

use std::io::Write;

/// Decodes a P5 file into `(width, height, bytes)`. Sample values are
/// returned exactly as stored; `maxval` must be at most 255.
pub fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos).ok_or("missing magic")?;
    if magic != b"P5" {
        return Err(format!(
            "unsupported magic {:?} (only binary P5 is supported)",
            String::from_utf8_lossy(magic)
        ));
    }
    let width = number(bytes, &mut pos, "width")?;
    let height = number(bytes, &mut pos, "height")?;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} is not 8-bit"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing raster separator".into());
    }
    pos += 1;
    let len = width * height;
    let raster = bytes
        .get(pos..pos + len)
        .ok_or_else(|| format!("truncated raster: need {len} bytes, have {}", bytes.len() - pos))?;
    Ok((width, height, raster.to_vec()))
}

fn skip_space(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    skip_space(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, String> {
    let tok = token(bytes, pos).ok_or_else(|| format!("missing {what}"))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad {what}"))
}

pub fn encode(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(width * height, data.len());
    let mut out = Vec::with_capacity(data.len() + 20);
    write!(out, "P5\n{width} {height}\n255\n").expect("writing to a Vec cannot fail");
    out.extend_from_slice(data);
    out
}
