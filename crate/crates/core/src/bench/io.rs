//! Vector and image files.
//!
//! Raw vectors are a text header line followed by little-endian samples:
//! `L1RAW <dtype> <dim>[x<dim>...]\n` with `dtype` one of `f32le`, `f64le`.
//! Images may also be binary PGM (`P5`, 8- or 16-bit).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawDtype {
    F32,
    F64,
}

impl RawDtype {
    fn tag(self) -> &'static str {
        match self {
            RawDtype::F32 => "f32le",
            RawDtype::F64 => "f64le",
        }
    }
}

/// Samples with their shape (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Array {
    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn image(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height * width != data.len() {
            return Err(Error::Format(format!("{height}x{width} image needs {} samples, got {}", height * width, data.len())));
        }
        Ok(Self { shape: vec![height, width], data })
    }

    /// `(height, width)` for 2-D arrays.
    pub fn dims2(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [h, w] => Some((*h, *w)),
            _ => None,
        }
    }
}

pub fn encode_raw(a: &Array, dtype: RawDtype) -> Vec<u8> {
    let dims: Vec<String> = a.shape.iter().map(|d| d.to_string()).collect();
    let mut out = format!("L1RAW {} {}\n", dtype.tag(), dims.join("x")).into_bytes();
    match dtype {
        RawDtype::F32 => a.data.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        RawDtype::F64 => a.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<Array> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("raw file has no header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("raw header is not UTF-8".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [magic, dtype, dims] = parts.as_slice() else {
        return Err(Error::Format(format!("malformed raw header '{header}'")));
    };
    if *magic != "L1RAW" {
        return Err(Error::Format(format!("bad raw magic '{magic}'")));
    }
    let shape = dims
        .split('x')
        .map(|d| d.parse::<usize>().map_err(|_| Error::Format(format!("bad dimension '{d}'"))))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = shape.iter().product();
    let body = &bytes[nl + 1..];
    let width = match *dtype {
        "f32le" => 4,
        "f64le" => 8,
        other => return Err(Error::Format(format!("unknown dtype '{other}'"))),
    };
    if body.len() != count * width {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", count * width, body.len())));
    }
    let data = if width == 4 {
        body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
    } else {
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    };
    Ok(Array { shape, data })
}

/// Binary PGM; samples are clamped to `[0, 1]` and scaled to `maxval`.
pub fn encode_pgm(a: &Array, maxval: u16) -> Result<Vec<u8>> {
    let (h, w) = a.dims2().ok_or_else(|| Error::Format("PGM needs a 2-D array".into()))?;
    if maxval == 0 {
        return Err(Error::Format("PGM maxval must be positive".into()));
    }
    let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
    for v in &a.data {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

/// Samples are returned in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Array> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("bad PGM header".into()))?);
    }
    if tokens[0] != "P5" {
        return Err(Error::Format(format!("unsupported PGM magic '{}'", tokens[0])));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM field '{t}'")));
    let (w, h, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let body = &bytes[pos + 1..];
    let bps = if maxval < 256 { 1 } else { 2 };
    if body.len() < w * h * bps {
        return Err(Error::Format("truncated PGM payload".into()));
    }
    let m = maxval as f64;
    let data = if bps == 1 {
        body[..w * h].iter().map(|&b| b as f64 / m).collect()
    } else {
        body[..2 * w * h].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / m).collect()
    };
    Array::image(h, w, data)
}

/// Detects PGM by its magic, raw otherwise.
pub fn read_array(path: &Path) -> Result<Array> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        decode_raw(&bytes)
    }
}

/// Full precision raw output; `.pgm` paths get an 8-bit image instead.
pub fn write_array(path: &Path, a: &Array) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "pgm") { encode_pgm(a, 255)? } else { encode_raw(a, RawDtype::F64) };
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_roundtrip_f64_is_exact() {
        let a = Array::image(2, 3, vec![0.1, -2.5, 3.0, 1e-300, f64::MAX, 0.0]).unwrap();
        assert_eq!(decode_raw(&encode_raw(&a, RawDtype::F64)).unwrap(), a);
    }

    #[test]
    fn raw_f32_rounds() {
        let a = Array::vector(vec![0.1, 1.0]);
        let b = decode_raw(&encode_raw(&a, RawDtype::F32)).unwrap();
        assert_eq!(b.data[0], 0.1f32 as f64);
        assert_eq!(b.data[1], 1.0);
    }

    #[test]
    fn pgm_roundtrip_8_and_16_bit() {
        let a = Array::image(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let b = decode_pgm(&encode_pgm(&a, 255).unwrap()).unwrap();
        assert_eq!(b.shape, vec![2, 2]);
        assert!(b.data.iter().zip(&a.data).all(|(x, y)| (x - y).abs() <= 0.5 / 255.0));
        let c = decode_pgm(&encode_pgm(&a, 65535).unwrap()).unwrap();
        assert!(c.data.iter().zip(&a.data).all(|(x, y)| (x - y).abs() <= 0.5 / 65535.0));
    }

    #[test]
    fn pgm_header_comments() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        let a = decode_pgm(bytes).unwrap();
        assert_eq!(a.data, vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_truncated_raw() {
        assert!(decode_raw(b"L1RAW f64le 3\n\x00\x00").is_err());
    }
}
