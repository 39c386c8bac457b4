//! `HSIC v1` cube files.
//!
//! Layout: the magic bytes `HSIC`, a version byte `0x01`, then height, width
//! and bands as little-endian `u32`, then `height*width*bands` little-endian
//! IEEE-754 `f32` values in band-sequential order. Non-finite values are
//! never written and are rejected on read.

use std::fs;
use std::path::Path;

use crate::cube::HsiCube;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HSIC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 12;

pub fn encode_cube(cube: &HsiCube) -> Result<Vec<u8>> {
    if let Some(index) = cube.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cube.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for d in [cube.height(), cube.width(), cube.bands()] {
        let d = u32::try_from(d).map_err(|_| Error::invalid("dims", "dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in cube.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<HsiCube> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedFile(format!(
            "truncated header: expected at least {HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::MalformedFile(format!(
            "bad magic {:?}, expected \"HSIC\"",
            &bytes[..4]
        )));
    }
    if bytes[4] != VERSION {
        return Err(Error::MalformedFile(format!("unsupported version {}", bytes[4])));
    }
    let dim = |i: usize| {
        let off = 5 + 4 * i;
        u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
    };
    let (h, w, p) = (dim(0), dim(1), dim(2));
    if h == 0 || w == 0 || p == 0 {
        return Err(Error::MalformedFile(format!("header declares empty cube {h}x{w}x{p}")));
    }
    let count = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(p))
        .ok_or_else(|| Error::MalformedFile("element count overflows".into()))?;
    let expected = count
        .checked_mul(4)
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::MalformedFile("byte count overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::MalformedFile(format!(
            "size mismatch for {h}x{w}x{p}: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::MalformedFile(format!("non-finite value at element {index}")));
    }
    HsiCube::from_vec(h, w, p, data)
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    decode_cube(&fs::read(path)?)
}

pub fn write_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_cube(cube)?)?;
    Ok(())
}
