//! Little-endian primitives shared by the weight-file and dataset formats.

use std::io::{Read, Write};

pub fn write_magic<W: Write>(w: &mut W, magic: &[u8; 4]) -> std::io::Result<()> {
    w.write_all(magic)
}

pub fn read_magic<R: Read>(r: &mut R, expected: &[u8; 4]) -> std::io::Result<bool> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(&buf == expected)
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_f32_slice<W: Write>(w: &mut W, values: &[f32]) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)
}

pub fn read_f32_vec<R: Read>(r: &mut R, count: usize) -> std::io::Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Weight files store f32; attacks compute in f64.
pub fn widen(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

pub fn narrow(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}
