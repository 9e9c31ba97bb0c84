//! Debug dump of optical-density images.
//!
//! Layout, little-endian: magic `ODIM`, `u32` width, `u32` height, `u32`
//! reserved (0), then `width * height * 3` `f32` values, row-major and
//! channel-interleaved.

use std::io::{Read, Write};

use stainforge_core::OdImage;

pub const MAGIC: &[u8; 4] = b"ODIM";
pub const HEADER_LEN: usize = 16;

pub fn write_od<W: Write>(mut w: W, od: &OdImage) -> std::io::Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&(od.width() as u32).to_le_bytes());
    header[8..12].copy_from_slice(&(od.height() as u32).to_le_bytes());
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(od.pixels().len() * 12);
    for v in od.pixels().iter().flatten() {
        body.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&body)
}

pub fn read_od<R: Read>(mut r: R) -> std::io::Result<OdImage> {
    use std::io::{Error, ErrorKind};
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::new(ErrorKind::InvalidData, "missing ODIM magic"));
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut body = vec![0u8; width * height * 12];
    r.read_exact(&mut body)?;
    let data = body
        .chunks_exact(12)
        .map(|px| {
            let f = |i: usize| f32::from_le_bytes(px[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
            [f(0), f(1), f(2)]
        })
        .collect();
    OdImage::new(width, height, data).map_err(|e| Error::new(ErrorKind::InvalidData, e.to_string()))
}
