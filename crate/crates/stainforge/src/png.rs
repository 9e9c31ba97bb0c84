//! 8-bit RGB PNG reading and writing.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, ImageReader};
use stainforge_core::RgbImage;

use crate::error::{Error, Result};

/// Decodes any PNG the `image` crate understands and converts it to 8-bit RGB
/// (alpha dropped, 16-bit scaled down, gray expanded).
pub fn read_png(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|message| Error::Image {
        path: path.to_path_buf(),
        message,
    })
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, String> {
    let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png)
        .decode()
        .map_err(|e| e.to_string())?
        .into_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, img.into_raw()).map_err(|e| e.to_string())
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, String> {
    let buf = image::RgbImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.as_bytes().to_vec(),
    )
    .ok_or("image buffer size mismatch")?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let bytes = encode_png(img).map_err(|message| Error::Image {
        path: path.to_path_buf(),
        message,
    })?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data = (0..5 * 4 * 3).map(|i| (i * 13 % 256) as u8).collect();
        let img = RgbImage::new(5, 4, data).unwrap();
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_png(&bytes).unwrap(), img);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(decode_png(b"not a png").is_err());
    }
}
