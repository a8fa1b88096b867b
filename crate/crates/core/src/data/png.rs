//! 8-bit grayscale PNG encode/decode with pinned encoder settings, so equal
//! pixels always produce equal bytes.

use std::fs;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngDecoder, PngEncoder};
use image::{ColorType, ExtendedColorType, ImageDecoder, ImageEncoder};

use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::io_util::write_atomic;

pub fn encode_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)
        .map_err(|e| Error::invalid(format!("png encode: {e}")))?;
    Ok(out)
}

/// Returns `(height, width, pixels)`; only 8-bit grayscale is accepted.
pub fn decode_gray(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let dec = PngDecoder::new(std::io::Cursor::new(bytes)).map_err(|e| e.to_string())?;
    if dec.color_type() != ColorType::L8 {
        return Err(format!("expected 8-bit grayscale, found {:?}", dec.color_type()));
    }
    let (w, h) = dec.dimensions();
    let mut buf = vec![0u8; dec.total_bytes() as usize];
    dec.read_image(&mut buf).map_err(|e| e.to_string())?;
    Ok((h as usize, w as usize, buf))
}

/// Intensity quantized as `round(v * 255)`.
pub fn quantize(img: &Image) -> Vec<u8> {
    img.data().iter().map(|v| (v * 255.0).round() as u8).collect()
}

/// The image as it reads back after a PNG round trip.
pub fn quantized(img: &Image) -> Image {
    let data = quantize(img).into_iter().map(|b| b as f64 / 255.0).collect();
    Image::new(img.height(), img.width(), data)
        .expect("quantized values are in range")
        .with_spacing(img.spacing())
}

pub fn image_png(img: &Image) -> Result<Vec<u8>> {
    encode_gray(img.width(), img.height(), &quantize(img))
}

pub fn label_png(lbl: &LabelMap) -> Result<Vec<u8>> {
    encode_gray(lbl.width(), lbl.height(), lbl.data())
}

pub fn write_image_png(img: &Image, path: &Path) -> Result<()> {
    write_atomic(path, &image_png(img)?)
}

pub fn write_label_png(lbl: &LabelMap, path: &Path) -> Result<()> {
    write_atomic(path, &label_png(lbl)?)
}

fn read_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes).map_err(|m| Error::format(path, m))
}

pub fn read_image_png(path: &Path) -> Result<Image> {
    let (h, w, px) = read_gray(path)?;
    Image::new(h, w, px.into_iter().map(|b| b as f64 / 255.0).collect()).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_label_png(path: &Path, num_classes: u8) -> Result<LabelMap> {
    let (h, w, px) = read_gray(path)?;
    LabelMap::new(h, w, px, num_classes).map_err(|e| Error::format(path, e.to_string()))
}
