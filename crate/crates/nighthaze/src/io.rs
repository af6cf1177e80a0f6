//! PNG and binary PPM/PGM decode/encode. Intensities map linearly to [0, 1]
//! on load and back with round-half-up quantization on save.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Loads an 8- or 16-bit PNG/PPM/PGM into a planar image in [0, 1].
pub fn load_image(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let decoded = ImageReader::open(path.as_ref())?.decode()?;
    planar_from_dynamic(decoded)
}

fn planar_from_dynamic(img: DynamicImage) -> Result<PlanarImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let data = buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            PlanarImage::new(w, h, 1, data)
        }
        DynamicImage::ImageLuma16(buf) => {
            let data = buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
            PlanarImage::new(w, h, 1, data)
        }
        DynamicImage::ImageRgb8(buf) => {
            let raw = buf.as_raw();
            planar_from_interleaved(w, h, raw.len() / 3, |i, c| raw[i * 3 + c] as f64 / 255.0)
        }
        DynamicImage::ImageRgb16(buf) => {
            let raw = buf.as_raw();
            planar_from_interleaved(w, h, raw.len() / 3, |i, c| raw[i * 3 + c] as f64 / 65535.0)
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            let gray = img.to_luma16();
            let data = gray.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
            PlanarImage::new(w, h, 1, data)
        }
        other => {
            // Alpha or float layouts: drop to plain RGB.
            let rgb = other.to_rgb16();
            let raw = rgb.as_raw();
            planar_from_interleaved(w, h, raw.len() / 3, |i, c| raw[i * 3 + c] as f64 / 65535.0)
        }
    }
}

fn planar_from_interleaved(
    w: usize,
    h: usize,
    pixels: usize,
    sample: impl Fn(usize, usize) -> f64,
) -> Result<PlanarImage> {
    let mut data = Vec::with_capacity(pixels * 3);
    for c in 0..3 {
        for i in 0..pixels {
            data.push(sample(i, c));
        }
    }
    PlanarImage::new(w, h, 3, data)
}

fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn quantize_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0 + 0.5).floor() as u16
}

fn interleave_u8(img: &PlanarImage) -> Vec<u8> {
    let n = img.pixel_count();
    let c = img.channels();
    let mut out = Vec::with_capacity(n * c);
    for i in 0..n {
        for ch in 0..c {
            out.push(quantize_u8(img.plane(ch)[i]));
        }
    }
    out
}

fn interleave_u16(img: &PlanarImage) -> Vec<u16> {
    let n = img.pixel_count();
    let c = img.channels();
    let mut out = Vec::with_capacity(n * c);
    for i in 0..n {
        for ch in 0..c {
            out.push(quantize_u16(img.plane(ch)[i]));
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Container {
    Png,
    Pnm,
}

fn container_for(path: &Path, channels: usize) -> Result<Container> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "png" => Ok(Container::Png),
        "ppm" => {
            if channels != 3 {
                return Err(Error::InvalidParam(
                    "ppm requires a 3-channel image".into(),
                ));
            }
            Ok(Container::Pnm)
        }
        "pgm" => {
            if channels != 1 {
                return Err(Error::InvalidParam(
                    "pgm requires a single-channel image".into(),
                ));
            }
            Ok(Container::Pnm)
        }
        other => Err(Error::InvalidParam(format!(
            "unsupported output extension {other:?} (use png, ppm or pgm)"
        ))),
    }
}

/// Saves as 8-bit PNG or binary PPM/PGM, chosen by extension.
pub fn save_image(path: impl AsRef<Path>, img: &PlanarImage) -> Result<()> {
    save_with_depth(path.as_ref(), img, false)
}

/// Saves with 16-bit samples.
pub fn save_image16(path: impl AsRef<Path>, img: &PlanarImage) -> Result<()> {
    save_with_depth(path.as_ref(), img, true)
}

fn save_with_depth(path: &Path, img: &PlanarImage, deep: bool) -> Result<()> {
    let container = container_for(path, img.channels())?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = match (img.channels(), deep) {
        (1, false) => ExtendedColorType::L8,
        (1, true) => ExtendedColorType::L16,
        (_, false) => ExtendedColorType::Rgb8,
        (_, true) => ExtendedColorType::Rgb16,
    };
    // Encoders take 16-bit samples in native byte order.
    let bytes: Vec<u8> = if deep {
        interleave_u16(img)
            .into_iter()
            .flat_map(|v| v.to_ne_bytes())
            .collect()
    } else {
        interleave_u8(img)
    };
    let writer = BufWriter::new(File::create(path)?);
    match container {
        Container::Png => {
            let encoder = image::codecs::png::PngEncoder::new(writer);
            encoder.write_image(&bytes, w, h, color)?;
        }
        Container::Pnm => {
            let subtype = if img.channels() == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            let encoder = PnmEncoder::new(writer).with_subtype(subtype);
            encoder.write_image(&bytes, w, h, color)?;
        }
    }
    Ok(())
}

/// Loads a grayscale disparity map and normalizes it by its maximum.
/// Zero-valued occlusion holes survive for the fill pass.
pub fn load_disparity(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let img = load_image(path)?;
    let gray = match img.channels() {
        1 => img,
        _ => crate::image::value_channel(&img)?,
    };
    let max = gray.max_value();
    if max <= 0.0 {
        return Err(Error::DegenerateDisparity);
    }
    Ok(gray.map(|v| v / max))
}
