//! Reading input images and reading/writing disparity maps.
//!
//! Gray inputs may be PNG (8/16-bit, gray or color) or PGM (P2/P5). Color is
//! reduced to gray by the unweighted channel mean. Disparity maps are PFM
//! (single channel `Pf`, endianness from the sign of the scale line) or 16-bit
//! PNG with a caller-supplied divisor.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageError, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{is_valid_disparity, DisparityMap, GrayImage};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// On-disk encoding of a disparity map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisparityFormat {
    Pfm,
    /// 16-bit PNG; stored values are divided by the given factor.
    Png16(f32),
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

fn map_image_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat(format!("{}: {u}", path.display())),
        ImageError::IoError(io) => Error::Corrupt(format!("{}: {io}", path.display())),
        other => Error::Corrupt(format!("{}: {other}", path.display())),
    }
}

fn sniff_gray_format(bytes: &[u8]) -> Option<ImageFormat> {
    if bytes.starts_with(PNG_MAGIC) {
        Some(ImageFormat::Png)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        Some(ImageFormat::Pnm)
    } else {
        None
    }
}

/// Loads a PNG or PGM file as a gray image.
pub fn load_gray_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let format = sniff_gray_format(&bytes).ok_or_else(|| {
        Error::UnsupportedFormat(format!("{}: expected PNG or PGM (P2/P5)", path.display()))
    })?;
    let img = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| map_image_error(path, e))?;
    Ok(to_gray(img))
}

fn to_gray(img: DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => {
            GrayImage::from_fn(w, h, |x, y| buf.get_pixel(x as u32, y as u32)[0] as f32)
        }
        DynamicImage::ImageLumaA8(buf) => {
            GrayImage::from_fn(w, h, |x, y| buf.get_pixel(x as u32, y as u32)[0] as f32)
        }
        DynamicImage::ImageLuma16(buf) => GrayImage::from_fn(w, h, |x, y| {
            buf.get_pixel(x as u32, y as u32)[0] as f32 / 257.0
        }),
        DynamicImage::ImageRgb8(buf) => GrayImage::from_fn(w, h, |x, y| {
            let p = buf.get_pixel(x as u32, y as u32);
            (p[0] as f32 + p[1] as f32 + p[2] as f32) / 3.0
        }),
        other => {
            let rgb = other.to_rgb32f();
            GrayImage::from_fn(w, h, |x, y| {
                let p = rgb.get_pixel(x as u32, y as u32);
                (p[0] + p[1] + p[2]) / 3.0 * 255.0
            })
        }
    }
}

/// Loads a disparity map. Non-finite or negative values become the sentinel.
pub fn load_disparity(path: impl AsRef<Path>, format: DisparityFormat) -> Result<DisparityMap> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    match format {
        DisparityFormat::Pfm => decode_pfm(&bytes).map_err(|e| match e {
            Error::Corrupt(m) => Error::Corrupt(format!("{}: {m}", path.display())),
            Error::UnsupportedFormat(m) => {
                Error::UnsupportedFormat(format!("{}: {m}", path.display()))
            }
            other => other,
        }),
        DisparityFormat::Png16(divisor) => {
            if !(divisor > 0.0 && divisor.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "PNG disparity divisor {divisor} must be positive"
                )));
            }
            if !bytes.starts_with(PNG_MAGIC) {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: expected a 16-bit PNG",
                    path.display()
                )));
            }
            let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
                .map_err(|e| map_image_error(path, e))?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            let values: Vec<f32> = match img {
                DynamicImage::ImageLuma16(buf) => {
                    buf.pixels().map(|p| p[0] as f32 / divisor).collect()
                }
                DynamicImage::ImageLuma8(buf) => {
                    buf.pixels().map(|p| p[0] as f32 / divisor).collect()
                }
                _ => {
                    return Err(Error::UnsupportedFormat(format!(
                        "{}: disparity PNG must be single-channel",
                        path.display()
                    )))
                }
            };
            DisparityMap::new(w, h, values)
        }
    }
}

/// Saves `image` as an 8-bit gray PNG, rounding each intensity to the nearest level.
pub fn write_gray_image(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = image.dims();
    let bytes: Vec<u8> = image.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, bytes)
        .ok_or_else(|| Error::InvalidParameter("image buffer size mismatch".into()))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| match e {
        ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    })
}

/// Writes `map` as a little-endian single-channel PFM; sentinels become NaN.
pub fn write_disparity(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    out.write_all(&encode_pfm(map)).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// PFM bytes for `map`. Rows are stored bottom-to-top, as the format requires.
pub fn encode_pfm(map: &DisparityMap) -> Vec<u8> {
    let (w, h) = map.dims();
    let mut buf = format!("Pf\n{w} {h}\n-1\n").into_bytes();
    buf.reserve(w * h * 4);
    for y in (0..h).rev() {
        for &d in map.row(y) {
            let v = if is_valid_disparity(d) { d } else { f32::NAN };
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Splits the next whitespace-delimited header token off `bytes[*pos..]`.
fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Corrupt("truncated PFM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Corrupt("non-ASCII PFM header".into()))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let mut pos = 0;
    match header_token(bytes, &mut pos) {
        Ok("Pf") => {}
        Ok("PF") => {
            return Err(Error::UnsupportedFormat(
                "three-channel PFM (PF) is not a disparity map".into(),
            ))
        }
        _ => return Err(Error::UnsupportedFormat("missing PFM signature".into())),
    }
    let parse_dim = |tok: &str| {
        tok.parse::<usize>()
            .map_err(|_| Error::Corrupt(format!("bad PFM dimension {tok:?}")))
    };
    let w = parse_dim(header_token(bytes, &mut pos)?)?;
    let h = parse_dim(header_token(bytes, &mut pos)?)?;
    let scale_tok = header_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::Corrupt(format!("bad PFM scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Corrupt(format!("bad PFM scale {scale_tok:?}")));
    }
    let little_endian = scale < 0.0;
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Corrupt("truncated PFM header".into()));
    }
    pos += 1;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Corrupt("PFM dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::Corrupt(format!(
            "PFM raster has {} bytes, expected {expected}",
            raster.len()
        )));
    }
    let mut data = vec![0.0f32; w * h];
    for (i, chunk) in raster[..expected].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (x, row_from_bottom) = (i % w, i / w);
        data[(h - 1 - row_from_bottom) * w + x] = v;
    }
    DisparityMap::new(w, h, data)
}
