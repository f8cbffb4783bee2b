//! Census transform and Hamming distance.

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;

/// Per-pixel census descriptors.
///
/// Each descriptor holds one bit per non-center window position, visited in
/// row-major order. The first visited position is the most significant bit, so
/// a descriptor of up to 64 bits reads as an ordinary integer. Longer
/// descriptors are split over several words, each word filled the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusImage {
    width: usize,
    height: usize,
    bits: usize,
    words: usize,
    data: Vec<u64>,
}

impl CensusImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Descriptor length in bits (`window_area - 1`).
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_pixel(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn descriptor(&self, x: usize, y: usize) -> &[u64] {
        let start = (y * self.width + x) * self.words;
        &self.data[start..start + self.words]
    }
}

/// Census transform with a `(2r+1)²` window and replicate-edge borders.
///
/// A bit is set iff the neighbor is strictly darker than the center.
pub fn census_transform(image: &GrayImage, window_radius: usize) -> Result<CensusImage> {
    if window_radius == 0 {
        return Err(Error::InvalidParameter(
            "census window radius must be at least 1".into(),
        ));
    }
    let (w, h) = image.dims();
    let r = window_radius as isize;
    let side = 2 * window_radius + 1;
    let bits = side * side - 1;
    let words = bits.div_ceil(64);
    let mut data = vec![0u64; w * h * words];
    for y in 0..h {
        for x in 0..w {
            let center = image.get(x, y);
            let desc = &mut data[(y * w + x) * words..(y * w + x + 1) * words];
            let mut i = 0usize;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    if image.get_clamped(x as isize + dx, y as isize + dy) < center {
                        let word = i / 64;
                        let word_bits = (bits - word * 64).min(64);
                        desc[word] |= 1u64 << (word_bits - 1 - i % 64);
                    }
                    i += 1;
                }
            }
        }
    }
    Ok(CensusImage {
        width: w,
        height: h,
        bits,
        words,
        data,
    })
}

/// Number of differing bit positions between two descriptors of equal length.
pub fn hamming(a: &[u64], b: &[u64]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(hamming_unchecked(a, b))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}
