//! Pixel grids shared by every stage: gray input, binary mask, label output.
//!
//! All grids are row-major with a top-left origin. Dimensions are limited to
//! `1..=65535` so that they always fit the 16-bit fields of a frame message.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Largest width or height a grid may have.
pub const MAX_DIMENSION: usize = u16::MAX as usize;

/// Pixel value used for white (foreground) pixels in a [`BinaryImage`].
pub const WHITE: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageError {
    /// Width or height is zero or larger than [`MAX_DIMENSION`].
    Dimensions { width: usize, height: usize },
    /// Pixel buffer length does not equal `width * height`.
    Length { expected: usize, actual: usize },
    /// A binary image pixel was neither 0 nor 255.
    NotBinary { index: usize, value: u8 },
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::Dimensions { width, height } => write!(
                f,
                "image dimensions {width}x{height} outside 1..={MAX_DIMENSION}"
            ),
            ImageError::Length { expected, actual } => {
                write!(f, "pixel buffer holds {actual} values, expected {expected}")
            }
            ImageError::NotBinary { index, value } => {
                write!(f, "pixel {index} has value {value}, expected 0 or 255")
            }
        }
    }
}

impl core::error::Error for ImageError {}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(ImageError::Dimensions { width, height });
    }
    let expected = width * height;
    if len != expected {
        return Err(ImageError::Length {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// An 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// A binary mask: every pixel is 0 (black) or 255 (white).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, pixels.len())?;
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 0 && v != WHITE)
        {
            return Err(ImageError::NotBinary { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds a mask from booleans, `true` meaning white.
    pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> Result<Self, ImageError> {
        check_dims(width, height, mask.len())?;
        Ok(Self {
            width,
            height,
            pixels: mask.iter().map(|&w| if w { WHITE } else { 0 }).collect(),
        })
    }

    /// An all-black image.
    pub fn black(width: usize, height: usize) -> Result<Self, ImageError> {
        Self::new(width, height, vec![0; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn is_white(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != 0
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.clone(),
        }
    }
}

/// Per-pixel label numbers, 0 meaning background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, ImageError> {
        check_dims(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Largest label present, 0 for an all-background image.
    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct nonzero labels.
    pub fn component_count(&self) -> usize {
        canonicalize(self).max_label() as usize
    }

    /// True when label 0 appears exactly where `mask` is black.
    pub fn matches_background(&self, mask: &BinaryImage) -> bool {
        self.width == mask.width
            && self.height == mask.height
            && self
                .labels
                .iter()
                .zip(&mask.pixels)
                .all(|(&l, &p)| (l == 0) == (p == 0))
    }
}

/// Thresholds a gray image: `pixel >= threshold` becomes white.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        pixels: img
            .pixels
            .iter()
            .map(|&p| if p >= threshold { WHITE } else { 0 })
            .collect(),
    }
}

/// Renumbers labels to `1..=K` in order of first raster appearance.
///
/// Background stays 0. The result depends only on the partition of pixels
/// into labels, so two labelings of the same components canonicalize to the
/// same image.
pub fn canonicalize(lbl: &LabelImage) -> LabelImage {
    let max = lbl.max_label() as usize;
    let labels = if max <= lbl.labels.len().saturating_mul(4) {
        let mut table = vec![0u32; max + 1];
        let mut next = 0u32;
        lbl.labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    return 0;
                }
                let slot = &mut table[l as usize];
                if *slot == 0 {
                    next += 1;
                    *slot = next;
                }
                *slot
            })
            .collect()
    } else {
        let mut table = BTreeMap::new();
        lbl.labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    return 0;
                }
                let next = table.len() as u32 + 1;
                *table.entry(l).or_insert(next)
            })
            .collect()
    };
    LabelImage {
        width: lbl.width,
        height: lbl.height,
        labels,
    }
}
