//! Where a frame comes from: an image file or a generated test pattern.
//!
//! Patterns are written `pattern:<kind>:<W>x<H>[:<param>]`:
//!
//! * `pattern:black:1920x1080`
//! * `pattern:white:64x64`
//! * `pattern:random:256x256:0.4` (density, seed fixed per size)
//! * `pattern:random:256x256:0.4:7` (explicit seed)
//! * `pattern:checker:64x64:8` (cell size)
//! * `pattern:dots:1024x1` (isolated pixels on every other column)

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamlabel_core::{binarize, BinaryImage, GrayImage};
use thiserror::Error;

use crate::imaging::{load_image_file, LoadError};

#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Black,
    White,
    Random { density: f64, seed: u64 },
    Checker { cell: usize },
    Dots,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    Pattern {
        pattern: Pattern,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("bad pattern {spec:?}: {reason}")]
    BadPattern { spec: String, reason: String },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Image(#[from] streamlabel_core::ImageError),
}

impl ImageSource {
    /// Loads (or generates) the frame and thresholds it.
    pub fn load_binary(&self, threshold: u8) -> Result<BinaryImage, SourceError> {
        match self {
            ImageSource::File(path) => Ok(binarize(&load_image_file(path)?, threshold)),
            ImageSource::Pattern {
                pattern,
                width,
                height,
            } => Ok(generate(pattern, *width, *height)?),
        }
    }

    pub fn load_gray(&self) -> Result<GrayImage, SourceError> {
        match self {
            ImageSource::File(path) => Ok(load_image_file(path)?),
            ImageSource::Pattern { .. } => Ok(self.load_binary(128)?.to_gray()),
        }
    }
}

pub fn generate(pattern: &Pattern, width: usize, height: usize) -> Result<BinaryImage, streamlabel_core::ImageError> {
    let n = width.saturating_mul(height);
    let mask: Vec<bool> = match *pattern {
        Pattern::Black => vec![false; n],
        Pattern::White => vec![true; n],
        Pattern::Random { density, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_bool(density)).collect()
        }
        Pattern::Checker { cell } => (0..n)
            .map(|i| ((i % width) / cell + (i / width) / cell).is_multiple_of(2))
            .collect(),
        Pattern::Dots => (0..n)
            .map(|i| (i % width).is_multiple_of(2) && (i / width).is_multiple_of(2))
            .collect(),
    };
    BinaryImage::from_mask(width, height, &mask)
}

impl FromStr for ImageSource {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(rest) = s.strip_prefix("pattern:") else {
            return Ok(ImageSource::File(PathBuf::from(s)));
        };
        let bad = |reason: &str| SourceError::BadPattern {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() < 2 {
            return Err(bad("expected pattern:<kind>:<W>x<H>"));
        }
        let (w, h) = parts[1].split_once('x').ok_or_else(|| bad("size must be WxH"))?;
        let width: usize = w.parse().map_err(|_| bad("width is not a number"))?;
        let height: usize = h.parse().map_err(|_| bad("height is not a number"))?;
        let params = &parts[2..];
        let pattern = match (parts[0], params) {
            ("black", []) => Pattern::Black,
            ("white", []) => Pattern::White,
            ("dots", []) => Pattern::Dots,
            ("checker", []) => Pattern::Checker { cell: 1 },
            ("checker", [cell]) => Pattern::Checker {
                cell: cell
                    .parse()
                    .ok()
                    .filter(|&c| c > 0)
                    .ok_or_else(|| bad("cell must be a positive integer"))?,
            },
            ("random", [density, seed @ ..]) if seed.len() <= 1 => {
                let density: f64 = density
                    .parse()
                    .ok()
                    .filter(|d| (0.0..=1.0).contains(d))
                    .ok_or_else(|| bad("density must be in 0..=1"))?;
                let seed = match seed {
                    [s] => s.parse().map_err(|_| bad("seed is not a number"))?,
                    _ => (width as u64) << 32 | height as u64,
                };
                Pattern::Random { density, seed }
            }
            _ => return Err(bad("unknown kind or wrong parameter count")),
        };
        Ok(ImageSource::Pattern {
            pattern,
            width,
            height,
        })
    }
}

impl fmt::Display for ImageSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageSource::File(p) => write!(f, "{}", p.display()),
            ImageSource::Pattern {
                pattern,
                width,
                height,
            } => {
                let size = format!("{width}x{height}");
                match pattern {
                    Pattern::Black => write!(f, "pattern:black:{size}"),
                    Pattern::White => write!(f, "pattern:white:{size}"),
                    Pattern::Dots => write!(f, "pattern:dots:{size}"),
                    Pattern::Checker { cell } => write!(f, "pattern:checker:{size}:{cell}"),
                    Pattern::Random { density, seed } => {
                        write!(f, "pattern:random:{size}:{density}:{seed}")
                    }
                }
            }
        }
    }
}
