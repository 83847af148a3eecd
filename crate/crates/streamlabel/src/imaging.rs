//! Image file formats: binary PGM and uncompressed BMP in, PPM and PGM out.

use std::path::Path;

use streamlabel_core::image::MAX_DIMENSION;
use streamlabel_core::{GrayImage, ImageError, LabelImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("unsupported magic {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0} (must be 1..=255)")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: {actual} of {expected} bytes")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("unsupported BMP variant: {0}")]
    UnsupportedBmp(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Decodes a binary portable graymap (`P5`).
///
/// Samples are rescaled to `0..=255` when `maxval` is below 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    if magic != b"P5" {
        return Err(DecodeError::UnsupportedMagic(
            String::from_utf8_lossy(magic).into_owned(),
        ));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(DecodeError::MalformedHeader("missing whitespace after maxval")),
    }
    if maxval == 0 || maxval > 255 {
        return Err(DecodeError::UnsupportedMaxval(maxval));
    }
    let (width, height) = dims(width, height)?;
    let expected = width * height;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(DecodeError::TruncatedPayload {
            expected,
            actual: data.len(),
        });
    }
    let pixels = data[..expected]
        .iter()
        .map(|&v| {
            if maxval == 255 {
                v
            } else {
                ((v.min(maxval as u8) as u32 * 255 + maxval / 2) / maxval) as u8
            }
        })
        .collect();
    Ok(GrayImage::new(width, height, pixels)?)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u32, DecodeError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DecodeError::MalformedHeader(what));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(DecodeError::MalformedHeader(what))
    }
}

fn dims(width: u32, height: u32) -> Result<(usize, usize), DecodeError> {
    let (w, h) = (width as usize, height as usize);
    if w == 0 || h == 0 || w > MAX_DIMENSION || h > MAX_DIMENSION {
        return Err(ImageError::Dimensions {
            width: w,
            height: h,
        }
        .into());
    }
    Ok((w, h))
}

/// Integer luma used for color to gray conversion.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((77 * r as u32 + 150 * g as u32 + 29 * b as u32) >> 8) as u8
}

fn le16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes an uncompressed 8-bit palette or 24-bit BMP to gray.
///
/// Bottom-up files (positive height) are flipped to a top-left origin.
pub fn load_bmp(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    const FILE_HEADER: usize = 14;
    if bytes.get(..2) != Some(b"BM") {
        return Err(DecodeError::UnsupportedMagic(
            String::from_utf8_lossy(bytes.get(..2).unwrap_or(bytes)).into_owned(),
        ));
    }
    if bytes.len() < FILE_HEADER + 40 {
        return Err(DecodeError::TruncatedPayload {
            expected: FILE_HEADER + 40,
            actual: bytes.len(),
        });
    }
    let data_offset = le32(bytes, 10) as usize;
    let info_len = le32(bytes, 14) as usize;
    if info_len < 40 {
        return Err(DecodeError::UnsupportedBmp(format!(
            "{info_len}-byte info header"
        )));
    }
    let raw_w = le32(bytes, 18) as i32;
    let raw_h = le32(bytes, 22) as i32;
    let bpp = le16(bytes, 28);
    let compression = le32(bytes, 30);
    let colors_used = le32(bytes, 46) as usize;
    if compression != 0 {
        return Err(DecodeError::UnsupportedBmp(format!(
            "compression method {compression}"
        )));
    }
    if bpp != 8 && bpp != 24 {
        return Err(DecodeError::UnsupportedBmp(format!("{bpp} bits per pixel")));
    }
    if raw_w <= 0 || raw_h == 0 || raw_h == i32::MIN {
        return Err(DecodeError::MalformedHeader("BMP dimensions"));
    }
    let top_down = raw_h < 0;
    let (width, height) = dims(raw_w as u32, raw_h.unsigned_abs())?;

    let palette = if bpp == 8 {
        let entries = if colors_used == 0 { 256 } else { colors_used.min(256) };
        let start = FILE_HEADER + info_len;
        let end = start + 4 * entries;
        let table = bytes.get(start..end).ok_or(DecodeError::TruncatedPayload {
            expected: end,
            actual: bytes.len(),
        })?;
        table
            .chunks_exact(4)
            .map(|e| luma(e[2], e[1], e[0]))
            .collect::<Vec<u8>>()
    } else {
        Vec::new()
    };

    let stride = (bpp as usize * width).div_ceil(32) * 4;
    let expected = data_offset + stride * height;
    if bytes.len() < expected {
        return Err(DecodeError::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    let mut pixels = vec![0u8; width * height];
    for row in 0..height {
        let src = &bytes[data_offset + row * stride..][..stride];
        let y = if top_down { row } else { height - 1 - row };
        let dst = &mut pixels[y * width..][..width];
        if bpp == 8 {
            for (d, &idx) in dst.iter_mut().zip(src) {
                *d = *palette.get(idx as usize).ok_or_else(|| {
                    DecodeError::UnsupportedBmp(format!("palette index {idx} out of range"))
                })?;
            }
        } else {
            for (d, px) in dst.iter_mut().zip(src.chunks_exact(3)) {
                *d = luma(px[2], px[1], px[0]);
            }
        }
    }
    Ok(GrayImage::new(width, height, pixels)?)
}

/// Decodes a PGM or BMP by sniffing the magic bytes.
pub fn load_image(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    match bytes.get(..2) {
        Some(b"BM") => load_bmp(bytes),
        _ => load_pgm(bytes),
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode { path: String, source: DecodeError },
}

pub fn load_image_file(path: &Path) -> Result<GrayImage, LoadError> {
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_image(&bytes).map_err(|source| LoadError::Decode {
        path: path.display().to_string(),
        source,
    })
}

/// Encodes a binary portable graymap (`P5`, maxval 255).
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// Color of a label: black for background, otherwise a fixed bijective
/// scramble of the low 24 bits, so labels below `2^24` get distinct,
/// non-black colors.
pub fn label_color(label: u32) -> [u8; 3] {
    const MASK: u32 = 0x00FF_FFFF;
    let mut v = label & MASK;
    // Odd multipliers and right xorshifts are permutations of Z/2^24 fixing 0.
    v = v.wrapping_mul(0x9E_3779) & MASK;
    v ^= v >> 11;
    v = v.wrapping_mul(0x5B_D1E5) & MASK;
    v ^= v >> 7;
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

/// Renders labels as a binary pixmap (`P6`).
pub fn render_labels(lbl: &LabelImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", lbl.width(), lbl.height()).into_bytes();
    out.reserve(lbl.labels().len() * 3);
    for &l in lbl.labels() {
        out.extend_from_slice(&label_color(l));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(header: &str, data: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(data);
        v
    }

    #[test]
    fn minimal_pgm() {
        let img = load_pgm(&pgm("P5\n2 1\n255\n", &[0, 255])).unwrap();
        assert_eq!((img.width(), img.height(), img.pixels()), (2, 1, &[0, 255][..]));
        let img = load_pgm(&pgm("P5\n1 1\n255\n", &[7])).unwrap();
        assert_eq!(img.pixels(), &[7]);
    }

    #[test]
    fn pgm_comments_and_scaling() {
        let img = load_pgm(&pgm("P5 # made by hand\n3 1\n# max\n1\n", &[0, 1, 1])).unwrap();
        assert_eq!(img.pixels(), &[0, 255, 255]);
    }

    #[test]
    fn pgm_errors_are_distinct() {
        assert!(matches!(
            load_pgm(b"P6\n1 1\n255\n\0\0\0"),
            Err(DecodeError::UnsupportedMagic(m)) if m == "P6"
        ));
        assert!(matches!(
            load_pgm(b"P5\n1 x\n255\n"),
            Err(DecodeError::MalformedHeader("height"))
        ));
        assert!(matches!(
            load_pgm(b"P5\n1 1\n65535\n\0\0"),
            Err(DecodeError::UnsupportedMaxval(65535))
        ));
        assert!(matches!(
            load_pgm(&pgm("P5\n2 2\n255\n", &[1, 2, 3])),
            Err(DecodeError::TruncatedPayload {
                expected: 4,
                actual: 3
            })
        ));
        assert!(matches!(
            load_pgm(b"P5\n0 1\n255\n"),
            Err(DecodeError::Image(_))
        ));
    }

    #[test]
    fn pgm_writer_roundtrips() {
        let img = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(load_pgm(&write_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn luma_extremes() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
    }

    #[test]
    fn palette_colors_are_distinct_and_never_black() {
        let mut seen = std::collections::HashSet::new();
        for l in 1..50_000u32 {
            let c = label_color(l);
            assert_ne!(c, [0, 0, 0]);
            assert!(seen.insert(c), "label {l} collides");
        }
        assert_eq!(label_color(0), [0, 0, 0]);
    }

    #[test]
    fn render_is_pure() {
        let lbl = LabelImage::new(3, 1, vec![0, 1, 2]).unwrap();
        let a = render_labels(&lbl);
        assert_eq!(a, render_labels(&lbl));
        assert_eq!(&a[..11], b"P6\n3 1\n255\n");
        assert_eq!(&a[11..14], &[0, 0, 0]);
        assert_ne!(&a[14..17], &a[17..20]);
    }
}
