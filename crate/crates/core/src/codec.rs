//! Frame message wire format.
//!
//! All fields little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     frame_id     i32
//! 4       2     width        u16
//! 6       2     height       u16
//! 8       4     pixel_count  u32, equals width * height
//! 12      4*n   pixels       i32 each
//! ```
//!
//! On a byte stream each encoded message is preceded by a `u32` total length
//! (see [`frame`] and [`split_frame`]).

use alloc::vec::Vec;
use core::fmt;

/// Bytes before the pixel array.
pub const HEADER_LEN: usize = 12;

/// Bytes of the stream length prefix.
pub const FRAME_PREFIX_LEN: usize = 4;

/// One image frame: metadata plus one 32-bit word per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameMessage {
    pub frame_id: i32,
    pub width: u16,
    pub height: u16,
    pub pixels: Vec<i32>,
}

impl FrameMessage {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 4 * self.pixels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodecError {
    /// `pixels.len()` differs from `width * height` on encode.
    PixelLengthMismatch { expected: usize, actual: usize },
    /// Fewer than [`HEADER_LEN`] bytes.
    TruncatedHeader { len: usize },
    /// Header `pixel_count` disagrees with `width * height`.
    PixelCountMismatch { width: u16, height: u16, pixel_count: u32 },
    TruncatedPayload { expected: usize, actual: usize },
    TrailingBytes { extra: usize },
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::PixelLengthMismatch { expected, actual } => write!(
                f,
                "message has {actual} pixels but dimensions need {expected}"
            ),
            CodecError::TruncatedHeader { len } => {
                write!(f, "truncated header: {len} of {HEADER_LEN} bytes")
            }
            CodecError::PixelCountMismatch {
                width,
                height,
                pixel_count,
            } => write!(
                f,
                "pixel count {pixel_count} does not match {width}x{height}"
            ),
            CodecError::TruncatedPayload { expected, actual } => {
                write!(f, "truncated payload: {actual} of {expected} bytes")
            }
            CodecError::TrailingBytes { extra } => write!(f, "{extra} trailing bytes after message"),
        }
    }
}

impl core::error::Error for CodecError {}

pub fn encode_message(msg: &FrameMessage) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(msg.encoded_len());
    encode_into(msg, &mut out)?;
    Ok(out)
}

/// Appends the encoding of `msg` to `out`.
pub fn encode_into(msg: &FrameMessage, out: &mut Vec<u8>) -> Result<(), CodecError> {
    let expected = msg.pixel_count();
    if msg.pixels.len() != expected {
        return Err(CodecError::PixelLengthMismatch {
            expected,
            actual: msg.pixels.len(),
        });
    }
    out.reserve(msg.encoded_len());
    out.extend_from_slice(&msg.frame_id.to_le_bytes());
    out.extend_from_slice(&msg.width.to_le_bytes());
    out.extend_from_slice(&msg.height.to_le_bytes());
    out.extend_from_slice(&(expected as u32).to_le_bytes());
    for p in &msg.pixels {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(())
}

pub fn decode_message(bytes: &[u8]) -> Result<FrameMessage, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::TruncatedHeader { len: bytes.len() });
    }
    let le32 = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let frame_id = i32::from_le_bytes(le32(0));
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let pixel_count = u32::from_le_bytes(le32(8));
    let count = width as usize * height as usize;
    if pixel_count as usize != count {
        return Err(CodecError::PixelCountMismatch {
            width,
            height,
            pixel_count,
        });
    }
    let expected = HEADER_LEN + 4 * count;
    if bytes.len() < expected {
        return Err(CodecError::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CodecError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let pixels = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(FrameMessage {
        frame_id,
        width,
        height,
        pixels,
    })
}

/// Prefixes `payload` with its length for stream transport.
pub fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_PREFIX_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Splits one length-prefixed frame off the front of `buf`.
///
/// Returns `None` until the whole frame is present.
pub fn split_frame(buf: &[u8]) -> Option<(&[u8], &[u8])> {
    let prefix = buf.get(..FRAME_PREFIX_LEN)?;
    let len = u32::from_le_bytes([prefix[0], prefix[1], prefix[2], prefix[3]]) as usize;
    let end = FRAME_PREFIX_LEN.checked_add(len)?;
    if buf.len() < end {
        return None;
    }
    Some((&buf[FRAME_PREFIX_LEN..end], &buf[end..]))
}
