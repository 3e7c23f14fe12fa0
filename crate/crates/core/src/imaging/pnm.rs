//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use super::{ImageBuffer, ImageError, Result};

pub fn load_pnm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let bytes = fs::read(path)?;
    decode_pnm(&bytes)
}

pub fn save_pnm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pnm(img))?;
    Ok(())
}

pub fn encode_pnm(img: &ImageBuffer) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    payload_offset: usize,
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    let header = parse_header(bytes)?;
    let expected = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.channels))
        .ok_or_else(|| format_err(3, "image dimensions overflow"))?;
    let payload = &bytes[header.payload_offset..];
    if payload.len() < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    ImageBuffer::from_raw(header.width, header.height, header.channels, payload[..expected].to_vec())
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(format_err(0, "missing P5/P6 magic"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => return Err(format_err(1, format!("unsupported PNM variant P{}", other as char))),
    };
    let mut pos = 2;
    let (_, width) = next_number(bytes, &mut pos, "width")?;
    let (_, height) = next_number(bytes, &mut pos, "height")?;
    let (maxval_at, maxval) = next_number(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(format_err(maxval_at, format!("unsupported maxval {maxval}, only 255 is accepted")));
    }
    if width == 0 || height == 0 {
        return Err(format_err(maxval_at, "zero image dimension"));
    }
    // exactly one whitespace byte separates the header from the samples
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(format_err(pos, "expected whitespace after maxval")),
        None => return Err(format_err(pos, "header ends before payload")),
    }
    Ok(Header { channels, width, height, payload_offset: pos })
}

/// Skips whitespace and comments, then parses a decimal; returns `(offset, value)`.
fn next_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<(usize, usize)> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(format_err(*pos, format!("header ends before {what}"))),
        }
    }
    let start = *pos;
    let mut value: usize = 0;
    while let Some(&b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as usize))
            .ok_or_else(|| format_err(start, format!("{what} overflows")))?;
        *pos += 1;
    }
    if *pos == start {
        return Err(format_err(start, format!("expected decimal {what}")));
    }
    Ok((start, value))
}

fn format_err(offset: usize, message: impl Into<String>) -> ImageError {
    ImageError::Format { offset, message: message.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_p5() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        let img = decode_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.data(), &[0, 64, 128, 255]);
    }

    #[test]
    fn header_comments_skipped() {
        let mut bytes = b"P5 # made by hand\n# another\n3 1 255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert_eq!(decode_pnm(&bytes).unwrap().data(), &[1, 2, 3]);
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = b"P6\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[7; 10]);
        match decode_pnm(&bytes) {
            Err(ImageError::Format { offset, message }) => {
                assert_eq!(offset, bytes.len());
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_maxval() {
        assert!(matches!(decode_pnm(b"P2\n1 1\n255\n\0"), Err(ImageError::Format { offset: 1, .. })));
        assert!(matches!(decode_pnm(b"GIF89a"), Err(ImageError::Format { offset: 0, .. })));
        match decode_pnm(b"P5\n1 1\n65535\n\0\0") {
            Err(ImageError::Format { offset, message }) => {
                assert_eq!(offset, 7);
                assert!(message.contains("maxval"));
            }
            other => panic!("{other:?}"),
        }
        assert!(decode_pnm(b"P5\nx 1\n255\n").is_err());
        assert!(decode_pnm(b"P5\n1 1\n255").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let img = ImageBuffer::from_raw(17, 9, 3, (0..17 * 9 * 3).map(|i| (i * 7 % 256) as u8).collect()).unwrap();
        save_pnm(&img, &path).unwrap();
        assert_eq!(load_pnm(&path).unwrap(), img);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(w in 1usize..24, h in 1usize..24, rgb in any::<bool>(), seed in any::<u64>()) {
            let ch = if rgb { 3 } else { 1 };
            let data: Vec<u8> = (0..w * h * ch)
                .map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8)
                .collect();
            let img = ImageBuffer::from_raw(w, h, ch, data).unwrap();
            prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
        }
    }
}
