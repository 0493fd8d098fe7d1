//! Binary (P5) 8-bit PGM.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("unsupported netpbm format `{0}`, only binary P5 is accepted")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("maxval {0} needs 16-bit samples, only 8-bit PGM is supported")]
    SixteenBit(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

impl Gray8 {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(width * height, pixels.len());
        Self {
            width,
            height,
            maxval: 255,
            pixels,
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<u32, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(format!("missing {field}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{field} out of range")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Gray8, PgmError> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(magic @ [b'P', _]) => {
            return Err(PgmError::UnsupportedFormat(
                String::from_utf8_lossy(magic).into_owned(),
            ))
        }
        _ => return Err(PgmError::MalformedHeader("missing P5 magic".into())),
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader("zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::MalformedHeader(format!("maxval {maxval}")));
    }
    if maxval > 255 {
        return Err(PgmError::SixteenBit(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::MalformedHeader(
            "no separator after maxval".into(),
        ));
    }
    let data = &bytes[h.pos + 1..];
    let expected = width * height;
    if data.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: data.len(),
        });
    }
    Ok(Gray8 {
        width,
        height,
        maxval: maxval as u8,
        pixels: data[..expected].to_vec(),
    })
}

pub fn encode(img: &Gray8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Gray8, PgmError> {
    decode(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Gray8) -> Result<(), PgmError> {
    fs::write(path, encode(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode() {
        let img = Gray8::new(3, 2, vec![0, 1, 2, 253, 254, 255]);
        assert_eq!(decode(&encode(&img)).unwrap(), img);
    }

    #[test]
    fn header_with_comments() {
        let bytes = b"P5 # made by hand\n2 # width\n1\n255\n\x07\x08";
        let img = decode(bytes).unwrap();
        assert_eq!(
            (img.width, img.height, img.pixels.clone()),
            (2, 1, vec![7, 8])
        );
    }

    #[test]
    fn distinct_errors() {
        assert!(
            matches!(decode(b"P2\n1 1\n255\n0"), Err(PgmError::UnsupportedFormat(f)) if f == "P2")
        );
        assert!(matches!(
            decode(b"P5\n1 1\n65535\n\0\0"),
            Err(PgmError::SixteenBit(65535))
        ));
        assert!(matches!(
            decode(b"P5\nx 1\n255\n"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode(b"GIF89a"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode(b"P5\n2 2\n255\n\0\0"),
            Err(PgmError::Truncated {
                expected: 4,
                found: 2
            })
        ));
    }
}
