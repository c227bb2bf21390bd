//! Binary PGM (P5) reading and writing.
//!
//! Samples are scaled to `[0, 1]` by dividing by `maxval` on load. Writing always
//! produces `maxval = 255` with round-to-nearest quantization, so a round trip
//! moves each pixel by at most `1/510`.
//!
//! The reader also accepts ASCII `P2` and 16-bit samples (`maxval > 255`,
//! big-endian) since other tools emit them.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::scalar::Scalar;

pub fn encode<T: Scalar>(img: &GrayImage<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|v| quantize(*v)));
    out
}

#[inline]
fn quantize<T: Scalar>(v: T) -> u8 {
    (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write<T: Scalar>(path: impl AsRef<Path>, img: &GrayImage<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

pub fn read<T: Scalar>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Pgm {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> std::result::Result<GrayImage<T>, String> {
    let mut header = Header { bytes, pos: 0 };
    let magic = header.token()?;
    let ascii = match magic.as_str() {
        "P5" => false,
        "P2" => true,
        other => return Err(format!("unsupported magic number {other:?}")),
    };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("zero-sized image {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| "image dimensions overflow".to_string())?;
    let scale = 1.0 / maxval as f64;

    let samples: Vec<usize> = if ascii {
        (0..count)
            .map(|_| header.number("sample"))
            .collect::<std::result::Result<_, _>>()?
    } else {
        // Exactly one whitespace byte separates maxval from the raster.
        let start = header.pos + 1;
        let wide = maxval > 255;
        let needed = count * if wide { 2 } else { 1 };
        let raster = bytes
            .get(start..start + needed)
            .ok_or_else(|| format!("raster truncated: need {needed} bytes"))?;
        if wide {
            raster
                .chunks_exact(2)
                .map(|c| usize::from(u16::from_be_bytes([c[0], c[1]])))
                .collect()
        } else {
            raster.iter().map(|b| usize::from(*b)).collect()
        }
    };
    if let Some(s) = samples.iter().find(|s| **s > maxval) {
        return Err(format!("sample {s} exceeds maxval {maxval}"));
    }
    let pixels = samples.iter().map(|s| T::of(*s as f64 * scale)).collect();
    GrayImage::new(width, height, pixels).map_err(|e| e.to_string())
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn token(&mut self) -> std::result::Result<String, String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|b| *b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err("unexpected end of header".into()),
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| format!("bad {what} field {tok:?}"))
    }
}

/// Lists `*.pgm` files in a directory in lexicographic order.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pgm = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every PGM in `dir`, in lexicographic filename order.
pub fn read_frames<T: Scalar>(dir: impl AsRef<Path>) -> Result<Vec<GrayImage<T>>> {
    list_frames(dir)?.iter().map(read).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 1\n# another\n255\n".to_vec();
        bytes.extend([0u8, 128, 255]);
        let img: GrayImage<f64> = decode(&bytes).unwrap();
        assert_eq!(img.dims(), (3, 1));
        assert_eq!(img.pixels()[0], 0.0);
        assert!((img.pixels()[1] - 128.0 / 255.0).abs() < 1e-15);
        assert_eq!(img.pixels()[2], 1.0);
    }

    #[test]
    fn decodes_ascii_and_wide() {
        let img: GrayImage<f64> = decode(b"P2 2 1 4\n0 4\n").unwrap();
        assert_eq!(img.pixels(), &[0.0, 1.0]);

        let mut bytes = b"P5 1 1 65535\n".to_vec();
        bytes.extend(65535u16.to_be_bytes());
        let img: GrayImage<f64> = decode(&bytes).unwrap();
        assert_eq!(img.pixels(), &[1.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(decode::<f64>(b"P6 1 1 255\n\0\0\0").is_err());
        assert!(decode::<f64>(b"P5 2 2 255\n\0").is_err());
        assert!(decode::<f64>(b"P5 0 2 255\n").is_err());
        assert!(decode::<f64>(b"P2 1 1 10\n11\n").is_err());
    }

    #[test]
    fn file_round_trip_and_listing() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::<f64>::from_fn(4, 3, |x, y| (x + y) as f64 / 5.0);
        write(dir.path().join("b.pgm"), &img).unwrap();
        write(dir.path().join("a.pgm"), &GrayImage::<f64>::zeros(4, 3)).unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let names: Vec<_> = list_frames(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.pgm", "b.pgm"]);
        let back: GrayImage<f64> = read(dir.path().join("b.pgm")).unwrap();
        assert_eq!(back.dims(), (4, 3));

        let err = read::<f64>(dir.path().join("missing.pgm")).unwrap_err();
        assert!(err.to_string().contains("missing.pgm"));
    }

    proptest! {
        #[test]
        fn round_trip_within_quantization(w in 1usize..10, h in 1usize..10,
                                          px in proptest::collection::vec(0.0..=1.0f64, 100)) {
            let img = GrayImage::new(w, h, px[..w * h].to_vec()).unwrap();
            let back: GrayImage<f64> = decode(&encode(&img)).unwrap();
            for (a, b) in img.pixels().iter().zip(back.pixels()) {
                prop_assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }
}
