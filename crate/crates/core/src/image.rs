//! Image representation, normalization, distances, and binary PPM/PGM I/O.
//!
//! Pixels are stored row-major and channel-interleaved: index `(y*W + x)*C + c`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Value-range tag carried by every image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Range {
    /// Integers in 0..=255, stored as f64.
    Byte255,
    /// Reals in [0, 1].
    Unit01,
    /// Unconstrained reals (residuals, spectra, anchors).
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub range: Range,
}

impl Image {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        range: Range,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 && channels != 2 && channels != 6 {
            return Err(Error::InvalidArg(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        let img = Image {
            height,
            width,
            channels,
            data,
            range,
        };
        img.check_range()?;
        Ok(img)
    }

    /// All-zero image.
    pub fn zeros(height: usize, width: usize, channels: usize, range: Range) -> Self {
        Image {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
            range,
        }
    }

    fn check_range(&self) -> Result<()> {
        let ok = match self.range {
            Range::Byte255 => self
                .data
                .iter()
                .all(|&v| v >= 0.0 && v <= 255.0 && v.fract() == 0.0),
            Range::Unit01 => self.data.iter().all(|&v| (0.0..=1.0).contains(&v)),
            Range::Signed => self.data.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::RangeContract(format!(
                "data violates range tag {:?}",
                self.range
            )))
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn at_mut(&mut self, y: usize, x: usize, c: usize) -> &mut f64 {
        &mut self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }

    /// One channel as a dense H×W matrix (row-major).
    pub fn channel_matrix(&self, c: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.height * self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.at(y, x, c));
            }
        }
        out
    }
}

/// Scale a Byte255 image into [0, 1] by dividing by 255.
pub fn normalize(img: &Image) -> Result<Image> {
    if img.range != Range::Byte255 {
        return Err(Error::RangeContract(format!(
            "normalize expects Byte255 input, got {:?}",
            img.range
        )));
    }
    let data = img.data.iter().map(|v| v / 255.0).collect();
    Ok(Image {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data,
        range: Range::Unit01,
    })
}

/// ℓ2 norm of the elementwise difference over the flattened arrays.
pub fn euclidean_distance(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_shape(b) || a.range != b.range {
        return Err(Error::ShapeMismatch(format!(
            "distance over {}x{}x{} {:?} vs {}x{}x{} {:?}",
            a.height, a.width, a.channels, a.range, b.height, b.width, b.channels, b.range
        )));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

// ---------------------------------------------------------------------------
// Binary PPM (P6) / PGM (P5), maxval 255.

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn skip_ws_and_comments(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => {
                    return Err(Error::Parse {
                        offset: self.pos,
                        msg: "unexpected end of header".into(),
                    })
                }
            }
        }
    }

    fn read_uint(&mut self) -> Result<usize> {
        self.skip_ws_and_comments()?;
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map_or(false, |b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Parse {
                offset: start,
                msg: "expected decimal integer".into(),
            });
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        s.parse().map_err(|_| Error::Parse {
            offset: start,
            msg: format!("integer out of range: {s}"),
        })
    }
}

/// Load a binary P6 (3-channel) or P5 (1-channel) file with maxval 255.
pub fn load_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes)
}

pub fn parse_ppm(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                msg: "expected magic P6 or P5".into(),
            })
        }
    };
    let mut sc = HeaderScanner { bytes, pos: 2 };
    let width = sc.read_uint()?;
    let height = sc.read_uint()?;
    let maxval_pos = {
        sc.skip_ws_and_comments()?;
        sc.pos
    };
    let maxval = sc.read_uint()?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_pos,
            msg: format!("maxval must be 255, got {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the maxval from the payload.
    match bytes.get(sc.pos) {
        Some(b) if b.is_ascii_whitespace() => sc.pos += 1,
        _ => {
            return Err(Error::Parse {
                offset: sc.pos,
                msg: "expected single whitespace after maxval".into(),
            })
        }
    }
    let need = width * height * channels;
    let payload = &bytes[sc.pos..];
    if payload.len() < need {
        return Err(Error::Parse {
            offset: sc.pos + payload.len(),
            msg: format!("payload truncated: need {need} bytes, have {}", payload.len()),
        });
    }
    let data = payload[..need].iter().map(|&b| b as f64).collect();
    Image::new(height, width, channels, data, Range::Byte255)
}

/// Save as canonical binary PPM/PGM: `P6\n{w} {h}\n255\n` + payload.
pub fn save_ppm(img: &Image, path: &Path) -> Result<()> {
    let bytes = encode_ppm(img)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn encode_ppm(img: &Image) -> Result<Vec<u8>> {
    if img.range != Range::Byte255 {
        return Err(Error::RangeContract(
            "save_ppm expects a Byte255 image".into(),
        ));
    }
    let magic = match img.channels {
        3 => "P6",
        1 => "P5",
        c => {
            return Err(Error::InvalidArg(format!(
                "PPM/PGM supports 1 or 3 channels, got {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| v as u8));
    Ok(out)
}

/// Quantize a Unit01 image to Byte255 by round-to-nearest.
pub fn quantize(img: &Image) -> Result<Image> {
    if img.range != Range::Unit01 {
        return Err(Error::RangeContract("quantize expects Unit01".into()));
    }
    let data = img.data.iter().map(|v| (v * 255.0).round()).collect();
    Image::new(img.height, img.width, img.channels, data, Range::Byte255)
}
