//! 8-bit binary PGM/PPM (read/write) and PNG (read only).

use std::fs;
use std::path::Path;

use super::{ColorSpace, ImageBuffer};
use crate::error::{Error, Result};

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes)
    } else {
        Err(Error::Format(format!("{}: unsupported image format", path.display())))
    }
}

/// Writes a PGM (one channel) or PPM (three channels). Values are clipped to
/// `[0, 1]` and rounded to 8 bits.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_pnm(img: &ImageBuffer) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let plane = img.width() * img.height();
    out.reserve(plane * img.channels());
    for i in 0..plane {
        for c in 0..img.channels() {
            out.push(to_byte(img.data()[c * plane + i]));
        }
    }
    out
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn from_bytes(width: usize, height: usize, colorspace: ColorSpace, interleaved: &[u8]) -> Result<ImageBuffer> {
    let channels = if colorspace == ColorSpace::Rgb { 3 } else { 1 };
    let plane = width * height;
    let mut data = vec![0.0; plane * channels];
    for i in 0..plane {
        for c in 0..channels {
            data[c * plane + i] = f64::from(interleaved[i * channels + c]) / 255.0;
        }
    }
    ImageBuffer::new(width, height, colorspace, data)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PNM header".into()))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    let colorspace = match bytes.get(..2) {
        Some(b"P5") => ColorSpace::Gray,
        Some(b"P6") => ColorSpace::Rgb,
        _ => return Err(Error::Format("not a binary PGM/PPM".into())),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number()?;
    let height = r.number()?;
    let maxval = r.number()?;
    if maxval != 255 {
        return Err(Error::Format(format!("only 8-bit PNM is supported (maxval {maxval})")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension".into()));
    }
    if !bytes.get(r.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed PNM header".into()));
    }
    let channels = if colorspace == ColorSpace::Rgb { 3 } else { 1 };
    let need = width * height * channels;
    let pixels = &bytes[r.pos + 1..];
    if pixels.len() < need {
        return Err(Error::Format(format!("truncated PNM: {} of {need} pixel bytes", pixels.len())));
    }
    from_bytes(width, height, colorspace, &pixels[..need])
}

/// Decodes 8-bit gray, gray+alpha, RGB or RGBA PNG; alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::Format("PNG too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(format!("PNG: {e}")))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!("PNG bit depth {:?} unsupported", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let (colorspace, stride, keep) = match info.color_type {
        png::ColorType::Grayscale => (ColorSpace::Gray, 1, 1),
        png::ColorType::GrayscaleAlpha => (ColorSpace::Gray, 2, 1),
        png::ColorType::Rgb => (ColorSpace::Rgb, 3, 3),
        png::ColorType::Rgba => (ColorSpace::Rgb, 4, 3),
        other => return Err(Error::Format(format!("PNG color type {other:?} unsupported"))),
    };
    let packed: Vec<u8> = buf.chunks(stride).flat_map(|px| px[..keep].iter().copied()).collect();
    from_bytes(w, h, colorspace, &packed)
}
