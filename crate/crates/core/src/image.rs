//! Raster value types plus PNG / binary PGM (P5) codecs.

use crate::error::{OcrError, Result};
use std::io::Cursor;

const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

/// Two-class raster; `true` is foreground (ink).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(OcrError::EmptyImage);
    }
    if width.checked_mul(height) != Some(len) {
        return Err(OcrError::MalformedImage(format!(
            "{len} pixels do not form a {width}x{height} raster"
        )));
    }
    Ok(())
}

macro_rules! raster_common {
    ($t:ty, $px:ty) => {
        impl $t {
            pub fn new(width: usize, height: usize, pixels: Vec<$px>) -> Result<Self> {
                check_dims(width, height, pixels.len())?;
                Ok(Self { width, height, pixels })
            }

            pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> $px) -> Self {
                assert!(width > 0 && height > 0, "raster dimensions must be positive");
                let mut pixels = Vec::with_capacity(width * height);
                for y in 0..height {
                    for x in 0..width {
                        pixels.push(f(x, y));
                    }
                }
                Self { width, height, pixels }
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn pixels(&self) -> &[$px] {
                &self.pixels
            }

            pub fn get(&self, x: usize, y: usize) -> $px {
                self.pixels[y * self.width + x]
            }

            pub fn set(&mut self, x: usize, y: usize, v: $px) {
                self.pixels[y * self.width + x] = v;
            }

            pub fn row(&self, y: usize) -> &[$px] {
                &self.pixels[y * self.width..(y + 1) * self.width]
            }

            /// Copy of the half-open window `[x0, x1) × [y0, y1)`.
            pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
                assert!(x0 < x1 && x1 <= self.width && y0 < y1 && y1 <= self.height, "crop out of bounds");
                Self::from_fn(x1 - x0, y1 - y0, |x, y| self.get(x0 + x, y0 + y))
            }
        }
    };
}

raster_common!(GrayImage, u8);
raster_common!(BinaryImage, bool);
raster_common!(RgbImage, [u8; 3]);

impl GrayImage {
    pub fn filled(width: usize, height: usize, v: u8) -> Self {
        Self::from_fn(width, height, |_, _| v)
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }
}

impl BinaryImage {
    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Tight `(x0, y0, x1, y1)` bounds of the foreground, half-open.
    pub fn ink_bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    b = Some(match b {
                        None => (x, y, x + 1, y + 1),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
                    });
                }
            }
        }
        b
    }
}

/// Foreground encodes as 0 (black ink), background as 255.
impl From<&BinaryImage> for GrayImage {
    fn from(b: &BinaryImage) -> Self {
        GrayImage {
            width: b.width,
            height: b.height,
            pixels: b.pixels.iter().map(|&p| if p { 0 } else { 255 }).collect(),
        }
    }
}

impl From<&GrayImage> for RgbImage {
    fn from(g: &GrayImage) -> Self {
        RgbImage {
            width: g.width,
            height: g.height,
            pixels: g.pixels.iter().map(|&v| [v, v, v]).collect(),
        }
    }
}

/// BT.601 luma with round-half-up, computed in integers so gray triples map
/// to themselves exactly.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let y = (299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000;
            y.min(255) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl DecodedImage {
    pub fn into_gray(self) -> GrayImage {
        match self {
            DecodedImage::Gray(g) => g,
            DecodedImage::Rgb(c) => to_grayscale(&c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
}

/// Borrowed view of anything [`encode_image`] accepts.
#[derive(Debug, Clone, Copy)]
pub enum ImageRef<'a> {
    Gray(&'a GrayImage),
    Binary(&'a BinaryImage),
}

impl<'a> From<&'a GrayImage> for ImageRef<'a> {
    fn from(g: &'a GrayImage) -> Self {
        ImageRef::Gray(g)
    }
}

impl<'a> From<&'a BinaryImage> for ImageRef<'a> {
    fn from(b: &'a BinaryImage) -> Self {
        ImageRef::Binary(b)
    }
}

/// Decodes a PNG or binary PGM (P5, maxval 255). PGM always yields gray;
/// PNG yields gray for gray/gray-alpha sources and RGB otherwise (alpha is
/// dropped, 16-bit samples keep their high byte, palettes are expanded).
pub fn decode_image(bytes: &[u8]) -> Result<DecodedImage> {
    if bytes.is_empty() {
        return Err(OcrError::MalformedImage("empty input".into()));
    }
    if bytes.starts_with(PNG_SIGNATURE) {
        return decode_png(bytes);
    }
    if bytes.starts_with(b"P5") {
        return decode_pgm(bytes).map(DecodedImage::Gray);
    }
    if bytes.len() < 8 && PNG_SIGNATURE.starts_with(bytes) {
        return Err(OcrError::MalformedImage("truncated PNG signature".into()));
    }
    Err(OcrError::UnsupportedFormat("expected PNG or binary PGM (P5)".into()))
}

fn decode_png(bytes: &[u8]) -> Result<DecodedImage> {
    let malformed = |e: png::DecodingError| OcrError::MalformedImage(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(malformed)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| OcrError::MalformedImage("PNG dimensions overflow".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(malformed)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    if info.bit_depth != png::BitDepth::Eight {
        return Err(OcrError::UnsupportedFormat(format!("PNG bit depth {:?}", info.bit_depth)));
    }
    let channels = info.color_type.samples();
    let img = match info.color_type {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => {
            DecodedImage::Gray(GrayImage::new(w, h, data.chunks(channels).map(|c| c[0]).collect())?)
        }
        png::ColorType::Rgb | png::ColorType::Rgba => DecodedImage::Rgb(RgbImage::new(
            w,
            h,
            data.chunks(channels).map(|c| [c[0], c[1], c[2]]).collect(),
        )?),
        other => return Err(OcrError::UnsupportedFormat(format!("PNG color type {other:?}"))),
    };
    Ok(img)
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let bad = |m: &str| OcrError::MalformedImage(format!("PGM: {m}"));
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| bad("header field out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after maxval"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(OcrError::UnsupportedFormat(format!("PGM maxval {maxval} (only 255 is supported)")));
    }
    let n = w.checked_mul(h).ok_or_else(|| bad("dimensions overflow"))?;
    if w == 0 || h == 0 {
        return Err(bad("zero dimension"));
    }
    let payload = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated pixel data"))?;
    GrayImage::new(w, h, payload.to_vec())
}

pub fn encode_image<'a>(img: impl Into<ImageRef<'a>>, format: ImageFormat) -> Vec<u8> {
    let owned;
    let gray = match img.into() {
        ImageRef::Gray(g) => g,
        ImageRef::Binary(b) => {
            owned = GrayImage::from(b);
            &owned
        }
    };
    match format {
        ImageFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", gray.width, gray.height).into_bytes();
            out.extend_from_slice(&gray.pixels);
            out
        }
        ImageFormat::Png => encode_png(gray.width, gray.height, png::ColorType::Grayscale, &gray.pixels),
    }
}

pub fn encode_rgb_png(img: &RgbImage) -> Vec<u8> {
    let flat: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    encode_png(img.width, img.height, png::ColorType::Rgb, &flat)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(data).expect("in-memory PNG data");
    }
    out
}
