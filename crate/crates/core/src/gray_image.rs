//! 8-bit grayscale images: PGM (P2/P5) input and output, square tiling and
//! gray-level statistics.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Smallest tile side accepted by [`TileSpec`].
pub const MIN_TILE_SIZE: usize = 8;

/// Default tile side for training and testing corpora.
pub const DEFAULT_TILE_SIZE: usize = 128;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("no such file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("not a PGM file (magic {0:?}, expected \"P2\" or \"P5\")")]
    BadMagic(String),
    #[error("maxval {0} is not supported (must be 1..=255)")]
    MaxvalUnsupported(u32),
    #[error("truncated raster: expected {expected} samples, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("bad sample {value:?} at index {index}")]
    BadSample { index: usize, value: String },
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {found} values, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("image {width}x{height} is smaller than tile size {tile_size}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        tile_size: usize,
    },
    #[error(
        "invalid tile spec: tile_size {tile_size} (min {MIN_TILE_SIZE}), stride {stride} (min 1)"
    )]
    InvalidTileSpec { tile_size: usize, stride: usize },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// A rectangular grid of gray levels in row-major order.
///
/// This is the height field `g(x, y)` the blanket is laid over.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    levels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, levels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or(ImageError::EmptyImage { width, height })?;
        if levels.len() != expected {
            return Err(ImageError::SizeMismatch {
                expected,
                found: levels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            levels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut levels = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                levels.push(f(x, y));
            }
        }
        Self::new(width, height, levels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<u8> {
        self.levels
    }

    /// Gray level at column `x`, row `y`. Panics when out of bounds.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        self.levels[y * self.width + x]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, u8> {
        self.levels.chunks_exact(self.width)
    }

    /// Copies the `width`×`height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Option<GrayImage> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return None;
        }
        let mut levels = Vec::with_capacity(width * height);
        for row in self.rows().skip(y0).take(height) {
            levels.extend_from_slice(&row[x0..x0 + width]);
        }
        Some(GrayImage {
            width,
            height,
            levels,
        })
    }

    pub fn transpose(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        let mut levels = Vec::with_capacity(w * h);
        for x in 0..w {
            for y in 0..h {
                levels.push(self.levels[y * w + x]);
            }
        }
        GrayImage {
            width: h,
            height: w,
            levels,
        }
    }

    /// Mirrors left to right.
    pub fn flip_horizontal(&self) -> GrayImage {
        let mut levels = Vec::with_capacity(self.levels.len());
        for row in self.rows() {
            levels.extend(row.iter().rev());
        }
        GrayImage {
            width: self.width,
            height: self.height,
            levels,
        }
    }

    /// Mirrors top to bottom.
    pub fn flip_vertical(&self) -> GrayImage {
        let mut levels = Vec::with_capacity(self.levels.len());
        for row in self.rows().rev() {
            levels.extend_from_slice(row);
        }
        GrayImage {
            width: self.width,
            height: self.height,
            levels,
        }
    }

    /// Adds `offset` to every level, or `None` if any result leaves `0..=255`.
    pub fn shifted(&self, offset: i32) -> Option<GrayImage> {
        let levels = self
            .levels
            .iter()
            .map(|&v| u8::try_from(i32::from(v) + offset).ok())
            .collect::<Option<Vec<u8>>>()?;
        Some(GrayImage {
            width: self.width,
            height: self.height,
            levels,
        })
    }
}

/// Square tiling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileSpec {
    tile_size: usize,
    stride: usize,
}

impl TileSpec {
    pub fn new(tile_size: usize, stride: usize) -> Result<Self, ImageError> {
        if tile_size < MIN_TILE_SIZE || stride == 0 {
            return Err(ImageError::InvalidTileSpec { tile_size, stride });
        }
        Ok(Self { tile_size, stride })
    }

    /// Non-overlapping tiles of the given side.
    pub fn non_overlapping(tile_size: usize) -> Result<Self, ImageError> {
        Self::new(tile_size, tile_size)
    }

    pub fn tile_size(&self) -> usize {
        self.tile_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }
}

impl Default for TileSpec {
    fn default() -> Self {
        Self {
            tile_size: DEFAULT_TILE_SIZE,
            stride: DEFAULT_TILE_SIZE,
        }
    }
}

/// A tile together with the offset it was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub x: usize,
    pub y: usize,
    pub image: GrayImage,
}

/// Cuts every full tile at offsets `(i * stride, j * stride)`, row-major by
/// offset. Partial tiles at the right and bottom edges are dropped.
pub fn extract_tiles(img: &GrayImage, spec: TileSpec) -> Result<Vec<Tile>, ImageError> {
    let t = spec.tile_size;
    if img.width < t || img.height < t {
        return Err(ImageError::ImageTooSmall {
            width: img.width,
            height: img.height,
            tile_size: t,
        });
    }
    let mut tiles = Vec::with_capacity(tile_count(img.width, img.height, spec));
    for y in (0..=img.height - t).step_by(spec.stride) {
        for x in (0..=img.width - t).step_by(spec.stride) {
            let image = img.crop(x, y, t, t).expect("tile offset within bounds");
            tiles.push(Tile { x, y, image });
        }
    }
    Ok(tiles)
}

/// Number of tiles [`extract_tiles`] yields for a `width`×`height` image.
pub fn tile_count(width: usize, height: usize, spec: TileSpec) -> usize {
    let t = spec.tile_size;
    if width < t || height < t {
        return 0;
    }
    ((width - t) / spec.stride + 1) * ((height - t) / spec.stride + 1)
}

/// Mean and population standard deviation of the gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayStats {
    pub mean: f64,
    pub std: f64,
}

/// Computes mean and population standard deviation (divisor N).
///
/// Sums are accumulated in integers, so the result does not depend on pixel
/// order and the standard deviation is exactly shift invariant.
pub fn gray_stats(img: &GrayImage) -> GrayStats {
    let n = img.levels.len() as u128;
    let (sum, sum_sq) = img.levels.iter().fold((0u128, 0u128), |(s, s2), &v| {
        let v = u128::from(v);
        (s + v, s2 + v * v)
    });
    // N^2 * var = N * sum(v^2) - sum(v)^2, exact and nonnegative
    let scaled_var = n * sum_sq - sum * sum;
    let mean = sum as f64 / n as f64;
    let std = (scaled_var as f64).sqrt() / n as f64;
    GrayStats { mean, std }
}

/// Reads a PGM file from disk.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            ImageError::MissingFile(path.to_path_buf())
        } else {
            ImageError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    decode_pgm(&bytes)
}

/// Writes `img` as binary PGM (P5, maxval 255).
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Encodes as binary PGM (P5, maxval 255).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.levels.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width, img.height).expect("write to Vec");
    out.extend_from_slice(&img.levels);
    out
}

/// Encodes as plain-text PGM (P2, maxval 255).
pub fn encode_pgm_ascii(img: &GrayImage) -> String {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.rows() {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Decodes a P2 or P5 PGM byte stream. Samples are taken as-is (no
/// rescaling from maxval to 255).
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut header = HeaderReader { bytes, pos: 0 };

    let magic = bytes
        .get(..2)
        .ok_or_else(|| ImageError::BadMagic(String::from_utf8_lossy(bytes).into_owned()))?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(ImageError::BadMagic(
                String::from_utf8_lossy(other).into_owned(),
            ))
        }
    };
    header.pos = 2;
    if !header
        .peek()
        .is_some_and(|b| b.is_ascii_whitespace() || b == b'#')
    {
        return Err(ImageError::MalformedHeader(
            "expected whitespace after magic".into(),
        ));
    }

    let width = header.next_number("width")?;
    let height = header.next_number("height")?;
    let maxval = header.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(ImageError::MaxvalUnsupported(maxval));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::MalformedHeader("dimensions overflow".into()))?;

    let levels = if binary {
        // exactly one whitespace byte separates maxval from the raster
        match header.peek() {
            Some(b) if b.is_ascii_whitespace() => header.pos += 1,
            _ => {
                return Err(ImageError::MalformedHeader(
                    "expected a single whitespace byte after maxval".into(),
                ))
            }
        }
        let raster = &bytes[header.pos..];
        if raster.len() < expected {
            return Err(ImageError::TruncatedData {
                expected,
                found: raster.len(),
            });
        }
        let raster = &raster[..expected];
        if let Some(index) = raster.iter().position(|&v| u32::from(v) > maxval) {
            return Err(ImageError::BadSample {
                index,
                value: raster[index].to_string(),
            });
        }
        raster.to_vec()
    } else {
        let text = &bytes[header.pos..];
        let mut levels = Vec::with_capacity(expected);
        for token in text
            .split(|b| b.is_ascii_whitespace())
            .filter(|t| !t.is_empty())
            .take(expected)
        {
            let index = levels.len();
            let value = std::str::from_utf8(token)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .filter(|&v| v <= maxval)
                .ok_or_else(|| ImageError::BadSample {
                    index,
                    value: String::from_utf8_lossy(token).into_owned(),
                })?;
            levels.push(value as u8);
        }
        if levels.len() < expected {
            return Err(ImageError::TruncatedData {
                expected,
                found: levels.len(),
            });
        }
        levels
    };

    GrayImage::new(width, height, levels)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(b) = self.peek() {
            if b == b'#' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        if self
            .peek()
            .is_some_and(|b| !b.is_ascii_whitespace() && b != b'#')
        {
            return Err(ImageError::MalformedHeader(format!("bad {what} token")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}
