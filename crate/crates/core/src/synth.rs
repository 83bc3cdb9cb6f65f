//! Deterministic synthetic textures with known structure: flat fields,
//! checkerboards, noisy flats and fractional Brownian surfaces.
//!
//! Everything here is a pure function of its parameters. Randomness comes
//! from [`XorShift64Star`], seeded through one SplitMix64 round, so the same
//! seed reproduces the same image on any platform.

use thiserror::Error;

use crate::gray_image::GrayImage;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("gray level {0} is outside 0..=255")]
    LevelOutOfRange(i64),
    #[error("checkerboard levels must satisfy lo < hi (got lo {lo}, hi {hi})")]
    BadLevels { lo: u8, hi: u8 },
    #[error("checkerboard period must be at least 1")]
    BadPeriod,
    #[error("fBm size must be 2^k + 1 with k >= 3 (got {0})")]
    BadSize(usize),
    #[error("Hurst exponent must lie strictly between 0 and 1 (got {0})")]
    BadHurst(f64),
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
}

/// xorshift64* (Vigna 2016): state update `x ^= x >> 12; x ^= x << 25;
/// x ^= x >> 27`, output `x * 0x2545F4914F6CDD1D`.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    /// The seed is mixed with one SplitMix64 step; a zero state is remapped.
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self {
            state: if z == 0 { 0x9E37_79B9_7F4A_7C15 } else { z },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Uniform integer in `lo..=hi`.
    pub fn next_in(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), SynthError> {
    if width == 0 || height == 0 {
        return Err(SynthError::EmptyImage { width, height });
    }
    Ok(())
}

pub fn constant_image(width: usize, height: usize, level: i64) -> Result<GrayImage, SynthError> {
    check_dims(width, height)?;
    let level = u8::try_from(level).map_err(|_| SynthError::LevelOutOfRange(level))?;
    Ok(GrayImage::new(width, height, vec![level; width * height]).expect("dimensions checked"))
}

/// `hi` where `(x / period + y / period)` is even, `lo` elsewhere.
pub fn checkerboard(
    width: usize,
    height: usize,
    period: usize,
    lo: u8,
    hi: u8,
) -> Result<GrayImage, SynthError> {
    check_dims(width, height)?;
    if period == 0 {
        return Err(SynthError::BadPeriod);
    }
    if lo >= hi {
        return Err(SynthError::BadLevels { lo, hi });
    }
    Ok(GrayImage::from_fn(width, height, |x, y| {
        if (x / period + y / period).is_multiple_of(2) {
            hi
        } else {
            lo
        }
    })
    .expect("dimensions checked"))
}

/// Flat field at `level` with independent uniform noise in
/// `-amplitude..=amplitude` per pixel, clamped to `0..=255`.
pub fn noisy_constant(
    width: usize,
    height: usize,
    level: i64,
    amplitude: u8,
    seed: u64,
) -> Result<GrayImage, SynthError> {
    check_dims(width, height)?;
    if !(0..=255).contains(&level) {
        return Err(SynthError::LevelOutOfRange(level));
    }
    let mut rng = XorShift64Star::new(seed);
    let a = i64::from(amplitude);
    Ok(GrayImage::from_fn(width, height, |_, _| {
        (level + rng.next_in(-a, a)).clamp(0, 255) as u8
    })
    .expect("dimensions checked"))
}

/// Parameters of a diamond-square fractional Brownian surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmSpec {
    /// Side length, `2^k + 1` with `k >= 3`.
    pub size: usize,
    /// Hurst exponent in `(0, 1)`; the surface dimension is `3 - hurst`.
    pub hurst: f64,
    pub seed: u64,
}

impl FbmSpec {
    pub fn new(size: usize, hurst: f64, seed: u64) -> Result<Self, SynthError> {
        let spec = Self { size, hurst, seed };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), SynthError> {
        let n = self.size.wrapping_sub(1);
        if self.size < 9 || !n.is_power_of_two() {
            return Err(SynthError::BadSize(self.size));
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(SynthError::BadHurst(self.hurst));
        }
        Ok(())
    }
}

/// Diamond-square midpoint displacement field, before quantization.
///
/// Corners are drawn first in row-major order. Each level then runs the
/// diamond pass (square centres, row-major) and the square pass (edge
/// midpoints, row-major), adding uniform displacements in `[-s, s)`; `s`
/// starts at 1 and is multiplied by `2^-hurst` after every level.
pub fn fbm_field(spec: &FbmSpec) -> Result<Vec<f64>, SynthError> {
    spec.validate()?;
    let n = spec.size;
    let mut rng = XorShift64Star::new(spec.seed);
    let mut f = vec![0.0f64; n * n];
    let last = n - 1;
    for (x, y) in [(0, 0), (last, 0), (0, last), (last, last)] {
        f[y * n + x] = rng.next_signed();
    }

    let factor = 2f64.powf(-spec.hurst);
    let mut scale = 1.0;
    let mut step = last;
    while step > 1 {
        let half = step / 2;

        for y in (half..n).step_by(step) {
            for x in (half..n).step_by(step) {
                let avg = (f[(y - half) * n + (x - half)]
                    + f[(y - half) * n + (x + half)]
                    + f[(y + half) * n + (x - half)]
                    + f[(y + half) * n + (x + half)])
                    / 4.0;
                f[y * n + x] = avg + scale * rng.next_signed();
            }
        }

        for y in (0..n).step_by(half) {
            let start = if (y / half).is_multiple_of(2) {
                half
            } else {
                0
            };
            for x in (start..n).step_by(step) {
                let mut sum = 0.0;
                let mut count = 0.0;
                if y >= half {
                    sum += f[(y - half) * n + x];
                    count += 1.0;
                }
                if y + half < n {
                    sum += f[(y + half) * n + x];
                    count += 1.0;
                }
                if x >= half {
                    sum += f[y * n + x - half];
                    count += 1.0;
                }
                if x + half < n {
                    sum += f[y * n + x + half];
                    count += 1.0;
                }
                f[y * n + x] = sum / count + scale * rng.next_signed();
            }
        }

        scale *= factor;
        step = half;
    }
    Ok(f)
}

/// Affinely maps `field` onto `0..=255` and rounds. A constant field maps to 0.
pub fn quantize(field: &[f64]) -> Vec<u8> {
    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    field
        .iter()
        .map(|&v| {
            if range > 0.0 {
                ((v - lo) / range * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect()
}

/// Fractional Brownian surface quantized to 8 bits; spans exactly `0..=255`.
pub fn fbm_surface(spec: &FbmSpec) -> Result<GrayImage, SynthError> {
    let field = fbm_field(spec)?;
    Ok(GrayImage::new(spec.size, spec.size, quantize(&field)).expect("square field"))
}

/// Labels of [`three_class_corpus`], in corpus order.
pub const CORPUS_LABELS: [&str; 3] = ["noise", "board", "fbm"];

/// A labeled corpus of three well-separated texture classes, one tile per
/// seed and class:
///
/// * `noise`: flat field at a seed-dependent level in `100..140` with
///   uniform noise of amplitude 3;
/// * `board`: period-4 checkerboard with seed-dependent contrast;
/// * `fbm`: fractional Brownian surface with `H = 0.3`, cropped from the
///   smallest `2^k + 1` square that holds the tile.
pub fn three_class_corpus(
    tile_size: usize,
    seeds: impl IntoIterator<Item = u64> + Clone,
) -> Result<Vec<(String, Vec<GrayImage>)>, SynthError> {
    let fbm_size = (tile_size.max(8) - 1).next_power_of_two() + 1;
    let noise = seeds
        .clone()
        .into_iter()
        .map(|s| noisy_constant(tile_size, tile_size, 100 + (3 * s % 40) as i64, 3, s))
        .collect::<Result<Vec<_>, _>>()?;
    let board = seeds
        .clone()
        .into_iter()
        .map(|s| {
            let shift = (s % 8) as u8 * 4;
            checkerboard(tile_size, tile_size, 4, 40 + shift, 200 - shift)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let fbm = seeds
        .into_iter()
        .map(|s| {
            let img = fbm_surface(&FbmSpec::new(fbm_size, 0.3, s)?)?;
            Ok(img
                .crop(0, 0, tile_size, tile_size)
                .expect("tile fits in surface"))
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    Ok(CORPUS_LABELS
        .iter()
        .map(|l| l.to_string())
        .zip([noise, board, fbm])
        .collect())
}
