//! The blanket technique: upper and lower surfaces grown around the gray-level
//! surface, blanket volumes, and fractal area curves.
//!
//! Each step raises the upper surface to
//! `max(u(x,y) + 1, max over the 4-neighbours of u)` and lowers the lower
//! surface symmetrically. Neighbours outside the image are ignored. After
//! `delta` steps the surfaces are the grayscale dilation and erosion of `g`
//! by a city-block cone of height `delta`, which is what
//! [`oracle_surfaces`] computes by direct enumeration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gray_image::GrayImage;

/// Default number of blanket iterations.
pub const DEFAULT_DELTA_MAX: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum BlanketError {
    #[error("delta_max must be at least 1 (got {0})")]
    InvalidDeltaMax(usize),
    #[error("area values must be finite and positive (value {value} at delta {delta})")]
    NonPositiveArea { delta: usize, value: f64 },
}

/// Which of the two fractal-area formulas produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaVariant {
    /// `A = Vol(delta) / (2 delta)`
    Quotient,
    /// `A = (Vol(delta) - Vol(delta - 1)) / 2`
    #[default]
    Difference,
}

impl AreaVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            AreaVariant::Quotient => "quotient",
            AreaVariant::Difference => "difference",
        }
    }
}

impl std::fmt::Display for AreaVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AreaVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quotient" => Ok(AreaVariant::Quotient),
            "difference" => Ok(AreaVariant::Difference),
            other => Err(format!(
                "unknown area variant {other:?} (expected \"quotient\" or \"difference\")"
            )),
        }
    }
}

/// Upper and lower blanket surfaces after `delta` iterations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlanketState {
    width: usize,
    height: usize,
    delta: usize,
    upper: Vec<i32>,
    lower: Vec<i32>,
}

impl BlanketState {
    /// Both surfaces start on the image itself.
    pub fn new(img: &GrayImage) -> Self {
        let surface: Vec<i32> = img.levels().iter().map(|&v| i32::from(v)).collect();
        Self {
            width: img.width(),
            height: img.height(),
            delta: 0,
            upper: surface.clone(),
            lower: surface,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn upper(&self) -> &[i32] {
        &self.upper
    }

    pub fn lower(&self) -> &[i32] {
        &self.lower
    }

    /// Returns the state one iteration further on.
    pub fn step(&self) -> BlanketState {
        let mut upper = vec![0; self.upper.len()];
        let mut lower = vec![0; self.lower.len()];
        spread::<true>(&self.upper, &mut upper, self.width, self.height);
        spread::<false>(&self.lower, &mut lower, self.width, self.height);
        BlanketState {
            width: self.width,
            height: self.height,
            delta: self.delta + 1,
            upper,
            lower,
        }
    }

    /// Advances one iteration in place, using `scratch` as the write buffer.
    fn advance(&mut self, scratch: &mut Vec<i32>) {
        scratch.resize(self.upper.len(), 0);
        spread::<true>(&self.upper, scratch, self.width, self.height);
        std::mem::swap(&mut self.upper, scratch);
        spread::<false>(&self.lower, scratch, self.width, self.height);
        std::mem::swap(&mut self.lower, scratch);
        self.delta += 1;
    }

    /// Sum over all pixels of `upper - lower`.
    pub fn volume(&self) -> i64 {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(&u, &b)| i64::from(u - b))
            .sum()
    }
}

/// Initial blanket with both surfaces equal to `img`.
pub fn init_blanket(img: &GrayImage) -> BlanketState {
    BlanketState::new(img)
}

/// One blanket iteration.
pub fn dilate_step(state: &BlanketState) -> BlanketState {
    state.step()
}

pub fn blanket_volume(state: &BlanketState) -> i64 {
    state.volume()
}

/// One iteration of the 4-neighbour grow (`UP`) or shrink (`!UP`) rule.
fn spread<const UP: bool>(src: &[i32], dst: &mut [i32], w: usize, h: usize) {
    let pick = |a: i32, b: i32| if UP { a.max(b) } else { a.min(b) };
    let bump = if UP { 1 } else { -1 };

    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let above = (y > 0).then(|| &src[(y - 1) * w..y * w]);
        let below = (y + 1 < h).then(|| &src[(y + 1) * w..(y + 2) * w]);
        let out = &mut dst[y * w..(y + 1) * w];

        for x in 0..w {
            let mut v = row[x] + bump;
            if x > 0 {
                v = pick(v, row[x - 1]);
            }
            if x + 1 < w {
                v = pick(v, row[x + 1]);
            }
            if let Some(a) = above {
                v = pick(v, a[x]);
            }
            if let Some(b) = below {
                v = pick(v, b[x]);
            }
            out[x] = v;
        }
    }
}

/// Blanket volumes `Vol(0), Vol(1), ..., Vol(delta_max)`.
pub fn volume_series(img: &GrayImage, delta_max: usize) -> Vec<i64> {
    let mut state = BlanketState::new(img);
    let mut scratch = Vec::with_capacity(img.pixel_count());
    let mut volumes = Vec::with_capacity(delta_max + 1);
    volumes.push(state.volume());
    for _ in 0..delta_max {
        state.advance(&mut scratch);
        volumes.push(state.volume());
    }
    volumes
}

/// Fractal area values for `delta = 1..=delta_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaCurve {
    values: Vec<f64>,
    variant: AreaVariant,
}

impl AreaCurve {
    /// Wraps precomputed values; `values[k]` is the area at `delta = k + 1`.
    pub fn from_values(values: Vec<f64>, variant: AreaVariant) -> Result<Self, BlanketError> {
        if values.is_empty() {
            return Err(BlanketError::InvalidDeltaMax(0));
        }
        if let Some((k, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(BlanketError::NonPositiveArea {
                delta: k + 1,
                value,
            });
        }
        Ok(Self { values, variant })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta_max(&self) -> usize {
        self.values.len()
    }

    pub fn variant(&self) -> AreaVariant {
        self.variant
    }

    /// Area at iteration `delta` (1-based).
    pub fn at(&self, delta: usize) -> Option<f64> {
        delta
            .checked_sub(1)
            .and_then(|k| self.values.get(k))
            .copied()
    }
}

/// Converts blanket volumes `Vol(0..=delta_max)` into fractal areas.
pub fn areas_from_volumes(volumes: &[i64], variant: AreaVariant) -> Vec<f64> {
    volumes
        .windows(2)
        .enumerate()
        .map(|(k, pair)| match variant {
            AreaVariant::Quotient => pair[1] as f64 / (2 * (k + 1)) as f64,
            AreaVariant::Difference => (pair[1] - pair[0]) as f64 / 2.0,
        })
        .collect()
}

/// Runs `delta_max` blanket iterations over `img` and returns its fractal
/// area curve.
pub fn area_curve(
    img: &GrayImage,
    delta_max: usize,
    variant: AreaVariant,
) -> Result<AreaCurve, BlanketError> {
    if delta_max < 1 {
        return Err(BlanketError::InvalidDeltaMax(delta_max));
    }
    let volumes = volume_series(img, delta_max);
    AreaCurve::from_values(areas_from_volumes(&volumes, variant), variant)
}

/// Brute-force blanket surfaces after `delta` iterations.
///
/// `upper(x,y) = max g(m,n) + delta - d` and `lower(x,y) = min g(m,n) - delta + d`
/// over every pixel `(m,n)` within city-block distance `d <= delta`.
/// Shares no code with the iterative path; tests use it as the reference.
pub fn oracle_surfaces(img: &GrayImage, delta: usize) -> (Vec<i32>, Vec<i32>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let r = delta as i64;
    let mut upper = Vec::with_capacity(img.pixel_count());
    let mut lower = Vec::with_capacity(img.pixel_count());
    for y in 0..h {
        for x in 0..w {
            let mut hi = i64::MIN;
            let mut lo = i64::MAX;
            for n in (y - r).max(0)..=(y + r).min(h - 1) {
                for m in (x - r).max(0)..=(x + r).min(w - 1) {
                    let d = (m - x).abs() + (n - y).abs();
                    if d > r {
                        continue;
                    }
                    let g = i64::from(img.get(m as usize, n as usize));
                    hi = hi.max(g + r - d);
                    lo = lo.min(g - r + d);
                }
            }
            upper.push(hi as i32);
            lower.push(lo as i32);
        }
    }
    (upper, lower)
}
