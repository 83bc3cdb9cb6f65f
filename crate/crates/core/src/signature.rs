//! Fractal dimension (signature) curves and the weighted distance between
//! them.
//!
//! With the reference scale fixed at `delta = 1`, the dimension at scale
//! `delta` is read off the log-log slope of the area curve:
//!
//! ```text
//! fd(delta) = 2 + (log2 A(1) - log2 A(delta)) / log2 delta,   delta >= 2
//! ```
//!
//! Two curves are compared with
//!
//! ```text
//! D = sum over delta of (fd_a(delta) - fd_b(delta))^2 * log2((delta + 1/2) / (delta - 1/2))
//! ```
//!
//! All logarithms are base 2.

use serde::Serialize;
use thiserror::Error;

use crate::blanket::{AreaCurve, AreaVariant};

/// Base of every logarithm in this module, recorded in saved models.
pub const LOG_BASE: u32 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SignatureError {
    #[error("area curve has delta_max {0}; a signature needs at least 2")]
    CurveTooShort(usize),
    #[error("non-positive area {value} at delta {delta}")]
    NonPositiveArea { delta: usize, value: f64 },
    #[error("signature value {value} at delta {delta} is not finite")]
    NonFiniteDimension { delta: usize, value: f64 },
    #[error("curves cover different scale ranges (delta_max {0} vs {1})")]
    CurveLengthMismatch(usize, usize),
    #[error("curves come from different area variants ({0} vs {1})")]
    VariantMismatch(AreaVariant, AreaVariant),
}

/// Fractal dimension values for `delta = 2..=delta_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdCurve {
    values: Vec<f64>,
    source_variant: AreaVariant,
}

impl FdCurve {
    /// `values[k]` is the dimension at `delta = k + 2`.
    pub fn from_values(
        values: Vec<f64>,
        source_variant: AreaVariant,
    ) -> Result<Self, SignatureError> {
        if values.is_empty() {
            return Err(SignatureError::CurveTooShort(1));
        }
        if let Some((k, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SignatureError::NonFiniteDimension {
                delta: k + 2,
                value,
            });
        }
        Ok(Self {
            values,
            source_variant,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta_max(&self) -> usize {
        self.values.len() + 1
    }

    pub fn source_variant(&self) -> AreaVariant {
        self.source_variant
    }

    /// Dimension at scale `delta` (defined for `delta >= 2`).
    pub fn at(&self, delta: usize) -> Option<f64> {
        delta
            .checked_sub(2)
            .and_then(|k| self.values.get(k))
            .copied()
    }

    /// `(delta, value)` pairs in ascending `delta`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (k + 2, v))
    }
}

/// Nonnegative distance between two signature curves.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Distance(f64);

impl Distance {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Distance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(&self.0, f)
    }
}

/// Signature curve of an area curve, `delta_2 = 2..=delta_max` against `delta_1 = 1`.
pub fn fd_curve(area: &AreaCurve) -> Result<FdCurve, SignatureError> {
    let values = area.values();
    if values.len() < 2 {
        return Err(SignatureError::CurveTooShort(values.len()));
    }
    if let Some((k, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| v.partial_cmp(&&0.0) != Some(std::cmp::Ordering::Greater))
    {
        return Err(SignatureError::NonPositiveArea {
            delta: k + 1,
            value,
        });
    }
    let log_a1 = values[0].log2();
    let fd = values[1..]
        .iter()
        .zip(2usize..)
        .map(|(&a, delta)| 2.0 + (log_a1 - a.log2()) / (delta as f64).log2())
        .collect();
    FdCurve::from_values(fd, area.variant())
}

/// Weight of scale `delta` in the distance sum, `log2((delta + 1/2) / (delta - 1/2))`.
pub fn scale_weight(delta: usize) -> f64 {
    let d = delta as f64;
    ((2.0 * d + 1.0) / (2.0 * d - 1.0)).log2()
}

/// Weighted squared distance between two signature curves, summed in
/// ascending `delta`.
pub fn fd_distance(a: &FdCurve, b: &FdCurve) -> Result<Distance, SignatureError> {
    if a.values.len() != b.values.len() {
        return Err(SignatureError::CurveLengthMismatch(
            a.delta_max(),
            b.delta_max(),
        ));
    }
    if a.source_variant != b.source_variant {
        return Err(SignatureError::VariantMismatch(
            a.source_variant,
            b.source_variant,
        ));
    }
    let d = a
        .iter()
        .zip(b.values.iter())
        .map(|((delta, x), &y)| (x - y) * (x - y) * scale_weight(delta))
        .sum();
    Ok(Distance(d))
}
