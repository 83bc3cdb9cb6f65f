//! Minimum-distance texture classifier over class-averaged signatures.
//!
//! Training computes an area curve per tile, averages the curves of each
//! class in the linear area domain and derives one signature curve per class.
//! A tile is assigned to the class whose signature is nearest under
//! [`fd_distance`].

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blanket::{area_curve, AreaCurve, AreaVariant, BlanketError, DEFAULT_DELTA_MAX};
use crate::gray_image::{gray_stats, GrayImage, DEFAULT_TILE_SIZE};
use crate::signature::{fd_curve, fd_distance, Distance, FdCurve, SignatureError, LOG_BASE};

/// Version tag written into saved models.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class {0:?} has no tiles")]
    EmptyClass(String),
    #[error("no classes given")]
    NoClasses,
    #[error("no test tiles given")]
    EmptyTestSet,
    #[error("class label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("tile is {width}x{height}, model expects {tile_size}x{tile_size}")]
    TileSizeMismatch {
        width: usize,
        height: usize,
        tile_size: usize,
    },
    #[error("test label {0:?} is not a class of the model")]
    UnknownTestLabel(String),
    #[error("delta_max must be at least 2 for signatures (got {0})")]
    InvalidDeltaMax(usize),
    #[error("tile_size must be positive")]
    InvalidTileSize,
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Blanket(#[from] BlanketError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Parameters shared by every curve in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub delta_max: usize,
    pub variant: AreaVariant,
    pub tile_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            delta_max: DEFAULT_DELTA_MAX,
            variant: AreaVariant::default(),
            tile_size: DEFAULT_TILE_SIZE,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<(), ClassifierError> {
        if self.delta_max < 2 {
            return Err(ClassifierError::InvalidDeltaMax(self.delta_max));
        }
        if self.tile_size == 0 {
            return Err(ClassifierError::InvalidTileSize);
        }
        Ok(())
    }

    fn check_tile(&self, tile: &GrayImage) -> Result<(), ClassifierError> {
        if tile.width() != self.tile_size || tile.height() != self.tile_size {
            return Err(ClassifierError::TileSizeMismatch {
                width: tile.width(),
                height: tile.height(),
                tile_size: self.tile_size,
            });
        }
        Ok(())
    }

    /// Signature curve of a single tile under this configuration.
    pub fn signature(&self, tile: &GrayImage) -> Result<FdCurve, ClassifierError> {
        self.check_tile(tile)?;
        let area = area_curve(tile, self.delta_max, self.variant)?;
        Ok(fd_curve(&area)?)
    }
}

/// One trained class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub label: String,
    pub avg_area: AreaCurve,
    pub fd: FdCurve,
    pub mean_of_means: f64,
    pub mean_of_stds: f64,
    pub n_tiles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    classes: Vec<ClassModel>,
    config: ModelConfig,
}

/// Labeled tiles, in the order classes should appear in the model.
pub type LabeledTiles = [(String, Vec<GrayImage>)];

/// Per-tile training measurements.
struct TileMeasure {
    area: Vec<f64>,
    mean: f64,
    std: f64,
}

fn measure(tile: &GrayImage, config: &ModelConfig) -> Result<TileMeasure, ClassifierError> {
    config.check_tile(tile)?;
    let area = area_curve(tile, config.delta_max, config.variant)?;
    let stats = gray_stats(tile);
    Ok(TileMeasure {
        area: area.values().to_vec(),
        mean: stats.mean,
        std: stats.std,
    })
}

/// Builds one class model per label from its training tiles.
///
/// Tiles are measured in parallel; the per-class means are then accumulated
/// in tile order so the model does not depend on scheduling.
pub fn train_model(
    labeled_tiles: &LabeledTiles,
    config: ModelConfig,
) -> Result<ClassifierModel, ClassifierError> {
    config.validate()?;
    if labeled_tiles.is_empty() {
        return Err(ClassifierError::NoClasses);
    }
    check_unique_labels(labeled_tiles.iter().map(|(l, _)| l.as_str()))?;

    let mut classes = Vec::with_capacity(labeled_tiles.len());
    for (label, tiles) in labeled_tiles {
        if tiles.is_empty() {
            return Err(ClassifierError::EmptyClass(label.clone()));
        }
        let measures = tiles
            .par_iter()
            .map(|t| measure(t, &config))
            .collect::<Result<Vec<_>, _>>()?;

        let n = measures.len() as f64;
        let mut sum_area = vec![0.0; config.delta_max];
        let (mut sum_mean, mut sum_std) = (0.0, 0.0);
        for m in &measures {
            for (acc, a) in sum_area.iter_mut().zip(&m.area) {
                *acc += a;
            }
            sum_mean += m.mean;
            sum_std += m.std;
        }
        let avg_area = AreaCurve::from_values(
            sum_area.into_iter().map(|s| s / n).collect(),
            config.variant,
        )?;
        let fd = fd_curve(&avg_area)?;
        classes.push(ClassModel {
            label: label.clone(),
            avg_area,
            fd,
            mean_of_means: sum_mean / n,
            mean_of_stds: sum_std / n,
            n_tiles: measures.len(),
        });
    }
    Ok(ClassifierModel { classes, config })
}

fn check_unique_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Result<(), ClassifierError> {
    let mut seen = HashSet::new();
    for label in labels {
        if !seen.insert(label) {
            return Err(ClassifierError::DuplicateLabel(label.to_string()));
        }
    }
    Ok(())
}

/// Outcome of classifying one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub predicted: String,
    /// Distance to every class, in model order.
    pub distances: Vec<(String, Distance)>,
    /// More than one class attained the minimum; `predicted` is the first.
    pub tie: bool,
}

impl ClassificationResult {
    /// Distances sorted ascending; equal distances keep model order.
    pub fn ranked(&self) -> Vec<(&str, Distance)> {
        let mut ranked: Vec<_> = self
            .distances
            .iter()
            .map(|(l, d)| (l.as_str(), *d))
            .collect();
        ranked.sort_by(|a, b| a.1.value().total_cmp(&b.1.value()));
        ranked
    }

    pub fn distance_to(&self, label: &str) -> Option<Distance> {
        self.distances
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, d)| *d)
    }
}

impl ClassifierModel {
    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.label.as_str())
    }

    pub fn class(&self, label: &str) -> Option<&ClassModel> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Assigns `tile` to the nearest class signature.
    pub fn classify_tile(&self, tile: &GrayImage) -> Result<ClassificationResult, ClassifierError> {
        let fd = self.config.signature(tile)?;
        self.classify_signature(&fd)
    }

    /// Nearest-class decision for an already computed signature curve.
    pub fn classify_signature(
        &self,
        fd: &FdCurve,
    ) -> Result<ClassificationResult, ClassifierError> {
        let distances = self
            .classes
            .iter()
            .map(|c| Ok((c.label.clone(), fd_distance(fd, &c.fd)?)))
            .collect::<Result<Vec<_>, ClassifierError>>()?;

        let mut best = 0;
        for (k, (_, d)) in distances.iter().enumerate().skip(1) {
            if d.value() < distances[best].1.value() {
                best = k;
            }
        }
        let min = distances[best].1.value();
        let tie = distances.iter().filter(|(_, d)| d.value() == min).count() > 1;
        Ok(ClassificationResult {
            predicted: distances[best].0.clone(),
            distances,
            tie,
        })
    }

    /// Table of `(label, mean_of_means, mean_of_stds)` in model order.
    pub fn class_stats_table(&self) -> Vec<(String, f64, f64)> {
        self.classes
            .iter()
            .map(|c| (c.label.clone(), c.mean_of_means, c.mean_of_stds))
            .collect()
    }

    /// Serializes to the version-1 JSON model document.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            delta_max: self.config.delta_max,
            area_variant: self.config.variant,
            tile_size: self.config.tile_size,
            log_base: LOG_BASE,
            classes: self
                .classes
                .iter()
                .map(|c| ClassRecord {
                    label: c.label.clone(),
                    n_tiles: c.n_tiles,
                    avg_area: c.avg_area.values().to_vec(),
                    fd: c.fd.values().to_vec(),
                    mean_of_means: c.mean_of_means,
                    mean_of_stds: c.mean_of_stds,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(ClassifierError::InvalidModel(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        if file.log_base != LOG_BASE {
            return Err(ClassifierError::InvalidModel(format!(
                "unsupported log_base {}",
                file.log_base
            )));
        }
        let config = ModelConfig {
            delta_max: file.delta_max,
            variant: file.area_variant,
            tile_size: file.tile_size,
        };
        config.validate()?;
        if file.classes.is_empty() {
            return Err(ClassifierError::NoClasses);
        }
        check_unique_labels(file.classes.iter().map(|c| c.label.as_str()))?;

        let classes = file
            .classes
            .into_iter()
            .map(|c| {
                if c.n_tiles == 0 {
                    return Err(ClassifierError::EmptyClass(c.label));
                }
                if c.avg_area.len() != config.delta_max || c.fd.len() + 1 != config.delta_max {
                    return Err(ClassifierError::InvalidModel(format!(
                        "class {:?}: curve lengths do not match delta_max {}",
                        c.label, config.delta_max
                    )));
                }
                Ok(ClassModel {
                    avg_area: AreaCurve::from_values(c.avg_area, config.variant)?,
                    fd: FdCurve::from_values(c.fd, config.variant)?,
                    label: c.label,
                    mean_of_means: c.mean_of_means,
                    mean_of_stds: c.mean_of_stds,
                    n_tiles: c.n_tiles,
                })
            })
            .collect::<Result<Vec<_>, ClassifierError>>()?;
        Ok(Self { classes, config })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    delta_max: usize,
    area_variant: AreaVariant,
    tile_size: usize,
    log_base: u32,
    classes: Vec<ClassRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassRecord {
    label: String,
    n_tiles: usize,
    avg_area: Vec<f64>,
    fd: Vec<f64>,
    mean_of_means: f64,
    mean_of_stds: f64,
}

/// Distances between training classes (rows) and test classes (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `cells[r][c]`: mean over the test tiles of class `c` of their distance
    /// to training class `r`.
    pub cells: Vec<Vec<f64>>,
    /// `counts[r][c]`: test tiles of class `c` assigned to class `r`.
    pub counts: Vec<Vec<usize>>,
    /// Per test class, the training class with the smallest mean distance.
    pub assignments: Vec<(String, String)>,
}

impl ConfusionMatrix {
    /// Whether every cell `(c, c)` is the strict minimum of column `c`, for
    /// test classes that are also training classes.
    pub fn diagonal_is_column_minimum(&self) -> bool {
        self.cols.iter().enumerate().all(|(c, label)| {
            let Some(r) = self.rows.iter().position(|l| l == label) else {
                return false;
            };
            let diag = self.cells[r][c];
            self.cells
                .iter()
                .enumerate()
                .all(|(k, row)| k == r || row[c] > diag)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    /// Fraction of test tiles whose nearest class is their own label.
    pub accuracy: f64,
    pub n_tiles: usize,
    pub n_correct: usize,
}

impl ClassifierModel {
    /// Classifies every test tile and tabulates the results.
    pub fn evaluate(
        &self,
        labeled_test_tiles: &LabeledTiles,
    ) -> Result<Evaluation, ClassifierError> {
        if labeled_test_tiles.is_empty() {
            return Err(ClassifierError::EmptyTestSet);
        }
        check_unique_labels(labeled_test_tiles.iter().map(|(l, _)| l.as_str()))?;
        for (label, tiles) in labeled_test_tiles {
            if self.class(label).is_none() {
                return Err(ClassifierError::UnknownTestLabel(label.clone()));
            }
            if tiles.is_empty() {
                return Err(ClassifierError::EmptyClass(label.clone()));
            }
        }

        let rows: Vec<String> = self.labels().map(str::to_string).collect();
        let n_rows = rows.len();
        let n_cols = labeled_test_tiles.len();
        let mut cells = vec![vec![0.0; n_cols]; n_rows];
        let mut counts = vec![vec![0usize; n_cols]; n_rows];
        let mut assignments = Vec::with_capacity(n_cols);
        let (mut n_tiles, mut n_correct) = (0, 0);

        for (c, (label, tiles)) in labeled_test_tiles.iter().enumerate() {
            let results = tiles
                .par_iter()
                .map(|t| self.classify_tile(t))
                .collect::<Result<Vec<_>, _>>()?;

            for result in &results {
                for (r, (_, d)) in result.distances.iter().enumerate() {
                    cells[r][c] += d.value();
                }
                let winner = rows
                    .iter()
                    .position(|l| *l == result.predicted)
                    .expect("predicted label is a model class");
                counts[winner][c] += 1;
                if result.predicted == *label {
                    n_correct += 1;
                }
            }
            n_tiles += results.len();

            let n = results.len() as f64;
            let mut best = 0;
            for r in 0..n_rows {
                cells[r][c] /= n;
                if cells[r][c] < cells[best][c] {
                    best = r;
                }
            }
            assignments.push((label.clone(), rows[best].clone()));
        }

        Ok(Evaluation {
            matrix: ConfusionMatrix {
                rows,
                cols: labeled_test_tiles.iter().map(|(l, _)| l.clone()).collect(),
                cells,
                counts,
                assignments,
            },
            accuracy: n_correct as f64 / n_tiles as f64,
            n_tiles,
            n_correct,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{checkerboard, constant_image, noisy_constant};

    fn config(tile_size: usize) -> ModelConfig {
        ModelConfig {
            delta_max: 5,
            variant: AreaVariant::Difference,
            tile_size,
        }
    }

    fn labeled(pairs: Vec<(&str, Vec<GrayImage>)>) -> Vec<(String, Vec<GrayImage>)> {
        pairs.into_iter().map(|(l, t)| (l.to_string(), t)).collect()
    }

    fn board(lo: u8) -> GrayImage {
        checkerboard(16, 16, 2, lo, 200).unwrap()
    }

    #[test]
    fn single_tile_class_keeps_its_curve() {
        let tile = noisy_constant(16, 16, 80, 10, 1).unwrap();
        let m = train_model(&labeled(vec![("a", vec![tile.clone()])]), config(16)).unwrap();
        let expected = area_curve(&tile, 5, AreaVariant::Difference).unwrap();
        assert_eq!(m.classes()[0].avg_area, expected);
        assert_eq!(m.classes()[0].fd, fd_curve(&expected).unwrap());
        assert_eq!(m.classes()[0].n_tiles, 1);

        let twice =
            train_model(&labeled(vec![("a", vec![tile.clone(), tile])]), config(16)).unwrap();
        assert_eq!(twice.classes()[0].avg_area, expected);
    }

    #[test]
    fn areas_are_averaged_linearly() {
        // 8x8 flat tile has A = 64 at every scale; a 2-level board doubles it
        let flat = constant_image(8, 8, 10).unwrap();
        let rough = checkerboard(8, 8, 1, 0, 255).unwrap();
        let a_rough = area_curve(&rough, 5, AreaVariant::Difference).unwrap();
        let m = train_model(&labeled(vec![("x", vec![flat, rough])]), config(8)).unwrap();
        let avg = m.classes()[0].avg_area.values();
        for (k, v) in avg.iter().enumerate() {
            assert_eq!(*v, (64.0 + a_rough.values()[k]) / 2.0);
        }
    }

    #[test]
    fn stats_table_uses_per_tile_means() {
        let m = train_model(
            &labeled(vec![
                ("flat", vec![constant_image(8, 8, 42).unwrap()]),
                (
                    "pair",
                    vec![
                        constant_image(8, 8, 10).unwrap(),
                        constant_image(8, 8, 20).unwrap(),
                    ],
                ),
            ]),
            config(8),
        )
        .unwrap();
        assert_eq!(
            m.class_stats_table(),
            vec![
                ("flat".to_string(), 42.0, 0.0),
                ("pair".to_string(), 15.0, 0.0)
            ]
        );
    }

    #[test]
    fn training_errors() {
        let t = constant_image(8, 8, 1).unwrap();
        assert!(matches!(
            train_model(&labeled(vec![("a", vec![])]), config(8)),
            Err(ClassifierError::EmptyClass(l)) if l == "a"
        ));
        assert!(matches!(
            train_model(
                &labeled(vec![("a", vec![t.clone()]), ("a", vec![t.clone()])]),
                config(8)
            ),
            Err(ClassifierError::DuplicateLabel(_))
        ));
        assert!(matches!(
            train_model(&labeled(vec![("a", vec![t.clone()])]), config(16)),
            Err(ClassifierError::TileSizeMismatch { .. })
        ));
        assert!(matches!(
            train_model(&[], config(8)),
            Err(ClassifierError::NoClasses)
        ));
        let short = ModelConfig {
            delta_max: 1,
            ..config(8)
        };
        assert!(matches!(
            train_model(&labeled(vec![("a", vec![t])]), short),
            Err(ClassifierError::InvalidDeltaMax(1))
        ));
    }

    #[test]
    fn single_class_always_wins() {
        let m = train_model(&labeled(vec![("only", vec![board(0)])]), config(16)).unwrap();
        let r = m
            .classify_tile(&noisy_constant(16, 16, 3, 3, 9).unwrap())
            .unwrap();
        assert_eq!(r.predicted, "only");
        assert!(!r.tie);
    }

    #[test]
    fn training_tile_is_at_distance_zero() {
        let a = noisy_constant(16, 16, 120, 30, 2).unwrap();
        let b = board(0);
        let m = train_model(
            &labeled(vec![("noise", vec![a.clone()]), ("board", vec![b.clone()])]),
            config(16),
        )
        .unwrap();
        let r = m.classify_tile(&b).unwrap();
        assert_eq!(r.predicted, "board");
        assert_eq!(r.distance_to("board").unwrap().value(), 0.0);
        assert!(r.distance_to("noise").unwrap().value() > 0.0);
        assert_eq!(r.ranked()[0].0, "board");
    }

    #[test]
    fn identical_classes_tie_to_first() {
        let t = board(10);
        let m = train_model(
            &labeled(vec![
                ("first", vec![t.clone()]),
                ("second", vec![t.clone()]),
            ]),
            config(16),
        )
        .unwrap();
        let r = m
            .classify_tile(&noisy_constant(16, 16, 9, 9, 9).unwrap())
            .unwrap();
        assert_eq!(r.predicted, "first");
        assert!(r.tie);
    }

    #[test]
    fn wrong_tile_size_rejected() {
        let m = train_model(&labeled(vec![("b", vec![board(0)])]), config(16)).unwrap();
        assert!(matches!(
            m.classify_tile(&constant_image(8, 8, 0).unwrap()),
            Err(ClassifierError::TileSizeMismatch {
                width: 8,
                height: 8,
                tile_size: 16
            })
        ));
    }

    #[test]
    fn self_evaluation() {
        let corpus = labeled(vec![
            ("noise", vec![noisy_constant(16, 16, 120, 30, 2).unwrap()]),
            ("board", vec![board(0)]),
            ("flat", vec![constant_image(16, 16, 7).unwrap()]),
        ]);
        let m = train_model(&corpus, config(16)).unwrap();
        let e = m.evaluate(&corpus).unwrap();
        assert_eq!(e.accuracy, 1.0);
        for k in 0..3 {
            assert_eq!(e.matrix.cells[k][k], 0.0);
            assert_eq!(e.matrix.counts[k][k], 1);
        }
        assert!(e.matrix.diagonal_is_column_minimum());
        assert!(e.matrix.cells.iter().flatten().all(|&d| d >= 0.0));
        assert_eq!(
            e.matrix.assignments,
            vec![
                ("noise".to_string(), "noise".to_string()),
                ("board".to_string(), "board".to_string()),
                ("flat".to_string(), "flat".to_string()),
            ]
        );
    }

    #[test]
    fn evaluation_errors() {
        let m = train_model(&labeled(vec![("b", vec![board(0)])]), config(16)).unwrap();
        assert!(matches!(
            m.evaluate(&[]),
            Err(ClassifierError::EmptyTestSet)
        ));
        assert!(matches!(
            m.evaluate(&labeled(vec![("zzz", vec![board(0)])])),
            Err(ClassifierError::UnknownTestLabel(_))
        ));
        assert!(matches!(
            m.evaluate(&labeled(vec![("b", vec![])])),
            Err(ClassifierError::EmptyClass(_))
        ));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let corpus = labeled(vec![
            ("noise", vec![noisy_constant(16, 16, 120, 30, 2).unwrap()]),
            ("board", vec![board(0), board(40)]),
        ]);
        let m = train_model(&corpus, config(16)).unwrap();
        let json = m.to_json();
        let back = ClassifierModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), json);

        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["log_base"], 2);
        assert_eq!(v["area_variant"], "difference");
        assert_eq!(v["classes"][1]["n_tiles"], 2);
    }

    #[test]
    fn json_rejects_bad_documents() {
        let m = train_model(&labeled(vec![("b", vec![board(0)])]), config(16)).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();

        let mut extra = v.clone();
        extra["surprise"] = serde_json::json!(true);
        assert!(matches!(
            ClassifierModel::from_json(&extra.to_string()),
            Err(ClassifierError::Json(_))
        ));

        let mut version = v.clone();
        version["format_version"] = serde_json::json!(2);
        assert!(matches!(
            ClassifierModel::from_json(&version.to_string()),
            Err(ClassifierError::InvalidModel(_))
        ));

        let mut base = v.clone();
        base["log_base"] = serde_json::json!(10);
        assert!(ClassifierModel::from_json(&base.to_string()).is_err());

        v["classes"][0]["fd"] = serde_json::json!([2.0]);
        assert!(matches!(
            ClassifierModel::from_json(&v.to_string()),
            Err(ClassifierError::InvalidModel(_))
        ));
    }
}
