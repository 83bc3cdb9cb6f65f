//! Blanket-method fractal signatures for grayscale textures and a
//! minimum-distance terrain classifier built on them.
//!
//! The pipeline runs `GrayImage` → blanket volumes → fractal area curve →
//! fractal dimension (signature) curve → weighted curve distance → nearest
//! class.

pub mod blanket;
pub mod classifier;
pub mod gray_image;
pub mod signature;
pub mod synth;

pub use blanket::{area_curve, oracle_surfaces, AreaCurve, AreaVariant, BlanketState};
pub use classifier::{
    train_model, ClassificationResult, ClassifierModel, ConfusionMatrix, Evaluation, ModelConfig,
};
pub use gray_image::{
    extract_tiles, gray_stats, load_image, save_image, GrayImage, GrayStats, TileSpec,
};
pub use signature::{fd_curve, fd_distance, Distance, FdCurve};
