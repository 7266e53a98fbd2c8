//! Skin tone, hair, iris and undertone classification from images and
//! segmentation masks.
//!
//! Colors are extracted by clustering masked pixels and matched against
//! editable reference scales with perceptual color-difference metrics.

pub mod classify;
pub mod cluster;
pub mod color;
pub mod config;
pub mod delta_e;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod imaging;
pub mod scale;

pub use classify::{Classification, DominantTone, SkinOptions, UndertoneRefs, UndertoneThresholds};
pub use color::{HsvColor, LabColor, RgbColor};
pub use config::{Pipeline, RunConfig};
pub use delta_e::{ciede2000, DeltaEParams, DistanceMetric};
pub use error::{Error, Result};
pub use eval::{metrics, ConfusionMatrix, Metrics};
pub use imaging::{ImageBuffer, Landmarks, PixelMask};
pub use scale::{BundledScale, ToneClass, ToneScale};
