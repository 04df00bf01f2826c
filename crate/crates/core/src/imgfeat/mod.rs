//! Classical image features, feature-vector assembly and standardization.
//!
//! A feature vector is the semantic embedding followed by 42 classical values in
//! this order: lighting (6), quality (7), noise (5), sharpness (6), texture (2),
//! geometry (16). [`CLASSICAL_FEATURE_NAMES`] lists them.

pub mod filters;
mod geometry;
mod photometric;
mod sharpness;
mod standardize;
mod texture;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingRecord, ImageGray, ImageId, LandmarkSet};
use crate::error::{Error, Result};

pub use geometry::{eye_aspect_ratio, geometry_features, mouth_aspect_ratio, MIRROR_PAIRS};
pub use photometric::{lighting_features, noise_features, quality_features};
pub use sharpness::sharpness_features;
pub use standardize::{fit_standardizer, Standardizer};
pub use texture::{canny, texture_features, CANNY_HIGH, CANNY_LOW};

pub const CLASSICAL_FEATURE_COUNT: usize = 42;
/// Sanitized feature values are clipped to ±VALUE_CLIP.
pub const VALUE_CLIP: f64 = 1e6;

pub const CLASSICAL_FEATURE_NAMES: [&str; CLASSICAL_FEATURE_COUNT] = [
    "light_mean",
    "light_std",
    "light_entropy",
    "light_dark_ratio",
    "light_bright_ratio",
    "light_laplacian_var",
    "quality_local_contrast",
    "quality_global_contrast",
    "quality_dynamic_range",
    "quality_brightness_entropy",
    "quality_michelson",
    "quality_rms_contrast",
    "quality_std",
    "noise_sigma",
    "noise_snr_db",
    "noise_to_signal",
    "noise_residual_std",
    "noise_residual_mad",
    "sharp_gradient_mean",
    "sharp_gradient_std",
    "sharp_laplacian_var",
    "sharp_highfreq_energy",
    "sharp_log_spectrum_mean",
    "sharp_laplacian_var_repeat",
    "texture_local_variance",
    "texture_edge_density",
    "geom_face_detected",
    "geom_face_count",
    "geom_area_ratio",
    "geom_offset_x",
    "geom_offset_y",
    "geom_ear_left",
    "geom_ear_right",
    "geom_ear_mean",
    "geom_ear_diff",
    "geom_mouth_aspect_ratio",
    "geom_symmetry",
    "geom_roll_deg",
    "geom_yaw",
    "geom_pitch",
    "geom_width_ratio",
    "geom_height_ratio",
];

/// All 42 classical features in the documented order, unsanitized.
pub fn classical_features(img: &ImageGray, landmarks: Option<&LandmarkSet>) -> [f64; CLASSICAL_FEATURE_COUNT] {
    let mut out = [0.0; CLASSICAL_FEATURE_COUNT];
    let parts: [&[f64]; 6] = [
        &lighting_features(img),
        &quality_features(img),
        &noise_features(img),
        &sharpness_features(img),
        &texture_features(img),
        &geometry_features(landmarks, img.width(), img.height()),
    ];
    let mut at = 0;
    for part in parts {
        out[at..at + part.len()].copy_from_slice(part);
        at += part.len();
    }
    debug_assert_eq!(at, CLASSICAL_FEATURE_COUNT);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub image_id: ImageId,
    pub values: Vec<f64>,
}

/// NaN and ±∞ become 0; everything else is clipped to ±VALUE_CLIP.
pub fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v.clamp(-VALUE_CLIP, VALUE_CLIP)
    } else {
        0.0
    }
}

/// Embedding followed by the classical block, sanitized.
pub fn concat_features(
    image_id: ImageId,
    embedding: &[f32],
    classical: &[f64; CLASSICAL_FEATURE_COUNT],
) -> FeatureVector {
    let values = embedding
        .iter()
        .map(|&x| x as f64)
        .chain(classical.iter().copied())
        .map(sanitize)
        .collect();
    FeatureVector { image_id, values }
}

pub fn assemble_feature_vector(
    embedding: &EmbeddingRecord,
    expected_dim: usize,
    img: &ImageGray,
    landmarks: Option<&LandmarkSet>,
) -> Result<FeatureVector> {
    if embedding.vector.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            id: embedding.image_id.to_string(),
            expected: expected_dim,
            found: embedding.vector.len(),
        });
    }
    let classical = classical_features(img, landmarks);
    Ok(concat_features(
        embedding.image_id.clone(),
        &embedding.vector,
        &classical,
    ))
}

/// Column names for a feature table: `emb_0..emb_{d-1}` then the classical names.
pub fn feature_names(embedding_dim: usize) -> Vec<String> {
    (0..embedding_dim)
        .map(|i| format!("emb_{i}"))
        .chain(CLASSICAL_FEATURE_NAMES.iter().map(|s| s.to_string()))
        .collect()
}
