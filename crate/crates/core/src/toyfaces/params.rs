//! Identity and style factor spaces for the procedural face corpus.
//!
//! Identity factors control facial geometry (and are the ground truth for
//! every identity-consistency claim downstream); style factors control
//! everything a photograph would add on top: pose, lighting, color cast,
//! sensor noise, occluders, expression, framing.

use serde::{Deserialize, Serialize};

use crate::rng::{self, mix_seed};

/// Geometry factors, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub eye_spacing: f64,
    pub eye_size: f64,
    pub nose_length: f64,
    pub mouth_width: f64,
    pub mouth_height: f64,
    pub face_aspect: f64,
    pub brow_angle: f64,
    pub skin_base: f64,
}

impl IdentityParams {
    pub const N_FIELDS: usize = 8;

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.eye_spacing,
            self.eye_size,
            self.nose_length,
            self.mouth_width,
            self.mouth_height,
            self.face_aspect,
            self.brow_angle,
            self.skin_base,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        IdentityParams {
            eye_spacing: a[0],
            eye_size: a[1],
            nose_length: a[2],
            mouth_width: a[3],
            mouth_height: a[4],
            face_aspect: a[5],
            brow_angle: a[6],
            skin_base: a[7],
        }
    }

    pub fn in_range(&self) -> bool {
        self.as_array().iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// The component-wise midpoint identity; used by linearity checks.
    pub fn mean_point() -> Self {
        IdentityParams::from_array([0.5; 8])
    }
}

/// Axis-aligned occluder rectangle in fractional image coordinates:
/// `x, y` is the top-left corner and `x + w <= 1`, `y + h <= 1`, so the box
/// always lies inside the image regardless of raster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl OcclusionBox {
    pub fn is_inside_image(&self) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.w > 0.0
            && self.h > 0.0
            && self.x + self.w <= 1.0
            && self.y + self.h <= 1.0
    }
}

/// Photographic factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    /// In-plane rotation, degrees in `[-30, 30]`.
    pub rotation: f64,
    /// Brightness multiplier in `[0.5, 1.5]`.
    pub illumination: f64,
    /// Chroma rotation amount in `[-0.2, 0.2]`; luma-preserving.
    pub hue_shift: f64,
    /// Additive Gaussian noise std in `[0, 0.2]` (image values live in `[-1, 1]`).
    pub noise_level: f64,
    pub occlusion_box: Option<OcclusionBox>,
    /// Mouth curvature in `[-1, 1]`: positive smiles, negative frowns.
    pub expression_curve: f64,
    /// Framing zoom in `[0.8, 1.2]`.
    pub scale: f64,
}

impl StyleParams {
    /// The style under which identity renders are taken for conditioning:
    /// frontal, evenly lit, clean.
    pub fn neutral() -> Self {
        StyleParams {
            rotation: 0.0,
            illumination: 1.0,
            hue_shift: 0.0,
            noise_level: 0.0,
            occlusion_box: None,
            expression_curve: 0.0,
            scale: 1.0,
        }
    }

    pub fn in_range(&self) -> bool {
        (-30.0..=30.0).contains(&self.rotation)
            && (0.5..=1.5).contains(&self.illumination)
            && (-0.2..=0.2).contains(&self.hue_shift)
            && (0.0..=0.2).contains(&self.noise_level)
            && (-1.0..=1.0).contains(&self.expression_curve)
            && (0.8..=1.2).contains(&self.scale)
            && self.occlusion_box.map_or(true, |b| b.is_inside_image())
    }
}

/// Sampling ranges for style draws; narrowing them produces the
/// controlled-difficulty evaluation corpora.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleRanges {
    pub max_rotation: f64,
    pub illumination: (f64, f64),
    pub max_hue_shift: f64,
    pub max_noise: f64,
    pub occlusion_prob: f64,
    pub max_expression: f64,
    pub scale: (f64, f64),
}

impl Default for StyleRanges {
    fn default() -> Self {
        StyleRanges {
            max_rotation: 30.0,
            illumination: (0.5, 1.5),
            max_hue_shift: 0.2,
            max_noise: 0.2,
            occlusion_prob: 0.25,
            max_expression: 1.0,
            scale: (0.8, 1.2),
        }
    }
}

/// Deterministic identity draw: fields uniform in `[0, 1]`.
pub fn sample_identity(seed: u64) -> IdentityParams {
    let mut rng = rng::stream(seed, &[0x1d]);
    let mut a = [0.0; 8];
    for v in &mut a {
        *v = rng::uniform01(&mut rng);
    }
    IdentityParams::from_array(a)
}

/// Deterministic style draw with the default ranges.
pub fn sample_style(seed: u64) -> StyleParams {
    sample_style_with(seed, &StyleRanges::default())
}

/// Deterministic style draw with explicit ranges.
pub fn sample_style_with(seed: u64, ranges: &StyleRanges) -> StyleParams {
    let mut rng = rng::stream(seed, &[0x57]);
    let rotation = rng::uniform(&mut rng, -ranges.max_rotation, ranges.max_rotation);
    let illumination = rng::uniform(&mut rng, ranges.illumination.0, ranges.illumination.1);
    let hue_shift = rng::uniform(&mut rng, -ranges.max_hue_shift, ranges.max_hue_shift);
    let noise_level = rng::uniform(&mut rng, 0.0, ranges.max_noise);
    let expression_curve = rng::uniform(&mut rng, -ranges.max_expression, ranges.max_expression);
    let scale = rng::uniform(&mut rng, ranges.scale.0, ranges.scale.1);
    // Occlusion draw consumes a fixed number of values whether or not the box
    // is kept, so toggling the probability does not shift later fields.
    let coin = rng::uniform01(&mut rng);
    let w = rng::uniform(&mut rng, 0.12, 0.35);
    let h = rng::uniform(&mut rng, 0.12, 0.35);
    let x = rng::uniform01(&mut rng) * (1.0 - w);
    let y = rng::uniform01(&mut rng) * (1.0 - h);
    let occlusion_box =
        (coin < ranges.occlusion_prob).then_some(OcclusionBox { x, y, w, h });
    StyleParams {
        rotation,
        illumination,
        hue_shift,
        noise_level,
        occlusion_box,
        expression_curve,
        scale,
    }
}

/// Seed for corpus item `(identity_index, sample_index)` under a global seed.
pub fn item_seed(global_seed: u64, identity_index: u64, sample_index: u64) -> u64 {
    mix_seed(global_seed, &[0xc0, identity_index, sample_index])
}

/// Seed for the identity parameters of `identity_index` under a global seed.
pub fn identity_seed(global_seed: u64, identity_index: u64) -> u64 {
    mix_seed(global_seed, &[0x1d40, identity_index])
}
