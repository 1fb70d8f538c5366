//! Rasterizer for the parametric cartoon faces.
//!
//! Faces are composed of analytic shapes (ellipse head, capsule brows, tapered
//! nose wedge, curved mouth band) evaluated per pixel with signed-distance
//! anti-aliasing. Rendering is a pure f64 function of the parameters, so the
//! same inputs always produce the same bytes.

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng;

use super::params::{IdentityParams, StyleParams};

pub const MIN_IMAGE_SIZE: usize = 16;

const BACKGROUND: [f64; 3] = [0.15, 0.17, 0.22];
const SKIN_DARK: [f64; 3] = [0.45, 0.30, 0.22];
const SKIN_LIGHT: [f64; 3] = [0.92, 0.78, 0.66];
const EYE_WHITE: [f64; 3] = [0.88, 0.88, 0.86];
const PUPIL: [f64; 3] = [0.08, 0.08, 0.10];
const BROW: [f64; 3] = [0.16, 0.11, 0.08];
const MOUTH: [f64; 3] = [0.62, 0.22, 0.25];
const OCCLUDER: [f64; 3] = [0.10, 0.10, 0.10];

/// Geometry derived from identity factors, all in the face frame
/// (`u` right, `v` down, unit half-extent).
#[derive(Debug, Clone, Copy)]
pub(crate) struct FaceGeometry {
    pub head_rx: f64,
    pub head_ry: f64,
    pub eye_dx: f64,
    pub eye_y: f64,
    pub eye_r: f64,
    pub brow_y: f64,
    pub brow_tilt: f64,
    pub brow_len: f64,
    pub nose_top: f64,
    pub nose_len: f64,
    pub mouth_y: f64,
    pub mouth_w: f64,
    pub mouth_h: f64,
    pub skin: [f64; 3],
    pub shade: [f64; 3],
}

impl FaceGeometry {
    pub fn from_identity(id: &IdentityParams) -> Self {
        let skin = mix3(SKIN_DARK, SKIN_LIGHT, id.skin_base);
        // Nose shading: skin darkened a fixed fraction.
        let shade = [skin[0] * 0.72, skin[1] * 0.72, skin[2] * 0.72];
        let eye_r = 0.045 + 0.065 * id.eye_size;
        FaceGeometry {
            head_rx: 0.46 + 0.16 * id.face_aspect,
            head_ry: 0.74 - 0.08 * id.face_aspect,
            eye_dx: 0.14 + 0.18 * id.eye_spacing,
            eye_y: -0.18,
            eye_r,
            brow_y: -0.18 - eye_r - 0.085,
            brow_tilt: (id.brow_angle - 0.5) * 0.5,
            brow_len: 0.085 + 0.09 * id.eye_size,
            nose_top: -0.10,
            nose_len: 0.14 + 0.20 * id.nose_length,
            mouth_y: 0.34,
            mouth_w: 0.09 + 0.13 * id.mouth_width,
            mouth_h: 0.02 + 0.05 * id.mouth_height,
            skin,
            shade,
        }
    }
}

fn mix3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Anti-aliased coverage from a signed distance (negative inside).
fn coverage(d: f64, aa: f64) -> f64 {
    (0.5 - d / aa).clamp(0.0, 1.0)
}

fn blend(dst: &mut [f64; 3], src: [f64; 3], cov: f64) {
    for c in 0..3 {
        dst[c] += (src[c] - dst[c]) * cov;
    }
}

/// Approximate signed distance to an axis-aligned ellipse boundary.
fn ellipse_sdf(u: f64, v: f64, rx: f64, ry: f64) -> f64 {
    let q = ((u / rx) * (u / rx) + (v / ry) * (v / ry)).sqrt();
    (q - 1.0) * rx.min(ry)
}

fn circle_sdf(u: f64, v: f64, cx: f64, cy: f64, r: f64) -> f64 {
    ((u - cx) * (u - cx) + (v - cy) * (v - cy)).sqrt() - r
}

/// Distance to a segment, minus a radius that varies linearly along it.
fn tapered_capsule_sdf(
    u: f64,
    v: f64,
    a: (f64, f64),
    b: (f64, f64),
    r0: f64,
    r1: f64,
) -> f64 {
    let (abu, abv) = (b.0 - a.0, b.1 - a.1);
    let (apu, apv) = (u - a.0, v - a.1);
    let len2 = abu * abu + abv * abv;
    let t = if len2 > 0.0 { ((apu * abu + apv * abv) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (du, dv) = (apu - t * abu, apv - t * abv);
    (du * du + dv * dv).sqrt() - (r0 + (r1 - r0) * t)
}

/// Rotate chroma about the gray axis, keeping luma fixed.
fn hue_rotate(p: [f64; 3], amount: f64) -> [f64; 3] {
    let y = (p[0] + p[1] + p[2]) / 3.0;
    let c = [p[0] - y, p[1] - y, p[2] - y];
    let phi = amount * std::f64::consts::PI;
    let (s, co) = phi.sin_cos();
    let inv_sqrt3 = 1.0 / 3.0_f64.sqrt();
    // axis a = (1,1,1)/sqrt(3); a . c = 0, so Rodrigues reduces to
    // c' = c cos(phi) + (a x c) sin(phi).
    let cross = [
        inv_sqrt3 * (c[2] - c[1]),
        inv_sqrt3 * (c[0] - c[2]),
        inv_sqrt3 * (c[1] - c[0]),
    ];
    [
        y + c[0] * co + cross[0] * s,
        y + c[1] * co + cross[1] * s,
        y + c[2] * co + cross[2] * s,
    ]
}

fn noise_seed(id: &IdentityParams, sty: &StyleParams, size: usize) -> u64 {
    let mut coords: Vec<u64> = id.as_array().iter().map(|v| v.to_bits()).collect();
    coords.push(sty.rotation.to_bits());
    coords.push(sty.illumination.to_bits());
    coords.push(sty.hue_shift.to_bits());
    coords.push(sty.noise_level.to_bits());
    coords.push(sty.expression_curve.to_bits());
    coords.push(sty.scale.to_bits());
    if let Some(b) = sty.occlusion_box {
        coords.extend([b.x.to_bits(), b.y.to_bits(), b.w.to_bits(), b.h.to_bits()]);
    }
    coords.push(size as u64);
    rng::mix_seed(0x0f1ce, &coords)
}

/// Shade one point of the face in the face frame, before style color ops.
fn shade_face(g: &FaceGeometry, u: f64, v: f64, expression: f64, aa: f64) -> [f64; 3] {
    let mut px = BACKGROUND;

    // Head.
    let d_head = ellipse_sdf(u, v, g.head_rx, g.head_ry);
    blend(&mut px, g.skin, coverage(d_head, aa));

    // Brows: capsules with a linear tilt (outer end raised/lowered).
    for side in [-1.0, 1.0] {
        let cx = side * g.eye_dx;
        let tilt = g.brow_tilt * side;
        let a = (cx - g.brow_len, g.brow_y + tilt * g.brow_len);
        let b = (cx + g.brow_len, g.brow_y - tilt * g.brow_len);
        let d = tapered_capsule_sdf(u, v, a, b, 0.016, 0.016);
        blend(&mut px, BROW, coverage(d, aa));
    }

    // Eyes: white ellipse plus pupil.
    for side in [-1.0, 1.0] {
        let cx = side * g.eye_dx;
        let d_white = ellipse_sdf(u - cx, v - g.eye_y, g.eye_r * 1.25, g.eye_r * 0.85);
        blend(&mut px, EYE_WHITE, coverage(d_white, aa));
        let d_pupil = circle_sdf(u, v, cx, g.eye_y, g.eye_r * 0.45);
        blend(&mut px, PUPIL, coverage(d_pupil, aa));
    }

    // Nose: wedge widening toward the base.
    let d_nose = tapered_capsule_sdf(
        u,
        v,
        (0.0, g.nose_top),
        (0.0, g.nose_top + g.nose_len),
        0.012,
        0.045,
    );
    blend(&mut px, g.shade, coverage(d_nose, aa));

    // Mouth: band around a parabolic center line; positive expression lifts
    // the corners (v grows downward).
    let xr = (u / g.mouth_w).clamp(-1.0, 1.0);
    let center = g.mouth_y + expression * 0.07 * (0.5 - xr * xr);
    let half_t = g.mouth_h * (1.0 - xr * xr).max(0.0).sqrt();
    let d_mouth = if u.abs() <= g.mouth_w {
        (v - center).abs() - half_t
    } else {
        // Outside the horizontal extent: distance to the nearest corner point.
        let cu = g.mouth_w * u.signum();
        let cv = g.mouth_y - expression * 0.07 * 0.5;
        ((u - cu) * (u - cu) + (v - cv) * (v - cv)).sqrt()
    };
    blend(&mut px, MOUTH, coverage(d_mouth, aa));

    px
}

/// Render an identity under a style. Output values lie in `[-1, 1]`.
pub fn render_face(id: &IdentityParams, sty: &StyleParams, size: usize) -> Result<ImageTensor> {
    if size < MIN_IMAGE_SIZE {
        return Err(Error::invalid_argument(format!(
            "image size {size} below minimum {MIN_IMAGE_SIZE}"
        )));
    }
    if !id.in_range() {
        return Err(Error::invalid_argument("identity parameters out of range"));
    }
    if !sty.in_range() {
        return Err(Error::invalid_argument("style parameters out of range"));
    }

    let g = FaceGeometry::from_identity(id);
    let theta = sty.rotation.to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let inv_scale = 1.0 / sty.scale;
    let aa = 2.0 * inv_scale / size as f64;

    let mut img = ImageTensor::zeros(3, size, size);
    let mut noise = if sty.noise_level > 0.0 {
        Some(rng::stream(noise_seed(id, sty, size), &[]))
    } else {
        None
    };

    for y in 0..size {
        for x in 0..size {
            let u0 = ((x as f64 + 0.5) / size as f64) * 2.0 - 1.0;
            let v0 = ((y as f64 + 0.5) / size as f64) * 2.0 - 1.0;
            // Inverse view transform: un-scale, then un-rotate.
            let us = u0 * inv_scale;
            let vs = v0 * inv_scale;
            let u = cos_t * us + sin_t * vs;
            let v = -sin_t * us + cos_t * vs;

            let mut px = shade_face(&g, u, v, sty.expression_curve, aa);

            // Occluder lives in image coordinates, in front of the face.
            if let Some(b) = sty.occlusion_box {
                let fx = (x as f64 + 0.5) / size as f64;
                let fy = (y as f64 + 0.5) / size as f64;
                if fx >= b.x && fx < b.x + b.w && fy >= b.y && fy < b.y + b.h {
                    px = OCCLUDER;
                }
            }

            px = [px[0] * sty.illumination, px[1] * sty.illumination, px[2] * sty.illumination];
            if sty.hue_shift != 0.0 {
                px = hue_rotate(px, sty.hue_shift);
            }

            for c in 0..3 {
                let mut v01 = px[c];
                if let Some(rng) = noise.as_mut() {
                    v01 += rng::standard_normal(rng) * sty.noise_level * 0.5;
                }
                img.set(c, y, x, (v01 * 2.0 - 1.0).clamp(-1.0, 1.0));
            }
        }
    }
    Ok(img)
}
