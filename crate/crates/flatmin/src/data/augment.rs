//! Image augmentation: horizontal flips, small rotations, and translations,
//! sampled independently per image from counter-based streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Per-image transform limits. Defaults: flips on, rotations up to 10
/// degrees, translations up to 0.2 of the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub horizontal_flip: bool,
    pub max_rotation_degrees: f64,
    pub max_translation_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            horizontal_flip: true,
            max_rotation_degrees: 10.0,
            max_translation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    fn validate(&self) -> Result<()> {
        if !(self.max_rotation_degrees >= 0.0 && self.max_rotation_degrees.is_finite()) {
            return Err(Error::Domain("max_rotation_degrees must be >= 0".into()));
        }
        if !(self.max_translation_fraction >= 0.0 && self.max_translation_fraction.is_finite()) {
            return Err(Error::Domain("max_translation_fraction must be >= 0".into()));
        }
        Ok(())
    }

    /// Same limits, different stream; used for fresh per-epoch copies.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Mirror the columns of a row-major `h` x `w` image.
pub fn flip_horizontal(img: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = img[r * w + (w - 1 - c)];
        }
    }
    out
}

/// Apply flip, then rotation about the image center, then translation, with
/// bilinear sampling and zero padding. `theta` is in radians; `ty`/`tx` are
/// continuous pixel shifts. Zero rotation and translation are exact
/// identities.
pub(crate) fn warp_image(
    img: &[f64],
    h: usize,
    w: usize,
    flip: bool,
    theta: f64,
    ty: f64,
    tx: f64,
) -> Vec<f64> {
    let (sin_t, cos_t) = if theta == 0.0 { (0.0, 1.0) } else { theta.sin_cos() };
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; h * w];
    let sample = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            img[r as usize * w + c as usize]
        }
    };
    for r in 0..h {
        for c in 0..w {
            // Invert the output-space transform back to source coordinates.
            let y1 = r as f64 - ty;
            let x1 = c as f64 - tx;
            let dy = y1 - cy;
            let dx = x1 - cx;
            let ys = cy + cos_t * dy + sin_t * dx;
            let mut xs = cx - sin_t * dy + cos_t * dx;
            if flip {
                xs = (w as f64 - 1.0) - xs;
            }
            let r0 = ys.floor();
            let c0 = xs.floor();
            let fy = ys - r0;
            let fx = xs - c0;
            let (r0, c0) = (r0 as isize, c0 as isize);
            let v = (1.0 - fy) * (1.0 - fx) * sample(r0, c0)
                + (1.0 - fy) * fx * sample(r0, c0 + 1)
                + fy * (1.0 - fx) * sample(r0 + 1, c0)
                + fy * fx * sample(r0 + 1, c0 + 1);
            out[r * w + c] = v;
        }
    }
    out
}

/// Produce a transformed copy of an image dataset: same size, same labels,
/// independently sampled transforms per image. Stream `i` drives image `i`,
/// so results do not depend on evaluation order.
pub fn augment(data: &Dataset, policy: &AugmentPolicy) -> Result<Dataset> {
    policy.validate()?;
    let (h, w) = data
        .image_shape()
        .ok_or_else(|| Error::Shape("augment requires an image-shaped dataset".into()))?;
    let mut features = Vec::with_capacity(data.len() * data.dim());
    for i in 0..data.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        rng.set_stream(i as u64);
        let flip = policy.horizontal_flip && rng.random::<bool>();
        let theta = if policy.max_rotation_degrees > 0.0 {
            rng.random_range(-policy.max_rotation_degrees..=policy.max_rotation_degrees)
                .to_radians()
        } else {
            0.0
        };
        let (ty, tx) = if policy.max_translation_fraction > 0.0 {
            let my = policy.max_translation_fraction * h as f64;
            let mx = policy.max_translation_fraction * w as f64;
            (rng.random_range(-my..=my), rng.random_range(-mx..=mx))
        } else {
            (0.0, 0.0)
        };
        let img = data.feature_row(i);
        if !flip && theta == 0.0 && ty == 0.0 && tx == 0.0 {
            features.extend_from_slice(img);
        } else {
            features.extend(warp_image(img, h, w, flip, theta, ty, tx));
        }
    }
    data.with_features(features)
}
