//! Sparse-convolution Gabor noise.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{replicate_channels, Perturbation};
use crate::domain::Shape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    /// Radians, `[0, π]`.
    pub orientation: f64,
    /// Cycles per pixel, `[1/30, 1/2]`.
    pub frequency: f64,
    /// Gaussian envelope width in pixels, `[1, 8]`.
    pub bandwidth: f64,
    /// 0 gives every kernel the base orientation, 1 spreads kernel
    /// orientations uniformly over a half turn.
    pub isotropy: f64,
}

impl GaborParams {
    fn validate(&self) -> Result<()> {
        let checks = [
            ("orientation", self.orientation, 0.0, PI),
            ("frequency", self.frequency, 1.0 / 30.0, 0.5),
            ("bandwidth", self.bandwidth, 1.0, 8.0),
            ("isotropy", self.isotropy, 0.0, 1.0),
        ];
        for (name, v, lo, hi) in checks {
            // 1e-12 slack absorbs box-mapping round-off at the log-range ends
            if !(v >= lo - 1e-12 && v <= hi + 1e-12) {
                return Err(Error::InvalidParams(format!("gabor {name} {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// One impulse of the sparse convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborKernel {
    /// Column position (pixels).
    pub x: f64,
    /// Row position (pixels).
    pub y: f64,
    pub weight: f64,
    /// In `[-1, 1]`; scaled by isotropy to perturb the orientation.
    pub jitter: f64,
}

/// One kernel per 32 pixels, at least one.
pub fn default_kernel_count(shape: Shape) -> usize {
    (shape.height * shape.width / 32).max(1)
}

/// Seeded uniform kernel placement with random ±1 weights.
pub fn place_kernels(shape: Shape, count: usize, seed: u64) -> Vec<GaborKernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| GaborKernel {
            x: rng.random::<f64>() * shape.width as f64,
            y: rng.random::<f64>() * shape.height as f64,
            weight: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            jitter: rng.random_range(-1.0..=1.0),
        })
        .collect()
}

pub fn gabor(params: &GaborParams, shape: Shape, seed: u64) -> Result<Perturbation> {
    let kernels = place_kernels(shape, default_kernel_count(shape), seed);
    gabor_with_kernels(params, shape, &kernels)
}

/// Sum of the given kernels, each truncated at three envelope widths, then
/// scaled so the largest magnitude is 1.
pub fn gabor_with_kernels(params: &GaborParams, shape: Shape, kernels: &[GaborKernel]) -> Result<Perturbation> {
    params.validate()?;
    if kernels.is_empty() {
        return Err(Error::InvalidParams("gabor noise needs at least one kernel".into()));
    }
    let (h, w) = (shape.height as isize, shape.width as isize);
    let sigma = params.bandwidth;
    let radius = (3.0 * sigma).ceil() as isize;
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    let mut plane = vec![0.0f64; shape.height * shape.width];

    for k in kernels {
        let omega = params.orientation + params.isotropy * k.jitter * FRAC_PI_2;
        let (s, c) = omega.sin_cos();
        let (cx, cy) = (k.x.round() as isize, k.y.round() as isize);
        for py in (cy - radius).max(0)..=(cy + radius).min(h - 1) {
            for px in (cx - radius).max(0)..=(cx + radius).min(w - 1) {
                let dx = px as f64 - k.x;
                let dy = py as f64 - k.y;
                let envelope = (-(dx * dx + dy * dy) * inv_two_sigma2).exp();
                let carrier = (2.0 * PI * params.frequency * (dx * c + dy * s)).cos();
                plane[py as usize * shape.width + px as usize] += k.weight * envelope * carrier;
            }
        }
    }

    let peak = plane.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    for v in &mut plane {
        *v = (*v / peak).clamp(-1.0, 1.0);
    }
    Ok(Perturbation::new(replicate_channels(plane, shape), shape))
}
