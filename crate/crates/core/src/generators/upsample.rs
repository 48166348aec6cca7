//! Interpolation and block upsamplers from a coarse grid to image size.
//!
//! Bilinear, bicubic and nearest use align-corners sampling: target pixel `i`
//! reads source coordinate `i·(in−1)/(out−1)`, so corner grid values land
//! exactly on corner pixels.

use super::Perturbation;
use crate::domain::Shape;
use crate::error::{Error, Result};

/// Coarse grid used by the 48-dimensional upsampler families.
pub const GRID_SHAPE: Shape = Shape::new(4, 4, 3);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsampleMethod {
    Bilinear,
    Bicubic,
    /// Closest grid cell under align-corners sampling.
    Nearest,
    /// Equal-sized blocks, one per grid cell.
    Cluster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    values: Vec<f64>,
    shape: Shape,
}

impl Grid {
    pub fn new(values: Vec<f64>, shape: Shape) -> Result<Self> {
        if values.len() != shape.len() || shape.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidParams("grid entries must be finite and in [-1, 1]".into()));
        }
        Ok(Self { values, shape })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    fn plane(&self, channel: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(channel)
            .step_by(self.shape.channels)
            .copied()
            .collect()
    }

    /// Average over channels (used for single-channel targets).
    fn mean_plane(&self) -> Vec<f64> {
        let c = self.shape.channels as f64;
        self.values
            .chunks_exact(self.shape.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect()
    }
}

/// Upsample `grid` to `shape`. Grid and target must have the same channel
/// count, or the target must be single-channel (grid channels averaged).
pub fn upsample(method: UpsampleMethod, grid: &Grid, shape: Shape) -> Result<Perturbation> {
    if shape.is_empty() {
        return Err(Error::InvalidParams("target shape must be non-empty".into()));
    }
    let planes: Vec<Vec<f64>> = if shape.channels == grid.shape.channels {
        (0..shape.channels).map(|c| grid.plane(c)).collect()
    } else if shape.channels == 1 {
        vec![grid.mean_plane()]
    } else {
        return Err(Error::DimensionMismatch {
            expected: grid.shape.channels,
            actual: shape.channels,
        });
    };

    let (gh, gw) = (grid.shape.height, grid.shape.width);
    let resampled: Vec<Vec<f64>> = planes
        .iter()
        .map(|p| resample_plane(method, p, gh, gw, shape.height, shape.width))
        .collect();

    let mut out = vec![0.0; shape.len()];
    for y in 0..shape.height {
        for x in 0..shape.width {
            for (c, plane) in resampled.iter().enumerate() {
                out[shape.index(y, x, c)] = plane[y * shape.width + x];
            }
        }
    }
    Ok(Perturbation::new(out, shape))
}

fn align_corners(i: usize, src: usize, dst: usize) -> f64 {
    if dst <= 1 {
        0.0
    } else {
        i as f64 * (src - 1) as f64 / (dst - 1) as f64
    }
}

fn resample_plane(method: UpsampleMethod, plane: &[f64], gh: usize, gw: usize, th: usize, tw: usize) -> Vec<f64> {
    let at = |y: isize, x: isize| {
        let yc = y.clamp(0, gh as isize - 1) as usize;
        let xc = x.clamp(0, gw as isize - 1) as usize;
        plane[yc * gw + xc]
    };
    let mut out = Vec::with_capacity(th * tw);
    for i in 0..th {
        let sy = align_corners(i, gh, th);
        for j in 0..tw {
            let sx = align_corners(j, gw, tw);
            let v = match method {
                UpsampleMethod::Nearest => at(sy.round() as isize, sx.round() as isize),
                UpsampleMethod::Cluster => at((i * gh / th) as isize, (j * gw / tw) as isize),
                UpsampleMethod::Bilinear => {
                    let (y0, x0) = (sy.floor(), sx.floor());
                    let (fy, fx) = (sy - y0, sx - x0);
                    let (y0, x0) = (y0 as isize, x0 as isize);
                    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
                    let bottom = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
                    top * (1.0 - fy) + bottom * fy
                }
                UpsampleMethod::Bicubic => {
                    let (y0, x0) = (sy.floor(), sx.floor());
                    let wy = cubic_weights(sy - y0);
                    let wx = cubic_weights(sx - x0);
                    let (y0, x0) = (y0 as isize, x0 as isize);
                    let mut acc = 0.0;
                    for (dy, wyv) in wy.iter().enumerate() {
                        let row: f64 = wx
                            .iter()
                            .enumerate()
                            .map(|(dx, wxv)| wxv * at(y0 - 1 + dy as isize, x0 - 1 + dx as isize))
                            .sum();
                        acc += wyv * row;
                    }
                    // cubic overshoot can leave [-1, 1]
                    acc.clamp(-1.0, 1.0)
                }
            };
            out.push(v);
        }
    }
    out
}

/// Keys cubic convolution weights (a = −0.5) for taps at −1, 0, 1, 2.
fn cubic_weights(t: f64) -> [f64; 4] {
    const A: f64 = -0.5;
    let near = |x: f64| ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0;
    let far = |x: f64| ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A;
    [far(t + 1.0), near(t), near(1.0 - t), far(2.0 - t)]
}
