//! Perturbation generators mapping a point of the low-dimensional search box
//! to an image-sized perturbation with entries in `[-1, 1]`.

mod gabor;
mod perlin;
mod upsample;

use serde::{Deserialize, Serialize};

use crate::domain::{LowDimPoint, Shape};
use crate::error::{Error, Result};

pub use gabor::{default_kernel_count, gabor, gabor_with_kernels, place_kernels, GaborKernel, GaborParams};
pub use perlin::{lattice_noise, perlin, PERMUTATION};
pub use upsample::{upsample, Grid, UpsampleMethod, GRID_SHAPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Perlin,
    Gabor,
    Bilinear,
    Bicubic,
    Nearest,
    Cluster,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 6] = [
        GeneratorKind::Perlin,
        GeneratorKind::Gabor,
        GeneratorKind::Bilinear,
        GeneratorKind::Bicubic,
        GeneratorKind::Nearest,
        GeneratorKind::Cluster,
    ];

    /// Dimension of the search box for this family.
    pub fn input_dim(self) -> usize {
        match self {
            GeneratorKind::Perlin => 3,
            GeneratorKind::Gabor => 4,
            _ => GRID_SHAPE.len(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Perlin => "perlin",
            GeneratorKind::Gabor => "gabor",
            GeneratorKind::Bilinear => "bilinear",
            GeneratorKind::Bicubic => "bicubic",
            GeneratorKind::Nearest => "nearest",
            GeneratorKind::Cluster => "cluster",
        }
    }

    fn upsample_method(self) -> Option<UpsampleMethod> {
        match self {
            GeneratorKind::Bilinear => Some(UpsampleMethod::Bilinear),
            GeneratorKind::Bicubic => Some(UpsampleMethod::Bicubic),
            GeneratorKind::Nearest => Some(UpsampleMethod::Nearest),
            GeneratorKind::Cluster => Some(UpsampleMethod::Cluster),
            _ => None,
        }
    }

    fn default_ranges(self) -> Vec<ParamRange> {
        use std::f64::consts::PI;
        match self {
            // wavelength x, wavelength y, sine frequency
            GeneratorKind::Perlin => vec![
                ParamRange::log(2.0, 180.0),
                ParamRange::log(2.0, 180.0),
                ParamRange::linear(4.0, 32.0),
            ],
            // orientation, frequency, bandwidth, isotropy
            GeneratorKind::Gabor => vec![
                ParamRange::linear(0.0, PI),
                ParamRange::log(1.0 / 30.0, 0.5),
                ParamRange::linear(1.0, 8.0),
                ParamRange::linear(0.0, 1.0),
            ],
            _ => vec![ParamRange::linear(-1.0, 1.0); GRID_SHAPE.len()],
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown generator kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeScale {
    Linear,
    Log,
}

/// Maps a unit-box coordinate onto a physical parameter interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub scale: RangeScale,
}

impl ParamRange {
    pub const fn linear(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            scale: RangeScale::Linear,
        }
    }

    pub const fn log(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            scale: RangeScale::Log,
        }
    }

    pub fn map(&self, u: f64) -> f64 {
        let v = match self.scale {
            RangeScale::Linear => self.min + u * (self.max - self.min),
            RangeScale::Log => (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp(),
        };
        v.clamp(self.min, self.max)
    }

    fn validate(&self) -> Result<()> {
        if self.min.partial_cmp(&self.max) != Some(std::cmp::Ordering::Less) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParams(format!(
                "parameter range [{}, {}] is empty",
                self.min, self.max
            )));
        }
        if self.scale == RangeScale::Log && self.min <= 0.0 {
            return Err(Error::InvalidParams("log range needs a positive minimum".into()));
        }
        Ok(())
    }
}

/// Complete description of a generator: family, output shape, the box to
/// parameter mapping and the seed used for random kernel placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    kind: GeneratorKind,
    target_shape: Shape,
    param_ranges: Vec<ParamRange>,
    seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, target_shape: Shape) -> Result<Self> {
        Self::with_ranges(kind, target_shape, kind.default_ranges(), 0)
    }

    pub fn with_ranges(
        kind: GeneratorKind,
        target_shape: Shape,
        param_ranges: Vec<ParamRange>,
        seed: u64,
    ) -> Result<Self> {
        if target_shape.is_empty() {
            return Err(Error::InvalidParams("target shape must be non-empty".into()));
        }
        if param_ranges.len() != kind.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: kind.input_dim(),
                actual: param_ranges.len(),
            });
        }
        for r in &param_ranges {
            r.validate()?;
        }
        if kind.upsample_method().is_some()
            && target_shape.channels != GRID_SHAPE.channels
            && target_shape.channels != 1
        {
            return Err(Error::InvalidParams(format!(
                "upsamplers support 1 or {} output channels, got {}",
                GRID_SHAPE.channels, target_shape.channels
            )));
        }
        Ok(Self {
            kind,
            target_shape,
            param_ranges,
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.kind.input_dim()
    }

    pub fn target_shape(&self) -> Shape {
        self.target_shape
    }

    pub fn param_ranges(&self) -> &[ParamRange] {
        &self.param_ranges
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Physical parameters for box point `p`.
    pub fn map_params(&self, p: &LowDimPoint) -> Result<Vec<f64>> {
        if p.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: p.dim(),
            });
        }
        Ok(p
            .coords()
            .iter()
            .zip(&self.param_ranges)
            .map(|(&u, r)| r.map(u))
            .collect())
    }
}

/// An image-sized perturbation with entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    values: Vec<f64>,
    shape: Shape,
}

impl Perturbation {
    pub(crate) fn new(values: Vec<f64>, shape: Shape) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Self { values, shape }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Evaluate the generator `spec` at box point `p`.
pub fn generate(spec: &GeneratorSpec, p: &LowDimPoint) -> Result<Perturbation> {
    let params = spec.map_params(p)?;
    let shape = spec.target_shape;
    let out = match spec.kind {
        GeneratorKind::Perlin => perlin(params[0], params[1], params[2], shape)?,
        GeneratorKind::Gabor => {
            let gp = GaborParams {
                orientation: params[0],
                frequency: params[1],
                bandwidth: params[2],
                isotropy: params[3],
            };
            gabor(&gp, shape, spec.seed)?
        }
        kind => {
            let method = kind.upsample_method().expect("upsampler kind");
            let grid = Grid::new(params, GRID_SHAPE)?;
            upsample(method, &grid, shape)?
        }
    };
    if out.is_all_zero() {
        return Err(Error::ZeroPerturbation);
    }
    Ok(out)
}

fn replicate_channels(plane: Vec<f64>, shape: Shape) -> Vec<f64> {
    if shape.channels == 1 {
        return plane;
    }
    plane
        .into_iter()
        .flat_map(|v| std::iter::repeat_n(v, shape.channels))
        .collect()
}
