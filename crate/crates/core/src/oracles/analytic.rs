use super::{check_input, Oracle};
use crate::domain::{l2_norm, Direction, Sample, Shape};
use crate::error::{Error, Result};

/// Class 1 iff `w·x > b`, class 0 otherwise.
#[derive(Debug, Clone)]
pub struct HalfspaceOracle {
    normal: Vec<f64>,
    offset: f64,
    shape: Shape,
}

impl HalfspaceOracle {
    /// `normal` must already have unit L2 norm.
    pub fn new(normal: Vec<f64>, offset: f64, shape: Shape) -> Result<Self> {
        if normal.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                actual: normal.len(),
            });
        }
        let norm = l2_norm(&normal);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "halfspace normal must be unit length, got norm {norm}"
            )));
        }
        Ok(Self {
            normal,
            offset,
            shape,
        })
    }

    /// Normalizes `normal` first.
    pub fn from_unnormalized(normal: &[f64], offset: f64, shape: Shape) -> Result<Self> {
        let norm = l2_norm(normal);
        if norm < 1e-12 {
            return Err(Error::ZeroPerturbation);
        }
        Self::new(normal.iter().map(|v| v / norm).collect(), offset, shape)
    }

    /// Normal along the `axis`-th coordinate.
    pub fn axis(shape: Shape, axis: usize, offset: f64) -> Result<Self> {
        if axis >= shape.len() {
            return Err(Error::InvalidParams(format!("axis {axis} out of range")));
        }
        let mut normal = vec![0.0; shape.len()];
        normal[axis] = 1.0;
        Self::new(normal, offset, shape)
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    /// Exact distance from `origin` along `direction` to the boundary
    /// `(b − w·x₀)/(w·θ)`, or `None` when the ray never crosses it.
    pub fn boundary_distance(&self, origin: &Sample, direction: &Direction) -> Option<f64> {
        let along = dot(&self.normal, direction.values());
        if along <= 0.0 {
            return None;
        }
        Some(-self.margin(origin.values()) / along)
    }
}

impl Oracle for HalfspaceOracle {
    fn classify(&self, x: &Sample) -> Result<usize> {
        check_input(self.shape, x)?;
        Ok(usize::from(self.margin(x.values()) > 0.0))
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn input_shape(&self) -> Shape {
        self.shape
    }
}

/// Class 1 iff `‖x − c‖₂ > R`.
#[derive(Debug, Clone)]
pub struct SphereOracle {
    center: Sample,
    radius: f64,
}

impl SphereOracle {
    pub fn new(center: Sample, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Oracle for SphereOracle {
    fn classify(&self, x: &Sample) -> Result<usize> {
        check_input(self.center.shape(), x)?;
        let dist = x
            .values()
            .iter()
            .zip(self.center.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(usize::from(dist > self.radius))
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn input_shape(&self) -> Shape {
        self.center.shape()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
