//! Hard-label classifier oracles.
//!
//! Every oracle exposes only the predicted class index. Analytic oracles
//! (halfspace, sphere) work on raw real vectors; image-domain oracles clip
//! their input to `[0, 1]` before classifying.

mod analytic;
mod mlp;
mod remote;
mod squeeze;

use std::sync::Arc;

use crate::domain::{Sample, Shape};
use crate::error::{Error, Result};

pub use analytic::{HalfspaceOracle, SphereOracle};
pub use mlp::{Activation, DenseLayer, MlpOracle, MLPW_MAGIC, MLPW_VERSION};
pub use remote::{ClassifyRequest, ClassifyResponse, HealthResponse, RemoteOracle};
pub use squeeze::SqueezeOracle;

/// A deterministic hard-label classifier.
pub trait Oracle: Send + Sync {
    fn classify(&self, x: &Sample) -> Result<usize>;

    fn num_classes(&self) -> usize;

    fn input_shape(&self) -> Shape;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn classify(&self, x: &Sample) -> Result<usize> {
        (**self).classify(x)
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn input_shape(&self) -> Shape {
        (**self).input_shape()
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn classify(&self, x: &Sample) -> Result<usize> {
        (**self).classify(x)
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn input_shape(&self) -> Shape {
        (**self).input_shape()
    }
}

impl<O: Oracle + ?Sized> Oracle for Arc<O> {
    fn classify(&self, x: &Sample) -> Result<usize> {
        (**self).classify(x)
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn input_shape(&self) -> Shape {
        (**self).input_shape()
    }
}

pub(crate) fn check_input(expected: Shape, x: &Sample) -> Result<()> {
    if x.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected: expected.as_tuple(),
            actual: x.shape().as_tuple(),
        });
    }
    Ok(())
}
