use super::Oracle;
use crate::domain::{Sample, Shape};
use crate::error::{Error, Result};

/// Bit-depth reduction in front of another oracle.
///
/// Each pixel is clipped to `[0, 1]` and rounded (half up) to the nearest of
/// `2^bits` evenly spaced levels before the inner oracle sees it.
#[derive(Debug, Clone)]
pub struct SqueezeOracle<O> {
    inner: O,
    bits: u32,
}

impl<O: Oracle> SqueezeOracle<O> {
    pub fn new(inner: O, bits: u32) -> Result<Self> {
        if !(1..=8).contains(&bits) {
            return Err(Error::InvalidParams(format!(
                "squeeze bits must be in [1, 8], got {bits}"
            )));
        }
        Ok(Self { inner, bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn squeeze(&self, x: &Sample) -> Sample {
        let top = f64::from((1u32 << self.bits) - 1);
        let values = x
            .values()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * top + 0.5).floor() / top)
            .collect();
        Sample::new(values, x.shape()).expect("shape preserved")
    }
}

impl<O: Oracle> Oracle for SqueezeOracle<O> {
    fn classify(&self, x: &Sample) -> Result<usize> {
        self.inner.classify(&self.squeeze(x))
    }

    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn input_shape(&self) -> Shape {
        self.inner.input_shape()
    }
}
