//! Small feed-forward classifier loaded from the `MLPW` weights format.
//!
//! Layout (all integers `u32`, all floats `f32`, little-endian):
//!
//! ```text
//! "MLPW" | version | height | width | channels | layer_count
//! layer_count x (rows, cols)
//! for each layer: rows*cols weights (row-major), rows biases
//! layer_count x activation tag (u8: 0 = none, 1 = relu)
//! ```
//!
//! `cols` of the first layer equals `height*width*channels`, each following
//! layer's `cols` equals the previous `rows`, and the last `rows` is the
//! number of classes.

use std::fs;
use std::path::Path;

use super::{check_input, Oracle};
use crate::domain::{Sample, Shape};
use crate::error::{Error, Result};

pub const MLPW_MAGIC: &[u8; 4] = b"MLPW";
pub const MLPW_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::None),
            1 => Ok(Activation::Relu),
            t => Err(Error::MalformedWeights(format!("unknown activation tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        rows: usize,
        cols: usize,
        weights: Vec<f32>,
        biases: Vec<f32>,
        activation: Activation,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::MalformedWeights("layer with zero width".into()));
        }
        if weights.len() != rows * cols || biases.len() != rows {
            return Err(Error::MalformedWeights(format!(
                "layer {rows}x{cols} has {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            biases,
            activation,
        })
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.biases)
            .map(|(row, &b)| {
                let z = row
                    .iter()
                    .zip(input)
                    .map(|(&w, x)| f64::from(w) * x)
                    .sum::<f64>()
                    + f64::from(b);
                match self.activation {
                    Activation::None => z,
                    Activation::Relu => z.max(0.0),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOracle {
    shape: Shape,
    layers: Vec<DenseLayer>,
}

impl MlpOracle {
    pub fn new(shape: Shape, layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::MalformedWeights("network has no layers".into()))?;
        if first.cols != shape.len() {
            return Err(Error::MalformedWeights(format!(
                "first layer expects {} inputs but shape has {}",
                first.cols,
                shape.len()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::MalformedWeights(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].cols,
                    pair[0].rows
                )));
            }
        }
        Ok(Self { shape, layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Final-layer activations for a clipped copy of `x`.
    pub fn logits(&self, x: &Sample) -> Result<Vec<f64>> {
        check_input(self.shape, x)?;
        let mut act = x.clipped().into_values();
        for layer in &self.layers {
            act = layer.forward(&act);
        }
        Ok(act)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MLPW_MAGIC);
        let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        put(&mut out, MLPW_VERSION as usize);
        put(&mut out, self.shape.height);
        put(&mut out, self.shape.width);
        put(&mut out, self.shape.channels);
        put(&mut out, self.layers.len());
        for layer in &self.layers {
            put(&mut out, layer.rows);
            put(&mut out, layer.cols);
        }
        for layer in &self.layers {
            for w in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out.extend(self.layers.iter().map(|l| l.activation.tag()));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MLPW_MAGIC {
            return Err(Error::MalformedWeights("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MLPW_VERSION {
            return Err(Error::MalformedWeights(format!("unsupported version {version}")));
        }
        let shape = Shape::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(Error::MalformedWeights("network has no layers".into()));
        }
        let mut dims = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            dims.push((r.u32()? as usize, r.u32()? as usize));
        }
        let payload: usize = dims
            .iter()
            .map(|&(rows, cols)| rows.saturating_mul(cols).saturating_add(rows))
            .fold(0usize, |acc, n| acc.saturating_add(n));
        let expected_len = r
            .pos
            .saturating_add(payload.saturating_mul(4))
            .saturating_add(count);
        if expected_len != bytes.len() {
            return Err(Error::MalformedWeights(format!(
                "declared sizes need {expected_len} bytes, file has {}",
                bytes.len()
            )));
        }
        let mut params = Vec::with_capacity(count);
        for &(rows, cols) in &dims {
            let weights = r.f32s(rows * cols)?;
            let biases = r.f32s(rows)?;
            params.push((rows, cols, weights, biases));
        }
        let mut layers = Vec::with_capacity(count);
        for (rows, cols, weights, biases) in params {
            let activation = Activation::from_tag(r.take(1)?[0])?;
            layers.push(DenseLayer::new(rows, cols, weights, biases, activation)?);
        }
        Self::new(shape, layers)
    }
}

impl Oracle for MlpOracle {
    fn classify(&self, x: &Sample) -> Result<usize> {
        Ok(argmax_lowest(&self.logits(x)?))
    }

    fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    fn input_shape(&self) -> Shape {
        self.shape
    }
}

/// Index of the maximum; ties resolve to the lowest index.
fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::MalformedWeights("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}
