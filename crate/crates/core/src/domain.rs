//! Shared domain types: samples, directions, the hard-label decision rule and
//! budgeted query accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::Oracle;

/// Image shape as `(height, width, channels)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn as_tuple(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Flat index of pixel `(y, x)` channel `c` (row-major, channel fastest).
    #[inline]
    pub const fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }
}

impl From<(usize, usize, usize)> for Shape {
    fn from((h, w, c): (usize, usize, usize)) -> Self {
        Shape::new(h, w, c)
    }
}

fn check_shape(shape: Shape, len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::InvalidParams("sample must not be empty".into()));
    }
    if shape.len() != len {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            actual: len,
        });
    }
    Ok(())
}

/// A point in input space (pixel intensities, nominally in `[0, 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
    shape: Shape,
}

impl Sample {
    pub fn new(values: Vec<f64>, shape: Shape) -> Result<Self> {
        check_shape(shape, values.len())?;
        Ok(Self { values, shape })
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        Self::new(vec![value; shape.len()], shape)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `self + distance * direction`, unclipped.
    pub fn offset(&self, direction: &Direction, distance: f64) -> Result<Sample> {
        if direction.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.as_tuple(),
                actual: direction.shape().as_tuple(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(direction.values())
            .map(|(x, t)| x + distance * t)
            .collect();
        Ok(Sample {
            values,
            shape: self.shape,
        })
    }

    /// Copy with every entry clipped to the pixel box `[0, 1]`.
    pub fn clipped(&self) -> Sample {
        Sample {
            values: self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            shape: self.shape,
        }
    }
}

/// Unit-L2-norm search direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    values: Vec<f64>,
    shape: Shape,
}

impl Direction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;

/// Scale `values` to unit L2 norm.
pub fn normalize_direction(values: &[f64], shape: Shape) -> Result<Direction> {
    check_shape(shape, values.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("direction has non-finite entries".into()));
    }
    let norm = l2_norm(values);
    if norm < ZERO_NORM_THRESHOLD {
        return Err(Error::ZeroPerturbation);
    }
    Ok(Direction {
        values: values.iter().map(|v| v / norm).collect(),
        shape,
    })
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Point in the normalized low-dimensional search box `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowDimPoint(Vec<f64>);

impl LowDimPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParams("low-dimensional point needs d >= 1".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidParams(format!(
                "coordinate {c} outside the unit box"
            )));
        }
        Ok(Self(coords))
    }

    /// Clamps each coordinate into `[0, 1]`; NaN maps to 0.
    pub fn clamped(coords: Vec<f64>) -> Self {
        assert!(!coords.is_empty());
        Self(
            coords
                .into_iter()
                .map(|c| if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &LowDimPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Untargeted,
    Targeted(usize),
}

/// One attack: the clean input, its label, the goal and the query budget.
#[derive(Debug, Clone)]
pub struct AttackTask {
    pub origin: Sample,
    pub true_label: usize,
    pub mode: AttackMode,
    pub budget: usize,
}

impl AttackTask {
    pub fn new(origin: Sample, true_label: usize, mode: AttackMode, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidParams("budget must be at least 1".into()));
        }
        if let AttackMode::Targeted(k) = mode {
            if k == true_label {
                return Err(Error::InvalidParams(format!(
                    "target class {k} equals the true label"
                )));
            }
        }
        Ok(Self {
            origin,
            true_label,
            mode,
            budget,
        })
    }

    pub fn decision_rule(&self) -> DecisionRule {
        make_decision_rule(self)
    }
}

/// Sign of the hard-label objective: `+1` for adversarial, `-1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Adversarial,
    Benign,
}

impl Decision {
    pub fn sign(self) -> i8 {
        match self {
            Decision::Adversarial => 1,
            Decision::Benign => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Decision::Adversarial),
            -1 => Some(Decision::Benign),
            _ => None,
        }
    }

    pub fn is_adversarial(self) -> bool {
        self == Decision::Adversarial
    }
}

/// Maps a predicted class index to a [`Decision`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionRule {
    true_label: usize,
    mode: AttackMode,
}

impl DecisionRule {
    pub fn new(true_label: usize, mode: AttackMode) -> Self {
        Self { true_label, mode }
    }

    pub fn decide(&self, predicted: usize) -> Decision {
        let adversarial = match self.mode {
            AttackMode::Untargeted => predicted != self.true_label,
            AttackMode::Targeted(k) => predicted == k,
        };
        if adversarial {
            Decision::Adversarial
        } else {
            Decision::Benign
        }
    }
}

pub fn make_decision_rule(task: &AttackTask) -> DecisionRule {
    DecisionRule::new(task.true_label, task.mode)
}

/// Oracle query accounting for a single attack run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryCounter {
    used: usize,
    budget: usize,
}

impl QueryCounter {
    pub fn new(budget: usize) -> Self {
        Self { used: 0, budget }
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    pub fn is_exhausted(&self) -> bool {
        self.used >= self.budget
    }

    fn consume(&mut self) -> Result<()> {
        if self.used >= self.budget {
            return Err(Error::BudgetExhausted {
                budget: self.budget,
            });
        }
        self.used += 1;
        Ok(())
    }
}

/// Classify `point` through `oracle`, charging one query to `counter`.
///
/// The query is charged before the oracle is contacted, so a failing remote
/// call still counts against the budget.
pub fn counted_query(
    rule: &DecisionRule,
    oracle: &dyn Oracle,
    point: &Sample,
    counter: &mut QueryCounter,
) -> Result<Decision> {
    counter.consume()?;
    let label = oracle.classify(point)?;
    Ok(rule.decide(label))
}
