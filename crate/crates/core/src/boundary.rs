//! Distance to the decision boundary along a direction, measured with
//! hard-label queries only: a linear scan with step `η` locates a bracket,
//! then bisection shrinks it below the tolerance.
//!
//! The bracket is kept as scalar distances along the direction. Bisection
//! moves the low end when the midpoint is benign and the high end when it is
//! adversarial, so the low end always answered `-1` (or is the origin) and
//! the high end always answered `+1`.

use std::time::Instant;

use crate::domain::{counted_query, Decision, DecisionRule, Direction, QueryCounter, Sample};
use crate::error::{Error, Result};
use crate::oracles::Oracle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Linear-scan step `η`.
    pub step: f64,
    /// Bisection stops once the bracket is at most this wide.
    pub tolerance: f64,
    /// Distance reported for directions that never cross the boundary.
    pub max_distance: f64,
}

impl SearchParams {
    pub fn new(step: f64, tolerance: f64, max_distance: f64) -> Result<Self> {
        let p = Self {
            step,
            tolerance,
            max_distance,
        };
        p.validate()?;
        Ok(p)
    }

    /// Defaults for a `d`-pixel image in `[0, 1]`: `Δ_max = √d` (the distance
    /// between the all-black and all-white images), `η = 0.05·Δ_max`,
    /// `ε = 1e-3·Δ_max`.
    pub fn for_dimension(d: usize) -> Self {
        let max_distance = (d as f64).sqrt();
        Self {
            step: 0.05 * max_distance,
            tolerance: 1e-3 * max_distance,
            max_distance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tolerance && self.tolerance < self.step && self.step < self.max_distance) {
            return Err(Error::InvalidParams(format!(
                "search parameters need 0 < tolerance ({}) < step ({}) < max_distance ({})",
                self.tolerance, self.step, self.max_distance
            )));
        }
        Ok(())
    }

    /// Linear-scan probes spent on a direction that never crosses.
    pub fn scan_limit(&self) -> usize {
        (self.max_distance / self.step - 1e-9).ceil() as usize
    }

    /// Bisection steps needed to shrink a bracket of `width`.
    pub fn bisection_steps(&self, width: f64) -> usize {
        let mut w = width;
        let mut n = 0;
        while w > self.tolerance {
            w /= 2.0;
            n += 1;
        }
        n
    }

    /// Fewest queries any evaluation can take (boundary inside the first step).
    pub fn min_queries(&self) -> usize {
        1 + self.bisection_steps(self.step)
    }

    /// Most queries any evaluation can take.
    pub fn max_queries(&self) -> usize {
        self.scan_limit().max(1) + self.bisection_steps(self.step)
    }
}

/// A single oracle query made during an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    /// Distance from the origin along the direction.
    pub distance: f64,
    pub decision: Decision,
    pub at: Instant,
}

/// Bracket `[low, high]` after each bisection step (and the initial one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDistance {
    /// `g′`: distance along the direction to the first point found adversarial,
    /// or `Δ_max` when none was found.
    pub distance: f64,
    /// True when the evaluation did not finish a full search: either no
    /// crossing within `Δ_max`, or the budget ran out mid-search.
    pub capped: bool,
    /// True when `origin + distance·θ` was answered `+1`.
    pub adversarial: bool,
    pub budget_exhausted: bool,
    pub queries_spent: usize,
    pub probes: Vec<Probe>,
    pub brackets: Vec<Bracket>,
}

struct Search<'a> {
    rule: &'a DecisionRule,
    oracle: &'a dyn Oracle,
    origin: &'a Sample,
    direction: &'a Direction,
    counter: &'a mut QueryCounter,
    probes: Vec<Probe>,
}

impl Search<'_> {
    /// `Ok(None)` once the budget is gone.
    fn probe(&mut self, distance: f64) -> Result<Option<Decision>> {
        let point = self.origin.offset(self.direction, distance)?;
        match counted_query(self.rule, self.oracle, &point, self.counter) {
            Ok(decision) => {
                self.probes.push(Probe {
                    distance,
                    decision,
                    at: Instant::now(),
                });
                Ok(Some(decision))
            }
            Err(Error::BudgetExhausted { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Evaluate `g′` for direction `theta` from `origin`.
///
/// Running out of budget is not an error: the result is returned with
/// `budget_exhausted` and `capped` set, carrying the tightest adversarial
/// distance seen so far (or `Δ_max`).
pub fn evaluate_distance(
    rule: &DecisionRule,
    oracle: &dyn Oracle,
    origin: &Sample,
    theta: &Direction,
    params: &SearchParams,
    counter: &mut QueryCounter,
) -> Result<BoundaryDistance> {
    params.validate()?;
    if theta.shape() != origin.shape() {
        return Err(Error::ShapeMismatch {
            expected: origin.shape().as_tuple(),
            actual: theta.shape().as_tuple(),
        });
    }
    let start_used = counter.used();
    let mut search = Search {
        rule,
        oracle,
        origin,
        direction: theta,
        counter,
        probes: Vec::new(),
    };

    let finish = |search: Search<'_>, distance, capped, adversarial, exhausted, brackets| {
        let queries_spent = search.counter.used() - start_used;
        BoundaryDistance {
            distance,
            capped,
            adversarial,
            budget_exhausted: exhausted,
            queries_spent,
            probes: search.probes,
            brackets,
        }
    };

    let limit = params.scan_limit().max(1);
    let mut bracket = None;
    for k in 1..=limit {
        let distance = k as f64 * params.step;
        match search.probe(distance)? {
            None => return Ok(finish(search, params.max_distance, true, false, true, Vec::new())),
            Some(Decision::Adversarial) => {
                bracket = Some(Bracket {
                    low: (k - 1) as f64 * params.step,
                    high: distance,
                });
                break;
            }
            Some(Decision::Benign) => {}
        }
    }
    let Some(mut bracket) = bracket else {
        return Ok(finish(search, params.max_distance, true, false, false, Vec::new()));
    };

    let mut brackets = vec![bracket];
    while bracket.high - bracket.low > params.tolerance {
        let mid = 0.5 * (bracket.low + bracket.high);
        match search.probe(mid)? {
            None => {
                let high = bracket.high;
                return Ok(finish(search, high, true, true, true, brackets));
            }
            Some(Decision::Benign) => bracket.low = mid,
            Some(Decision::Adversarial) => bracket.high = mid,
        }
        brackets.push(bracket);
    }
    Ok(finish(search, bracket.high, false, true, false, brackets))
}
