//! Distortion, success-rate and budget-curve statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::Sample;
use crate::engine::AttackResult;
use crate::error::{Error, Result};
use crate::generators::Perturbation;
use crate::oracles::Oracle;
use crate::trace::AttackTrace;

/// L∞ threshold used for success and universality rates (16/255).
pub const DEFAULT_LINF_THRESHOLD: f64 = 16.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub l2: f64,
    pub linf: f64,
}

pub fn compute_distortion(origin: &Sample, adversarial: &Sample) -> Result<Distortion> {
    if origin.shape() != adversarial.shape() {
        return Err(Error::ShapeMismatch {
            expected: origin.shape().as_tuple(),
            actual: adversarial.shape().as_tuple(),
        });
    }
    let (mut sq, mut linf) = (0.0f64, 0.0f64);
    for (a, b) in origin.values().iter().zip(adversarial.values()) {
        let d = (b - a).abs();
        sq += d * d;
        linf = linf.max(d);
    }
    Ok(Distortion { l2: sq.sqrt(), linf })
}

/// Fraction of L∞ distortions at or below `threshold`. Failed attacks should
/// be passed as `f64::INFINITY`.
pub fn success_rate(linf_distances: &[f64], threshold: f64) -> Result<f64> {
    if linf_distances.is_empty() {
        return Err(Error::EmptyResultSet);
    }
    let hits = linf_distances.iter().filter(|&&d| d <= threshold).count();
    Ok(hits as f64 / linf_distances.len() as f64)
}

/// Attack success rate; results that never found an adversarial point count
/// as failures.
pub fn compute_asr(results: &[AttackResult], threshold: f64) -> Result<f64> {
    let d: Vec<f64> = results
        .iter()
        .map(|r| if r.found_adversarial { r.distance_linf } else { f64::INFINITY })
        .collect();
    success_rate(&d, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UarReport {
    pub rate: f64,
    /// Factor applied to the perturbation to fit the L∞ ball (1 if it already did).
    pub scale: f64,
    pub misclassified: usize,
    pub total: usize,
}

/// Universal evasion rate of the fixed perturbation `s` over `dataset`.
pub fn compute_uar(
    s: &Perturbation,
    dataset: &[(Sample, usize)],
    oracle: &dyn Oracle,
    epsilon: f64,
) -> Result<UarReport> {
    compute_uar_values(s.values(), dataset, oracle, epsilon)
}

pub fn compute_uar_values(
    s: &[f64],
    dataset: &[(Sample, usize)],
    oracle: &dyn Oracle,
    epsilon: f64,
) -> Result<UarReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..).contains(&epsilon) {
        return Err(Error::InvalidParams(format!("epsilon {epsilon} must be non-negative")));
    }
    let linf = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if linf > epsilon { epsilon / linf } else { 1.0 };
    let mut misclassified = 0;
    for (x, label) in dataset {
        if x.len() != s.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: s.len(),
            });
        }
        let values = x.values().iter().zip(s).map(|(a, b)| a + scale * b).collect();
        let perturbed = Sample::new(values, x.shape())?;
        if oracle.classify(&perturbed)? != *label {
            misclassified += 1;
        }
    }
    Ok(UarReport {
        rate: misclassified as f64 / dataset.len() as f64,
        scale,
        misclassified,
        total: dataset.len(),
    })
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub budget: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

/// Median and quartiles of best-so-far distance at each budget.
pub fn summarize_traces(traces: &[AttackTrace], budgets: &[usize]) -> Result<Vec<BudgetSummary>> {
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    budgets
        .iter()
        .map(|&budget| {
            let mut values = traces
                .iter()
                .enumerate()
                .map(|(i, t)| t.best_at(budget).ok_or(Error::MissingPrefix { trace: i, budget }))
                .collect::<Result<Vec<f64>>>()?;
            values.sort_by(f64::total_cmp);
            Ok(BudgetSummary {
                budget,
                median: quantile_sorted(&values, 0.5),
                q1: quantile_sorted(&values, 0.25),
                q3: quantile_sorted(&values, 0.75),
                n: values.len(),
            })
        })
        .collect()
}

pub fn summary_csv(rows: &[BudgetSummary]) -> String {
    let mut out = String::from("budget,median,q1,q3,n\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.budget, r.median, r.q1, r.q3, r.n);
    }
    out
}
