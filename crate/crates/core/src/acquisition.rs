//! Expected Improvement for minimization and its maximizer over the unit box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::domain::LowDimPoint;
use crate::error::{Error, Result};
use crate::gp::GpModel;

const SIGMA_FLOOR: f64 = 1e-12;
const PROPOSALS_PER_STEP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub candidate_count: usize,
    pub refine_steps: usize,
    pub refine_radius: f64,
    pub rng_seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            candidate_count: 1000,
            refine_steps: 20,
            refine_radius: 0.05,
            rng_seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidate_count == 0 {
            return Err(Error::InvalidParams("candidate_count must be at least 1".into()));
        }
        if !(self.refine_radius > 0.0 && self.refine_radius <= 0.5) {
            return Err(Error::InvalidParams(format!(
                "refine_radius {} outside (0, 0.5]",
                self.refine_radius
            )));
        }
        Ok(())
    }
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[max(g* − G, 0)]` for `G ~ N(mean, variance)`.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let gain = incumbent - mean;
    if sigma < SIGMA_FLOOR {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * standard_normal_cdf(z) + sigma * standard_normal_pdf(z)).max(0.0)
}

pub fn ei_at(model: &GpModel, x: &LowDimPoint, incumbent: f64) -> f64 {
    let (m, v) = model.posterior(x);
    expected_improvement(m, v, incumbent)
}

/// The maximizer's choice and the best EI among the raw random candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: LowDimPoint,
    pub ei: f64,
    pub best_candidate_ei: f64,
}

/// Multistart random search followed by shrinking-radius local refinement.
pub fn maximize_acquisition(model: &GpModel, incumbent: f64, cfg: &AcquisitionConfig) -> Result<Proposal> {
    cfg.validate()?;
    let dim = model
        .train()
        .dim()
        .ok_or_else(|| Error::InvalidParams("model has no training data".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut best_point = None;
    let mut best_ei = f64::NEG_INFINITY;
    for _ in 0..cfg.candidate_count {
        let p = LowDimPoint::clamped((0..dim).map(|_| rng.random::<f64>()).collect());
        let ei = ei_at(model, &p, incumbent);
        if ei > best_ei {
            best_ei = ei;
            best_point = Some(p);
        }
    }
    let mut point = best_point.expect("candidate_count >= 1");
    let best_candidate_ei = best_ei;

    for step in 0..cfg.refine_steps {
        let radius = cfg.refine_radius * (cfg.refine_steps - step) as f64 / cfg.refine_steps as f64;
        for _ in 0..PROPOSALS_PER_STEP {
            let coords = point
                .coords()
                .iter()
                .map(|c| c + rng.random_range(-radius..=radius))
                .collect();
            let q = LowDimPoint::clamped(coords);
            let ei = ei_at(model, &q, incumbent);
            if ei > best_ei {
                best_ei = ei;
                point = q;
            }
        }
    }
    debug_assert!(best_ei >= best_candidate_ei);
    Ok(Proposal {
        point,
        ei: best_ei,
        best_candidate_ei,
    })
}
