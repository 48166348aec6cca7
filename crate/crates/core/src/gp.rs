//! Gaussian-process regression with a Matérn 5/2 covariance.
//!
//! Observations are standardized before fitting; the prior mean is zero in
//! standardized units, i.e. the empirical mean of the observations.
//! Hyperparameters are picked by maximizing the log marginal likelihood over
//! a fixed grid.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::domain::LowDimPoint;
use crate::error::{Error, Result};

/// Points closer than this are treated as duplicates.
pub const DUPLICATE_RADIUS: f64 = 1e-9;
pub const DEFAULT_JITTER: f64 = 1e-6;
/// Upper end of the jitter escalation used when a factorization fails.
pub const MAX_JITTER: f64 = 1e-4;
pub const SIGNAL_VARIANCE_GRID: [f64; 3] = [0.5, 1.0, 2.0];
const LENGTH_SCALE_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub jitter: f64,
}

impl KernelParams {
    pub fn new(length_scale: f64, signal_variance: f64, jitter: f64) -> Result<Self> {
        if !(1e-3..=1e3).contains(&length_scale) {
            return Err(Error::InvalidParams(format!("length scale {length_scale} outside [1e-3, 1e3]")));
        }
        if !(1e-6..=1e6).contains(&signal_variance) {
            return Err(Error::InvalidParams(format!(
                "signal variance {signal_variance} outside [1e-6, 1e6]"
            )));
        }
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::InvalidParams(format!("jitter {jitter} must be non-negative")));
        }
        Ok(Self {
            length_scale,
            signal_variance,
            jitter,
        })
    }
}

/// Matérn 5/2 covariance as a function of the Euclidean distance `r`.
#[inline]
pub fn matern52_distance(r: f64, length_scale: f64, signal_variance: f64) -> f64 {
    let s = 5f64.sqrt() * r / length_scale;
    signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

pub fn matern52(x: &LowDimPoint, y: &LowDimPoint, params: &KernelParams) -> f64 {
    debug_assert_eq!(x.dim(), y.dim());
    matern52_distance(x.distance(y), params.length_scale, params.signal_variance)
}

/// 16 log-spaced length scales spanning `[1e-2, 1e1]`.
pub fn length_scale_grid() -> [f64; LENGTH_SCALE_POINTS] {
    let (lo, hi) = (1e-2f64.ln(), 1e1f64.ln());
    std::array::from_fn(|i| (lo + (hi - lo) * i as f64 / (LENGTH_SCALE_POINTS - 1) as f64).exp())
}

/// Training data `D` with the index of its minimum value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    points: Vec<LowDimPoint>,
    values: Vec<f64>,
    incumbent: Option<usize>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an observation. Rejects non-finite values, dimension changes and
    /// points within [`DUPLICATE_RADIUS`] of an existing one.
    pub fn insert(&mut self, point: LowDimPoint, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParams(format!("observation value {value} is not finite")));
        }
        if let Some(first) = self.points.first() {
            if first.dim() != point.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    actual: point.dim(),
                });
            }
        }
        if self.points.iter().any(|p| p.distance(&point) < DUPLICATE_RADIUS) {
            return Err(Error::DuplicatePoint);
        }
        self.points.push(point);
        self.values.push(value);
        let idx = self.values.len() - 1;
        match self.incumbent {
            Some(best) if self.values[best] <= value => {}
            _ => self.incumbent = Some(idx),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LowDimPoint] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(LowDimPoint::dim)
    }

    /// Best (lowest-valued) observation.
    pub fn incumbent(&self) -> Option<(&LowDimPoint, f64)> {
        self.incumbent.map(|i| (&self.points[i], self.values[i]))
    }
}

fn kernel_matrix(points: &[LowDimPoint], length_scale: f64, signal_variance: f64, jitter: f64) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = signal_variance + jitter;
        for j in 0..i {
            let v = matern52_distance(points[i].distance(&points[j]), length_scale, signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn jitter_ladder(start: f64) -> impl Iterator<Item = f64> {
    let mut next = Some(start);
    std::iter::from_fn(move || {
        let cur = next?;
        let bumped = (cur * 10.0).max(1e-8);
        // snap to the cap so round-off in the products cannot add a step
        let bumped = if bumped > 0.5 * MAX_JITTER { MAX_JITTER } else { bumped };
        next = (cur < MAX_JITTER).then_some(bumped);
        Some(cur)
    })
}

/// Factorizes `K + jitter·I`, escalating jitter tenfold up to [`MAX_JITTER`].
/// Returns the factor and the jitter that succeeded.
fn factorize(points: &[LowDimPoint], length_scale: f64, signal_variance: f64, jitter: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for j in jitter_ladder(jitter) {
        if let Some(chol) = kernel_matrix(points, length_scale, signal_variance, j).cholesky() {
            return Ok((chol, j));
        }
    }
    Err(Error::SingularKernel { jitter: MAX_JITTER })
}

fn lml_from_factor(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let alpha = chol.solve(y);
    let n = y.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    (lml, alpha)
}

/// Log marginal likelihood of (already standardized) `values` under `params`.
pub fn log_marginal_likelihood(points: &[LowDimPoint], values: &[f64], params: &KernelParams) -> Result<f64> {
    if points.len() != values.len() || points.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: values.len(),
        });
    }
    let (chol, _) = factorize(points, params.length_scale, params.signal_variance, params.jitter)?;
    Ok(lml_from_factor(&chol, &DVector::from_column_slice(values)).0)
}

/// `(mean, std)` used to standardize observation values. Constant data gets
/// `std = 1`.
pub fn standardization(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std < 1e-12 { 1.0 } else { std })
}

#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    train: ObservationSet,
    mean: f64,
    std: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    log_likelihood: f64,
}

/// Grid-search entry: log marginal likelihood, kernel, factor, weights.
type Candidate = (f64, KernelParams, Cholesky<f64, Dyn>, DVector<f64>);

impl GpModel {
    /// Fit on `obs`, choosing hyperparameters from the likelihood grid.
    pub fn fit(obs: &ObservationSet, jitter: f64) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::InvalidParams("cannot fit a GP on zero observations".into()));
        }
        let (mean, std) = standardization(obs.values());
        let y = DVector::from_iterator(obs.len(), obs.values().iter().map(|v| (v - mean) / std));

        let mut best: Option<Candidate> = None;
        for l in length_scale_grid() {
            for sv in SIGNAL_VARIANCE_GRID {
                let Ok((chol, used_jitter)) = factorize(obs.points(), l, sv, jitter) else {
                    continue;
                };
                let (lml, alpha) = lml_from_factor(&chol, &y);
                if !lml.is_finite() {
                    continue;
                }
                if best.as_ref().is_none_or(|b| lml > b.0) {
                    let params = KernelParams {
                        length_scale: l,
                        signal_variance: sv,
                        jitter: used_jitter,
                    };
                    best = Some((lml, params, chol, alpha));
                }
            }
        }
        let (log_likelihood, params, chol, alpha) = best.ok_or(Error::SingularKernel { jitter: MAX_JITTER })?;
        Ok(Self {
            params,
            train: obs.clone(),
            mean,
            std,
            chol,
            alpha,
            log_likelihood,
        })
    }

    /// Fit with fixed hyperparameters.
    pub fn fit_with(obs: &ObservationSet, params: KernelParams) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::InvalidParams("cannot fit a GP on zero observations".into()));
        }
        let (mean, std) = standardization(obs.values());
        let y = DVector::from_iterator(obs.len(), obs.values().iter().map(|v| (v - mean) / std));
        let (chol, used_jitter) = factorize(obs.points(), params.length_scale, params.signal_variance, params.jitter)?;
        let (log_likelihood, alpha) = lml_from_factor(&chol, &y);
        Ok(Self {
            params: KernelParams {
                jitter: used_jitter,
                ..params
            },
            train: obs.clone(),
            mean,
            std,
            chol,
            alpha,
            log_likelihood,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn train(&self) -> &ObservationSet {
        &self.train
    }

    pub fn standardization(&self) -> (f64, f64) {
        (self.mean, self.std)
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Lower-triangular Cholesky factor of `K + jitter·I`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Prior variance in de-standardized units.
    pub fn prior_variance(&self) -> f64 {
        self.params.signal_variance * self.std * self.std
    }

    /// Posterior `(mean, variance)` at `x`, in the units of the observations.
    pub fn posterior(&self, x: &LowDimPoint) -> (f64, f64) {
        let p = &self.params;
        let k_star = DVector::from_iterator(
            self.train.len(),
            self.train
                .points()
                .iter()
                .map(|t| matern52_distance(t.distance(x), p.length_scale, p.signal_variance)),
        );
        let mean_std = k_star.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .expect("cholesky factor has a positive diagonal");
        let var_std = (p.signal_variance - v.norm_squared()).max(0.0);
        (self.mean + self.std * mean_std, var_std * self.std * self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64]) -> LowDimPoint {
        LowDimPoint::new(c.to_vec()).unwrap()
    }

    // straight transcription of the closed form, kept apart from the library path
    fn matern_reference(r: f64, l: f64) -> f64 {
        let a = 5f64.sqrt() * r / l;
        (1.0 + a + 5.0 * r * r / (3.0 * l * l)) * (-(5f64.sqrt()) * r / l).exp()
    }

    #[test]
    fn kernel_reference_values() {
        let params = KernelParams::new(0.7, 1.0, 0.0).unwrap();
        assert_eq!(matern52(&pt(&[0.2, 0.4]), &pt(&[0.2, 0.4]), &params), 1.0);
        // r = l and r = 2l
        assert!((matern52_distance(1.0, 1.0, 1.0) - 0.523_994_9).abs() < 1e-6);
        assert!((matern52_distance(2.0, 1.0, 1.0) - 0.138_660_2).abs() < 1e-6);
        assert!((matern52_distance(0.7, 0.7, 1.0) - matern_reference(0.7, 0.7)).abs() < 1e-12);
    }

    #[test]
    fn kernel_symmetric_and_decaying() {
        let params = KernelParams::new(0.3, 2.0, 0.0).unwrap();
        let a = pt(&[0.1, 0.9, 0.3]);
        let b = pt(&[0.6, 0.2, 0.5]);
        assert_eq!(matern52(&a, &b, &params), matern52(&b, &a, &params));
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let v = matern52_distance(f64::from(i) * 0.003, 0.3, 2.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn kernel_params_validated() {
        assert!(KernelParams::new(1e-4, 1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, 1e7, 0.0).is_err());
        assert!(KernelParams::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn grid_spans_endpoints() {
        let g = length_scale_grid();
        assert!((g[0] - 1e-2).abs() < 1e-15);
        assert!((g[15] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn observation_set_tracks_incumbent_and_rejects_duplicates() {
        let mut obs = ObservationSet::new();
        obs.insert(pt(&[0.1]), 3.0).unwrap();
        obs.insert(pt(&[0.5]), 1.0).unwrap();
        obs.insert(pt(&[0.9]), 2.0).unwrap();
        assert_eq!(obs.incumbent().unwrap().1, 1.0);
        assert!(matches!(obs.insert(pt(&[0.5 + 1e-10]), 0.0), Err(Error::DuplicatePoint)));
        assert!(obs.insert(pt(&[0.2, 0.3]), 0.0).is_err());
        assert!(obs.insert(pt(&[0.3]), f64::NAN).is_err());
        assert_eq!(obs.len(), 3);
    }

    #[test]
    fn single_observation_interpolated() {
        let mut obs = ObservationSet::new();
        obs.insert(pt(&[0.3, 0.3]), 4.2).unwrap();
        let gp = GpModel::fit(&obs, DEFAULT_JITTER).unwrap();
        let (m, v) = gp.posterior(&pt(&[0.3, 0.3]));
        assert!((m - 4.2).abs() < 1e-6);
        assert!(v <= 1e-4 * gp.params().signal_variance);
    }

    #[test]
    fn constant_data_gives_constant_mean() {
        let mut obs = ObservationSet::new();
        obs.insert(pt(&[0.1, 0.2]), 7.5).unwrap();
        obs.insert(pt(&[0.8, 0.6]), 7.5).unwrap();
        let (mean, std) = standardization(obs.values());
        assert_eq!(((7.5 - mean) / std, (7.5 - mean) / std), (0.0, 0.0));
        let gp = GpModel::fit(&obs, DEFAULT_JITTER).unwrap();
        for q in [[0.0, 0.0], [0.5, 0.5], [1.0, 0.3]] {
            assert!((gp.posterior(&pt(&q)).0 - 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_of_symmetric_pair_averages() {
        let mut obs = ObservationSet::new();
        obs.insert(pt(&[0.2]), 1.0).unwrap();
        obs.insert(pt(&[0.8]), 3.0).unwrap();
        let gp = GpModel::fit(&obs, DEFAULT_JITTER).unwrap();
        assert!((gp.posterior(&pt(&[0.5])).0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn prior_recovered_far_from_data() {
        let mut obs = ObservationSet::new();
        obs.insert(pt(&[0.0, 0.0]), 1.0).unwrap();
        obs.insert(pt(&[0.01, 0.0]), 2.0).unwrap();
        obs.insert(pt(&[0.0, 0.01]), 4.0).unwrap();
        let params = KernelParams::new(0.05, 1.0, DEFAULT_JITTER).unwrap();
        let gp = GpModel::fit_with(&obs, params).unwrap();
        let (m, v) = gp.posterior(&pt(&[1.0, 1.0]));
        let data_mean = 7.0 / 3.0;
        assert!((m - data_mean).abs() < 1e-3);
        assert!((v - gp.prior_variance()).abs() < 1e-3);
    }

    #[test]
    fn fitted_likelihood_beats_grid_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut obs = ObservationSet::new();
        for _ in 0..20 {
            let c: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let v = (3.0 * c[0]).sin() + c[1] * c[1] - 0.5 * c[2];
            obs.insert(pt(&c), v).unwrap();
        }
        let gp = GpModel::fit(&obs, DEFAULT_JITTER).unwrap();
        let (mean, std) = gp.standardization();
        let y: Vec<f64> = obs.values().iter().map(|v| (v - mean) / std).collect();
        let fitted = log_marginal_likelihood(obs.points(), &y, gp.params()).unwrap();
        assert!((fitted - gp.log_likelihood()).abs() < 1e-9);
        let grid = length_scale_grid();
        for l in [grid[0], grid[15]] {
            for sv in SIGNAL_VARIANCE_GRID {
                let p = KernelParams::new(l, sv, DEFAULT_JITTER).unwrap();
                assert!(fitted >= log_marginal_likelihood(obs.points(), &y, &p).unwrap());
            }
        }
    }

    #[test]
    fn cholesky_reconstructs_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut obs = ObservationSet::new();
        for _ in 0..12 {
            let c: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            obs.insert(pt(&c), rng.random()).unwrap();
        }
        let gp = GpModel::fit(&obs, DEFAULT_JITTER).unwrap();
        let p = gp.params();
        let k = kernel_matrix(obs.points(), p.length_scale, p.signal_variance, p.jitter);
        let l = gp.cholesky_factor();
        assert!((&l * l.transpose() - k).abs().max() < 1e-8);
    }

    #[test]
    fn round_trip_at_training_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut obs = ObservationSet::new();
        for _ in 0..15 {
            let c: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            obs.insert(pt(&c), 10.0 * rng.random::<f64>() - 3.0).unwrap();
        }
        let gp = GpModel::fit(&obs, DEFAULT_JITTER).unwrap();
        for (p, v) in obs.points().iter().zip(obs.values()) {
            let (m, var) = gp.posterior(p);
            assert!((m - v).abs() < 1e-4, "{m} vs {v}");
            assert!(var >= 0.0);
        }
    }

    #[test]
    fn jitter_ladder_steps() {
        let steps: Vec<f64> = jitter_ladder(1e-6).collect();
        assert_eq!(steps.len(), 3);
        assert!((steps[2] - 1e-4).abs() < 1e-18);
        assert_eq!(jitter_ladder(0.0).count(), 6);
    }
}
