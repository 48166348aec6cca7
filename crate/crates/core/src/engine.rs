//! The attack loop: seed the surrogate with random directions, then
//! alternate GP fit, EI maximization and one boundary-distance evaluation
//! until the budget (in oracle queries) or the iteration cap runs out.
//! A random-direction search with the same accounting serves as baseline.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acquisition::{maximize_acquisition, AcquisitionConfig};
use crate::boundary::{evaluate_distance, SearchParams};
use crate::domain::{normalize_direction, AttackTask, Direction, LowDimPoint, QueryCounter, Sample};
use crate::error::{Error, Result};
use crate::generators::{generate, GeneratorSpec};
use crate::gp::{GpModel, ObservationSet, DEFAULT_JITTER};
use crate::oracles::Oracle;
use crate::trace::{AttackTrace, TraceHeader, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoConfig {
    /// Random directions evaluated before the first GP fit (`T₀`).
    pub init_samples: usize,
    /// Cap on the total number of distance evaluations (`T`).
    pub max_iterations: usize,
    /// Stop as soon as an evaluation reaches this distance; 0 disables.
    pub stop_tolerance: f64,
    pub seed: u64,
    pub acquisition: AcquisitionConfig,
    pub jitter: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            init_samples: 5,
            max_iterations: 10_000,
            stop_tolerance: 0.0,
            seed: 0,
            acquisition: AcquisitionConfig::default(),
            jitter: DEFAULT_JITTER,
        }
    }
}

impl BoConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.init_samples == 0 {
            return Err(Error::InvalidParams("init_samples must be at least 1".into()));
        }
        if self.max_iterations < self.init_samples {
            return Err(Error::InvalidParams("max_iterations must be >= init_samples".into()));
        }
        if !(0.0..).contains(&self.stop_tolerance) {
            return Err(Error::InvalidParams("stop_tolerance must be non-negative".into()));
        }
        self.acquisition.validate()
    }
}

/// One distance evaluation as seen by the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: LowDimPoint,
    pub distance: f64,
    pub capped: bool,
    pub adversarial: bool,
    /// The budget ran out before the evaluation finished.
    pub interrupted: bool,
    pub queries_spent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// `x₀ + Δ*·θ*` (unclipped).
    pub adversarial: Sample,
    pub best_point: LowDimPoint,
    pub distance_l2: f64,
    pub distance_linf: f64,
    pub queries_used: usize,
    /// Stopped early because an evaluation reached the stop tolerance.
    pub converged: bool,
    /// The returned point was answered adversarial by the oracle.
    pub found_adversarial: bool,
    pub evaluations: Vec<Evaluation>,
    pub trace: AttackTrace,
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Core(#[from] Error),
    /// Every evaluation was capped; the boxed result carries the best capped
    /// distance and its trace.
    #[error("no adversarial example found (best capped distance {})", .0.distance_l2)]
    NoAdversarialFound(Box<AttackResult>),
}

impl AttackError {
    /// The partial result, when there is one.
    pub fn result(&self) -> Option<&AttackResult> {
        match self {
            AttackError::NoAdversarialFound(r) => Some(r),
            AttackError::Core(_) => None,
        }
    }
}

struct Best {
    index: usize,
    direction: Direction,
}

struct Run<'a> {
    task: &'a AttackTask,
    oracle: &'a dyn Oracle,
    spec: &'a GeneratorSpec,
    search: &'a SearchParams,
    counter: QueryCounter,
    started: Instant,
    trace: AttackTrace,
    evaluations: Vec<Evaluation>,
    best: Option<Best>,
    best_distance: f64,
    fallback: Option<(usize, Direction)>,
}

impl<'a> Run<'a> {
    fn new(
        task: &'a AttackTask,
        oracle: &'a dyn Oracle,
        spec: &'a GeneratorSpec,
        search: &'a SearchParams,
        header: TraceHeader,
    ) -> Result<Self> {
        search.validate()?;
        let shape = task.origin.shape();
        if spec.target_shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.as_tuple(),
                actual: spec.target_shape().as_tuple(),
            });
        }
        if oracle.input_shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: oracle.input_shape().as_tuple(),
                actual: shape.as_tuple(),
            });
        }
        Ok(Self {
            task,
            oracle,
            spec,
            search,
            counter: QueryCounter::new(task.budget),
            started: Instant::now(),
            trace: AttackTrace::new(header),
            evaluations: Vec::new(),
            best: None,
            best_distance: search.max_distance,
            fallback: None,
        })
    }

    fn exhausted(&self) -> bool {
        self.counter.is_exhausted()
    }

    fn evaluate(&mut self, point: LowDimPoint) -> Result<Evaluation> {
        let shape = self.task.origin.shape();
        let direction = match generate(self.spec, &point).and_then(|s| normalize_direction(s.values(), shape)) {
            Ok(d) => d,
            // a zero perturbation has no direction; score it like a miss
            Err(Error::ZeroPerturbation) => {
                let ev = Evaluation {
                    point,
                    distance: self.search.max_distance,
                    capped: true,
                    adversarial: false,
                    interrupted: false,
                    queries_spent: 0,
                };
                self.evaluations.push(ev.clone());
                return Ok(ev);
            }
            Err(e) => return Err(e),
        };

        let rule = self.task.decision_rule();
        let bd = evaluate_distance(&rule, self.oracle, &self.task.origin, &direction, self.search, &mut self.counter)?;

        let improves = bd.adversarial && (self.best.is_none() || bd.distance < self.best_distance);
        let last = bd.probes.len().saturating_sub(1);
        for (i, probe) in bd.probes.iter().enumerate() {
            if improves && i == last {
                self.best_distance = self.best_distance.min(bd.distance);
            }
            self.trace.records.push(TraceRecord {
                query_index: self.trace.records.len() + 1,
                delta_probe: probe.distance,
                decision: probe.decision.sign(),
                best_distance: self.best_distance,
                elapsed_ms: probe.at.duration_since(self.started).as_secs_f64() * 1e3,
            });
        }

        let index = self.evaluations.len();
        if improves {
            self.best = Some(Best { index, direction });
        } else if self.fallback.is_none() {
            self.fallback = Some((index, direction));
        }
        let ev = Evaluation {
            point,
            distance: bd.distance,
            capped: bd.capped,
            adversarial: bd.adversarial,
            interrupted: bd.budget_exhausted,
            queries_spent: bd.queries_spent,
        };
        self.evaluations.push(ev.clone());
        Ok(ev)
    }

    fn finish(self, converged: bool) -> std::result::Result<AttackResult, AttackError> {
        if self.evaluations.iter().all(|e| e.interrupted) {
            return Err(Error::InsufficientBudget {
                budget: self.task.budget,
                reason: "budget ran out before any distance evaluation completed".into(),
            }
            .into());
        }
        let (index, direction, found) = match (self.best, self.fallback) {
            (Some(b), _) => (b.index, b.direction, true),
            (None, Some((i, d))) => (i, d, false),
            (None, None) => {
                // only zero-perturbation evaluations: no direction at all
                return Err(Error::ZeroPerturbation.into());
            }
        };
        let ev = &self.evaluations[index];
        let distance = ev.distance;
        let result = AttackResult {
            adversarial: self.task.origin.offset(&direction, distance)?,
            best_point: ev.point.clone(),
            distance_l2: distance,
            distance_linf: distance * direction.linf(),
            queries_used: self.counter.used(),
            converged,
            found_adversarial: found,
            evaluations: self.evaluations,
            trace: self.trace,
        };
        debug_assert_eq!(result.trace.len(), result.queries_used);
        if found {
            Ok(result)
        } else {
            Err(AttackError::NoAdversarialFound(Box::new(result)))
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> LowDimPoint {
    LowDimPoint::clamped((0..dim).map(|_| rng.random::<f64>()).collect())
}

fn acquisition_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (iteration as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn check_budget(task: &AttackTask, search: &SearchParams, evaluations: usize) -> Result<()> {
    let needed = evaluations * search.min_queries();
    if task.budget < needed {
        return Err(Error::InsufficientBudget {
            budget: task.budget,
            reason: format!("{evaluations} evaluations need at least {needed} queries"),
        });
    }
    Ok(())
}

/// Run the Bayesian-optimization attack.
pub fn run_attack(
    task: &AttackTask,
    oracle: &dyn Oracle,
    spec: &GeneratorSpec,
    bo: &BoConfig,
    search: &SearchParams,
) -> std::result::Result<AttackResult, AttackError> {
    bo.validate()?;
    check_budget(task, search, bo.init_samples)?;
    let header = TraceHeader {
        config_hash: String::new(),
        seed: bo.seed,
        attack: "bo".into(),
        generator: spec.kind().name().into(),
        budget: task.budget,
    };
    let mut run = Run::new(task, oracle, spec, search, header)?;
    let mut rng = ChaCha8Rng::seed_from_u64(bo.seed);
    let dim = spec.input_dim();
    let mut obs = ObservationSet::new();

    for _ in 0..bo.init_samples {
        if run.exhausted() {
            break;
        }
        let ev = run.evaluate(random_point(&mut rng, dim))?;
        observe(&mut obs, &ev);
    }

    let mut t = run.evaluations.len();
    while t < bo.max_iterations && !run.exhausted() {
        let point = match propose(&obs, bo, t) {
            Some(p) => p,
            None => random_point(&mut rng, dim),
        };
        t += 1;
        let ev = run.evaluate(point)?;
        if bo.stop_tolerance > 0.0 && ev.adversarial && !ev.capped && ev.distance <= bo.stop_tolerance {
            return run.finish(true);
        }
        observe(&mut obs, &ev);
    }
    run.finish(false)
}

fn observe(obs: &mut ObservationSet, ev: &Evaluation) {
    // a cut-off evaluation says nothing reliable about its direction
    if ev.interrupted {
        return;
    }
    match obs.insert(ev.point.clone(), ev.distance) {
        Ok(()) | Err(Error::DuplicatePoint) => {}
        Err(e) => debug_assert!(false, "unexpected insert failure: {e}"),
    }
}

fn propose(obs: &ObservationSet, bo: &BoConfig, iteration: usize) -> Option<LowDimPoint> {
    let (_, incumbent) = obs.incumbent()?;
    let model = GpModel::fit(obs, bo.jitter).ok()?;
    let cfg = AcquisitionConfig {
        rng_seed: acquisition_seed(bo.seed, iteration),
        ..bo.acquisition
    };
    maximize_acquisition(&model, incumbent, &cfg).ok().map(|p| p.point)
}

/// Random-direction search with the same accounting and trace format.
pub fn run_random_baseline(
    task: &AttackTask,
    oracle: &dyn Oracle,
    spec: &GeneratorSpec,
    search: &SearchParams,
    seed: u64,
) -> std::result::Result<AttackResult, AttackError> {
    check_budget(task, search, 1)?;
    let header = TraceHeader {
        config_hash: String::new(),
        seed,
        attack: "random".into(),
        generator: spec.kind().name().into(),
        budget: task.budget,
    };
    let mut run = Run::new(task, oracle, spec, search, header)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.input_dim();
    // zero-query evaluations cannot loop forever
    let mut attempts = 0;
    while !run.exhausted() && attempts < task.budget * 4 {
        attempts += 1;
        run.evaluate(random_point(&mut rng, dim))?;
    }
    run.finish(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttackMode, Shape};
    use crate::generators::GeneratorKind;
    use crate::oracles::{HalfspaceOracle, SphereOracle};

    const SHAPE: Shape = Shape::new(16, 16, 1);

    // labels by distance band from the center: 0 inside r1, 1 up to r2, 2 beyond
    struct Bands {
        center: Sample,
        r1: f64,
        r2: f64,
    }

    impl Oracle for Bands {
        fn classify(&self, x: &Sample) -> Result<usize> {
            let r = x
                .values()
                .iter()
                .zip(self.center.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(if r <= self.r1 { 0 } else if r <= self.r2 { 1 } else { 2 })
        }
        fn num_classes(&self) -> usize {
            3
        }
        fn input_shape(&self) -> Shape {
            self.center.shape()
        }
    }

    fn center() -> Sample {
        Sample::filled(SHAPE, 0.5).unwrap()
    }

    fn fast_bo(seed: u64) -> BoConfig {
        BoConfig {
            acquisition: AcquisitionConfig {
                candidate_count: 200,
                ..AcquisitionConfig::default()
            },
            ..BoConfig::default().with_seed(seed)
        }
    }

    fn untimed(trace: &AttackTrace) -> Vec<(usize, f64, i8, f64)> {
        trace
            .records
            .iter()
            .map(|r| (r.query_index, r.delta_probe, r.decision, r.best_distance))
            .collect()
    }

    fn check_accounting(r: &AttackResult, budget: usize) {
        assert_eq!(r.trace.len(), r.queries_used);
        assert!(r.queries_used <= budget);
        assert_eq!(r.evaluations.iter().map(|e| e.queries_spent).sum::<usize>(), r.queries_used);
        r.trace.validate().unwrap();
    }

    #[test]
    fn sphere_distance_is_radius() {
        let oracle = SphereOracle::new(center(), 3.0).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, 120).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Perlin, SHAPE).unwrap();
        let r = run_attack(&task, &oracle, &spec, &fast_bo(3), &search).unwrap();
        assert!(r.found_adversarial);
        assert!((r.distance_l2 - 3.0).abs() <= search.tolerance, "{}", r.distance_l2);
        assert_eq!(oracle.classify(&r.adversarial).unwrap(), 1);
        check_accounting(&r, 120);
    }

    #[test]
    fn budget_is_spent_exactly() {
        let oracle = HalfspaceOracle::axis(SHAPE, 7, 0.9).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, 97).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Bilinear, SHAPE).unwrap();
        let r = run_attack(&task, &oracle, &spec, &fast_bo(1), &search).unwrap();
        assert_eq!(r.queries_used, 97);
        check_accounting(&r, 97);
        let last = r.trace.records.last().unwrap();
        assert_eq!(last.best_distance, r.distance_l2);
    }

    #[test]
    fn same_seed_same_trace() {
        let oracle = HalfspaceOracle::axis(SHAPE, 40, 0.8).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, 80).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Perlin, SHAPE).unwrap();
        let a = run_attack(&task, &oracle, &spec, &fast_bo(11), &search).unwrap();
        let b = run_attack(&task, &oracle, &spec, &fast_bo(11), &search).unwrap();
        assert_eq!(untimed(&a.trace), untimed(&b.trace));
        assert_eq!(a.best_point, b.best_point);
        let c = run_attack(&task, &oracle, &spec, &fast_bo(12), &search).unwrap();
        assert_ne!(untimed(&a.trace), untimed(&c.trace));

        let ra = run_random_baseline(&task, &oracle, &spec, &search, 5).unwrap();
        let rb = run_random_baseline(&task, &oracle, &spec, &search, 5).unwrap();
        assert_eq!(untimed(&ra.trace), untimed(&rb.trace));
        check_accounting(&ra, 80);
    }

    #[test]
    fn targeted_attack_reaches_target_band() {
        let oracle = Bands {
            center: center(),
            r1: 1.0,
            r2: 2.5,
        };
        let search = SearchParams::for_dimension(SHAPE.len());
        let spec = GeneratorSpec::new(GeneratorKind::Nearest, SHAPE).unwrap();
        let untargeted = AttackTask::new(center(), 0, AttackMode::Untargeted, 60).unwrap();
        let r = run_attack(&untargeted, &oracle, &spec, &fast_bo(2), &search).unwrap();
        assert!((r.distance_l2 - 1.0).abs() <= search.tolerance);

        let targeted = AttackTask::new(center(), 0, AttackMode::Targeted(2), 60).unwrap();
        let r = run_attack(&targeted, &oracle, &spec, &fast_bo(2), &search).unwrap();
        assert!((r.distance_l2 - 2.5).abs() <= search.tolerance);
        assert_eq!(oracle.classify(&r.adversarial).unwrap(), 2);
    }

    #[test]
    fn unreachable_boundary_reports_no_adversarial() {
        // w·x > 100 is impossible within Δ_max = 16 of the center
        let oracle = HalfspaceOracle::axis(SHAPE, 0, 100.0).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, 70).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Cluster, SHAPE).unwrap();
        let err = run_attack(&task, &oracle, &spec, &fast_bo(0), &search).unwrap_err();
        let r = err.result().expect("partial result");
        assert!(!r.found_adversarial);
        assert_eq!(r.distance_l2, search.max_distance);
        assert_eq!(r.queries_used, 70);
        check_accounting(r, 70);
        assert!(r.trace.records.iter().all(|rec| rec.best_distance == search.max_distance));
    }

    #[test]
    fn budget_below_initial_design_rejected() {
        let oracle = SphereOracle::new(center(), 3.0).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let budget = 5 * search.min_queries() - 1;
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, budget).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Perlin, SHAPE).unwrap();
        let err = run_attack(&task, &oracle, &spec, &fast_bo(0), &search).unwrap_err();
        assert!(matches!(err, AttackError::Core(Error::InsufficientBudget { .. })));
    }

    #[test]
    fn stop_tolerance_ends_early() {
        let oracle = SphereOracle::new(center(), 3.0).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, 400).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Perlin, SHAPE).unwrap();
        let bo = BoConfig {
            stop_tolerance: 3.1,
            ..fast_bo(4)
        };
        let r = run_attack(&task, &oracle, &spec, &bo, &search).unwrap();
        assert!(r.converged);
        assert!(r.queries_used < 400);
        check_accounting(&r, 400);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let oracle = SphereOracle::new(center(), 3.0).unwrap();
        let search = SearchParams::for_dimension(SHAPE.len());
        let task = AttackTask::new(center(), 0, AttackMode::Untargeted, 100).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::Perlin, Shape::new(8, 8, 1)).unwrap();
        let err = run_attack(&task, &oracle, &spec, &fast_bo(0), &search).unwrap_err();
        assert!(matches!(err, AttackError::Core(Error::ShapeMismatch { .. })));
    }
}
