//! TOML experiment configuration.
//!
//! ```toml
//! attack = "bo"              # or "random"
//! generator = "bilinear"
//! budget = 300
//! seeds = [0, 1, 2]
//! summary_budgets = [50, 100, 200, 300]
//! output_dir = "out"
//!
//! [image]
//! height = 16
//! width = 16
//! channels = 1
//!
//! [oracle]
//! kind = "halfspace"
//! normal = "uniform"
//! margin = 2.0
//!
//! [[tasks]]
//! fill = 0.4286
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use bodba::acquisition::AcquisitionConfig;
use bodba::boundary::SearchParams;
use bodba::generators::{GeneratorKind, GeneratorSpec};
use bodba::gp::DEFAULT_JITTER;
use bodba::oracles::{HalfspaceOracle, MlpOracle, Oracle, RemoteOracle, SphereOracle, SqueezeOracle};
use bodba::{AttackMode, AttackTask, BoConfig, Sample, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Bo,
    Random,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Bo => "bo",
            AttackKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl From<ImageShape> for Shape {
    fn from(s: ImageShape) -> Self {
        Shape::new(s.height, s.width, s.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormalSpec {
    /// `"uniform"`: every pixel weighted equally.
    Named(String),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OracleConfig {
    Halfspace {
        /// Normalized on load. Defaults to `"uniform"` unless `normal_seed` is set.
        #[serde(default)]
        normal: Option<NormalSpec>,
        /// Gaussian random normal from this seed.
        #[serde(default)]
        normal_seed: Option<u64>,
        /// Boundary `w·x = offset`.
        #[serde(default)]
        offset: Option<f64>,
        /// Boundary at this distance from each task's origin along `w`.
        #[serde(default)]
        margin: Option<f64>,
        #[serde(default)]
        squeeze_bits: Option<u32>,
    },
    Sphere {
        radius: f64,
        /// Constant-image center; defaults to each task's origin.
        #[serde(default)]
        center_fill: Option<f64>,
        #[serde(default)]
        squeeze_bits: Option<u32>,
    },
    Mlp {
        weights: PathBuf,
        #[serde(default)]
        squeeze_bits: Option<u32>,
    },
    Remote {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        squeeze_bits: Option<u32>,
    },
}

fn default_timeout_ms() -> u64 {
    5000
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Constant image.
    #[serde(default)]
    pub fill: Option<f64>,
    /// Explicit pixel values in row-major, channel-last order.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Uniform random image from this seed.
    #[serde(default)]
    pub random_seed: Option<u64>,
    /// True label; defaults to the oracle's answer on the origin.
    #[serde(default)]
    pub label: Option<usize>,
    /// Target class for a targeted attack.
    #[serde(default)]
    pub target: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoSection {
    pub init_samples: usize,
    pub max_iterations: usize,
    pub stop_tolerance: f64,
    pub candidates: usize,
    pub refine_steps: usize,
    pub refine_radius: f64,
    pub jitter: f64,
}

impl Default for BoSection {
    fn default() -> Self {
        let bo = BoConfig::default();
        Self {
            init_samples: bo.init_samples,
            max_iterations: bo.max_iterations,
            stop_tolerance: bo.stop_tolerance,
            candidates: bo.acquisition.candidate_count,
            refine_steps: bo.acquisition.refine_steps,
            refine_radius: bo.acquisition.refine_radius,
            jitter: DEFAULT_JITTER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub step: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub attack: AttackKind,
    pub generator: String,
    #[serde(default)]
    pub generator_seed: u64,
    pub budget: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub summary_budgets: Vec<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Record real elapsed time in traces; off keeps reruns byte-identical.
    #[serde(default)]
    pub wall_clock: bool,
    pub image: ImageShape,
    pub oracle: OracleConfig,
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub search: SearchSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses, resolves relative paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        if let OracleConfig::Mlp { weights, .. } = &mut self.oracle {
            if weights.is_relative() {
                *weights = base.join(&*weights);
            }
        }
    }

    pub fn shape(&self) -> Shape {
        self.image.into()
    }

    pub fn generator_kind(&self) -> Result<GeneratorKind> {
        self.generator.parse().map_err(|e: bodba::Error| config_err(e.to_string()))
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        Ok(GeneratorSpec::new(self.generator_kind()?, self.shape())
            .map_err(|e| config_err(e.to_string()))?
            .with_seed(self.generator_seed))
    }

    pub fn search_params(&self) -> Result<SearchParams> {
        let d = SearchParams::for_dimension(self.shape().len());
        let s = &self.search;
        SearchParams::new(
            s.step.unwrap_or(d.step),
            s.tolerance.unwrap_or(d.tolerance),
            s.max_distance.unwrap_or(d.max_distance),
        )
        .map_err(|e| config_err(e.to_string()))
    }

    pub fn bo_config(&self, seed: u64) -> BoConfig {
        let b = &self.bo;
        BoConfig {
            init_samples: b.init_samples,
            max_iterations: b.max_iterations,
            stop_tolerance: b.stop_tolerance,
            seed,
            acquisition: AcquisitionConfig {
                candidate_count: b.candidates,
                refine_steps: b.refine_steps,
                refine_radius: b.refine_radius,
                rng_seed: 0,
            },
            jitter: b.jitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.shape();
        if shape.is_empty() {
            return Err(config_err("image shape has a zero dimension"));
        }
        if self.budget == 0 {
            return Err(config_err("budget must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        if self.tasks.is_empty() {
            return Err(config_err("at least one task is required"));
        }
        self.generator_spec()?;
        let search = self.search_params()?;
        if self.attack == AttackKind::Bo {
            self.bo_config(0).validate().map_err(|e| config_err(e.to_string()))?;
        }
        let evaluations = if self.attack == AttackKind::Bo { self.bo.init_samples } else { 1 };
        if self.budget < evaluations * search.min_queries() {
            return Err(config_err(format!(
                "budget {} cannot cover {evaluations} evaluations of at least {} queries",
                self.budget,
                search.min_queries()
            )));
        }
        if self.summary_budgets.contains(&0) {
            return Err(config_err("summary budgets must be positive"));
        }
        validate_oracle(&self.oracle, shape)?;
        for (i, t) in self.tasks.iter().enumerate() {
            let sources = [t.fill.is_some(), t.values.is_some(), t.random_seed.is_some()];
            if sources.iter().filter(|&&s| s).count() != 1 {
                return Err(config_err(format!("task {i}: set exactly one of fill, values, random_seed")));
            }
            if let Some(v) = &t.values {
                if v.len() != shape.len() {
                    return Err(config_err(format!("task {i}: {} values for {} pixels", v.len(), shape.len())));
                }
            }
            if let (Some(l), Some(k)) = (t.label, t.target) {
                if l == k {
                    return Err(config_err(format!("task {i}: target equals label")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the configuration, leaving
    /// out where results are written.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output_dir = PathBuf::new();
        let canonical = serde_json::to_vec(&cfg).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn origin(&self, task: usize) -> Result<Sample> {
        let shape = self.shape();
        let t = &self.tasks[task];
        let values = if let Some(f) = t.fill {
            vec![f; shape.len()]
        } else if let Some(v) = &t.values {
            v.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(t.random_seed.unwrap_or(0));
            (0..shape.len()).map(|_| rng.random::<f64>()).collect()
        };
        Ok(Sample::new(values, shape)?)
    }

    /// Builds the oracle for one run; halfspace margins and default sphere
    /// centers depend on the task's origin.
    pub fn build_oracle(&self, origin: &Sample) -> Result<Box<dyn Oracle>> {
        build_oracle(&self.oracle, self.shape(), Some(origin))
    }

    pub fn attack_task(&self, task: usize, origin: Sample, oracle: &dyn Oracle) -> Result<AttackTask> {
        let t = &self.tasks[task];
        let label = match t.label {
            Some(l) => l,
            None => oracle.classify(&origin)?,
        };
        let mode = match t.target {
            Some(k) => AttackMode::Targeted(k),
            None => AttackMode::Untargeted,
        };
        AttackTask::new(origin, label, mode, self.budget).map_err(|e| config_err(format!("task {task}: {e}")))
    }
}

pub fn validate_oracle(oracle: &OracleConfig, shape: Shape) -> Result<()> {
    let bits = match oracle {
        OracleConfig::Halfspace {
            normal,
            normal_seed,
            offset,
            margin,
            squeeze_bits,
        } => {
            if normal.is_some() && normal_seed.is_some() {
                return Err(config_err("halfspace: set normal or normal_seed, not both"));
            }
            if offset.is_some() == margin.is_some() {
                return Err(config_err("halfspace: set exactly one of offset, margin"));
            }
            match normal {
                Some(NormalSpec::Named(n)) if n != "uniform" => {
                    return Err(config_err(format!("halfspace: unknown normal {n:?}")));
                }
                Some(NormalSpec::Explicit(v)) if v.len() != shape.len() => {
                    return Err(config_err("halfspace: normal length differs from the image size"));
                }
                _ => {}
            }
            squeeze_bits
        }
        OracleConfig::Sphere {
            radius, squeeze_bits, ..
        } => {
            if radius.is_nan() || *radius <= 0.0 {
                return Err(config_err("sphere: radius must be positive"));
            }
            squeeze_bits
        }
        OracleConfig::Mlp { weights, squeeze_bits } => {
            if !weights.is_file() {
                return Err(config_err(format!("mlp weights {} not found", weights.display())));
            }
            squeeze_bits
        }
        OracleConfig::Remote {
            endpoint, squeeze_bits, ..
        } => {
            if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                return Err(config_err(format!("remote endpoint {endpoint:?} is not an http(s) URL")));
            }
            squeeze_bits
        }
    };
    if let Some(b) = bits {
        if !(1..=8).contains(b) {
            return Err(config_err("squeeze_bits must be in 1..=8"));
        }
    }
    Ok(())
}

/// Builds an oracle for `shape`. A halfspace `margin` and a sphere without
/// `center_fill` are placed relative to `origin`, which they then require.
pub fn build_oracle(oracle: &OracleConfig, shape: Shape, origin: Option<&Sample>) -> Result<Box<dyn Oracle>> {
    let (inner, bits): (Box<dyn Oracle>, Option<u32>) = match oracle {
        OracleConfig::Halfspace {
            normal,
            normal_seed,
            offset,
            margin,
            squeeze_bits,
        } => {
            let raw = match (normal, normal_seed) {
                (Some(NormalSpec::Explicit(v)), _) => v.clone(),
                (_, Some(seed)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    (0..shape.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
                }
                _ => vec![1.0; shape.len()],
            };
            let unit = HalfspaceOracle::from_unnormalized(&raw, 0.0, shape)?;
            let b = match (offset, margin) {
                (Some(b), _) => *b,
                (_, Some(m)) => {
                    let origin = origin.ok_or_else(|| config_err("halfspace margin needs a task origin; use offset"))?;
                    unit.margin(origin.values()) + m
                }
                _ => unreachable!("validated"),
            };
            (Box::new(HalfspaceOracle::new(unit.normal().to_vec(), b, shape)?), *squeeze_bits)
        }
        OracleConfig::Sphere {
            radius,
            center_fill,
            squeeze_bits,
        } => {
            let center = match center_fill {
                Some(f) => Sample::filled(shape, *f)?,
                None => origin
                    .ok_or_else(|| config_err("sphere without center_fill needs a task origin"))?
                    .clone(),
            };
            (Box::new(SphereOracle::new(center, *radius)?), *squeeze_bits)
        }
        OracleConfig::Mlp { weights, squeeze_bits } => {
            let net = MlpOracle::load(weights).map_err(|e| match e {
                bodba::Error::Io(io) => HarnessError::io(weights, io),
                other => config_err(format!("{}: {other}", weights.display())),
            })?;
            (Box::new(net), *squeeze_bits)
        }
        OracleConfig::Remote {
            endpoint,
            timeout_ms,
            squeeze_bits,
        } => {
            let remote = RemoteOracle::discover(endpoint, Duration::from_millis(*timeout_ms))?;
            (Box::new(remote), *squeeze_bits)
        }
    };
    if inner.input_shape() != shape {
        return Err(config_err(format!(
            "oracle expects shape {:?}, config image is {:?}",
            inner.input_shape().as_tuple(),
            shape.as_tuple()
        )));
    }
    Ok(match bits {
        Some(b) => Box::new(SqueezeOracle::new(inner, b)?),
        None => inner,
    })
}
