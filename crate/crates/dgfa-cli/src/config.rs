//! Experiment configuration: a single JSON document selecting the model
//! family, the truncation dimensions, and the simulation parameters.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use dgfa::linalg::Tolerances;
use dgfa::model::{FactorDynamics, LoadingGenerator, NoiseModel};
use dgfa::nalgebra::DMatrix;
use dgfa::{mat_from_f64, pollution};

/// Top-level experiment configuration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    /// Simulation length (simulate command only).
    #[serde(rename = "T", default = "default_t")]
    pub t: usize,
    #[serde(default)]
    pub seed: u64,
    /// Samples discarded before statistics; defaults to `T / 10`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub tolerances: Option<ToleranceOverrides>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_t() -> usize {
    100_000
}

/// `"pollution"` selects the built-in sensor-network benchmark;
/// `{"custom": "model.json"}` points at a model-spec file.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Pollution,
    Custom(PathBuf),
}

/// Optional per-run solver tolerance overrides.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub abs: Option<f64>,
    pub rel: Option<f64>,
    pub fixed_point_rel_change: Option<f64>,
    pub max_iterations: Option<usize>,
    pub stability_margin: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, mut tol: Tolerances) -> Tolerances {
        if let Some(x) = self.abs {
            tol.abs = x;
        }
        if let Some(x) = self.rel {
            tol.rel = x;
        }
        if let Some(x) = self.fixed_point_rel_change {
            tol.fixed_point_rel_change = x;
        }
        if let Some(x) = self.max_iterations {
            tol.max_iterations = x;
        }
        if let Some(x) = self.stability_margin {
            tol.stability_margin = x;
        }
        tol
    }
}

/// Custom model specification: factor dynamics as row-major arrays plus named
/// loading and noise rules.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModelSpec {
    /// Factor dimension.
    pub n: usize,
    /// `A`, row-major, length `n * n`.
    pub a: Vec<f64>,
    /// `Q`, row-major, length `n * n`.
    pub q: Vec<f64>,
    pub loading: LoadingSpec,
    pub noise: NoiseSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadingSpec {
    /// Rows cycle through the canonical basis vectors.
    CyclicIdentity,
    /// Every row is the same vector (length `n`).
    Constant { row: Vec<f64> },
    /// Single factor, loadings `1, 2, 3, ...`.
    Ramp,
    /// Single factor, loadings `1, base, base^2, ...`.
    Geometric { base: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Identity,
    ScaledIdentity { scale: f64 },
    DiagRamp,
    SquareCascade { coupling: f64, square: usize },
}

/// The model family resolved from a config: raw dynamics matrices (validation
/// may still reject them) plus the two generators.
pub struct ModelFamily {
    pub name: String,
    pub n_factors: usize,
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub loadings: LoadingGenerator,
    pub noise: NoiseModel,
}

impl ModelFamily {
    /// Build the validated factor dynamics; numerical/model failures here are
    /// runtime errors, not config errors.
    pub fn dynamics(&self) -> dgfa::Result<FactorDynamics<f64>> {
        FactorDynamics::new(self.a.clone(), self.q.clone())
    }
}

/// Errors that make the run impossible before any numerical work: unreadable
/// files, malformed JSON, inconsistent dimensions. Mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))?;
    validate_config(&config)?;
    Ok(config)
}

fn validate_config(config: &ExperimentConfig) -> Result<(), ConfigError> {
    if config.n_list.is_empty() {
        return Err(ConfigError("N_list must be non-empty".into()));
    }
    if config.n_list[0] == 0 || config.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError(
            "N_list must be strictly increasing and positive".into(),
        ));
    }
    if config.t == 0 {
        return Err(ConfigError("T must be at least 1".into()));
    }
    if let Some(burn_in) = config.burn_in {
        if config.t < 10 * burn_in.max(1) {
            return Err(ConfigError("T must be at least 10 * burn_in".into()));
        }
    }
    if let ModelChoice::Pollution = config.model {
        if config.n_list.iter().any(|&n| n < 4 || n % 4 != 0) {
            return Err(ConfigError(
                "pollution model requires every N to be a positive multiple of 4".into(),
            ));
        }
    }
    Ok(())
}

/// Resolve the model family, reading the custom spec file when needed.
pub fn resolve_model(
    config: &ExperimentConfig,
    config_dir: &Path,
) -> Result<ModelFamily, ConfigError> {
    match &config.model {
        ModelChoice::Pollution => {
            let dynamics = pollution::dynamics::<f64>();
            Ok(ModelFamily {
                name: "pollution".into(),
                n_factors: 2,
                a: dynamics.a().clone(),
                q: dynamics.q().clone(),
                loadings: pollution::loading(),
                noise: pollution::noise(),
            })
        }
        ModelChoice::Custom(rel_path) => {
            let path = if rel_path.is_absolute() {
                rel_path.clone()
            } else {
                config_dir.join(rel_path)
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            let spec: CustomModelSpec = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))?;
            build_custom(&spec, &path)
        }
    }
}

fn build_custom(spec: &CustomModelSpec, path: &Path) -> Result<ModelFamily, ConfigError> {
    let n = spec.n;
    if n == 0 {
        return Err(ConfigError(format!(
            "{}: n must be positive",
            path.display()
        )));
    }
    if spec.a.len() != n * n || spec.q.len() != n * n {
        return Err(ConfigError(format!(
            "{}: a and q must have length n*n = {}",
            path.display(),
            n * n
        )));
    }
    let loadings = match &spec.loading {
        LoadingSpec::CyclicIdentity => LoadingGenerator::cyclic_identity(n),
        LoadingSpec::Constant { row } => {
            if row.len() != n {
                return Err(ConfigError(format!(
                    "{}: constant loading row must have length n = {n}",
                    path.display()
                )));
            }
            LoadingGenerator::constant(row.clone())
        }
        LoadingSpec::Ramp => {
            if n != 1 {
                return Err(ConfigError(format!(
                    "{}: ramp loading requires n = 1",
                    path.display()
                )));
            }
            LoadingGenerator::ramp()
        }
        LoadingSpec::Geometric { base } => {
            if n != 1 {
                return Err(ConfigError(format!(
                    "{}: geometric loading requires n = 1",
                    path.display()
                )));
            }
            LoadingGenerator::geometric(*base)
        }
    };
    let noise = match &spec.noise {
        NoiseSpec::Identity => NoiseModel::identity(),
        NoiseSpec::ScaledIdentity { scale } => {
            if *scale <= 0.0 {
                return Err(ConfigError(format!(
                    "{}: noise scale must be positive",
                    path.display()
                )));
            }
            NoiseModel::scaled_identity(*scale)
        }
        NoiseSpec::DiagRamp => NoiseModel::diag_ramp(),
        NoiseSpec::SquareCascade { coupling, square } => {
            if *square == 0 {
                return Err(ConfigError(format!(
                    "{}: square size must be positive",
                    path.display()
                )));
            }
            NoiseModel::square_cascade(*coupling, *square)
        }
    };
    Ok(ModelFamily {
        name: format!("custom({})", path.display()),
        n_factors: n,
        a: mat_from_f64::<f64>(n, n, &spec.a),
        q: mat_from_f64::<f64>(n, n, &spec.q),
        loadings,
        noise,
    })
}
