//! Scenario files: one TOML document per experiment.

use std::path::{Path, PathBuf};

use cvt_core::{Density1D, DensityKind, Interval, Method, SeparableDensity, SolverConfig};
use serde::Deserialize;

use crate::CliError;

/// How `solve` reports the headline energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyChoice {
    #[default]
    AnalyticSeparable,
    MonteCarlo,
    GridQuadrature,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    method: Option<Method>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    dimension: Option<usize>,
    marginals: Vec<String>,
    domain: Vec<[f64; 2]>,
    dims: Vec<usize>,
    #[serde(default)]
    normalized: bool,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    energy_method: EnergyChoice,
    samples: Option<usize>,
    grid_points: Option<usize>,
    solver: Option<SolverSection>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub marginals: Vec<DensityKind>,
    pub domain: Vec<Interval>,
    pub dims: Vec<usize>,
    pub normalized: bool,
    pub seed: u64,
    pub energy_method: EnergyChoice,
    pub samples: usize,
    pub grid_points: usize,
    pub solver: SolverConfig,
    pub source: PathBuf,
}

pub const DEFAULT_SAMPLES: usize = 1_000_000;

impl Scenario {
    /// Reads and validates a scenario. `table(...)` paths resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).map(|mut s| {
            s.source = path.to_path_buf();
            s
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        let config = |msg: String| CliError::Config(format!("scenario `{}`: {msg}", raw.name));
        if !is_safe_name(&raw.name) {
            return Err(CliError::Config(format!(
                "scenario name `{}` must be nonempty and use only [A-Za-z0-9_.-]",
                raw.name
            )));
        }
        let n = raw.marginals.len();
        if n == 0 {
            return Err(config("at least one marginal is required".into()));
        }
        if raw.domain.len() != n || raw.dims.len() != n {
            return Err(config(format!(
                "{} marginals, {} domain intervals and {} dims must agree",
                n,
                raw.domain.len(),
                raw.dims.len()
            )));
        }
        if let Some(d) = raw.dimension {
            if d != n {
                return Err(config(format!("dimension = {d} but {n} marginals given")));
            }
        }
        if raw.dims.contains(&0) {
            return Err(config("every entry of dims must be at least 1".into()));
        }
        let marginals = raw
            .marginals
            .iter()
            .map(|m| DensityKind::parse(m, base_dir))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| config(e.to_string()))?;
        let domain = raw
            .domain
            .iter()
            .map(|&[lo, hi]| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| config(e.to_string()))?;
        let mut solver = SolverConfig::default();
        if let Some(s) = raw.solver {
            if let Some(m) = s.method {
                solver.method = m;
            }
            if let Some(t) = s.tolerance {
                solver.tolerance = t;
            }
            if let Some(k) = s.max_iterations {
                solver.max_iterations = k;
            }
        }
        solver.validate().map_err(|e| config(e.to_string()))?;
        let scenario = Scenario {
            name: raw.name.clone(),
            marginals,
            domain,
            dims: raw.dims,
            normalized: raw.normalized,
            seed: raw.seed,
            energy_method: raw.energy_method,
            samples: raw.samples.unwrap_or(DEFAULT_SAMPLES),
            grid_points: raw
                .grid_points
                .unwrap_or(cvt_core::energy::DEFAULT_GRID_POINTS),
            solver,
            source: PathBuf::new(),
        };
        // surface density errors (e.g. table support) as config errors
        scenario.density(false)?;
        Ok(scenario)
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// The separable density, raw or rescaled to unit mass per marginal.
    pub fn density(&self, normalized: bool) -> Result<SeparableDensity, CliError> {
        let marginals = self
            .marginals
            .iter()
            .zip(&self.domain)
            .map(|(k, &dom)| Density1D::new(k.clone(), dom, normalized))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("scenario `{}`: {e}", self.name)))?;
        SeparableDensity::new(marginals).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies the `CVT_SEED` override when set.
    pub fn apply_seed_override(&mut self) -> Result<(), CliError> {
        if let Ok(v) = std::env::var("CVT_SEED") {
            self.seed = v.trim().parse().map_err(|_| {
                CliError::Config(format!("CVT_SEED must be an unsigned integer, got `{v}`"))
            })?;
        }
        Ok(())
    }
}

fn is_safe_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}
