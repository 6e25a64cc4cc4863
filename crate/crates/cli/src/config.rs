//! Converge-experiment configuration: a TOML file with one level of
//! sections, rejected wholesale on unknown keys, every numeric range
//! validated before any computation starts.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use frustra::energy::EnergySettings;
use frustra::solve::{SequenceGenerator, SolveOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("BadValue: {field}: {reason}")]
    BadValue { field: &'static str, reason: String },
}

fn bad(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { field, reason: reason.into() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    generator: RawGenerator,
    #[serde(default)]
    energy: RawEnergy,
    #[serde(default)]
    solver: RawSolver,
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    kind: String,
    theta0: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEnergy {
    p: f64,
    dis_floor: f64,
}

impl Default for RawEnergy {
    fn default() -> Self {
        let s = EnergySettings::default();
        RawEnergy { p: s.p, dis_floor: s.dis_floor }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    max_iters: usize,
    grad_tol: f64,
    armijo_c: f64,
    backtrack: f64,
    seed: u64,
}

impl Default for RawSolver {
    fn default() -> Self {
        let o = SolveOptions::default();
        RawSolver {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            armijo_c: o.armijo_c,
            backtrack: o.backtrack,
            seed: o.seed,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    n_list: Vec<usize>,
    #[serde(default)]
    cold_start: bool,
    out: PathBuf,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub generator: SequenceGenerator<f64>,
    pub settings: EnergySettings<f64>,
    pub options: SolveOptions<f64>,
    pub n_list: Vec<usize>,
    pub cold_start: bool,
    pub out: PathBuf,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;

    let lattice_params = |raw: &RawGenerator| -> Result<(f64, f64), ConfigError> {
        let theta0 = raw
            .theta0
            .ok_or_else(|| bad("generator.theta0", "required for lattice generators"))?;
        let epsilon = raw
            .epsilon
            .ok_or_else(|| bad("generator.epsilon", "required for lattice generators"))?;
        if !(theta0 > 0.0 && theta0 <= std::f64::consts::FRAC_PI_4) {
            return Err(bad("generator.theta0", "must lie in (0, pi/4]"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(bad("generator.epsilon", "must lie in (0, 1)"));
        }
        Ok((theta0, epsilon))
    };

    let generator = match raw.generator.kind.as_str() {
        "lattice-uniform" => {
            let (theta0, epsilon) = lattice_params(&raw.generator)?;
            SequenceGenerator::LatticeUniform { theta0, epsilon }
        }
        "lattice-mean" => {
            let (theta0, epsilon) = lattice_params(&raw.generator)?;
            SequenceGenerator::LatticeMean { theta0, epsilon }
        }
        "spherical-cap" => {
            if raw.generator.theta0.is_some() || raw.generator.epsilon.is_some() {
                return Err(bad(
                    "generator",
                    "theta0/epsilon do not apply to the spherical-cap generator",
                ));
            }
            SequenceGenerator::SphericalCap
        }
        other => {
            return Err(bad(
                "generator.kind",
                format!("unknown kind `{other}` (expected lattice-uniform, lattice-mean, or spherical-cap)"),
            ))
        }
    };

    if !(raw.energy.p > 1.0 && raw.energy.p.is_finite()) {
        return Err(bad("energy.p", "must be a finite real > 1"));
    }
    if !(raw.energy.dis_floor >= 0.0) {
        return Err(bad("energy.dis_floor", "must be non-negative"));
    }
    if raw.solver.max_iters == 0 {
        return Err(bad("solver.max_iters", "must be positive"));
    }
    if !(raw.solver.grad_tol > 0.0) {
        return Err(bad("solver.grad_tol", "must be positive"));
    }
    if !(raw.solver.armijo_c > 0.0 && raw.solver.armijo_c < 1.0) {
        return Err(bad("solver.armijo_c", "must lie in (0, 1)"));
    }
    if !(raw.solver.backtrack > 0.0 && raw.solver.backtrack < 1.0) {
        return Err(bad("solver.backtrack", "must lie in (0, 1)"));
    }
    if raw.experiment.n_list.is_empty() {
        return Err(bad("experiment.n_list", "must not be empty"));
    }
    if raw.experiment.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("experiment.n_list", "must be strictly increasing"));
    }
    if raw.experiment.out.as_os_str().is_empty() {
        return Err(bad("experiment.out", "must name an output file"));
    }

    Ok(ExperimentConfig {
        generator,
        settings: EnergySettings { p: raw.energy.p, dis_floor: raw.energy.dis_floor },
        options: SolveOptions {
            max_iters: raw.solver.max_iters,
            grad_tol: raw.solver.grad_tol,
            armijo_c: raw.solver.armijo_c,
            backtrack: raw.solver.backtrack,
            seed: raw.solver.seed,
        },
        n_list: raw.experiment.n_list,
        cold_start: raw.experiment.cold_start,
        out: raw.experiment.out,
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse(&std::fs::read_to_string(path)?)
}
