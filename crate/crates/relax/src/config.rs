//! Run configuration. Physical quantities carry their unit in the key name;
//! atomistic potential parameters are in units of the layer-1 lattice
//! constant `a` and an arbitrary energy unit.

use std::fmt;
use std::path::{Path, PathBuf};

use moire_core::atomistic::Potential;
use moire_core::{params_from_eta, LineSearch, MinimizeOptions, ModelParams, MIN_GRID_POINTS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "kebab-case")]
pub enum Mode {
    GsfeRelax,
    EtaSweep,
    AtomisticRelax,
    DeriveParams,
    ConvergenceStudy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::GsfeRelax => "gsfe-relax",
            Mode::EtaSweep => "eta-sweep",
            Mode::AtomisticRelax => "atomistic-relax",
            Mode::DeriveParams => "derive-params",
            Mode::ConvergenceStudy => "convergence-study",
        })
    }
}

/// Continuum model, given either by physical constants or by `eta`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Layer-1 lattice constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_nm: Option<f64>,
    /// Lattice mismatch; `1 / theta` must be an integer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_mev_per_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0_mev_per_nm: Option<f64>,
    /// Coupling strength; replaces `kappa_mev_per_nm` and `v0_mev_per_nm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchKind {
    Armijo,
    StrongWolfe,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    /// Max-norm gradient tolerance relative to the model stiffness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_search: Option<LineSearchKind>,
}

impl OptimizerConfig {
    /// Options for a model whose gradient scale is `stiffness`.
    pub fn options(
        &self,
        stiffness: f64,
        default_relative: f64,
        default_line_search: LineSearch,
    ) -> MinimizeOptions {
        let defaults = MinimizeOptions::default();
        MinimizeOptions {
            memory: self.memory.unwrap_or(defaults.memory),
            tolerance: self.relative_tolerance.unwrap_or(default_relative) * stiffness,
            max_iterations: self.max_iterations.unwrap_or(defaults.max_iterations),
            line_search: match self.line_search {
                Some(LineSearchKind::Armijo) => LineSearch::ArmijoBacktracking,
                Some(LineSearchKind::StrongWolfe) => LineSearch::StrongWolfe,
                None => default_line_search,
            },
        }
    }
}

/// Pair potential in units of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Harmonic {
        stiffness: f64,
        rest_over_a: f64,
        cutoff_over_a: f64,
    },
    LennardJones {
        depth: f64,
        r_min_over_a: f64,
        cutoff_over_a: f64,
    },
    Gaussian {
        depth: f64,
        width_over_a: f64,
        cutoff_over_a: f64,
    },
    Zero {
        cutoff_over_a: f64,
    },
}

impl PotentialConfig {
    pub fn to_potential(self) -> Potential {
        match self {
            PotentialConfig::Harmonic {
                stiffness,
                rest_over_a,
                cutoff_over_a,
            } => Potential::Harmonic {
                stiffness,
                rest: rest_over_a,
                cutoff: cutoff_over_a,
            },
            PotentialConfig::LennardJones {
                depth,
                r_min_over_a,
                cutoff_over_a,
            } => Potential::LennardJones {
                depth,
                r_min: r_min_over_a,
                cutoff: cutoff_over_a,
            },
            PotentialConfig::Gaussian {
                depth,
                width_over_a,
                cutoff_over_a,
            } => Potential::Gaussian {
                depth,
                width: width_over_a,
                cutoff: cutoff_over_a,
            },
            PotentialConfig::Zero { cutoff_over_a } => Potential::Zero {
                cutoff: cutoff_over_a,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intra: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inter: Option<PotentialConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub potentials: PotentialsConfig,
    /// Coupling strengths for `eta-sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    /// Mismatches for `convergence-study`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub emit_svg: bool,
    /// Seed of the random initial perturbation; no perturbation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Amplitude of the random initial perturbation, in units of `a`.
    #[serde(default = "default_perturbation")]
    pub perturbation_over_a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub allow_nonconverged: bool,
}

fn default_grid_n() -> usize {
    moire_core::DEFAULT_GRID_POINTS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_perturbation() -> f64 {
    0.01
}

pub const DEFAULT_ETAS: [f64; 4] = [3.0, 1.0, 0.3, 0.0];
pub const DEFAULT_THETAS: [f64; 4] = [1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0];
pub const DEFAULT_THETA: f64 = 1.0 / 50.0;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            model: ModelConfig::default(),
            grid_n: default_grid_n(),
            optimizer: OptimizerConfig::default(),
            potentials: PotentialsConfig::default(),
            etas: None,
            thetas: None,
            output_dir: default_output_dir(),
            emit_svg: true,
            seed: None,
            perturbation_over_a: default_perturbation(),
            jobs: None,
            allow_nonconverged: false,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mode(&self) -> Result<Mode, CliError> {
        self.mode
            .ok_or_else(|| config_error("mode", "no mode given"))
    }

    /// Checks that every field the mode needs is present and valid.
    pub fn validate(&self) -> Result<(), CliError> {
        let mode = self.mode()?;
        if self.grid_n < MIN_GRID_POINTS {
            return Err(config_error(
                "grid_n",
                format!(
                    "need at least {MIN_GRID_POINTS} grid points, got {}",
                    self.grid_n
                ),
            ));
        }
        if !(self.perturbation_over_a.is_finite() && self.perturbation_over_a >= 0.0) {
            return Err(config_error("perturbation_over_a", "must be non-negative"));
        }
        if self.jobs == Some(0) {
            return Err(config_error("jobs", "must be at least 1"));
        }
        if let Some(t) = self.optimizer.relative_tolerance {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_error(
                    "optimizer.relative_tolerance",
                    "must be positive",
                ));
            }
        }
        match mode {
            Mode::GsfeRelax | Mode::DeriveParams => {
                self.model_params()?;
            }
            Mode::EtaSweep => {
                self.theta_or_default()?;
                for (i, eta) in self.etas().iter().enumerate() {
                    if !(eta.is_finite() && *eta >= 0.0) {
                        return Err(config_error(&format!("etas[{i}]"), "must be non-negative"));
                    }
                }
                if self.etas().is_empty() {
                    return Err(config_error("etas", "empty sweep"));
                }
            }
            Mode::AtomisticRelax => {
                self.theta_or_default()?;
                self.eta_or_default(1.0)?;
                self.intra_potential()?;
                self.inter_potential()?;
            }
            Mode::ConvergenceStudy => {
                self.eta_or_default(1.0)?;
                self.intra_potential()?;
                self.inter_potential()?;
                let thetas = self.thetas();
                if thetas.is_empty() {
                    return Err(config_error("thetas", "empty study"));
                }
                for (i, theta) in thetas.iter().enumerate() {
                    moire_core::lattice_counts_for_theta(*theta)
                        .map_err(|e| config_error(&format!("thetas[{i}]"), e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    pub fn etas(&self) -> Vec<f64> {
        self.etas.clone().unwrap_or_else(|| DEFAULT_ETAS.to_vec())
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.thetas
            .clone()
            .unwrap_or_else(|| DEFAULT_THETAS.to_vec())
    }

    pub fn a_nm(&self) -> Result<f64, CliError> {
        let a = self.model.a_nm.unwrap_or(1.0);
        if !(a.is_finite() && a > 0.0) {
            return Err(config_error("model.a_nm", "must be positive"));
        }
        Ok(a)
    }

    pub fn theta_or_default(&self) -> Result<f64, CliError> {
        let theta = self.model.theta.unwrap_or(DEFAULT_THETA);
        moire_core::lattice_counts_for_theta(theta)
            .map_err(|e| config_error("model.theta", e.to_string()))?;
        Ok(theta)
    }

    pub fn eta_or_default(&self, default: f64) -> Result<f64, CliError> {
        let eta = self.model.eta.unwrap_or(default);
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(config_error("model.eta", "must be non-negative"));
        }
        Ok(eta)
    }

    /// Dimensional parameters, from physical constants or from `eta` with
    /// unit stiffness.
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let theta = m
            .theta
            .ok_or_else(|| config_error("model.theta", "missing"))?;
        self.theta_or_default()?;
        let a = self.a_nm()?;
        let field =
            |value: Option<f64>, path: &str| value.ok_or_else(|| config_error(path, "missing"));
        let params = match (m.eta, m.kappa_mev_per_nm, m.v0_mev_per_nm) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(config_error(
                    "model.eta",
                    "give either eta or kappa_mev_per_nm and v0_mev_per_nm, not both",
                ))
            }
            (Some(eta), None, None) => params_from_eta(eta, theta, a),
            (None, kappa, v0) => ModelParams::new(
                a,
                theta,
                field(kappa, "model.kappa_mev_per_nm")?,
                field(v0, "model.v0_mev_per_nm")?,
            ),
        };
        params.map_err(|e| config_error("model", e.to_string()))
    }

    pub fn intra_potential(&self) -> Result<Potential, CliError> {
        self.potentials
            .intra
            .map(PotentialConfig::to_potential)
            .unwrap_or_else(Potential::harmonic_nearest_neighbor)
            .validated()
            .map_err(|e| config_error("potentials.intra", e.to_string()))
    }

    pub fn inter_potential(&self) -> Result<Potential, CliError> {
        self.potentials
            .inter
            .map(PotentialConfig::to_potential)
            .unwrap_or_else(moire_core::atomistic::default_inter_potential)
            .validated()
            .map_err(|e| config_error("potentials.inter", e.to_string()))
    }
}
