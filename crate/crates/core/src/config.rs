//! Experiment configuration: a versioned TOML document holding one or more
//! `[[experiment]]` tables. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::profile::{build_profile, Correlation, ProfileSpec, DEFAULT_ATOM_COUNT};
use crate::sim::MAX_ENUMERATION_NODES;

pub const SCHEMA_VERSION: u32 = 1;

/// Trajectories of at least this many individuals are decimated by default.
pub const DECIMATE_FROM_N0: u64 = 100_000;
pub const DEFAULT_DECIMATION: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Keep one trajectory row in this many; defaults by population size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimate: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Trajectory(TrajectoryExperiment),
    KSweep(KSweepExperiment),
    McValidate(McValidateExperiment),
    OracleValidate(OracleValidateExperiment),
    Allocation(AllocationExperiment),
    TimingSweep(TimingSweepExperiment),
}

fn default_mlrp_pairs() -> usize {
    100
}

fn default_ratio_pairs() -> usize {
    10
}

fn default_atom_count() -> usize {
    DEFAULT_ATOM_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryExperiment {
    pub name: String,
    pub profile: ProfileSpec,
    /// Steps computed past the herd-immunity crossing.
    #[serde(default)]
    pub overshoot: u64,
    /// Consecutive-step density pairs checked for likelihood-ratio ordering.
    #[serde(default = "default_mlrp_pairs")]
    pub mlrp_pairs: usize,
    /// Long-range pairs checked for ordering and the ratio bound.
    #[serde(default = "default_ratio_pairs")]
    pub ratio_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KSweepExperiment {
    pub name: String,
    pub n0: u64,
    pub r0: f64,
    /// Gamma shape parameters.
    pub k: Vec<f64>,
    #[serde(default = "default_correlation")]
    pub correlation: Correlation,
    #[serde(default = "default_atom_count")]
    pub atom_count: usize,
    #[serde(default)]
    pub overshoot: u64,
    #[serde(default = "default_mlrp_pairs")]
    pub mlrp_pairs: usize,
    #[serde(default = "default_ratio_pairs")]
    pub ratio_pairs: usize,
}

fn default_correlation() -> Correlation {
    Correlation::Equal
}

fn default_gap_fraction() -> f64 {
    0.02
}

fn default_mc_sigmas() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McValidateExperiment {
    pub name: String,
    pub profile: ProfileSpec,
    pub replicas: usize,
    /// Simulated steps per replica; defaults to the whole population.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Replicas whose raw traces are exported.
    #[serde(default)]
    pub trace_replicas: usize,
    /// Allowed gap as a fraction of `R0`, on top of the standard-error band.
    #[serde(default = "default_gap_fraction")]
    pub gap_fraction: f64,
    #[serde(default = "default_mc_sigmas")]
    pub sigmas: f64,
}

fn default_min_nodes() -> usize {
    2
}

fn default_max_nodes() -> usize {
    8
}

fn default_oracle_replicas() -> usize {
    100_000
}

fn default_oracle_sigmas() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleValidateExperiment {
    pub name: String,
    /// Number of random explicit populations.
    pub populations: usize,
    #[serde(default = "default_min_nodes")]
    pub min_nodes: usize,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    #[serde(default = "default_oracle_replicas")]
    pub replicas: usize,
    #[serde(default = "default_oracle_sigmas")]
    pub sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationExperiment {
    pub name: String,
    /// Population of each region.
    pub n0: u64,
    pub r0: f64,
    /// Shapes of the heterogeneous region; the other region is homogeneous.
    pub k: Vec<f64>,
    pub supplies: Vec<u64>,
    /// Dose lattice step; defaults to a thousandth of each supply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<u64>,
    /// Step at which doses are administered.
    #[serde(default)]
    pub timing: u64,
    #[serde(default = "default_correlation")]
    pub correlation: Correlation,
    #[serde(default = "default_atom_count")]
    pub atom_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSweepExperiment {
    pub name: String,
    pub profile: ProfileSpec,
    pub vaccines: u64,
    pub timings: Vec<u64>,
}

/// Invalid configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("`{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl Experiment {
    pub fn name(&self) -> &str {
        match self {
            Experiment::Trajectory(e) => &e.name,
            Experiment::KSweep(e) => &e.name,
            Experiment::McValidate(e) => &e.name,
            Experiment::OracleValidate(e) => &e.name,
            Experiment::Allocation(e) => &e.name,
            Experiment::TimingSweep(e) => &e.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Trajectory(_) => "trajectory",
            Experiment::KSweep(_) => "k_sweep",
            Experiment::McValidate(_) => "mc_validate",
            Experiment::OracleValidate(_) => "oracle_validate",
            Experiment::Allocation(_) => "allocation",
            Experiment::TimingSweep(_) => "timing_sweep",
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|span| format!("line {}", text[..span.start].matches('\n').count() + 1))
                .unwrap_or_else(|| "config".into());
            ConfigError::new(field, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every parameter against the preconditions of the pipeline it
    /// feeds, including that each profile can be built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        if self.decimate == Some(0) {
            return Err(ConfigError::new("decimate", "must be at least 1"));
        }
        if self.experiments.is_empty() {
            return Err(ConfigError::new("experiment", "at least one experiment is required"));
        }
        let mut names = BTreeSet::new();
        for (i, experiment) in self.experiments.iter().enumerate() {
            let at = |field: &str| format!("experiment[{i}].{field}");
            let name = experiment.name();
            let allowed = |c: char| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.');
            if name.is_empty() || name.starts_with('.') || !name.chars().all(allowed) {
                return Err(ConfigError::new(
                    at("name"),
                    format!("`{name}` must match [A-Za-z0-9_.-]+ and not start with `.`"),
                ));
            }
            if !names.insert(name) {
                return Err(ConfigError::new(
                    at("name"),
                    format!("duplicate experiment name `{name}`"),
                ));
            }
            validate_experiment(experiment, &at)?;
        }
        Ok(())
    }
}

fn check_profile(spec: &ProfileSpec, field: String) -> Result<(), ConfigError> {
    build_profile(spec)
        .map(|_| ())
        .map_err(|e| ConfigError::new(field, e.to_string()))
}

fn check_shapes(k: &[f64], field: String) -> Result<(), ConfigError> {
    if k.is_empty() {
        return Err(ConfigError::new(field, "need at least one shape"));
    }
    for (j, &shape) in k.iter().enumerate() {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(ConfigError::new(
                format!("{field}[{j}]"),
                format!("must be positive, got {shape}"),
            ));
        }
    }
    Ok(())
}

fn check_population(n0: u64, r0: f64, at: &dyn Fn(&str) -> String) -> Result<(), ConfigError> {
    if n0 < 2 {
        return Err(ConfigError::new(
            at("n0"),
            format!("need at least 2 individuals, got {n0}"),
        ));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(ConfigError::new(at("r0"), format!("must be positive, got {r0}")));
    }
    Ok(())
}

fn gamma_specs(n0: u64, r0: f64, k: &[f64], correlation: Correlation, atoms: usize) -> Vec<ProfileSpec> {
    k.iter()
        .map(|&shape| ProfileSpec::gamma(shape, correlation, n0, r0).with_atom_count(atoms))
        .collect()
}

fn validate_experiment(experiment: &Experiment, at: &dyn Fn(&str) -> String) -> Result<(), ConfigError> {
    match experiment {
        Experiment::Trajectory(e) => check_profile(&e.profile, at("profile")),
        Experiment::KSweep(e) => {
            check_population(e.n0, e.r0, at)?;
            check_shapes(&e.k, at("k"))?;
            for (j, spec) in gamma_specs(e.n0, e.r0, &e.k, e.correlation, e.atom_count)
                .iter()
                .enumerate()
            {
                check_profile(spec, format!("{}[{j}]", at("k")))?;
            }
            Ok(())
        }
        Experiment::McValidate(e) => {
            check_profile(&e.profile, at("profile"))?;
            if e.replicas < 2 {
                return Err(ConfigError::new(
                    at("replicas"),
                    format!("need at least 2, got {}", e.replicas),
                ));
            }
            if e.trace_replicas > e.replicas {
                return Err(ConfigError::new(at("trace_replicas"), "exceeds `replicas`"));
            }
            if let Some(steps) = e.steps {
                if steps < 1 || steps as u64 > e.profile.n0 {
                    return Err(ConfigError::new(
                        at("steps"),
                        format!("must lie in 1..={}", e.profile.n0),
                    ));
                }
            }
            if !(e.gap_fraction >= 0.0 && e.gap_fraction.is_finite()) {
                return Err(ConfigError::new(at("gap_fraction"), "must be non-negative"));
            }
            if !(e.sigmas >= 0.0 && e.sigmas.is_finite()) {
                return Err(ConfigError::new(at("sigmas"), "must be non-negative"));
            }
            Ok(())
        }
        Experiment::OracleValidate(e) => {
            if e.populations < 1 {
                return Err(ConfigError::new(at("populations"), "need at least one population"));
            }
            if e.min_nodes < 2 || e.min_nodes > e.max_nodes {
                return Err(ConfigError::new(at("min_nodes"), "need 2 <= min_nodes <= max_nodes"));
            }
            if e.max_nodes > MAX_ENUMERATION_NODES {
                return Err(ConfigError::new(
                    at("max_nodes"),
                    format!("enumeration supports at most {MAX_ENUMERATION_NODES} nodes"),
                ));
            }
            if e.replicas < 2 {
                return Err(ConfigError::new(
                    at("replicas"),
                    format!("need at least 2, got {}", e.replicas),
                ));
            }
            if !(e.sigmas >= 0.0 && e.sigmas.is_finite()) {
                return Err(ConfigError::new(at("sigmas"), "must be non-negative"));
            }
            Ok(())
        }
        Experiment::Allocation(e) => {
            check_population(e.n0, e.r0, at)?;
            check_shapes(&e.k, at("k"))?;
            if e.supplies.is_empty() {
                return Err(ConfigError::new(at("supplies"), "need at least one supply level"));
            }
            if let Some(j) = e.supplies.iter().position(|&s| s >= 2 * e.n0) {
                return Err(ConfigError::new(
                    format!("{}[{j}]", at("supplies")),
                    "exceeds the combined population of both regions",
                ));
            }
            if e.granularity == Some(0) {
                return Err(ConfigError::new(at("granularity"), "must be at least 1"));
            }
            for (j, spec) in gamma_specs(e.n0, e.r0, &e.k, e.correlation, e.atom_count)
                .iter()
                .enumerate()
            {
                check_profile(spec, format!("{}[{j}]", at("k")))?;
            }
            check_profile(&ProfileSpec::homogeneous_calibrated(e.n0, e.r0), at("r0"))
        }
        Experiment::TimingSweep(e) => {
            check_profile(&e.profile, at("profile"))?;
            if e.vaccines >= e.profile.n0 {
                return Err(ConfigError::new(at("vaccines"), "must be below the population size"));
            }
            if e.timings.is_empty() {
                return Err(ConfigError::new(at("timings"), "need at least one timing"));
            }
            Ok(())
        }
    }
}
