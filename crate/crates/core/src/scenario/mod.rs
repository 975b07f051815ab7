//! JSON scenarios, command dispatch and run manifests.

mod run;

pub use run::{execute, run_command, Command, ErrorRecord, RunManifest, MANIFEST_FILE, VALIDATION_HEADER};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chaos::Observable;
use crate::control::{ControlParams, SearchOptions};
use crate::error::{HerdError, Result};
use crate::model::{
    validate_assumptions, AssumptionBounds, CostSpec, HerdLaw, InitialLaw, KernelSet, NoiseSet, SystemSpec,
};

fn default_n() -> usize {
    100
}
fn one_usize() -> usize {
    1
}
fn default_p() -> f64 {
    4.0
}

/// The `system` section. `initial` and `bounds` are filled in on load when
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub d: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "one_usize")]
    pub m: usize,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub initial: Option<InitialLaw>,
    #[serde(default)]
    pub bounds: Option<AssumptionBounds>,
    #[serde(default)]
    pub feature_radius: Option<f64>,
}

fn default_pieces() -> usize {
    8
}
fn default_restarts() -> usize {
    2
}
fn default_initial_step() -> f64 {
    0.25
}
fn default_min_step() -> f64 {
    1e-3
}

/// The `control` section: the control family and the search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    /// Constant `d x ell` profile used as the control of simulation commands
    /// and as the search start; the box point nearest 0 when absent.
    #[serde(default)]
    pub profile: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub search_g: bool,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            pieces: default_pieces(),
            profile: None,
            search_g: false,
            restarts: default_restarts(),
            initial_step: default_initial_step(),
            min_step: default_min_step(),
        }
    }
}

fn default_n_list() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024]
}
fn default_n_ref() -> usize {
    4096
}
fn default_replicas() -> usize {
    32
}
fn default_q() -> f64 {
    1.0
}
fn default_budget() -> usize {
    300
}
fn default_n_star() -> usize {
    2000
}
fn default_cost_replicas() -> usize {
    8
}
fn default_inner() -> usize {
    64
}
fn default_grid() -> usize {
    8
}

/// The `experiment` section: sizes, replica counts and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_n_star")]
    pub n_star: usize,
    /// Replicas per cost evaluation.
    #[serde(default = "default_cost_replicas")]
    pub cost_replicas: usize,
    /// Paths per start point in the Feynman-Kac estimates.
    #[serde(default = "default_inner")]
    pub inner_replicas: usize,
    /// Points per axis of the validator grids.
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Length scale of the test-function bank; the initial-data scale when
    /// absent.
    #[serde(default)]
    pub bank_scale: Option<f64>,
    /// Also write the binary trajectory next to the CSV.
    #[serde(default)]
    pub binary: bool,
    /// Replica simulated by the `simulate` command.
    #[serde(default)]
    pub replica: u64,
    /// Observables of the covariance test written by `chaos-rates` when the
    /// common noise is active.
    #[serde(default)]
    pub observables: Vec<Observable>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all experiment fields have defaults")
    }
}

/// A complete scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemSection,
    #[serde(default)]
    pub kernels: KernelSet,
    #[serde(default)]
    pub noises: NoiseSet,
    #[serde(default)]
    pub costs: CostSpec,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl Scenario {
    /// Fills the defaults that depend on other fields: a standard Gaussian
    /// herd with herders at the origin, and the box `[-1, 1]^(d x 1)` with
    /// `L = M' = 1`.
    pub fn materialize(&mut self) {
        let s = &mut self.system;
        if s.initial.is_none() {
            s.initial = Some(InitialLaw {
                herd: HerdLaw::standard_gaussian(s.d),
                herders: vec![vec![0.0; s.d]; s.m],
            });
        }
        if s.bounds.is_none() {
            s.bounds = Some(AssumptionBounds::uniform_box(s.d, 1, -1.0, 1.0, 1.0, 1.0));
        }
    }

    /// The system described by the scenario, structurally checked.
    pub fn system_spec(&self) -> Result<SystemSpec> {
        let mut sc = self.clone();
        sc.materialize();
        let s = sc.system;
        let spec = SystemSpec {
            d: s.d,
            n: s.n,
            m: s.m,
            horizon: s.horizon,
            p: s.p,
            dt: s.dt,
            kernels: sc.kernels,
            noises: sc.noises,
            initial: s.initial.expect("materialized"),
            bounds: s.bounds.expect("materialized"),
            feature_radius: s.feature_radius,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Initial control parameters built from the `control` section.
    pub fn control_params(&self, spec: &SystemSpec) -> Result<ControlParams> {
        let p = ControlParams::new(spec, self.control.pieces)?;
        match &self.control.profile {
            None => Ok(p),
            Some(v) => {
                if v.len() != spec.d || v.iter().any(|r| r.len() != spec.bounds.ell) {
                    return Err(HerdError::Validation {
                        coefficient: "control profile".into(),
                        detail: format!("profile must be {}x{}", spec.d, spec.bounds.ell),
                    });
                }
                Ok(p.with_constant_profile(&v.concat()).projected())
            }
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            budget: self.experiment.budget,
            restarts: self.control.restarts,
            search_g: self.control.search_g,
            initial_step: self.control.initial_step,
            min_step: self.control.min_step,
        }
    }

    /// Canonical JSON of the materialized scenario.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the compact canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Parses a scenario document, fills the defaults and validates the system
/// against its assumption bounds.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let mut sc: Scenario = serde_json::from_str(text).map_err(|e| HerdError::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    sc.materialize();
    let spec = sc.system_spec()?;
    validate_assumptions(&spec, sc.experiment.grid_size)?.into_result()?;
    sc.costs.check(spec.d, spec.bounds.ell)?;
    sc.control_params(&spec)?;
    Ok(sc)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| HerdError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario_str(&text)
}
