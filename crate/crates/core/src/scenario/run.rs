use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::{parse_scenario, Scenario};
use crate::chaos::{conditional_chaos_test, fit_loglog_slope, predicted_exponent, run_rate_experiment, RateColumn};
use crate::control::{gamma_experiment, minimize_cost, FiniteCost};
use crate::dynamics::{simulate_finite, simulate_mean_field_reference, write_binary, write_csv};
use crate::error::{HerdError, Result};
use crate::fokker_planck::{default_bank, duality_check, weak_residual, TestFunction};
use crate::model::{validate_assumptions, validate_costs, SystemSpec, ValidationReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VALIDATION_HEADER: &str = "check,estimate,bound,passed,samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    ChaosRates,
    FpCheck,
    Duality,
    Optimize,
    Gamma,
    Validate,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::ChaosRates,
        Command::FpCheck,
        Command::Duality,
        Command::Optimize,
        Command::Gamma,
        Command::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ChaosRates => "chaos-rates",
            Command::FpCheck => "fp-check",
            Command::Duality => "duality",
            Command::Optimize => "optimize",
            Command::Gamma => "gamma",
            Command::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.as_str()).collect();
                format!("unknown command `{s}`, expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&HerdError> for ErrorRecord {
    fn from(e: &HerdError) -> Self {
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

/// Record of one run, written last as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: Command,
    pub scenario_hash: Option<String>,
    pub seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
    pub errors: Vec<ErrorRecord>,
    pub exit_code: i32,
    pub summary: Value,
    /// The scenario with every default filled in.
    pub scenario: Option<Scenario>,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn io_err(path: &Path, e: impl fmt::Display) -> HerdError {
    HerdError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.names.push(name.into());
        Ok(())
    }
}

fn bank_for(sc: &Scenario, spec: &SystemSpec) -> Vec<TestFunction> {
    default_bank(spec.d, sc.experiment.bank_scale.unwrap_or_else(|| spec.initial.scale()))
}

fn validation_rows(report: &ValidationReport, csv: &mut String) {
    for c in &report.checks {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name, c.estimate, c.bound, c.passed, c.samples
        ));
    }
}

fn dispatch(cmd: Command, sc: &Scenario, out: &mut Outputs<'_>) -> Result<Value> {
    let spec = sc.system_spec()?;
    let ex = &sc.experiment;
    let seed = ex.seed;
    let control = sc.control_params(&spec)?;
    match cmd {
        Command::Validate => {
            let model = validate_assumptions(&spec, ex.grid_size)?;
            let costs = validate_costs(&spec, &sc.costs, ex.grid_size)?;
            let mut csv = format!("{VALIDATION_HEADER}\n");
            validation_rows(&model, &mut csv);
            validation_rows(&costs, &mut csv);
            out.write("validation.csv", csv.as_bytes())?;
            let summary = json!({
                "checks": model.checks.len() + costs.checks.len(),
                "passed": model.passed() && costs.passed(),
            });
            model.into_result()?;
            if let Some(f) = costs.failures().next() {
                return Err(HerdError::Validation {
                    coefficient: f.name.clone(),
                    detail: format!("sampled estimate {} violates the requirement", f.estimate),
                });
            }
            Ok(summary)
        }
        Command::Simulate => {
            let b = simulate_finite(&spec, &control, seed, ex.replica)?;
            let mut csv = Vec::new();
            write_csv(&b, &mut csv)?;
            out.write("trajectory.csv", &csv)?;
            if ex.binary {
                let mut bin = Vec::new();
                write_binary(&b, &mut bin)?;
                out.write("trajectory.bin", &bin)?;
            }
            let terminal = b.terminal();
            Ok(json!({
                "steps": b.steps(),
                "terminal_mean": terminal.mean(),
                "terminal_herders": b.herders_at(b.steps()),
            }))
        }
        Command::ChaosRates => {
            let table = run_rate_experiment(&spec, &control, &ex.n_list, ex.n_ref, ex.replicas, ex.q, seed)?;
            out.write("rates.csv", table.to_csv().as_bytes())?;
            let fit = |c: RateColumn| {
                fit_loglog_slope(&table, c)
                    .ok()
                    .map(|f| json!({"slope": f.slope, "r2": f.r2}))
            };
            let predicted = predicted_exponent(ex.q, spec.d, spec.p).ok().map(|r| {
                json!({"exponent": r.exponent, "log_factor": r.log_factor, "regime": format!("{:?}", r.regime)})
            });
            let mut summary = json!({
                "predicted": predicted,
                "coupled_fit": fit(RateColumn::Coupled),
                "wq_fit": fit(RateColumn::Wasserstein),
                "dropped": table.dropped,
            });
            if spec.has_common_noise() && ex.observables.len() == 2 {
                let cov = conditional_chaos_test(
                    &spec,
                    &control,
                    &ex.n_list,
                    2,
                    &ex.observables,
                    ex.replicas,
                    ex.inner_replicas,
                    seed,
                )?;
                out.write("covariance.csv", cov.to_csv().as_bytes())?;
                summary["covariance_rows"] = json!(cov.rows.len());
            }
            Ok(summary)
        }
        Command::FpCheck => {
            let (_, flow) = simulate_mean_field_reference(&spec, &control, ex.n_ref.max(spec.n), seed, 0)?;
            let bank = bank_for(sc, &spec);
            let rep = weak_residual(&flow, &spec, &bank, Some(flow.common_increments()))?;
            out.write("residual.csv", rep.to_csv().as_bytes())?;
            Ok(json!({
                "max_residual": rep.max_residual(),
                "per_function": rep.max_abs,
                "functions": rep.functions,
            }))
        }
        Command::Duality => {
            let bank = bank_for(sc, &spec);
            let rep = duality_check(&spec, &control, &bank, ex.n_ref, ex.inner_replicas, seed)?;
            out.write("duality.csv", rep.to_csv().as_bytes())?;
            let worst = rep
                .rows
                .iter()
                .map(|r| if r.se > 0.0 { r.gap / r.se } else if r.gap == 0.0 { 0.0 } else { f64::INFINITY })
                .fold(0.0, f64::max);
            Ok(json!({"max_gap_in_se": worst}))
        }
        Command::Optimize => {
            let ev = FiniteCost {
                spec: spec.clone(),
                costs: sc.costs.clone(),
                replicas: ex.cost_replicas,
                seed,
            };
            let r = minimize_cost(&ev, &control, &sc.search_options(), seed)?;
            out.write("trace.csv", r.trace_csv().as_bytes())?;
            let params = serde_json::to_string_pretty(&r.params).expect("parameters serialize");
            out.write("control.json", params.as_bytes())?;
            Ok(json!({
                "evaluations": r.trace.len(),
                "total": r.cost.total,
                "se": r.cost.se,
                "running": r.cost.running,
                "transient": r.cost.transient,
                "endpoint": r.cost.endpoint,
            }))
        }
        Command::Gamma => {
            let rep = gamma_experiment(
                &spec,
                &sc.costs,
                &control,
                &ex.n_list,
                ex.n_star,
                ex.cost_replicas,
                &sc.search_options(),
                seed,
            )?;
            out.write("gamma.csv", rep.to_csv().as_bytes())?;
            Ok(json!({
                "n_star": rep.n_star,
                "f_star": rep.f_star.total,
                "f_star_se": rep.f_star.se,
                "zero_control": rep.zero_cost.total,
                "spread": rep.spread(),
            }))
        }
    }
}

/// Runs `cmd` on a parsed scenario, writing its CSVs and then the manifest
/// into `out_dir`. Failures are recorded in the manifest.
pub fn run_command(cmd: Command, scenario: &Scenario, out_dir: &Path) -> RunManifest {
    let started = now_ms();
    let mut out = Outputs {
        dir: out_dir,
        names: Vec::new(),
    };
    let result = std::fs::create_dir_all(out_dir)
        .map_err(|e| io_err(out_dir, e))
        .and_then(|_| dispatch(cmd, scenario, &mut out));
    let (summary, errors, exit_code) = match result {
        Ok(v) => (v, Vec::new(), 0),
        Err(e) => (Value::Null, vec![ErrorRecord::from(&e)], e.exit_code()),
    };
    let mut manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        scenario_hash: Some(scenario.hash()),
        seed: Some(scenario.experiment.seed),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: out.names,
        errors,
        exit_code,
        summary,
        scenario: Some(scenario.clone()),
    };
    write_manifest(&mut manifest, out_dir);
    manifest
}

fn write_manifest(manifest: &mut RunManifest, out_dir: &Path) {
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    if let Err(e) = std::fs::create_dir_all(out_dir).and_then(|_| std::fs::write(&path, text)) {
        let e = io_err(&path, e);
        manifest.errors.push(ErrorRecord::from(&e));
        manifest.exit_code = e.exit_code();
    }
}

/// Loads the scenario at `scenario_path` (seed optionally overridden) and
/// runs `cmd`. Load failures also produce a manifest.
pub fn execute(cmd: Command, scenario_path: &Path, out_dir: &Path, seed: Option<u64>) -> RunManifest {
    match parse_scenario(scenario_path) {
        Ok(mut sc) => {
            if let Some(s) = seed {
                sc.experiment.seed = s;
            }
            run_command(cmd, &sc, out_dir)
        }
        Err(e) => {
            let now = now_ms();
            let mut manifest = RunManifest {
                version: env!("CARGO_PKG_VERSION").into(),
                command: cmd,
                scenario_hash: None,
                seed,
                started_unix_ms: now,
                finished_unix_ms: now,
                outputs: Vec::new(),
                errors: vec![ErrorRecord::from(&e)],
                exit_code: e.exit_code(),
                summary: Value::Null,
                scenario: None,
            };
            write_manifest(&mut manifest, out_dir);
            manifest
        }
    }
}
