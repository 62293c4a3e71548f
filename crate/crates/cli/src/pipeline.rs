//! Simulation runs: integrate, evaluate diagnostics, write artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use rdlab_core::diagnostics::{
    self, check_interpolation, csiszar_kullback_check, entropy_balance_residual, fit_decay,
    max_entropy_increase, CsiszarKullbackCheck, DecayFit, InterpolationReport,
};
use rdlab_core::duality::{coefficient_field, verify_duality_estimate, DualityEstimateReport};
use rdlab_core::integrator::Sampling;
use rdlab_core::system::delta_spread;
use rdlab_core::{Grid, ReactionSystem, Trajectory};

use crate::config::{RunConfig, ValidatedRun};
use crate::io::{write_atomic, write_json};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    #[serde(rename = "final")]
    pub final_: Vec<f64>,
    /// `max_t |M(t) − M(0)| / M(0)` over all conserved quantities.
    pub max_relative_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
    pub balance_residual: f64,
    pub max_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    /// Fitted on `‖u − u_∞‖_1`; absent when the distance never exceeds the
    /// fit floor (the run starts at equilibrium).
    pub fit: Option<DecayFit>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub a: f64,
    pub b: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivitySummary {
    pub min_concentration: f64,
    /// `sup_t ‖u_i(t)‖_{L^1}` per species.
    pub sup_l1: Vec<f64>,
    /// Bound `M_i = min_a (∫ a·u(0)) / a_i` from the conservation laws.
    pub l1_bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub status: String,
    pub error: Option<String>,
    pub t_final: f64,
    pub samples: usize,
    pub masses: MassSummary,
    pub entropy: Option<EntropySummary>,
    pub decay: Option<DecaySummary>,
    pub csiszar_kullback: Option<CsiszarKullbackCheck>,
    pub interpolation: Vec<InterpolationReport>,
    pub duality: Option<DualityEstimateReport>,
    pub coefficient_field: CoefficientSummary,
    pub positivity: PositivitySummary,
}

/// Successful run: summary plus the full trajectory for callers that
/// want to inspect it further.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub run: ValidatedRun,
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn masses(traj: &Trajectory, system: &ReactionSystem, grid: &Grid) -> MassSummary {
    let vectors = system.conservation_vectors();
    let names: Vec<String> = if system.is_unit_quadratic_four() {
        ["M13", "M14", "M23", "M24"].map(String::from).to_vec()
    } else {
        (1..=vectors.len()).map(|v| format!("cons_{v}")).collect()
    };
    let totals: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| {
            vectors
                .iter()
                .map(|a| {
                    a.iter()
                        .zip(s.fields())
                        .map(|(aj, f)| aj * grid.integrate(f).unwrap_or(f64::NAN))
                        .sum()
                })
                .collect()
        })
        .collect();
    let initial = totals[0].clone();
    let final_ = totals.last().cloned().unwrap_or_default();
    let max_relative_drift = totals
        .iter()
        .flat_map(|row| {
            row.iter()
                .zip(&initial)
                .map(|(m, m0)| if *m0 > 0.0 { (m - m0).abs() / m0 } else { (m - m0).abs() })
        })
        .fold(0.0, f64::max);
    MassSummary {
        names,
        initial,
        final_,
        max_relative_drift,
    }
}

fn positivity(traj: &Trajectory, system: &ReactionSystem, grid: &Grid, initial_masses: &[f64]) -> PositivitySummary {
    let k = system.species_count();
    let min_concentration = traj
        .states
        .iter()
        .map(|s| s.min_value())
        .fold(f64::INFINITY, f64::min);
    let sup_l1 = (0..k)
        .map(|i| {
            traj.states
                .iter()
                .map(|s| grid.lp_norm(s.field(i), 1.0).unwrap_or(f64::NAN))
                .fold(0.0, f64::max)
        })
        .collect();
    let l1_bound = (0..k)
        .map(|i| {
            system
                .conservation_vectors()
                .iter()
                .zip(initial_masses)
                .filter(|(a, _)| a[i] > 0.0)
                .map(|(a, m)| m / a[i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    PositivitySummary {
        min_concentration,
        sup_l1,
        l1_bound,
    }
}

fn coefficient_summary(traj: &Trajectory, system: &ReactionSystem) -> Result<CoefficientSummary, CliError> {
    let spread = delta_spread(system);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &traj.states {
        let a = coefficient_field(s, system).map_err(numerical)?;
        min = min.min(a.min());
        max = max.max(a.max());
    }
    Ok(CoefficientSummary {
        a: spread.a,
        b: spread.b,
        min,
        max,
    })
}

/// Evaluates every summary diagnostic on a (possibly partial) trajectory.
fn summarize(
    config: &RunConfig,
    run: &ValidatedRun,
    traj: &Trajectory,
    error: Option<String>,
) -> Result<RunSummary, CliError> {
    let system = &run.system;
    let grid = &run.grid;
    let masses = masses(traj, system, grid);
    let positivity = positivity(traj, system, grid, &masses.initial);
    let coefficient_field = coefficient_summary(traj, system)?;
    let enough = traj.len() >= 2;
    let unit = system.is_unit_quadratic_four();

    let entropy = if unit && enough {
        let e = traj.series("E").expect("entropy series recorded");
        Some(EntropySummary {
            initial: e[0],
            final_: *e.last().expect("non-empty"),
            balance_residual: entropy_balance_residual(traj, system, grid).map_err(numerical)?,
            max_increase: max_entropy_increase(traj, system, grid).map_err(numerical)?,
        })
    } else {
        None
    };
    let decay = match traj.series("l1_dist") {
        Some(l1) if enough => {
            match fit_decay(&traj.times, l1, config.diagnostics.decay_window) {
                Ok(fit) => Some(DecaySummary { rate: fit.c2, fit: Some(fit) }),
                Err(_) if l1.iter().all(|&v| v <= diagnostics::FIT_FLOOR) => {
                    Some(DecaySummary { fit: None, rate: 0.0 })
                }
                Err(_) => None,
            }
        }
        _ => None,
    };
    let csiszar_kullback = if traj.equilibrium.is_some() && enough {
        csiszar_kullback_check(traj, system, grid).ok()
    } else {
        None
    };
    let interpolation = if enough {
        config
            .diagnostics
            .interpolation
            .iter()
            .map(|s| {
                check_interpolation(traj, s.species - 1, s.p1.0, s.q1.0, s.p2.0, s.q2.0, s.theta)
                    .map_err(numerical)
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let duality = if enough {
        verify_duality_estimate(traj, system, config.diagnostics.duality_p).ok()
    } else {
        None
    };
    Ok(RunSummary {
        name: config.name.clone(),
        status: if error.is_some() { "failed" } else { "ok" }.into(),
        error,
        t_final: traj.horizon(),
        samples: traj.len(),
        masses,
        entropy,
        decay,
        csiszar_kullback,
        interpolation,
        duality,
        coefficient_field,
        positivity,
    })
}

/// Trajectory CSV: header row, then one row per sample with 17
/// significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for name in &traj.series_order {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in traj.times.iter().enumerate() {
        write!(out, "{t:.16e}").expect("write to string");
        for name in &traj.series_order {
            write!(out, ",{:.16e}", traj.series[name][i]).expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn write_artifacts(config: &RunConfig, traj: &Trajectory, summary: &RunSummary) -> Result<(), CliError> {
    write_atomic(&config.output.csv, trajectory_csv(traj).as_bytes())?;
    write_json(&config.output.summary, summary)
}

/// Validates, integrates and writes the CSV and summary. A step failure
/// still writes the partial trajectory and a `failed` summary.
pub fn run_simulation(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let run = config.validate()?;
    let sampling = Sampling {
        every: config.time.sample_every,
        lp_exponents: run.lp.clone(),
    };
    match rdlab_core::integrator::run(
        &run.system,
        &run.grid,
        &run.initial,
        config.time.t_end,
        &run.control,
        &sampling,
    ) {
        Ok(trajectory) => {
            let summary = summarize(config, &run, &trajectory, None)?;
            write_artifacts(config, &trajectory, &summary)?;
            Ok(RunOutcome {
                summary,
                trajectory,
                run,
            })
        }
        Err(failure) => {
            let message = failure.error.to_string();
            let described = failure.to_string();
            let partial = *failure.partial;
            if !partial.is_empty() {
                let summary = summarize(config, &run, &partial, Some(message.clone()))?;
                write_artifacts(config, &partial, &summary)?;
            }
            Err(CliError::Numerical(described))
        }
    }
}

/// One sweep member: dotted-path overrides applied to the base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub name: String,
    #[serde(default)]
    pub set: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: Value,
    pub runs: Vec<SweepRun>,
    /// Per-run outputs go to `<output_dir>/<name>.csv` and `.summary.json`.
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub name: String,
    pub status: String,
    pub error: Option<String>,
    pub summary: Option<PathBuf>,
}

fn set_path(target: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = target;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Validation(format!("sweep override {path}: {part} is not an index")))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    CliError::Validation(format!("sweep override {path}: index {idx} out of range ({len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(CliError::Validation(format!(
                    "sweep override {path}: {part} does not address an object or array"
                )))
            }
        };
    }
    Ok(())
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("sweep {}: {e}", path.display())))?;
        let mut sweep: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("sweep: {e}")))?;
        if sweep.output_dir.is_relative() {
            sweep.output_dir = path.parent().unwrap_or(Path::new(".")).join(&sweep.output_dir);
        }
        Ok(sweep)
    }

    /// Expands every member into a full config; all must validate before
    /// anything runs.
    pub fn expand(&self) -> Result<Vec<RunConfig>, CliError> {
        let mut names = std::collections::BTreeSet::new();
        self.runs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.name.is_empty() || r.name.contains(['/', '\\']) || !names.insert(r.name.clone()) {
                    return Err(CliError::Validation(format!(
                        "runs[{i}].name: must be a unique non-empty file stem, got {:?}",
                        r.name
                    )));
                }
                let mut value = self.base.clone();
                for (path, v) in &r.set {
                    set_path(&mut value, path, v.clone())?;
                }
                set_path(&mut value, "name", Value::String(r.name.clone()))?;
                set_path(
                    &mut value,
                    "output",
                    serde_json::json!({
                        "csv": self.output_dir.join(format!("{}.csv", r.name)),
                        "summary": self.output_dir.join(format!("{}.summary.json", r.name)),
                    }),
                )?;
                let config: RunConfig = serde_json::from_value(value)
                    .map_err(|e| CliError::Validation(format!("runs[{i}]: {e}")))?;
                config
                    .validate()
                    .map_err(|e| CliError::Validation(format!("runs[{i}]: {e}")))?;
                Ok(config)
            })
            .collect()
    }
}

/// Runs every member on the worker pool; the index file lists members in
/// their declared order regardless of completion order.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Vec<SweepEntry>, CliError> {
    let configs = sweep.expand()?;
    let entries: Vec<SweepEntry> = configs
        .par_iter()
        .map(|config| match run_simulation(config) {
            Ok(_) => SweepEntry {
                name: config.name.clone(),
                status: "ok".into(),
                error: None,
                summary: Some(config.output.summary.clone()),
            },
            Err(e) => SweepEntry {
                name: config.name.clone(),
                status: "failed".into(),
                error: Some(e.to_string()),
                summary: config.output.summary.exists().then(|| config.output.summary.clone()),
            },
        })
        .collect();
    write_json(&sweep.output_dir.join("sweep.json"), &entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides() {
        let mut v = serde_json::json!({"time": {"dt": 1.0}, "initial": [{"value": 1.0}]});
        set_path(&mut v, "time.dt", serde_json::json!(0.5)).unwrap();
        set_path(&mut v, "initial.0.value", serde_json::json!(3.0)).unwrap();
        set_path(&mut v, "extra.deep", serde_json::json!(true)).unwrap();
        assert_eq!(v["time"]["dt"], 0.5);
        assert_eq!(v["initial"][0]["value"], 3.0);
        assert_eq!(v["extra"]["deep"], true);
        assert!(set_path(&mut v, "initial.4.value", serde_json::json!(0)).is_err());
        assert!(set_path(&mut v, "time.dt.x", serde_json::json!(0)).is_err());
    }
}
