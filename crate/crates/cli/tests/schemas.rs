//! Published schemas accept every shipped config and every emitted
//! artifact; identical inputs produce byte-identical artifacts.

use std::path::{Path, PathBuf};

use serde_json::Value;

use rdlab_cli::commands::{duality_report, exponents_report, DualCoefficient, DualityRequest};
use rdlab_cli::config::RunConfig;
use rdlab_cli::io::to_json;
use rdlab_cli::pipeline::{run_simulation, run_sweep, SweepConfig};
use rdlab_core::Rational;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_valid(schema: &str, instance: &Value, what: &str) {
    let schema = read_json(&root().join("schemas").join(schema));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

fn config_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(root().join("configs"))
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.ends_with(".json").then_some(name)
        })
        .collect();
    names.sort();
    names
}

fn load_into(name: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::load(&root().join("configs").join(name)).unwrap();
    c.output.csv = out.join(format!("{}.csv", c.name));
    c.output.summary = out.join(format!("{}.summary.json", c.name));
    c
}

#[test]
fn shipped_configs_match_their_schemas() {
    let names = config_names();
    assert!(names.len() >= 7);
    for name in names {
        let value = read_json(&root().join("configs").join(&name));
        let schema = if value.get("runs").is_some() {
            "sweep-config.schema.json"
        } else {
            "run-config.schema.json"
        };
        assert_valid(schema, &value, &name);
    }
}

#[test]
fn schema_rejects_malformed_config() {
    let mut value = read_json(&root().join("configs/equilibrium-1d.json"));
    value["time"]["dt"] = Value::String("fast".into());
    let schema = read_json(&root().join("schemas/run-config.schema.json"));
    assert!(!jsonschema::validator_for(&schema).unwrap().is_valid(&value));
}

#[test]
fn run_summaries_match_schema() {
    let dir = tempfile::tempdir().unwrap();
    for name in config_names().iter().filter(|n| !n.starts_with("sweep")) {
        let c = load_into(name, dir.path());
        run_simulation(&c).unwrap();
        assert_valid("run-summary.schema.json", &read_json(&c.output.summary), name);
    }
}

#[test]
fn sweep_index_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut sweep = SweepConfig::load(&root().join("configs/sweep-dt.json")).unwrap();
    sweep.output_dir = dir.path().join("sweep");
    let entries = run_sweep(&sweep).unwrap();
    assert!(entries.iter().all(|e| e.status == "ok"));
    let index = read_json(&sweep.output_dir.join("sweep.json"));
    assert_valid("sweep-index.schema.json", &index, "sweep.json");
    for e in entries {
        assert_valid("run-summary.schema.json", &read_json(&e.summary.unwrap()), &e.name);
    }
}

#[test]
fn exponent_reports_match_schema() {
    let q = |n, d| Rational::new(n, d);
    for (n, nu, gamma, steps) in [
        (3, q(2, 1), q(27, 20), 1000),
        (3, q(2, 1), q(13, 10), 1000),
        (3, q(4, 1), q(4, 1), 1000),
        (5, q(5, 2), q(9, 2), 1000),
        (3, q(2, 1), q(131, 100), 1),
    ] {
        let report = exponents_report(n, &nu, &gamma, steps).unwrap();
        let value: Value = serde_json::from_str(&to_json(&report)).unwrap();
        assert_valid("exponents-report.schema.json", &value, &format!("N={n} ν={nu} Γ={gamma}"));
    }
}

fn duality_request(coefficient: DualCoefficient, q: f64, seed: u64) -> DualityRequest {
    DualityRequest {
        coefficient,
        q,
        horizon: 1.0,
        dimension: 1,
        cells: 8,
        time_steps: 16,
        budget: 200,
        seed,
    }
}

#[test]
fn duality_reports_match_schema_and_replay() {
    for (coefficient, q) in [
        (DualCoefficient::Diffusions(vec![1.0, 1.0, 1.0, 1.0]), 2.0),
        (DualCoefficient::Diffusions(vec![1.0, 100.0, 3.0, 2.0]), 4.0),
        (DualCoefficient::Direct { m: 0.5, delta: 0.3 }, 3.0),
    ] {
        let req = duality_request(coefficient, q, 42);
        let first = to_json(&duality_report(&req).unwrap());
        let second = to_json(&duality_report(&req).unwrap());
        assert_eq!(first, second, "same seed must replay byte-identically");
        assert_valid("duality-report.schema.json", &serde_json::from_str(&first).unwrap(), &first);
    }
}

#[test]
fn simulation_artifacts_are_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["perturbed-1d.json", "step-2d.json", "dimerization-1d.json"] {
        let c = load_into(name, dir.path());
        run_simulation(&c).unwrap();
        let csv = std::fs::read(&c.output.csv).unwrap();
        let summary = std::fs::read(&c.output.summary).unwrap();
        run_simulation(&c).unwrap();
        assert_eq!(csv, std::fs::read(&c.output.csv).unwrap(), "{name}: csv differs");
        assert_eq!(summary, std::fs::read(&c.output.summary).unwrap(), "{name}: summary differs");
    }
}

#[test]
fn sweep_artifacts_are_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let mut sweep = SweepConfig::load(&root().join("configs/sweep-dt.json")).unwrap();
    sweep.output_dir = dir.path().to_path_buf();
    let snapshot = |entries: &[rdlab_cli::pipeline::SweepEntry]| -> Vec<Vec<u8>> {
        let mut files = vec![std::fs::read(dir.path().join("sweep.json")).unwrap()];
        for e in entries {
            files.push(std::fs::read(e.summary.as_ref().unwrap()).unwrap());
            files.push(std::fs::read(dir.path().join(format!("{}.csv", e.name))).unwrap());
        }
        files
    };
    let first = snapshot(&run_sweep(&sweep).unwrap());
    let second = snapshot(&run_sweep(&sweep).unwrap());
    assert!(first == second, "sweep outputs differ between runs");
}

#[test]
fn csv_has_header_and_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let c = load_into("symmetric-equilibrium.json", dir.path());
    run_simulation(&c).unwrap();
    let text = std::fs::read_to_string(&c.output.csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header.len());
        for cell in cells {
            let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{cell}");
            cell.parse::<f64>().unwrap();
        }
    }
}
