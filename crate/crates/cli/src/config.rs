//! Declarative run configuration (one JSON document per run).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use rdlab_core::grid::Grid;
use rdlab_core::integrator::{PositivityPolicy, Scheme, SpeciesState, StepControl};
use rdlab_core::system::{Monomial, ReactionSystem};
use rdlab_core::ScalarField;

use crate::CliError;

/// A norm exponent in `[1, ∞]`; infinity is written `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        rdlab_core::serde_ext::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        rdlab_core::serde_ext::deserialize(d).map(Exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    QuadraticFour {
        diffusions: [f64; 4],
        #[serde(default = "one")]
        forward: f64,
        #[serde(default = "one")]
        backward: f64,
    },
    Custom {
        species: usize,
        order: f64,
        diffusions: Vec<f64>,
        /// `terms[i]` lists the monomials of `f_i`.
        terms: Vec<Vec<MonomialSpec>>,
        conservation_vectors: Vec<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dimension: usize,
    pub cells: Vec<usize>,
}

/// Initial profile of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// `left` for `x_axis < position`, `right` otherwise.
    Step {
        left: f64,
        right: f64,
        #[serde(default = "half")]
        position: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `base + amplitude · Π_a cos(π k_a x_a)`.
    CosineBump {
        base: f64,
        amplitude: f64,
        modes: Vec<usize>,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_policy")]
    pub positivity_policy: PositivityPolicy,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
}

fn default_scheme() -> Scheme {
    StepControl::default().scheme
}
fn default_policy() -> PositivityPolicy {
    StepControl::default().positivity_policy
}
fn default_halvings() -> u32 {
    StepControl::default().max_halvings
}
fn default_linear_tol() -> f64 {
    StepControl::default().linear_tol
}

/// `‖u‖_{s,r} <= ‖u‖_{p1,q1}^θ ‖u‖_{p2,q2}^{1−θ}` for one species (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationSpec {
    pub species: usize,
    pub p1: Exponent,
    pub q1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "default_lp")]
    pub lp: Vec<Exponent>,
    #[serde(default)]
    pub interpolation: Vec<InterpolationSpec>,
    #[serde(default = "half")]
    pub decay_window: f64,
    /// Exponent of the a-priori duality estimate check.
    #[serde(default = "default_duality_p")]
    pub duality_p: f64,
}

fn default_lp() -> Vec<Exponent> {
    vec![Exponent(1.0), Exponent(2.0)]
}
fn default_duality_p() -> f64 {
    2.0
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            lp: default_lp(),
            interpolation: Vec::new(),
            decay_window: half(),
            duality_p: default_duality_p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub system: SystemSpec,
    pub grid: GridSpec,
    pub initial: Vec<InitialSpec>,
    pub time: TimeSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    pub output: OutputSpec,
}

/// Everything a run needs, built and checked from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub system: ReactionSystem,
    pub grid: Grid,
    pub initial: SpeciesState,
    pub control: StepControl,
    pub lp: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn core(e: rdlab_core::Error) -> CliError {
    CliError::Validation(e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        config.resolve_outputs(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    /// Relative output paths are taken relative to `base`.
    pub fn resolve_outputs(&mut self, base: &Path) {
        for p in [&mut self.output.csv, &mut self.output.summary] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn build_system(&self) -> Result<ReactionSystem, CliError> {
        match &self.system {
            SystemSpec::QuadraticFour {
                diffusions,
                forward,
                backward,
            } => ReactionSystem::quadratic_four_with_rates(*diffusions, *forward, *backward)
                .map_err(core),
            SystemSpec::Custom {
                species,
                order,
                diffusions,
                terms,
                conservation_vectors,
            } => {
                if *species == 0 {
                    return Err(invalid("system.species: at least one species required"));
                }
                if diffusions.len() != *species {
                    return Err(invalid(format!(
                        "system.diffusions: expected {species} entries, got {}",
                        diffusions.len()
                    )));
                }
                let terms = terms
                    .iter()
                    .map(|fi| {
                        fi.iter()
                            .map(|m| Monomial::new(m.coefficient, m.exponents.clone()))
                            .collect()
                    })
                    .collect();
                ReactionSystem::polynomial(
                    diffusions.clone(),
                    *order,
                    terms,
                    conservation_vectors.clone(),
                )
                .map_err(core)
            }
        }
    }

    /// Validates every precondition of the run before any compute.
    pub fn validate(&self) -> Result<ValidatedRun, CliError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name: must not be empty"));
        }
        let system = self.build_system()?;
        if self.grid.cells.len() != self.grid.dimension {
            return Err(invalid(format!(
                "grid.cells: expected {} entries, got {}",
                self.grid.dimension,
                self.grid.cells.len()
            )));
        }
        let grid = Grid::new(self.grid.dimension, &self.grid.cells)
            .map_err(|e| invalid(format!("grid: {e}")))?;
        let k = system.species_count();
        if self.initial.len() != k {
            return Err(invalid(format!(
                "initial: expected {k} species profiles, got {}",
                self.initial.len()
            )));
        }
        let fields = self
            .initial
            .iter()
            .enumerate()
            .map(|(i, init)| initial_field(&grid, init, i))
            .collect::<Result<Vec<_>, _>>()?;
        let initial = SpeciesState::new(0.0, fields);
        initial.validate(&grid, &system).map_err(|e| invalid(format!("initial: {e}")))?;

        let t = &self.time;
        for (name, v) in [("time.t_end", t.t_end), ("time.dt", t.dt), ("time.sample_every", t.sample_every)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name}: must be positive, got {v}")));
            }
        }
        if t.dt > t.t_end {
            return Err(invalid(format!("time.dt: {} exceeds time.t_end {}", t.dt, t.t_end)));
        }
        let control = StepControl {
            dt: t.dt,
            scheme: t.scheme,
            positivity_policy: t.positivity_policy,
            max_halvings: t.max_halvings,
            linear_tol: t.linear_tol,
        };
        control.validate().map_err(|e| invalid(format!("time: {e}")))?;

        let d = &self.diagnostics;
        if d.lp.is_empty() {
            return Err(invalid("diagnostics.lp: at least one exponent required"));
        }
        for (i, p) in d.lp.iter().enumerate() {
            if p.0.is_nan() || p.0 < 1.0 {
                return Err(invalid(format!("diagnostics.lp[{i}]: must lie in [1, inf], got {}", p.0)));
            }
        }
        for (j, tuple) in d.interpolation.iter().enumerate() {
            if tuple.species < 1 || tuple.species > k {
                return Err(invalid(format!(
                    "diagnostics.interpolation[{j}].species: must lie in 1..={k}, got {}",
                    tuple.species
                )));
            }
            for (name, v) in [("p1", tuple.p1), ("q1", tuple.q1), ("p2", tuple.p2), ("q2", tuple.q2)] {
                if v.0.is_nan() || v.0 < 1.0 {
                    return Err(invalid(format!(
                        "diagnostics.interpolation[{j}].{name}: must lie in [1, inf], got {}",
                        v.0
                    )));
                }
            }
            if tuple.p1 == tuple.p2 || tuple.q1 == tuple.q2 {
                return Err(invalid(format!(
                    "diagnostics.interpolation[{j}]: needs p1 != p2 and q1 != q2"
                )));
            }
            if !(tuple.theta > 0.0 && tuple.theta < 1.0) {
                return Err(invalid(format!(
                    "diagnostics.interpolation[{j}].theta: must lie in (0, 1), got {}",
                    tuple.theta
                )));
            }
        }
        if !(d.decay_window > 0.0 && d.decay_window <= 1.0) {
            return Err(invalid(format!(
                "diagnostics.decay_window: must lie in (0, 1], got {}",
                d.decay_window
            )));
        }
        if !(d.duality_p.is_finite() && d.duality_p > 1.0) {
            return Err(invalid(format!(
                "diagnostics.duality_p: must lie in (1, inf), got {}",
                d.duality_p
            )));
        }
        Ok(ValidatedRun {
            system,
            grid,
            initial,
            control,
            lp: d.lp.iter().map(|p| p.0).collect(),
        })
    }
}

fn initial_field(grid: &Grid, init: &InitialSpec, species: usize) -> Result<ScalarField, CliError> {
    let field = |name: &str| format!("initial[{species}].{name}");
    let finite_nonneg = |name: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(invalid(format!("{}: must be finite and non-negative, got {v}", field(name))))
        }
    };
    let n = grid.cell_count();
    let values: Vec<f64> = match init {
        InitialSpec::Constant { value } => {
            finite_nonneg("value", *value)?;
            vec![*value; n]
        }
        InitialSpec::Step {
            left,
            right,
            position,
            axis,
        } => {
            finite_nonneg("left", *left)?;
            finite_nonneg("right", *right)?;
            if *axis >= grid.dimension() {
                return Err(invalid(format!(
                    "{}: must be below the grid dimension {}, got {axis}",
                    field("axis"),
                    grid.dimension()
                )));
            }
            if !(0.0..=1.0).contains(position) {
                return Err(invalid(format!("{}: must lie in [0, 1], got {position}", field("position"))));
            }
            (0..n)
                .map(|c| if grid.cell_center(c)[*axis] < *position { *left } else { *right })
                .collect()
        }
        InitialSpec::CosineBump {
            base,
            amplitude,
            modes,
        } => {
            if modes.len() != grid.dimension() {
                return Err(invalid(format!(
                    "{}: expected {} wave numbers, got {}",
                    field("modes"),
                    grid.dimension(),
                    modes.len()
                )));
            }
            if !(base.is_finite() && amplitude.is_finite() && amplitude.abs() <= *base) {
                return Err(invalid(format!(
                    "{}: |amplitude| must not exceed base (got base {base}, amplitude {amplitude})",
                    field("amplitude")
                )));
            }
            (0..n)
                .map(|c| {
                    let shape: f64 = grid
                        .cell_center(c)
                        .iter()
                        .zip(modes)
                        .map(|(x, &k)| (std::f64::consts::PI * k as f64 * x).cos())
                        .product();
                    base + amplitude * shape
                })
                .collect()
        }
    };
    Ok(ScalarField::new(values))
}
