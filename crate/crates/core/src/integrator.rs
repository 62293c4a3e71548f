//! Time integration of `∂_t u_i − d_i Δ u_i = f_i(u)` with implicit
//! diffusion and explicit reaction.
//!
//! The default IMEX Euler step solves
//! `(I − dt d_i Δ_h) u_i^{n+1} = u_i^n + dt f_i(u^n)` by conjugate gradients.
//! Implicit diffusion preserves `∫ u_i` exactly and the reaction increments
//! cancel pointwise along conservation vectors, so the discrete conserved
//! masses are constant up to rounding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::SeriesRecorder;
use crate::equilibrium::EquilibriumState;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linalg::{conjugate_gradient, default_max_iter};
use crate::system::{ReactionSystem, CLAMP_TOL};

/// Concentration fields of all species at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesState {
    time: f64,
    fields: Vec<ScalarField>,
}

impl SpeciesState {
    pub fn new(time: f64, fields: Vec<ScalarField>) -> Self {
        Self { time, fields }
    }

    /// Spatially constant state at `t = 0`.
    pub fn constant(grid: &Grid, values: &[f64]) -> Self {
        Self {
            time: 0.0,
            fields: values
                .iter()
                .map(|&v| ScalarField::constant(grid, v))
                .collect(),
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn field(&self, species: usize) -> &ScalarField {
        &self.fields[species]
    }

    pub fn species_count(&self) -> usize {
        self.fields.len()
    }

    pub fn cell_count(&self) -> usize {
        self.fields.first().map_or(0, ScalarField::len)
    }

    /// Concentration vector at one cell.
    pub fn at_cell(&self, cell: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f.values()[cell]).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.fields.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min)
    }

    /// Checks shape against a grid and a system, and non-negativity.
    pub fn validate(&self, grid: &Grid, system: &ReactionSystem) -> Result<()> {
        if self.species_count() != system.species_count() {
            return Err(Error::DimensionMismatch {
                expected: system.species_count(),
                found: self.species_count(),
            });
        }
        for (species, f) in self.fields.iter().enumerate() {
            grid.check_field(f.values())?;
            if let Some((cell, &value)) = f
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v >= -CLAMP_TOL))
            {
                return Err(Error::Domain {
                    species,
                    cell,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit Euler diffusion, explicit Euler reaction. First order.
    ImexEuler,
    /// Reaction half step (Heun), Crank–Nicolson diffusion, reaction half step.
    StrangImex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositivityPolicy {
    /// Retry a step that produced negative values as two half steps.
    HalveDt,
    /// Weight the destruction terms by `u^{n+1}/u^n`. Unconditionally
    /// positive, but only conserves mass up to `O(dt)` per step.
    Patankar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub dt: f64,
    pub scheme: Scheme,
    pub positivity_policy: PositivityPolicy,
    pub max_halvings: u32,
    pub linear_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::ImexEuler,
            positivity_policy: PositivityPolicy::HalveDt,
            max_halvings: 12,
            linear_tol: 1e-12,
        }
    }
}

impl StepControl {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time.dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time.linear_tol must be positive, got {}",
                self.linear_tol
            )));
        }
        Ok(())
    }
}

/// Solves `(I − c Δ_h + diag(extra)) x = rhs`, warm-started at `rhs`.
fn implicit_diffusion(
    grid: &Grid,
    c: f64,
    extra: Option<&[f64]>,
    rhs: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    conjugate_gradient(
        |v, out| {
            grid.laplacian_into(v, out);
            for (i, o) in out.iter_mut().enumerate() {
                *o = v[i] - c * *o;
            }
            if let Some(e) = extra {
                for ((o, vi), ei) in out.iter_mut().zip(v).zip(e) {
                    *o += ei * vi;
                }
            }
        },
        rhs,
        &mut x,
        tol,
        default_max_iter(rhs.len()),
    )?;
    Ok(x)
}

/// Crank–Nicolson diffusion step for one species.
fn crank_nicolson(grid: &Grid, c: f64, u: &[f64], tol: f64) -> Result<Vec<f64>> {
    let mut lap = vec![0.0; u.len()];
    grid.laplacian_into(u, &mut lap);
    let rhs: Vec<f64> = u.iter().zip(&lap).map(|(v, l)| v + 0.5 * c * l).collect();
    implicit_diffusion(grid, 0.5 * c, None, &rhs, tol)
}

struct Stepper<'a> {
    system: &'a ReactionSystem,
    grid: &'a Grid,
    control: StepControl,
}

impl Stepper<'_> {
    /// Cell-major scratch evaluation of `f` over the whole state.
    fn rates(&self, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = fields.len();
        let n = self.grid.cell_count();
        let mut out = vec![vec![0.0; n]; k];
        let mut u = vec![0.0; k];
        let mut f = vec![0.0; k];
        for cell in 0..n {
            for (s, field) in fields.iter().enumerate() {
                u[s] = field[cell];
            }
            self.system.rates_into(&u, &mut f);
            for (s, fs) in f.iter().enumerate() {
                out[s][cell] = *fs;
            }
        }
        out
    }

    /// Patankar weights `D_i(u)/u_i` and productions `P_i(u)`.
    fn patankar_terms(&self, fields: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let k = fields.len();
        let n = self.grid.cell_count();
        let mut prod = vec![vec![0.0; n]; k];
        let mut weight = vec![vec![0.0; n]; k];
        let mut u = vec![0.0; k];
        let mut p = vec![0.0; k];
        let mut d = vec![0.0; k];
        for cell in 0..n {
            for (s, field) in fields.iter().enumerate() {
                u[s] = field[cell];
            }
            self.system.production_destruction_into(&u, &mut p, &mut d);
            for s in 0..k {
                prod[s][cell] = p[s];
                weight[s][cell] = if u[s] > 0.0 { d[s] / u[s] } else { 0.0 };
            }
        }
        (prod, weight)
    }

    fn reaction_substep(&self, fields: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
        match self.control.positivity_policy {
            PositivityPolicy::HalveDt => {
                let k1 = self.rates(fields);
                let stage: Vec<Vec<f64>> = fields
                    .iter()
                    .zip(&k1)
                    .map(|(u, f)| u.iter().zip(f).map(|(a, b)| a + h * b).collect())
                    .collect();
                let k2 = self.rates(&stage);
                fields
                    .iter()
                    .zip(k1.iter().zip(&k2))
                    .map(|(u, (f1, f2))| {
                        u.iter()
                            .zip(f1.iter().zip(f2))
                            .map(|(a, (b, c))| a + 0.5 * h * (b + c))
                            .collect()
                    })
                    .collect()
            }
            PositivityPolicy::Patankar => {
                let (prod, weight) = self.patankar_terms(fields);
                fields
                    .iter()
                    .zip(prod.iter().zip(&weight))
                    .map(|(u, (p, w))| {
                        u.iter()
                            .zip(p.iter().zip(w))
                            .map(|(a, (pi, wi))| (a + h * pi) / (1.0 + h * wi))
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// One step of size `dt` without positivity handling.
    fn raw_step(&self, fields: &[Vec<f64>], dt: f64) -> Result<Vec<Vec<f64>>> {
        let tol = self.control.linear_tol;
        let d = self.system.diffusions();
        match self.control.scheme {
            Scheme::ImexEuler => match self.control.positivity_policy {
                PositivityPolicy::HalveDt => {
                    let f = self.rates(fields);
                    fields
                        .iter()
                        .enumerate()
                        .map(|(s, u)| {
                            let rhs: Vec<f64> =
                                u.iter().zip(&f[s]).map(|(a, b)| a + dt * b).collect();
                            implicit_diffusion(self.grid, dt * d[s], None, &rhs, tol)
                        })
                        .collect()
                }
                PositivityPolicy::Patankar => {
                    let (prod, weight) = self.patankar_terms(fields);
                    fields
                        .iter()
                        .enumerate()
                        .map(|(s, u)| {
                            let rhs: Vec<f64> =
                                u.iter().zip(&prod[s]).map(|(a, p)| a + dt * p).collect();
                            let diag: Vec<f64> = weight[s].iter().map(|w| dt * w).collect();
                            implicit_diffusion(self.grid, dt * d[s], Some(&diag), &rhs, tol)
                        })
                        .collect()
                }
            },
            Scheme::StrangImex => {
                let half = self.reaction_substep(fields, 0.5 * dt);
                let diffused: Vec<Vec<f64>> = half
                    .iter()
                    .enumerate()
                    .map(|(s, u)| crank_nicolson(self.grid, dt * d[s], u, tol))
                    .collect::<Result<_>>()?;
                Ok(self.reaction_substep(&diffused, 0.5 * dt))
            }
        }
    }

    fn first_negative(fields: &[Vec<f64>]) -> Option<(usize, usize, f64)> {
        fields.iter().enumerate().find_map(|(s, f)| {
            f.iter()
                .enumerate()
                .find(|(_, v)| !(**v >= -CLAMP_TOL))
                .map(|(c, &v)| (s, c, v))
        })
    }

    fn advance(&self, fields: &[Vec<f64>], t: f64, dt: f64, depth: u32) -> Result<Vec<Vec<f64>>> {
        let mut next = self.raw_step(fields, dt)?;
        if let Some((species, cell, value)) = Self::first_negative(&next) {
            if self.control.positivity_policy == PositivityPolicy::HalveDt
                && depth < self.control.max_halvings
            {
                let mid = self.advance(fields, t, 0.5 * dt, depth + 1)?;
                return self.advance(&mid, t + 0.5 * dt, 0.5 * dt, depth + 1);
            }
            return Err(Error::StepFailure {
                time: t,
                species,
                cell,
                value,
                halvings: depth,
            });
        }
        for f in next.iter_mut() {
            for v in f.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Ok(next)
    }
}

fn check_inputs(system: &ReactionSystem, grid: &Grid, state: &SpeciesState, control: &StepControl) -> Result<()> {
    control.validate()?;
    state.validate(grid, system)
}

fn to_vecs(state: &SpeciesState) -> Vec<Vec<f64>> {
    state
        .fields()
        .iter()
        .map(|f| f.values().iter().map(|v| v.max(0.0)).collect())
        .collect()
}

fn from_vecs(time: f64, fields: Vec<Vec<f64>>) -> SpeciesState {
    SpeciesState::new(time, fields.into_iter().map(ScalarField::new).collect())
}

/// Advances `state` by `control.dt`.
pub fn step(
    system: &ReactionSystem,
    grid: &Grid,
    state: &SpeciesState,
    control: &StepControl,
) -> Result<SpeciesState> {
    check_inputs(system, grid, state, control)?;
    let stepper = Stepper {
        system,
        grid,
        control: *control,
    };
    let next = stepper.advance(&to_vecs(state), state.time(), control.dt, 0)?;
    Ok(from_vecs(state.time() + control.dt, next))
}

/// Sampling cadence and norms recorded by [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub every: f64,
    /// Exponents `p` (may include infinity) for the per-species `L^p` series.
    pub lp_exponents: Vec<f64>,
}

impl Sampling {
    pub fn every(every: f64) -> Self {
        Self {
            every,
            lp_exponents: vec![1.0, 2.0],
        }
    }
}

/// Sampled states and diagnostic series of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpeciesState>,
    /// Named diagnostic series sampled alongside `times`.
    pub series: BTreeMap<String, Vec<f64>>,
    /// Column order for export.
    pub series_order: Vec<String>,
    pub equilibrium: Option<EquilibriumState>,
    pub entropy_at_equilibrium: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.get(name).map(Vec::as_slice)
    }

    pub fn final_state(&self) -> Option<&SpeciesState> {
        self.states.last()
    }

    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            series: BTreeMap::new(),
            series_order: Vec::new(),
            equilibrium: None,
            entropy_at_equilibrium: None,
        }
    }

    /// Trajectory from bare states (no diagnostic series); times must
    /// start at 0 and increase strictly.
    pub fn from_states(states: Vec<SpeciesState>) -> Result<Self> {
        let times: Vec<f64> = states.iter().map(SpeciesState::time).collect();
        if times.first() != Some(&0.0) {
            return Err(Error::InvalidParameter(
                "trajectory must start at t = 0".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "trajectory times must increase strictly".into(),
            ));
        }
        Ok(Self {
            times,
            states,
            ..Self::empty()
        })
    }

    fn push(&mut self, recorder: &SeriesRecorder, state: SpeciesState) {
        self.times.push(state.time());
        for (name, value) in recorder.names().iter().zip(recorder.record(&state)) {
            self.series
                .get_mut(name)
                .expect("series registered at start")
                .push(value);
        }
        self.states.push(state);
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (partial trajectory up to t = {})",
            self.error,
            self.partial.horizon()
        )
    }
}

impl std::error::Error for RunFailure {}

/// Integrates from `initial` (taken to be at `t = 0`) to `t_end`.
pub fn run(
    system: &ReactionSystem,
    grid: &Grid,
    initial: &SpeciesState,
    t_end: f64,
    control: &StepControl,
    sampling: &Sampling,
) -> std::result::Result<Trajectory, RunFailure> {
    let fail = |error: Error| RunFailure {
        error,
        partial: Box::new(Trajectory::empty()),
    };
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(fail(Error::InvalidParameter(format!(
            "time.t_end must be positive, got {t_end}"
        ))));
    }
    if !(sampling.every.is_finite() && sampling.every > 0.0) {
        return Err(fail(Error::InvalidParameter(format!(
            "time.sample_every must be positive, got {}",
            sampling.every
        ))));
    }
    check_inputs(system, grid, initial, control).map_err(fail)?;
    let start = SpeciesState::new(0.0, initial.fields().to_vec());
    let recorder =
        SeriesRecorder::new(grid, system, &start, &sampling.lp_exponents).map_err(fail)?;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        series: recorder
            .names()
            .iter()
            .map(|n| (n.clone(), Vec::new()))
            .collect(),
        series_order: recorder.names().to_vec(),
        equilibrium: recorder.equilibrium(),
        entropy_at_equilibrium: recorder.entropy_at_equilibrium(),
    };
    let stepper = Stepper {
        system,
        grid,
        control: *control,
    };
    let dt = control.dt;
    let n_steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as u64;
    let mut fields = to_vecs(&start);
    traj.push(&recorder, start);
    let mut next_sample = 1u64;
    for k in 1..=n_steps {
        let t_prev = ((k - 1) as f64 * dt).min(t_end);
        let t = if k == n_steps { t_end } else { k as f64 * dt };
        match stepper.advance(&fields, t_prev, t - t_prev, 0) {
            Ok(next) => fields = next,
            Err(error) => {
                return Err(RunFailure {
                    error,
                    partial: Box::new(traj),
                })
            }
        }
        let due = next_sample as f64 * sampling.every;
        if k == n_steps || t + 1e-9 * dt >= due {
            traj.push(&recorder, from_vecs(t, fields.clone()));
            next_sample = (t / sampling.every + 1e-9).floor() as u64 + 1;
        }
    }
    Ok(traj)
}
