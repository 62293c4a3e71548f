//! Functionals evaluated along trajectories: entropy, entropy dissipation,
//! distances to equilibrium, exponential decay fits and mixed space–time
//! (Bochner) norms `‖u‖_{p,q} = (∫_0^T ‖u(t)‖_{L^p}^q dt)^{1/q}`.
//!
//! All time integrals use the trapezoid rule on the sample times.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{conserved_masses, equilibrium_sys4, EquilibriumState};
use crate::error::{Error, Result};
use crate::grid::{lp_norm_slice, Grid};
use crate::integrator::{SpeciesState, Trajectory};
use crate::system::ReactionSystem;

/// Floor applied to `u1 u2` and `u3 u4` inside the log-ratio.
pub const LOG_FLOOR: f64 = 1e-30;

/// Samples below this value are excluded from decay fits.
pub const FIT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct EntropyReport {
    pub E: f64,
    pub D: f64,
    pub E_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Amplitude `exp(intercept)`.
    pub c1: f64,
    /// Rate `−slope`.
    pub c2: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BochnerNorm {
    #[serde(with = "crate::serde_ext")]
    pub p: f64,
    #[serde(with = "crate::serde_ext")]
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    #[serde(with = "crate::serde_ext")]
    pub p1: f64,
    #[serde(with = "crate::serde_ext")]
    pub q1: f64,
    #[serde(with = "crate::serde_ext")]
    pub p2: f64,
    #[serde(with = "crate::serde_ext")]
    pub q2: f64,
    pub theta: f64,
    /// Interpolated exponents: `1/s = θ/p1 + (1−θ)/p2`, same for `r` with `q`.
    #[serde(with = "crate::serde_ext")]
    pub s: f64,
    #[serde(with = "crate::serde_ext")]
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

fn entropy_density(u: f64) -> f64 {
    if u > 0.0 {
        u * u.ln() - u + 1.0
    } else {
        1.0
    }
}

fn check_state(grid: &Grid, state: &SpeciesState, system: &ReactionSystem) -> Result<()> {
    if state.species_count() != system.species_count() {
        return Err(Error::DimensionMismatch {
            expected: system.species_count(),
            found: state.species_count(),
        });
    }
    state
        .fields()
        .iter()
        .try_for_each(|f| grid.check_field(f.values()))
}

/// `Σ_i ∫ (u_i log u_i − u_i + 1)`, with the integrand extended by 1 at `u_i = 0`.
pub fn entropy(grid: &Grid, state: &SpeciesState, system: &ReactionSystem) -> Result<f64> {
    check_state(grid, state, system)?;
    Ok(state
        .fields()
        .iter()
        .map(|f| grid.integrate_slice(&f.values().iter().map(|&u| entropy_density(u)).collect::<Vec<_>>()))
        .sum())
}

/// `Σ_i ∫ 4 d_i |∇√u_i|² + ∫ (u1u2 − u3u4) log(u1u2/(u3u4))`.
///
/// Gradients are face differences of cell values of `√u_i`.
pub fn entropy_dissipation(
    grid: &Grid,
    state: &SpeciesState,
    system: &ReactionSystem,
) -> Result<f64> {
    check_state(grid, state, system)?;
    if !system.is_unit_quadratic_four() {
        return Err(Error::InvalidConfiguration(
            "entropy dissipation is defined for the 4-species system with unit rates".into(),
        ));
    }
    let vol = grid.cell_volume();
    let mut fisher = 0.0;
    for (f, d) in state.fields().iter().zip(system.diffusions()) {
        let roots: Vec<f64> = f.values().iter().map(|u| u.max(0.0).sqrt()).collect();
        let sum: f64 = grid
            .faces()
            .map(|(lo, hi, inv_h2)| {
                let g = roots[hi] - roots[lo];
                g * g * inv_h2
            })
            .sum();
        fisher += 4.0 * d * sum * vol;
    }
    let [u1, u2, u3, u4] = [0, 1, 2, 3].map(|s| state.field(s).values());
    let mut reactive = 0.0;
    for c in 0..u1.len() {
        let a = u1[c].max(0.0) * u2[c].max(0.0);
        let b = u3[c].max(0.0) * u4[c].max(0.0);
        if a < LOG_FLOOR && b < LOG_FLOOR {
            continue;
        }
        reactive += (a - b) * (a.max(LOG_FLOOR).ln() - b.max(LOG_FLOOR).ln());
    }
    Ok(fisher + reactive * vol)
}

pub fn entropy_report(
    grid: &Grid,
    state: &SpeciesState,
    system: &ReactionSystem,
    equilibrium: &EquilibriumState,
) -> Result<EntropyReport> {
    let e = entropy(grid, state, system)?;
    let e_inf = entropy(grid, &equilibrium.to_state(grid), system)?;
    Ok(EntropyReport {
        E: e,
        D: entropy_dissipation(grid, state, system)?,
        E_rel: e - e_inf,
    })
}

/// Per-species `‖u_i − u_{i,∞}‖_{L¹}`.
pub fn l1_distances(grid: &Grid, state: &SpeciesState, equilibrium: &EquilibriumState) -> Vec<f64> {
    state
        .fields()
        .iter()
        .zip(equilibrium.u_inf)
        .map(|(f, e)| f.values().iter().map(|u| (u - e).abs()).sum::<f64>() * grid.cell_volume())
        .collect()
}

/// `Σ_i ‖u_i − u_{i,∞}‖_{L¹}`, the `l1_dist` series.
pub fn l1_distance(grid: &Grid, state: &SpeciesState, equilibrium: &EquilibriumState) -> f64 {
    l1_distances(grid, state, equilibrium).iter().sum()
}

/// Column label for an exponent: `2`, `1.5`, `inf`.
pub fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else if p.fract() == 0.0 && p.abs() < 1e15 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

/// Evaluates the named per-sample diagnostics used by [`crate::integrator::run`].
///
/// For the unit 4-species system the columns are `E, D, E_rel, M13, M14,
/// M23, M24, l1_dist` (the last and `E_rel` only for positive masses);
/// other systems record `E` and one `cons_<v>` column per conservation
/// vector. Per-species `lp_<p>_<species>` columns (species counted from 1)
/// follow in both cases.
#[derive(Debug, Clone)]
pub struct SeriesRecorder {
    grid: Grid,
    system: ReactionSystem,
    lp_exponents: Vec<f64>,
    names: Vec<String>,
    equilibrium: Option<EquilibriumState>,
    entropy_at_equilibrium: Option<f64>,
}

impl SeriesRecorder {
    pub fn new(
        grid: &Grid,
        system: &ReactionSystem,
        initial: &SpeciesState,
        lp_exponents: &[f64],
    ) -> Result<Self> {
        check_state(grid, initial, system)?;
        for &p in lp_exponents {
            if p.is_nan() || p < 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "diagnostics.lp: exponent must lie in [1, inf], got {p}"
                )));
            }
        }
        let mut names = vec!["E".to_string()];
        let mut equilibrium = None;
        let mut entropy_at_equilibrium = None;
        if system.is_unit_quadratic_four() {
            names.push("D".into());
            equilibrium = equilibrium_sys4(&conserved_masses(grid, initial)?).ok();
            if let Some(eq) = &equilibrium {
                entropy_at_equilibrium = Some(entropy(grid, &eq.to_state(grid), system)?);
                names.push("E_rel".into());
            }
            names.extend(["M13", "M14", "M23", "M24"].map(String::from));
            if equilibrium.is_some() {
                names.push("l1_dist".into());
            }
        } else {
            names.extend((1..=system.conservation_vectors().len()).map(|v| format!("cons_{v}")));
        }
        for &p in lp_exponents {
            for s in 1..=system.species_count() {
                names.push(format!("lp_{}_{s}", exponent_label(p)));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            system: system.clone(),
            lp_exponents: lp_exponents.to_vec(),
            names,
            equilibrium,
            entropy_at_equilibrium,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn equilibrium(&self) -> Option<EquilibriumState> {
        self.equilibrium
    }

    pub fn entropy_at_equilibrium(&self) -> Option<f64> {
        self.entropy_at_equilibrium
    }

    /// Values in the order of [`SeriesRecorder::names`]. The state is
    /// assumed to match the grid and system given at construction.
    pub fn record(&self, state: &SpeciesState) -> Vec<f64> {
        let grid = &self.grid;
        let system = &self.system;
        let nan = |_| f64::NAN;
        let e = entropy(grid, state, system).unwrap_or_else(nan);
        let mut out = vec![e];
        if system.is_unit_quadratic_four() {
            out.push(entropy_dissipation(grid, state, system).unwrap_or_else(nan));
            if let Some(e_inf) = self.entropy_at_equilibrium {
                out.push(e - e_inf);
            }
            match conserved_masses(grid, state) {
                Ok(m) => out.extend(m.as_array()),
                Err(_) => out.extend([f64::NAN; 4]),
            }
            if let Some(eq) = &self.equilibrium {
                out.push(l1_distance(grid, state, eq));
            }
        } else {
            for a in system.conservation_vectors() {
                let total: f64 = a
                    .iter()
                    .zip(state.fields())
                    .map(|(aj, f)| aj * grid.integrate_slice(f.values()))
                    .sum();
                out.push(total);
            }
        }
        for &p in &self.lp_exponents {
            for f in state.fields() {
                out.push(lp_norm_slice(grid.cell_volume(), f.values(), p).unwrap_or(f64::NAN));
            }
        }
        out
    }
}

/// Trapezoid weights for the sample times.
fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = times[i] - times[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    w
}

/// Running trapezoid integral, starting at 0.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

fn entropy_and_dissipation(
    trajectory: &Trajectory,
    system: &ReactionSystem,
    grid: &Grid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if let (Some(e), Some(d)) = (trajectory.series("E"), trajectory.series("D")) {
        return Ok((e.to_vec(), d.to_vec()));
    }
    let e = trajectory
        .states
        .iter()
        .map(|s| entropy(grid, s, system))
        .collect::<Result<Vec<_>>>()?;
    let d = trajectory
        .states
        .iter()
        .map(|s| entropy_dissipation(grid, s, system))
        .collect::<Result<Vec<_>>>()?;
    Ok((e, d))
}

/// `max_t |E(t) + ∫_0^t D − E(0)|`.
pub fn entropy_balance_residual(
    trajectory: &Trajectory,
    system: &ReactionSystem,
    grid: &Grid,
) -> Result<f64> {
    if trajectory.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "entropy balance needs at least 2 samples, got {}",
            trajectory.len()
        )));
    }
    let (e, d) = entropy_and_dissipation(trajectory, system, grid)?;
    let integral = cumulative_trapezoid(&trajectory.times, &d);
    Ok(e.iter()
        .zip(&integral)
        .map(|(et, it)| (et + it - e[0]).abs())
        .fold(0.0, f64::max))
}

/// Largest increase `E(t_{n+1}) − E(t_n)` between adjacent samples.
pub fn max_entropy_increase(trajectory: &Trajectory, system: &ReactionSystem, grid: &Grid) -> Result<f64> {
    let e = match trajectory.series("E") {
        Some(e) => e.to_vec(),
        None => trajectory
            .states
            .iter()
            .map(|s| entropy(grid, s, system))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(e.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Least-squares fit of `log y = log C1 − C2 t` over the trailing
/// `window_fraction` of the samples.
pub fn fit_decay(times: &[f64], values: &[f64], window_fraction: f64) -> Result<DecayFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decay window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let n = times.len();
    let take = ((n as f64) * window_fraction).ceil() as usize;
    let start = n - take.min(n);
    let points: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(_, &y)| y > FIT_FLOOR)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs 3 positive samples in the window, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = points.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    if stt == 0.0 {
        return Err(Error::InsufficientData(
            "decay fit window has a single distinct time".into(),
        ));
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON * m {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        c1: intercept.exp(),
        c2: -slope,
        r_squared,
        window: (points[0].0, points[points.len() - 1].0),
        points: points.len(),
    })
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [1, inf], got {v}"
        )));
    }
    Ok(())
}

/// `‖u_species‖_{L^q(0,T; L^p(Ω))}` over the trajectory's samples.
pub fn bochner_norm(
    trajectory: &Trajectory,
    species: usize,
    p: f64,
    q: f64,
) -> Result<BochnerNorm> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    if trajectory.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let first = &trajectory.states[0];
    if species >= first.species_count() {
        return Err(Error::InvalidParameter(format!(
            "species index {species} out of range (have {})",
            first.species_count()
        )));
    }
    let vol = 1.0 / first.cell_count() as f64;
    let spatial = trajectory
        .states
        .iter()
        .map(|s| lp_norm_slice(vol, s.field(species).values(), p))
        .collect::<Result<Vec<_>>>()?;
    Ok(BochnerNorm {
        p,
        q,
        value: time_norm(&trajectory.times, &spatial, q),
    })
}

/// `L^q(0,T)` norm of non-negative sampled values.
fn time_norm(times: &[f64], values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let scale = values.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let w = trapezoid_weights(times);
    let sum: f64 = values
        .iter()
        .zip(&w)
        .map(|(v, wi)| wi * (v / scale).powf(q))
        .sum();
    scale * sum.powf(1.0 / q)
}

fn harmonic(theta: f64, a: f64, b: f64) -> f64 {
    let inv = theta / a + (1.0 - theta) / b;
    if inv == 0.0 {
        f64::INFINITY
    } else {
        1.0 / inv
    }
}

/// Checks `‖u‖_{s,r} <= ‖u‖_{p1,q1}^θ ‖u‖_{p2,q2}^{1−θ}` with relative
/// slack `1e-10`.
#[allow(clippy::too_many_arguments)]
pub fn check_interpolation(
    trajectory: &Trajectory,
    species: usize,
    p1: f64,
    q1: f64,
    p2: f64,
    q2: f64,
    theta: f64,
) -> Result<InterpolationReport> {
    for (name, v) in [("p1", p1), ("q1", q1), ("p2", p2), ("q2", q2)] {
        check_exponent(name, v)?;
    }
    if p1 == p2 || q1 == q2 {
        return Err(Error::InvalidParameter(
            "interpolation needs p1 != p2 and q1 != q2".into(),
        ));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interpolation parameter θ must lie in (0, 1), got {theta}"
        )));
    }
    let s = harmonic(theta, p1, p2);
    let r = harmonic(theta, q1, q2);
    let lhs = bochner_norm(trajectory, species, s, r)?.value;
    let n1 = bochner_norm(trajectory, species, p1, q1)?.value;
    let n2 = bochner_norm(trajectory, species, p2, q2)?.value;
    let rhs = n1.powf(theta) * n2.powf(1.0 - theta);
    Ok(InterpolationReport {
        p1,
        q1,
        p2,
        q2,
        theta,
        s,
        r,
        lhs,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs * (1.0 + 1e-10),
    })
}

/// Result of checking `Σ_i ‖u_i − u_{i,∞}‖²_{L¹} <= K · E_rel` with `K`
/// fixed from the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiszarKullbackCheck {
    pub k: f64,
    /// Largest `lhs − K·E_rel` over later samples (<= 0 when the bound holds).
    pub max_excess: f64,
    pub holds: bool,
}

pub fn csiszar_kullback_check(
    trajectory: &Trajectory,
    system: &ReactionSystem,
    grid: &Grid,
) -> Result<CsiszarKullbackCheck> {
    let eq = trajectory.equilibrium.ok_or_else(|| {
        Error::InsufficientData("trajectory carries no equilibrium".into())
    })?;
    let e_inf = entropy(grid, &eq.to_state(grid), system)?;
    let mut pairs = Vec::with_capacity(trajectory.len());
    for s in &trajectory.states {
        let lhs: f64 = l1_distances(grid, s, &eq).iter().map(|d| d * d).sum();
        let rel = entropy(grid, s, system)? - e_inf;
        pairs.push((lhs, rel));
    }
    let (lhs0, rel0) = pairs[0];
    if !(rel0 > 0.0) {
        return Err(Error::InsufficientData(
            "initial relative entropy is zero; nothing to fit".into(),
        ));
    }
    let k = lhs0 / rel0;
    let max_excess = pairs
        .iter()
        .skip(1)
        .map(|(l, r)| l - k * r.max(0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CsiszarKullbackCheck {
        k,
        max_excess,
        holds: max_excess <= 1e-14,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use crate::system::quadratic_four;

    fn grid() -> Grid {
        Grid::new(1, &[8]).unwrap()
    }

    #[test]
    fn entropy_values() {
        let g = grid();
        let s = quadratic_four(1.0, 1.0, 1.0, 1.0).unwrap();
        let e = |u: [f64; 4]| entropy(&g, &SpeciesState::constant(&g, &u), &s).unwrap();
        assert!(e([1.0; 4]).abs() < 1e-15);
        assert!((e([std::f64::consts::E, 1.0, 1.0, 1.0]) - 1.0).abs() < 1e-14);
        assert!((e([0.0; 4]) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dissipation_values() {
        let g = grid();
        let s = quadratic_four(1.0, 2.0, 3.0, 4.0).unwrap();
        let d = |u: [f64; 4]| entropy_dissipation(&g, &SpeciesState::constant(&g, &u), &s).unwrap();
        assert_eq!(d([1.5, 0.5, 1.5, 0.5]), 0.0);
        assert!((d([2.0, 2.0, 1.0, 1.0]) - 3.0 * 4f64.ln()).abs() < 1e-13);
        assert_eq!(d([0.0; 4]), 0.0);
        // one-sided vanishing product stays finite
        assert!(d([1.0, 1.0, 0.0, 0.0]).is_finite());
    }

    #[test]
    fn dissipation_gradient_term_by_hand() {
        let g = Grid::new(1, &[2]).unwrap();
        let s = quadratic_four(1.0, 1.0, 1.0, 1.0).unwrap();
        let state = SpeciesState::new(
            0.0,
            vec![
                ScalarField::new(vec![1.0, 4.0]),
                ScalarField::new(vec![1.0, 0.25]),
                ScalarField::new(vec![1.0, 1.0]),
                ScalarField::new(vec![1.0, 1.0]),
            ],
        );
        // face terms 4 (2 - 1)^2 / h^2 |cell| = 8 and 4 (0.5 - 1)^2 / h^2 |cell| = 2;
        // both cells are in detailed balance, so the reactive part vanishes
        let d = entropy_dissipation(&g, &state, &s).unwrap();
        assert!((d - 10.0).abs() < 1e-13);
    }

    #[test]
    fn dissipation_requires_unit_four_species() {
        let g = grid();
        let s = ReactionSystem::quadratic_four_with_rates([1.0; 4], 2.0, 1.0).unwrap();
        assert!(entropy_dissipation(&g, &SpeciesState::constant(&g, &[1.0; 4]), &s).is_err());
    }

    #[test]
    fn decay_fit_on_exact_data() {
        let t: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 5.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay(&t, &y, 1.0).unwrap();
        assert!((fit.c1 - 5.0).abs() < 1e-8);
        assert!((fit.c2 - 2.0).abs() < 1e-8);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_decay(&t, &vec![3.0; t.len()], 0.5).unwrap();
        assert!(fit.c2.abs() < 1e-12);
        assert!((fit.c1 - 3.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn decay_fit_errors() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            fit_decay(&t, &[1.0, 0.0, 0.0, 1e-20], 1.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(fit_decay(&t, &[1.0; 4], 0.0).is_err());
        assert!(fit_decay(&t, &[1.0; 3], 1.0).is_err());
    }

    fn constant_trajectory(value: f64, times: &[f64]) -> Trajectory {
        let g = grid();
        Trajectory::from_states(
            times
                .iter()
                .map(|&t| SpeciesState::new(t, vec![ScalarField::constant(&g, value)]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn bochner_norm_closed_forms() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let traj = constant_trajectory(2.0, &times);
        let t_end: f64 = 3.0;
        for (p, q) in [(1.0, 1.0), (2.0, 3.0), (f64::INFINITY, 2.0), (1.5, f64::INFINITY)] {
            let n = bochner_norm(&traj, 0, p, q).unwrap().value;
            let expect = if q.is_infinite() { 2.0 } else { 2.0 * t_end.powf(1.0 / q) };
            assert!((n - expect).abs() < 1e-13 * expect, "{p} {q}: {n} vs {expect}");
        }
        assert!(bochner_norm(&traj, 0, 0.5, 2.0).is_err());
        assert!(bochner_norm(&traj, 1, 2.0, 2.0).is_err());
    }

    #[test]
    fn interpolation_equality_for_constants() {
        let times: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let traj = constant_trajectory(1.7, &times);
        let rep = check_interpolation(&traj, 0, 1.0, f64::INFINITY, 6.0, 2.0, 0.5).unwrap();
        assert!(rep.holds);
        assert!((rep.lhs - rep.rhs).abs() <= 1e-12 * rep.rhs);
        assert!((rep.s - 12.0 / 7.0).abs() < 1e-14);
        assert!((rep.r - 4.0).abs() < 1e-14);
        assert!(check_interpolation(&traj, 0, 2.0, 1.0, 2.0, 3.0, 0.5).is_err());
        assert!(check_interpolation(&traj, 0, 1.0, 1.0, 2.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn exponent_labels() {
        assert_eq!(exponent_label(2.0), "2");
        assert_eq!(exponent_label(1.5), "1.5");
        assert_eq!(exponent_label(f64::INFINITY), "inf");
    }
}
