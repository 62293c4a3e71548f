//! Exponent schedules, duality-constant estimates and summary reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rdlab_core::duality::{estimate_duality_constant, DualProblem, EstimateMethod};
use rdlab_core::exponents::{
    bootstrap_schedule, fixed_point, gamma_threshold, improvement_condition, smallness_verdict,
    termination_level, ScheduleRow, Verdict,
};
use rdlab_core::{Error, Grid, Rational};

use crate::pipeline::RunSummary;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleStatus {
    Terminated,
    NotTerminated,
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentsReport {
    pub dimension: i64,
    pub order: Rational,
    pub gamma: Rational,
    pub gamma_threshold: Rational,
    pub above_threshold: bool,
    pub fixed_point: Rational,
    pub termination_level: Rational,
    pub improvement_condition: bool,
    pub warning: Option<String>,
    pub status: ScheduleStatus,
    pub message: Option<String>,
    pub steps: Option<usize>,
    pub final_exponent: Option<Rational>,
    pub schedule: Vec<ScheduleRow>,
}

fn core(e: Error) -> CliError {
    match e {
        Error::InvalidParameter(_) | Error::InvalidConfiguration(_) | Error::UnsupportedDimension(_) => {
            CliError::Validation(e.to_string())
        }
        other => CliError::Numerical(other.to_string()),
    }
}

pub fn exponents_report(n: i64, nu: &Rational, gamma: &Rational, max_steps: usize) -> Result<ExponentsReport, CliError> {
    let threshold = gamma_threshold(n, nu).map_err(core)?;
    let improvement = improvement_condition(n, nu).map_err(core)?;
    let warning = (!improvement).then(|| {
        format!(
            "improvement condition fails: ν = {nu} >= 2 + 4/N = {}; the bootstrap threshold exceeds the quadratic one",
            Rational::integer(2) + Rational::new(4, n)
        )
    });
    let mut report = ExponentsReport {
        dimension: n,
        order: nu.clone(),
        gamma: gamma.clone(),
        above_threshold: *gamma > threshold,
        gamma_threshold: threshold,
        fixed_point: fixed_point(n, nu).map_err(core)?,
        termination_level: termination_level(n, nu).map_err(core)?,
        improvement_condition: improvement,
        warning,
        status: ScheduleStatus::BelowThreshold,
        message: None,
        steps: None,
        final_exponent: None,
        schedule: Vec::new(),
    };
    match bootstrap_schedule(gamma, n, nu, max_steps) {
        Ok(schedule) => {
            report.status = if schedule.terminated {
                ScheduleStatus::Terminated
            } else {
                ScheduleStatus::NotTerminated
            };
            if !schedule.terminated {
                report.message = Some(format!(
                    "p_n stayed below {} after {max_steps} steps",
                    schedule.termination_level
                ));
            }
            report.steps = Some(schedule.steps);
            report.final_exponent = Some(schedule.final_exponent().clone());
            report.schedule = schedule.rows().map_err(core)?;
        }
        Err(Error::BelowThreshold(msg)) => report.message = Some(msg),
        Err(e) => return Err(core(e)),
    }
    Ok(report)
}

fn opt(r: &Option<Rational>) -> String {
    r.as_ref().map_or_else(|| "-".to_string(), Rational::to_string)
}

pub fn exponents_table(report: &ExponentsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "N = {}, ν = {}, Γ = {} ({} threshold {})",
        report.dimension,
        report.order,
        report.gamma,
        if report.above_threshold { "above" } else { "not above" },
        report.gamma_threshold
    );
    let _ = writeln!(
        out,
        "fixed point {}, termination level {}, improvement condition ν < 2 + 4/N: {}",
        report.fixed_point,
        report.termination_level,
        if report.improvement_condition { "holds" } else { "fails" }
    );
    if let Some(w) = &report.warning {
        let _ = writeln!(out, "warning: {w}");
    }
    if let Some(m) = &report.message {
        let _ = writeln!(out, "{m}");
    }
    if !report.schedule.is_empty() {
        let _ = writeln!(
            out,
            "{:>4}  {:>14}  {:>12}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}",
            "step", "p_n", "p_n (dec)", "θ_n", "q", "r", "σ", "τ"
        );
        for row in &report.schedule {
            let _ = writeln!(
                out,
                "{:>4}  {:>14}  {:>12.8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}",
                row.step,
                row.p.to_string(),
                row.p_decimal,
                opt(&row.theta),
                row.q.to_string(),
                row.r.to_string(),
                opt(&row.sigma),
                opt(&row.tau)
            );
        }
    }
    out
}

/// Where the dual diffusion `m` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DualCoefficient {
    Direct { m: f64, delta: f64 },
    /// `m = (a+b)/2`, `δ = b − a` with `a = min d`, `b = max d`.
    Diffusions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityRequest {
    pub coefficient: DualCoefficient,
    pub q: f64,
    pub horizon: f64,
    pub dimension: usize,
    pub cells: usize,
    pub time_steps: usize,
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub m: f64,
    pub delta: f64,
    pub diffusions: Option<Vec<f64>>,
    pub q: f64,
    pub horizon: f64,
    pub dimension: usize,
    pub cells: usize,
    pub time_steps: usize,
    pub budget: usize,
    pub seed: u64,
    pub estimate: f64,
    pub method: EstimateMethod,
    pub converged: bool,
    pub samples_or_iters: usize,
    pub verdict: Verdict,
    pub holds_trivially: bool,
    pub refutation_level: f64,
    pub note: String,
}

pub fn duality_report(req: &DualityRequest) -> Result<DualityReport, CliError> {
    let (m, delta, diffusions) = match &req.coefficient {
        DualCoefficient::Direct { m, delta } => (*m, *delta, None),
        DualCoefficient::Diffusions(d) => {
            if d.is_empty() || d.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(CliError::Validation(
                    "diffusions: need positive finite values".into(),
                ));
            }
            let a = d.iter().copied().fold(f64::INFINITY, f64::min);
            let b = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ((a + b) / 2.0, b - a, Some(d.clone()))
        }
    };
    let grid = Grid::uniform(req.dimension, req.cells).map_err(core)?;
    let problem = DualProblem::new(m, req.q, req.horizon, grid, req.time_steps).map_err(core)?;
    let estimate = estimate_duality_constant(&problem, req.budget, req.seed).map_err(core)?;
    let verdict = smallness_verdict(delta, estimate.value).map_err(core)?;
    let note = if verdict.holds_trivially {
        "δ = 0: the smallness condition δ < 2/C holds for every finite C".to_string()
    } else {
        match verdict.verdict {
            Verdict::Refuted => format!(
                "δ = {delta} >= 2/estimate = {}; since C >= estimate, δ < 2/C fails",
                verdict.refutation_level
            ),
            Verdict::Undetermined => format!(
                "δ = {delta} < 2/estimate = {}; the estimate only bounds C from below, so δ < 2/C is not certified",
                verdict.refutation_level
            ),
        }
    };
    Ok(DualityReport {
        m,
        delta,
        diffusions,
        q: req.q,
        horizon: req.horizon,
        dimension: req.dimension,
        cells: req.cells,
        time_steps: req.time_steps,
        budget: req.budget,
        seed: req.seed,
        estimate: estimate.value,
        method: estimate.method,
        converged: estimate.converged,
        samples_or_iters: estimate.samples_or_iters,
        verdict: verdict.verdict,
        holds_trivially: verdict.holds_trivially,
        refutation_level: verdict.refutation_level,
        note,
    })
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

/// Human-readable digest of one run summary.
pub fn summary_report(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let s: RunSummary = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: not a run summary: {e}", path.display())))?;
    let mut out = String::new();
    let _ = writeln!(out, "{} [{}] t = {} ({} samples)", s.name, s.status, s.t_final, s.samples);
    if let Some(e) = &s.error {
        let _ = writeln!(out, "  error: {e}");
    }
    let drift = s.masses.max_relative_drift;
    let _ = writeln!(out, "  mass drift            {drift:.3e}  {}", mark(drift <= 1e-10));
    if let Some(e) = &s.entropy {
        let _ = writeln!(
            out,
            "  entropy {:.6} -> {:.6}, balance residual {:.3e}, max increase {:.3e}",
            e.initial, e.final_, e.balance_residual, e.max_increase
        );
    }
    if let Some(d) = &s.decay {
        match &d.fit {
            Some(f) => {
                let _ = writeln!(out, "  decay rate            {:.6} (r² = {:.6})", f.c2, f.r_squared);
            }
            None => {
                let _ = writeln!(out, "  decay rate            0 (already at equilibrium)");
            }
        }
    }
    if let Some(ck) = &s.csiszar_kullback {
        let _ = writeln!(out, "  L1²/entropy bound     K = {:.6}  {}", ck.k, mark(ck.holds));
    }
    if !s.interpolation.is_empty() {
        let held = s.interpolation.iter().filter(|r| r.holds).count();
        let _ = writeln!(
            out,
            "  interpolation         {held}/{}  {}",
            s.interpolation.len(),
            mark(held == s.interpolation.len())
        );
    }
    if let Some(d) = &s.duality {
        let _ = writeln!(
            out,
            "  duality ratio (p = {}) {:.6}, growth exponent {}",
            d.p,
            d.ratio,
            d.growth_exponent.map_or("-".into(), |g| format!("{g:.4}"))
        );
    }
    let c = &s.coefficient_field;
    let inside = c.min >= c.a - 1e-13 && c.max <= c.b + 1e-13;
    let _ = writeln!(out, "  A in [{}, {}]: [{:.6}, {:.6}]  {}", c.a, c.b, c.min, c.max, mark(inside));
    let p = &s.positivity;
    let bounded = p.sup_l1.iter().zip(&p.l1_bound).all(|(s, m)| *s <= m + 1e-10);
    let _ = writeln!(
        out,
        "  min concentration     {:.3e}  {}; L1 bound  {}",
        p.min_concentration,
        mark(p.min_concentration >= -1e-12),
        mark(bounded)
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_report_for_27_20() {
        let r = exponents_report(3, &Rational::integer(2), &Rational::new(27, 20), 1000).unwrap();
        assert_eq!(r.status, ScheduleStatus::Terminated);
        assert_eq!(r.steps, Some(3));
        assert_eq!(r.final_exponent, Some(Rational::new(57, 22)));
        assert!(r.warning.is_none());
        let table = exponents_table(&r);
        assert!(table.contains("57/22") && table.contains("19/12"));
    }

    #[test]
    fn boundary_gamma_cites_the_gap() {
        let r = exponents_report(3, &Rational::integer(2), &Rational::new(13, 10), 1000).unwrap();
        assert_eq!(r.status, ScheduleStatus::BelowThreshold);
        assert!(r.message.unwrap().contains("not covered"));
    }

    #[test]
    fn large_order_warns() {
        let r = exponents_report(3, &Rational::integer(4), &Rational::integer(5), 1000).unwrap();
        assert!(!r.improvement_condition);
        assert!(r.warning.unwrap().contains("improvement condition fails"));
    }

    fn request(coefficient: DualCoefficient) -> DualityRequest {
        DualityRequest {
            coefficient,
            q: 2.0,
            horizon: 1.0,
            dimension: 1,
            cells: 8,
            time_steps: 16,
            budget: 200,
            seed: 3,
        }
    }

    #[test]
    fn equal_diffusions_hold_trivially() {
        let r = duality_report(&request(DualCoefficient::Diffusions(vec![2.0; 4]))).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.verdict, Verdict::Undetermined);
        assert!(r.holds_trivially && r.note.contains("δ = 0"));
    }

    #[test]
    fn wide_spread_is_refuted() {
        let r = duality_report(&request(DualCoefficient::Diffusions(vec![1.0, 100.0, 1.0, 1.0]))).unwrap();
        // estimate ≈ 1/m = 2/101, so 2/estimate ≈ 101 > δ = 99: undetermined
        assert_eq!(r.verdict, Verdict::Undetermined);
        let r = duality_report(&request(DualCoefficient::Direct { m: 0.5, delta: 5.0 })).unwrap();
        assert!(r.estimate > 1.5);
        assert_eq!(r.verdict, Verdict::Refuted);
    }
}
