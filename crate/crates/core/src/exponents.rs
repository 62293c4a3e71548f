//! Exact exponent bookkeeping for the integrability bootstrap.
//!
//! Starting from an a-priori bound `u ∈ L^{νΓ}(Ω_T)`, the bootstrap lifts an
//! integrability exponent `p_0 = (Γ(N+2) − 2)/N` through
//! `p_{n+1} = N p_n / (νN − 2 p_n)` (interpolation parameter
//! `θ_n = 2 p_n / (νN)`) until `p_n >= (2ν − 1)N/4`. The map has the
//! repelling fixed point `(ν − 1)N/2`, so the start must lie strictly above
//! it; that requirement is the threshold `Γ > ((ν−1)N² + 4)/(2(N+2))`.
//!
//! Every quantity is an exact [`Rational`]; floats only appear in
//! [`smallness_verdict`], whose inputs come from numerical estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

fn check_dimension(n: i64) -> Result<()> {
    if n < 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(())
}

fn check_p(p: &Rational) -> Result<()> {
    if *p <= 1 {
        return Err(Error::InvalidParameter(format!(
            "integrability exponent must exceed 1, got {p}"
        )));
    }
    Ok(())
}

fn check_order(nu: &Rational) -> Result<()> {
    if *nu < 2 {
        return Err(Error::InvalidParameter(format!(
            "nonlinearity order must be >= 2, got {nu}"
        )));
    }
    Ok(())
}

fn r(n: i64) -> Rational {
    Rational::integer(n)
}

/// Sobolev-type gain `q(p, N) = pN/(N − 2)`.
pub fn sobolev_exponent(p: &Rational, n: i64) -> Result<Rational> {
    check_dimension(n)?;
    check_p(p)?;
    Ok(p * &r(n) / &r(n - 2))
}

/// `r(p, N) = pN/(N + 2(p − 1))`, always below `p`.
pub fn min_space_integrability(p: &Rational, n: i64) -> Result<Rational> {
    check_dimension(n)?;
    check_p(p)?;
    let value = p * &r(n) / &(r(n) + (p - &r(1)) * 2);
    if value >= *p {
        return Err(Error::InvariantViolation(format!(
            "r({p}, {n}) = {value} is not below p"
        )));
    }
    Ok(value)
}

/// Interpolated exponents `(σ, τ) = (pN/(N + 2θ − 2), p/(1 − θ))` of
/// `L^{p,∞} ∩ L^{q(p),p}`.
pub fn interpolation_pair(theta: &Rational, p: &Rational, n: i64) -> Result<(Rational, Rational)> {
    check_dimension(n)?;
    check_p(p)?;
    if !(theta.is_positive() && *theta < 1) {
        return Err(Error::InvalidParameter(format!(
            "interpolation parameter must lie in (0, 1), got {theta}"
        )));
    }
    let sigma = p * &r(n) / &(r(n) + theta * &r(2) - r(2));
    let tau = p / &(r(1) - theta.clone());
    Ok((sigma, tau))
}

/// `((ν − 1)N² + 4)/(2(N + 2))`; the start `p_0` exceeds the fixed point
/// exactly when `Γ` exceeds this value.
pub fn gamma_threshold(n: i64, nu: &Rational) -> Result<Rational> {
    check_dimension(n)?;
    check_order(nu)?;
    let value = ((nu - &r(1)) * (n * n) + r(4)) / r(2 * (n + 2));
    if *nu == 2 && value != quadratic_gamma_threshold(n)? {
        return Err(Error::InvariantViolation(format!(
            "quadratic threshold identity fails for N = {n}"
        )));
    }
    Ok(value)
}

/// The quadratic-case form `(N + 2)/2 − 2N/(N + 2)`.
pub fn quadratic_gamma_threshold(n: i64) -> Result<Rational> {
    check_dimension(n)?;
    Ok(Rational::new(n + 2, 2) - Rational::new(2 * n, n + 2))
}

/// `p_0 = (Γ(N + 2) − 2)/N`.
///
/// Values of `Γ` below the quadratic threshold (so `p_0 < N/2`) are
/// rejected; the boundary value itself is returned, since it is the case
/// evaluated explicitly for `N = 3` (`Γ = 13/10`, `p_0 = 3/2`).
/// [`bootstrap_schedule`] applies the strict, order-dependent threshold.
pub fn initial_exponent(gamma: &Rational, n: i64) -> Result<Rational> {
    check_dimension(n)?;
    let p0 = (gamma * &r(n + 2) - r(2)) / r(n);
    if p0 < Rational::new(n, 2) {
        return Err(Error::BelowThreshold(format!(
            "Γ = {gamma} gives p_0 = {p0} < N/2 = {}",
            Rational::new(n, 2)
        )));
    }
    Ok(p0)
}

/// Fixed point `(ν − 1)N/2` of [`bootstrap_iterate`].
pub fn fixed_point(n: i64, nu: &Rational) -> Result<Rational> {
    check_dimension(n)?;
    check_order(nu)?;
    Ok((nu - &r(1)) * n / r(2))
}

/// Termination level `(2ν − 1)N/4`.
pub fn termination_level(n: i64, nu: &Rational) -> Result<Rational> {
    check_dimension(n)?;
    check_order(nu)?;
    Ok((nu * &r(2) - r(1)) * n / r(4))
}

/// Whether `ν < 2 + 4/N`.
pub fn improvement_condition(n: i64, nu: &Rational) -> Result<bool> {
    check_dimension(n)?;
    Ok(*nu < r(2) + Rational::new(4, n))
}

/// One bootstrap step `p ↦ Np/(νN − 2p)`.
pub fn bootstrap_iterate(p: &Rational, n: i64, nu: &Rational) -> Result<Rational> {
    check_dimension(n)?;
    check_order(nu)?;
    let denominator = nu * &r(n) - p * &r(2);
    if !denominator.is_positive() {
        return Err(Error::Divergence(format!(
            "p = {p} is not below νN/2 = {}",
            nu * &r(n) / r(2)
        )));
    }
    Ok(p * &r(n) / &denominator)
}

/// Conjugate exponents of the equal-integrability estimate:
/// `μ = (pN + 2)/(N + 2)`, `μ' = (pN + 2)/(N(p − 1))`, `θ = 2/(pN + 2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualityExponents {
    pub mu: Rational,
    pub mu_prime: Rational,
    pub theta: Rational,
}

pub fn duality_exponents(p: &Rational, n: i64) -> Result<DualityExponents> {
    check_dimension(n)?;
    check_p(p)?;
    let pn2 = p * &r(n) + r(2);
    Ok(DualityExponents {
        mu: &pn2 / &r(n + 2),
        mu_prime: &pn2 / &(r(n) * (p - &r(1))),
        theta: r(2) / pn2,
    })
}

fn check_schedule_start(gamma: &Rational, n: i64, nu: &Rational) -> Result<Rational> {
    let threshold = gamma_threshold(n, nu)?;
    if *gamma <= threshold {
        let gap = if *nu == 2 {
            format!("; the range 1 < Γ <= {threshold} is not covered by the bootstrap")
        } else {
            String::new()
        };
        return Err(Error::BelowThreshold(format!(
            "Γ = {gamma} must exceed {threshold} for N = {n}, ν = {nu}{gap}"
        )));
    }
    Ok(threshold)
}

/// Exact record of a bootstrap run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentSchedule {
    pub dimension: i64,
    pub order: Rational,
    pub gamma: Rational,
    pub gamma_threshold: Rational,
    pub fixed_point: Rational,
    pub termination_level: Rational,
    /// `p_0, p_1, ..., p_steps`.
    pub p_sequence: Vec<Rational>,
    /// `θ_n = 2p_n/(νN)` for every iterated `p_n`.
    pub theta_sequence: Vec<Rational>,
    pub terminated: bool,
    pub steps: usize,
    /// `ν < 2 + 4/N`.
    pub improvement_condition: bool,
}

/// One line of the schedule table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub step: usize,
    pub p: Rational,
    pub p_decimal: f64,
    pub theta: Option<Rational>,
    pub q: Rational,
    pub r: Rational,
    pub sigma: Option<Rational>,
    pub tau: Option<Rational>,
}

impl ExponentSchedule {
    pub fn final_exponent(&self) -> &Rational {
        self.p_sequence.last().expect("schedule has a start value")
    }

    pub fn rows(&self) -> Result<Vec<ScheduleRow>> {
        self.p_sequence
            .iter()
            .enumerate()
            .map(|(step, p)| {
                let theta = self.theta_sequence.get(step).cloned();
                let (sigma, tau) = match &theta {
                    Some(t) => {
                        let (s, t) = interpolation_pair(t, p, self.dimension)?;
                        (Some(s), Some(t))
                    }
                    None => (None, None),
                };
                Ok(ScheduleRow {
                    step,
                    p: p.clone(),
                    p_decimal: p.to_f64(),
                    theta,
                    q: sobolev_exponent(p, self.dimension)?,
                    r: min_space_integrability(p, self.dimension)?,
                    sigma,
                    tau,
                })
            })
            .collect()
    }
}

pub const DEFAULT_MAX_STEPS: usize = 1000;

/// Runs the bootstrap from `p_0(Γ)` until `p_n >= (2ν − 1)N/4` or
/// `max_steps` iterations.
pub fn bootstrap_schedule(
    gamma: &Rational,
    n: i64,
    nu: &Rational,
    max_steps: usize,
) -> Result<ExponentSchedule> {
    if max_steps < 1 {
        return Err(Error::InvalidParameter("max_steps must be >= 1".into()));
    }
    let threshold = check_schedule_start(gamma, n, nu)?;
    let fixed = fixed_point(n, nu)?;
    let target = termination_level(n, nu)?;
    let p0 = (gamma * &r(n + 2) - r(2)) / r(n);
    if p0 <= fixed {
        return Err(Error::InvariantViolation(format!(
            "p_0 = {p0} is not above the fixed point {fixed}"
        )));
    }
    let nu_n = nu * &r(n);
    let mut p_sequence = vec![p0];
    let mut theta_sequence = Vec::new();
    while theta_sequence.len() < max_steps {
        let p = p_sequence.last().expect("non-empty");
        if *p >= target {
            break;
        }
        let theta = p * &r(2) / &nu_n;
        if !(theta.is_positive() && theta < 1) {
            return Err(Error::InvariantViolation(format!(
                "θ = {theta} left (0, 1) at p = {p}"
            )));
        }
        let next = bootstrap_iterate(p, n, nu)?;
        if next <= *p {
            return Err(Error::InvariantViolation(format!(
                "bootstrap stalled: {p} -> {next}"
            )));
        }
        theta_sequence.push(theta);
        p_sequence.push(next);
    }
    let terminated = *p_sequence.last().expect("non-empty") >= target;
    Ok(ExponentSchedule {
        dimension: n,
        order: nu.clone(),
        gamma: gamma.clone(),
        gamma_threshold: threshold,
        fixed_point: fixed,
        termination_level: target,
        steps: theta_sequence.len(),
        p_sequence,
        theta_sequence,
        terminated,
        improvement_condition: improvement_condition(n, nu)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `δ >= 2/bound`, and the true constant is at least `bound`.
    Refuted,
    /// The condition cannot be certified from a lower bound on the constant.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessVerdict {
    pub verdict: Verdict,
    /// Set when `δ = 0`: the condition holds for any finite constant.
    pub holds_trivially: bool,
    /// `2/bound`: spreads at or above this value are refuted.
    pub refutation_level: f64,
}

/// Decides `δ < 2/C` as far as a lower bound `C >= constant_lower_bound`
/// allows.
pub fn smallness_verdict(delta: f64, constant_lower_bound: f64) -> Result<SmallnessVerdict> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusion spread must be non-negative, got {delta}"
        )));
    }
    if !(constant_lower_bound.is_finite() && constant_lower_bound > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "constant lower bound must be positive, got {constant_lower_bound}"
        )));
    }
    let level = 2.0 / constant_lower_bound;
    let verdict = if delta >= level {
        Verdict::Refuted
    } else {
        Verdict::Undetermined
    };
    Ok(SmallnessVerdict {
        verdict,
        holds_trivially: delta == 0.0,
        refutation_level: level,
    })
}
