//! Reaction networks: the reversible 4-species system `u1 + u2 <-> u3 + u4`
//! and general polynomial systems of order `ν` with linear conservation laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concentrations in `[-CLAMP_TOL, 0)` are treated as roundoff and set to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// Threshold for a sampled conservation sum to count as satisfied.
pub const CONSERVATION_TOL: f64 = 1e-12;

/// Seed used for the sampled validation performed at construction.
const VALIDATION_SEED: u64 = 0x5eed_0f_ab;
const VALIDATION_SAMPLES: usize = 1000;

/// One term `coefficient * Π u_j^{exponents[j]}` of a polynomial rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<u32>) -> Self {
        Self {
            coefficient,
            exponents,
        }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(u)
            .filter(|(&e, _)| e > 0)
            .fold(self.coefficient, |acc, (&e, &x)| acc * x.powi(e as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kinetics {
    /// `f = (r, r, -r, -r)` with `r = backward·u3·u4 − forward·u1·u2`.
    QuadraticFour { forward: f64, backward: f64 },
    /// One list of monomials per species.
    Polynomial { terms: Vec<Vec<Monomial>> },
}

/// A reaction–diffusion network. Immutable once built; rates are pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionSystem {
    diffusions: Vec<f64>,
    order: f64,
    kinetics: Kinetics,
    conservation_vectors: Vec<Vec<f64>>,
    growth_constant: f64,
}

/// Spread of the diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpread {
    /// Smallest diffusion rate.
    pub a: f64,
    /// Largest diffusion rate.
    pub b: f64,
    pub delta: f64,
}

impl DiffusionSpread {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

/// Largest sampled value of `Σ_j a_j f_j(u)` for each conservation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_violation: Vec<f64>,
    pub passed: bool,
}

/// The reversible system `u1 + u2 <-> u3 + u4` with unit rate constants.
pub fn quadratic_four(d1: f64, d2: f64, d3: f64, d4: f64) -> Result<ReactionSystem> {
    ReactionSystem::quadratic_four_with_rates([d1, d2, d3, d4], 1.0, 1.0)
}

fn check_diffusions(diffusions: &[f64]) -> Result<()> {
    if diffusions.is_empty() {
        return Err(Error::InvalidConfiguration(
            "system.diffusions: at least one species required".into(),
        ));
    }
    for (i, &d) in diffusions.iter().enumerate() {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "system.diffusions[{i}]: diffusion must be positive and finite, got {d}"
            )));
        }
    }
    Ok(())
}

impl ReactionSystem {
    pub fn quadratic_four_with_rates(
        diffusions: [f64; 4],
        forward: f64,
        backward: f64,
    ) -> Result<Self> {
        check_diffusions(&diffusions)?;
        for (name, k) in [("forward", forward), ("backward", backward)] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::InvalidConfiguration(format!(
                    "system.{name}_rate: must be positive and finite, got {k}"
                )));
            }
        }
        let growth_constant = forward.max(backward) / 2.0;
        Ok(Self {
            diffusions: diffusions.to_vec(),
            order: 2.0,
            kinetics: Kinetics::QuadraticFour { forward, backward },
            conservation_vectors: vec![
                vec![1.0, 0.0, 1.0, 0.0],
                vec![1.0, 0.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            growth_constant,
        })
    }

    /// Structurally valid polynomial system, without the sampled checks.
    ///
    /// Use [`ReactionSystem::polynomial`] for user input; this entry point
    /// exists so that counterexamples can still be inspected with
    /// [`check_conservation_vectors`].
    pub fn polynomial_unchecked(
        diffusions: Vec<f64>,
        order: f64,
        terms: Vec<Vec<Monomial>>,
        conservation_vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_diffusions(&diffusions)?;
        let k = diffusions.len();
        if !(order.is_finite() && order >= 2.0) {
            return Err(Error::InvalidConfiguration(format!(
                "system.order: nonlinearity order must be >= 2, got {order}"
            )));
        }
        if terms.len() != k {
            return Err(Error::InvalidConfiguration(format!(
                "system.terms: expected {k} species, got {}",
                terms.len()
            )));
        }
        for (i, species_terms) in terms.iter().enumerate() {
            for (t, m) in species_terms.iter().enumerate() {
                if m.exponents.len() != k {
                    return Err(Error::InvalidConfiguration(format!(
                        "system.terms[{i}][{t}].exponents: expected length {k}, got {}",
                        m.exponents.len()
                    )));
                }
                if !m.coefficient.is_finite() {
                    return Err(Error::InvalidConfiguration(format!(
                        "system.terms[{i}][{t}].coefficient: not finite"
                    )));
                }
                if m.coefficient != 0.0 && f64::from(m.degree()) > order {
                    return Err(Error::InvalidConfiguration(format!(
                        "system.terms[{i}][{t}]: degree {} exceeds declared order {order}",
                        m.degree()
                    )));
                }
            }
        }
        if conservation_vectors.is_empty() {
            return Err(Error::InvalidConfiguration(
                "system.conservation_vectors: at least one vector required".into(),
            ));
        }
        for (v, a) in conservation_vectors.iter().enumerate() {
            if a.len() != k {
                return Err(Error::InvalidConfiguration(format!(
                    "system.conservation_vectors[{v}]: expected length {k}, got {}",
                    a.len()
                )));
            }
            if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidConfiguration(format!(
                    "system.conservation_vectors[{v}]: entries must be non-negative"
                )));
            }
        }
        for i in 0..k {
            if !conservation_vectors.iter().any(|a| a[i] > 0.0) {
                return Err(Error::InvalidConfiguration(format!(
                    "system.conservation_vectors: no vector controls species {i}"
                )));
            }
        }
        let mut system = Self {
            diffusions,
            order,
            kinetics: Kinetics::Polynomial { terms },
            conservation_vectors,
            growth_constant: 0.0,
        };
        system.growth_constant = system.sampled_growth_constant();
        Ok(system)
    }

    /// Polynomial system validated by sampling for quasi-positivity and
    /// for the declared conservation laws.
    pub fn polynomial(
        diffusions: Vec<f64>,
        order: f64,
        terms: Vec<Vec<Monomial>>,
        conservation_vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let system = Self::polynomial_unchecked(diffusions, order, terms, conservation_vectors)?;
        if let Some((species, value)) = system.quasi_positivity_violation(VALIDATION_SAMPLES) {
            return Err(Error::InvalidConfiguration(format!(
                "system.terms[{species}]: not quasi-positive (f = {value:e} at u_{species} = 0)"
            )));
        }
        let report = check_conservation_vectors(&system, VALIDATION_SAMPLES, VALIDATION_SEED);
        if let Some((v, excess)) = report
            .max_violation
            .iter()
            .enumerate()
            .find(|(_, &m)| m > CONSERVATION_TOL)
        {
            return Err(Error::InvalidConfiguration(format!(
                "system.conservation_vectors[{v}]: Σ a_j f_j reaches {excess:e} > 0"
            )));
        }
        Ok(system)
    }

    pub fn species_count(&self) -> usize {
        self.diffusions.len()
    }

    pub fn diffusions(&self) -> &[f64] {
        &self.diffusions
    }

    /// Declared polynomial degree bound `ν`.
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn kinetics(&self) -> &Kinetics {
        &self.kinetics
    }

    pub fn conservation_vectors(&self) -> &[Vec<f64>] {
        &self.conservation_vectors
    }

    /// Sampled `C` in `|f_i(u)| <= C Σ_j u_j^ν`.
    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    /// True for the built-in 4-species system with unit rate constants,
    /// the case covered by the closed-form equilibrium and entropy structure.
    pub fn is_unit_quadratic_four(&self) -> bool {
        matches!(
            self.kinetics,
            Kinetics::QuadraticFour { forward, backward } if forward == 1.0 && backward == 1.0
        )
    }

    /// Rates for a non-negative vector, no validation.
    pub(crate) fn rates_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.kinetics {
            Kinetics::QuadraticFour { forward, backward } => {
                let r = backward * u[2] * u[3] - forward * u[0] * u[1];
                out[0] = r;
                out[1] = r;
                out[2] = -r;
                out[3] = -r;
            }
            Kinetics::Polynomial { terms } => {
                for (o, species_terms) in out.iter_mut().zip(terms) {
                    *o = species_terms.iter().map(|m| m.eval(u)).sum();
                }
            }
        }
    }

    /// Splits a rate into production and destruction parts (both >= 0).
    pub(crate) fn production_destruction_into(
        &self,
        u: &[f64],
        production: &mut [f64],
        destruction: &mut [f64],
    ) {
        match &self.kinetics {
            Kinetics::QuadraticFour { forward, backward } => {
                let fwd = forward * u[0] * u[1];
                let bwd = backward * u[2] * u[3];
                production[..2].fill(bwd);
                destruction[..2].fill(fwd);
                production[2..].fill(fwd);
                destruction[2..].fill(bwd);
            }
            Kinetics::Polynomial { terms } => {
                for (i, species_terms) in terms.iter().enumerate() {
                    let (mut p, mut d) = (0.0, 0.0);
                    for m in species_terms {
                        let v = m.eval(u);
                        if v >= 0.0 {
                            p += v;
                        } else {
                            d -= v;
                        }
                    }
                    production[i] = p;
                    destruction[i] = d;
                }
            }
        }
    }

    /// Pointwise rate vector `f(u)`; roundoff-level negatives are clamped.
    pub fn reaction_rates(&self, u: &[f64]) -> Result<Vec<f64>> {
        let k = self.species_count();
        if u.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: u.len(),
            });
        }
        let mut clamped = u.to_vec();
        for (i, x) in clamped.iter_mut().enumerate() {
            if *x < -CLAMP_TOL || x.is_nan() {
                return Err(Error::Domain {
                    species: i,
                    cell: 0,
                    value: *x,
                });
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let mut out = vec![0.0; k];
        self.rates_into(&clamped, &mut out);
        Ok(out)
    }

    pub fn delta_spread(&self) -> DiffusionSpread {
        delta_spread(self)
    }

    fn quasi_positivity_violation(&self, samples: usize) -> Option<(usize, f64)> {
        let k = self.species_count();
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED ^ 0x9e37);
        let mut u = vec![0.0; k];
        let mut f = vec![0.0; k];
        for s in 0..samples {
            for x in u.iter_mut() {
                *x = rng.gen_range(0.0..2.0);
            }
            let i = s % k;
            u[i] = 0.0;
            self.rates_into(&u, &mut f);
            if f[i] < -1e-13 {
                return Some((i, f[i]));
            }
        }
        None
    }

    fn sampled_growth_constant(&self) -> f64 {
        let k = self.species_count();
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED ^ 0x51);
        let mut u = vec![0.0; k];
        let mut f = vec![0.0; k];
        let mut c: f64 = 0.0;
        for _ in 0..VALIDATION_SAMPLES {
            for x in u.iter_mut() {
                *x = rng.gen_range(0.0_f64..4.0);
            }
            let bound: f64 = u.iter().map(|x: &f64| x.powf(self.order)).sum();
            if bound < 1e-12 {
                continue;
            }
            self.rates_into(&u, &mut f);
            c = f.iter().fold(c, |m, v| m.max(v.abs() / bound));
        }
        c
    }
}

/// Samples non-negative states (including some on the boundary
/// `u_j = 0`) and records `max_u Σ_j a_j f_j(u)` per conservation vector.
pub fn check_conservation_vectors(
    system: &ReactionSystem,
    sample_count: usize,
    seed: u64,
) -> ConservationReport {
    let k = system.species_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; k];
    let mut f = vec![0.0; k];
    let mut max_violation = vec![f64::NEG_INFINITY; system.conservation_vectors.len()];
    for s in 0..sample_count.max(1) {
        for x in u.iter_mut() {
            *x = rng.gen_range(0.0..2.0);
        }
        if s % 4 == 3 {
            u[rng.gen_range(0..k)] = 0.0;
        }
        system.rates_into(&u, &mut f);
        for (m, a) in max_violation.iter_mut().zip(&system.conservation_vectors) {
            let sum: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
            *m = m.max(sum);
        }
    }
    let passed = max_violation.iter().all(|&m| m <= CONSERVATION_TOL);
    ConservationReport {
        max_violation,
        passed,
    }
}

pub fn delta_spread(system: &ReactionSystem) -> DiffusionSpread {
    let a = system.diffusions.iter().copied().fold(f64::INFINITY, f64::min);
    let b = system
        .diffusions
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    DiffusionSpread { a, b, delta: b - a }
}
