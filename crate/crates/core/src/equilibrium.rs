//! Conserved masses and the detailed-balance equilibrium of the
//! 4-species system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::SpeciesState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ConservedMasses {
    pub M13: f64,
    pub M14: f64,
    pub M23: f64,
    pub M24: f64,
    /// Total mass `M13 + M24` (equal to `M14 + M23`).
    pub M: f64,
}

impl ConservedMasses {
    /// Masses in the fixed order `M13, M14, M23, M24`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.M13, self.M14, self.M23, self.M24]
    }

    fn scale(&self) -> f64 {
        self.as_array().iter().fold(self.M.abs(), |m, v| m.max(v.abs()))
    }
}

/// Constant positive state solving `u1 u2 = u3 u4` under the four mass
/// constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    pub u_inf: [f64; 4],
}

impl EquilibriumState {
    /// Spatially constant state on `grid` at time 0.
    pub fn to_state(&self, grid: &Grid) -> SpeciesState {
        SpeciesState::constant(grid, &self.u_inf)
    }
}

pub fn conserved_masses(grid: &Grid, state: &SpeciesState) -> Result<ConservedMasses> {
    if state.species_count() != 4 {
        return Err(Error::InvalidConfiguration(format!(
            "conserved masses need a 4-species state, got {} species",
            state.species_count()
        )));
    }
    let mut totals = [0.0; 4];
    for (t, f) in totals.iter_mut().zip(state.fields()) {
        *t = grid.integrate(f)?;
    }
    let masses = ConservedMasses {
        M13: totals[0] + totals[2],
        M14: totals[0] + totals[3],
        M23: totals[1] + totals[2],
        M24: totals[1] + totals[3],
        M: totals[0] + totals[1] + totals[2] + totals[3],
    };
    let scale = masses.scale();
    let r1 = (masses.M13 + masses.M24 - masses.M).abs();
    let r2 = (masses.M14 + masses.M23 - masses.M).abs();
    if r1.max(r2) > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvariantViolation(format!(
            "mass identities broken: |M13+M24-M| = {r1:e}, |M14+M23-M| = {r2:e}"
        )));
    }
    Ok(masses)
}

pub fn equilibrium_sys4(masses: &ConservedMasses) -> Result<EquilibriumState> {
    let [m13, m14, m23, m24] = masses.as_array();
    if let Some((name, v)) = [("M13", m13), ("M14", m14), ("M23", m23), ("M24", m24)]
        .into_iter()
        .find(|(_, v)| !(*v > 0.0))
    {
        return Err(Error::DegenerateMass(format!(
            "{name} = {v}; the equilibrium lies on the boundary of the positive cone"
        )));
    }
    let m = masses.M;
    Ok(EquilibriumState {
        u_inf: [m13 * m14 / m, m23 * m24 / m, m13 * m23 / m, m14 * m24 / m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::quadratic_four;

    fn masses_of(u: [f64; 4]) -> ConservedMasses {
        let g = Grid::new(1, &[3]).unwrap();
        conserved_masses(&g, &SpeciesState::constant(&g, &u)).unwrap()
    }

    #[test]
    fn masses_of_constant_states() {
        let m = masses_of([1.0; 4]);
        assert_eq!(m.as_array(), [2.0; 4]);
        assert!((m.M - 4.0).abs() < 1e-14);
        let m = masses_of([2.0, 1.0, 1.0, 0.0]);
        let expect = [3.0, 2.0, 2.0, 1.0];
        for (a, b) in m.as_array().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((m.M - 4.0).abs() < 1e-14);
        assert_eq!(masses_of([0.0; 4]).as_array(), [0.0; 4]);
    }

    #[test]
    fn wrong_species_count() {
        let g = Grid::new(1, &[3]).unwrap();
        let s = SpeciesState::constant(&g, &[1.0, 1.0]);
        assert!(matches!(
            conserved_masses(&g, &s),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    /// Hand oracle: u1 = x, u3 = M13 - x, u4 = M14 - x, u2 = M23 - M13 + x,
    /// then x (M23 - M13 + x) = (M13 - x)(M14 - x) is linear in x.
    fn hand_oracle(m13: f64, m14: f64, m23: f64) -> [f64; 4] {
        let x = m13 * m14 / (m23 - m13 + m13 + m14);
        [x, m23 - m13 + x, m13 - x, m14 - x]
    }

    #[test]
    fn closed_form_equilibria() {
        let eq = |m13, m14, m23, m24, m| {
            equilibrium_sys4(&ConservedMasses {
                M13: m13,
                M14: m14,
                M23: m23,
                M24: m24,
                M: m,
            })
            .unwrap()
            .u_inf
        };
        assert_eq!(eq(2.0, 2.0, 2.0, 2.0, 4.0), [1.0; 4]);
        assert_eq!(eq(3.0, 2.0, 2.0, 1.0, 4.0), [1.5, 0.5, 1.5, 0.5]);
        assert_eq!(eq(1.0, 1.0, 1.0, 1.0, 2.0), [0.5; 4]);
        let oracle = hand_oracle(3.0, 2.0, 2.0);
        let u = eq(3.0, 2.0, 2.0, 1.0, 4.0);
        for (a, b) in u.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(u[0] * u[1], u[2] * u[3]);
    }

    #[test]
    fn degenerate_masses_rejected() {
        let m = masses_of([1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            equilibrium_sys4(&m),
            Err(Error::DegenerateMass(_))
        ));
    }

    #[test]
    fn equilibrium_is_a_reaction_fixed_point() {
        let s = quadratic_four(1.0, 1.0, 1.0, 1.0).unwrap();
        let e = equilibrium_sys4(&masses_of([0.3, 2.0, 1.1, 0.7])).unwrap();
        let f = s.reaction_rates(&e.u_inf).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-13));
        let m = masses_of([0.3, 2.0, 1.1, 0.7]);
        let u = e.u_inf;
        for (j, k, mjk) in [(0, 2, m.M13), (0, 3, m.M14), (1, 2, m.M23), (1, 3, m.M24)] {
            assert!((u[j] + u[k] - mjk).abs() <= 1e-12 * mjk);
        }
    }
}
