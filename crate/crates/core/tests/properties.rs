use proptest::prelude::*;

use rdlab_core::duality::{coefficient_field, solve_backward_dual, DualProblem, SpaceTimeField};
use rdlab_core::equilibrium::{conserved_masses, equilibrium_sys4, ConservedMasses};
use rdlab_core::exponents::{
    bootstrap_iterate, bootstrap_schedule, fixed_point, gamma_threshold, interpolation_pair,
    min_space_integrability, quadratic_gamma_threshold, sobolev_exponent,
};
use rdlab_core::system::quadratic_four;
use rdlab_core::{Grid, Rational, ScalarField, SpeciesState};

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (2usize..12).prop_map(|n| Grid::new(1, &[n]).unwrap()),
        (2usize..6, 2usize..6).prop_map(|(a, b)| Grid::new(2, &[a, b]).unwrap()),
        (2usize..4, 2usize..4, 2usize..4).prop_map(|(a, b, c)| Grid::new(3, &[a, b, c]).unwrap()),
    ]
}

fn grid_with_fields(k: usize) -> impl Strategy<Value = (Grid, Vec<Vec<f64>>)> {
    grid_strategy().prop_flat_map(move |g| {
        let n = g.cell_count();
        (Just(g), prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), k))
    })
}

fn lap(g: &Grid, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    g.laplacian_into(u, &mut out);
    out
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_symmetric_and_negative((g, f) in grid_with_fields(2)) {
        let (u, v) = (&f[0], &f[1]);
        let lu = lap(&g, u);
        let lv = lap(&g, v);
        let a = g.inner(&lu, v);
        let b = g.inner(u, &lv);
        let scale = 1.0 + a.abs().max(b.abs());
        prop_assert!((a - b).abs() <= 1e-11 * scale);
        prop_assert!(g.inner(&lu, u) <= 1e-11 * (1.0 + g.inner(&lu, u).abs()));
        // zero-flux boundaries: the integral of Δu vanishes
        let total: f64 = lu.iter().sum::<f64>() * g.cell_volume();
        prop_assert!(total.abs() <= 1e-10 * (1.0 + lu.iter().map(|x| x.abs()).sum::<f64>() * g.cell_volume()));
    }

    #[test]
    fn laplacian_is_linear((g, f) in grid_with_fields(2), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let combo: Vec<f64> = f[0].iter().zip(&f[1]).map(|(x, y)| a * x + b * y).collect();
        let lc = lap(&g, &combo);
        let l0 = lap(&g, &f[0]);
        let l1 = lap(&g, &f[1]);
        for i in 0..combo.len() {
            let e = a * l0[i] + b * l1[i];
            prop_assert!((lc[i] - e).abs() <= 1e-10 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn lp_norms_monotone_and_homogeneous(
        (g, f) in grid_with_fields(1),
        p in 1.0f64..6.0,
        dp in 0.0f64..4.0,
        c in -5.0f64..5.0,
    ) {
        let u = ScalarField::new(f[0].clone());
        let lower = g.lp_norm(&u, p).unwrap();
        let upper = g.lp_norm(&u, p + dp).unwrap();
        let sup = g.lp_norm(&u, f64::INFINITY).unwrap();
        prop_assert!(lower <= upper * (1.0 + 1e-12) + 1e-300);
        prop_assert!(upper <= sup * (1.0 + 1e-12) + 1e-300);
        let scaled = ScalarField::new(f[0].iter().map(|x| c * x).collect());
        let s = g.lp_norm(&scaled, p).unwrap();
        prop_assert!((s - c.abs() * lower).abs() <= 1e-12 * (1.0 + s));
    }

    #[test]
    fn equilibrium_formula_properties(
        u in prop::array::uniform4(0.05f64..4.0),
        lambda in 0.1f64..10.0,
    ) {
        let g = Grid::new(1, &[3]).unwrap();
        let masses = conserved_masses(&g, &SpeciesState::constant(&g, &u)).unwrap();
        let eq = equilibrium_sys4(&masses).unwrap().u_inf;
        // detailed balance, positivity, and the masses reproduced
        prop_assert!(eq.iter().all(|&x| x > 0.0));
        prop_assert!((eq[0] * eq[1] - eq[2] * eq[3]).abs() <= 1e-12 * (1.0 + eq[0] * eq[1]));
        let back = conserved_masses(&g, &SpeciesState::constant(&g, &eq)).unwrap();
        for (a, b) in back.as_array().iter().zip(masses.as_array()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
        // homogeneous of degree one in the masses
        let m = masses.as_array();
        let scaled = ConservedMasses {
            M13: lambda * m[0],
            M14: lambda * m[1],
            M23: lambda * m[2],
            M24: lambda * m[3],
            M: lambda * masses.M,
        };
        let eq2 = equilibrium_sys4(&scaled).unwrap().u_inf;
        for (a, b) in eq2.iter().zip(&eq) {
            prop_assert!((a - lambda * b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn coefficient_field_is_a_convex_combination(
        d in prop::array::uniform4(0.01f64..50.0),
        u in prop::collection::vec(prop::array::uniform4(0.0f64..5.0), 6),
    ) {
        let s = quadratic_four(d[0], d[1], d[2], d[3]).unwrap();
        let fields = (0..4)
            .map(|i| ScalarField::new(u.iter().map(|c| c[i]).collect()))
            .collect();
        let a = coefficient_field(&SpeciesState::new(0.0, fields), &s).unwrap();
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.min() >= lo - 1e-13 && a.max() <= hi + 1e-13);
    }

    #[test]
    fn dual_solve_is_linear(
        m in 0.1f64..5.0,
        horizon in 0.1f64..3.0,
        seed_values in prop::collection::vec(-1.0f64..1.0, 2 * 6 * 5),
        a in -3.0f64..3.0,
    ) {
        let p = DualProblem::new(m, 2.0, horizon, Grid::new(1, &[6]).unwrap(), 5).unwrap();
        let split = |offset: usize| SpaceTimeField {
            levels: (0..5).map(|n| seed_values[offset + 6 * n..offset + 6 * n + 6].to_vec()).collect(),
        };
        let f = split(0);
        let h = split(30);
        let mut combo = f.clone();
        for (c, l) in combo.levels.iter_mut().zip(&h.levels) {
            for (x, y) in c.iter_mut().zip(l) {
                *x = a * *x + y;
            }
        }
        let vf = solve_backward_dual(&p, &f).unwrap();
        let vh = solve_backward_dual(&p, &h).unwrap();
        let vc = solve_backward_dual(&p, &combo).unwrap();
        let scale = vc.levels.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs())) + 1e-300;
        for n in 0..=5 {
            for i in 0..6 {
                let e = a * vf.levels[n][i] + vh.levels[n][i];
                prop_assert!((vc.levels[n][i] - e).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn dual_adjoint_identity(
        m in 0.1f64..5.0,
        values in prop::collection::vec(-1.0f64..1.0, 2 * 4 * 3 * 6),
    ) {
        let p = DualProblem::new(m, 2.0, 1.0, Grid::new(2, &[4, 3]).unwrap(), 6).unwrap();
        let split = |offset: usize| SpaceTimeField {
            levels: (0..6).map(|n| values[offset + 12 * n..offset + 12 * n + 12].to_vec()).collect(),
        };
        let f = split(0);
        let g = split(72);
        let dot = |a: &SpaceTimeField, b: &SpaceTimeField| -> f64 {
            a.levels.iter().zip(&b.levels).map(|(x, y)| x.iter().zip(y).map(|(s, t)| s * t).sum::<f64>()).sum()
        };
        let lhs = dot(&p.forward_operator(&f).unwrap(), &g);
        let rhs = dot(&f, &p.adjoint_operator(&g).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
    }
}

fn rationals() -> impl Strategy<Value = Rational> {
    (1i64..400, 1i64..60).prop_map(|(n, d)| q(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exponent_orderings(p in rationals(), n in 3i64..12) {
        prop_assume!(p > 1);
        let big = sobolev_exponent(&p, n).unwrap();
        let small = min_space_integrability(&p, n).unwrap();
        prop_assert!(small < p && p < big);
    }

    #[test]
    fn interpolation_pair_identities(p in rationals(), tn in 1i64..99, n in 3i64..12) {
        prop_assume!(p > 1);
        let theta = q(tn, 100);
        let (sigma, tau) = interpolation_pair(&theta, &p, n).unwrap();
        let qp = sobolev_exponent(&p, n).unwrap();
        prop_assert_eq!(sigma.recip(), &theta / &p + (Rational::one() - &theta) / &qp);
        prop_assert_eq!(tau.recip(), (Rational::one() - &theta) / &p);
    }

    #[test]
    fn bootstrap_closure_condition(n in 3i64..9, nu in 2i64..5, frac in 1i64..99) {
        // any p strictly between the fixed point and νN/2
        let nu = Rational::integer(nu);
        let lo = fixed_point(n, &nu).unwrap();
        let hi = &nu * n / Rational::integer(2);
        let p = &lo + (&hi - &lo) * Rational::new(frac, 100);
        let theta = &p * 2 / (&nu * n);
        let (sigma, tau) = interpolation_pair(&theta, &p, n).unwrap();
        prop_assert_eq!(&sigma / &nu, min_space_integrability(&(&tau / &nu), n).unwrap());
        // strictly increasing map above the fixed point
        let next = bootstrap_iterate(&p, n, &nu).unwrap();
        prop_assert!(next > p);
    }

    #[test]
    fn schedules_increase_strictly(n in 3i64..7, nu in 2i64..4, excess in 1i64..200) {
        let nu = Rational::integer(nu);
        let gamma = gamma_threshold(n, &nu).unwrap() + Rational::new(excess, 100);
        let s = bootstrap_schedule(&gamma, n, &nu, 1000).unwrap();
        prop_assert!(s.terminated);
        for w in s.p_sequence.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for t in &s.theta_sequence {
            prop_assert!(t.is_positive() && *t < 1);
        }
    }
}

#[test]
fn quadratic_threshold_identity() {
    for n in 3..=10 {
        assert_eq!(
            gamma_threshold(n, &Rational::integer(2)).unwrap(),
            quadratic_gamma_threshold(n).unwrap()
        );
    }
}

#[test]
fn iterate_fixed_points_are_exact() {
    for n in 3..=8 {
        for nu in [q(2, 1), q(5, 2), q(3, 1), q(7, 2)] {
            let p = fixed_point(n, &nu).unwrap();
            assert_eq!(bootstrap_iterate(&p, n, &nu).unwrap(), p);
        }
    }
}
