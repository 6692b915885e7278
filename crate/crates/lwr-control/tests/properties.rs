//! Property-based invariants for the solver, functionals, partitions, and
//! controllers.

use proptest::prelude::*;

use lwr_control::{
    barrier_b, boundary_fluxes, cfl_dt, convexity_split, godunov_flux, interval_set_subset,
    lyapunov_v, rate_g, rate_k, riemann_exact, solve_left, solve_right, step, BoundaryInput,
    DensityField, FluxKind, FluxModel, Grid, Side, CONSTRAINT_TOL,
};

fn model_for(idx: usize) -> FluxModel {
    match idx % 3 {
        0 => FluxModel::greenshields(1.0).unwrap(),
        1 => FluxModel::sextic(1.0).unwrap(),
        _ => FluxModel::greenberg_log(1.0, 0.1).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Monotone scheme: one Godunov step keeps every cell inside the convex
    /// hull of the stencil data, hence inside [0, u_max].
    #[test]
    fn godunov_step_preserves_bounds(
        cells in prop::collection::vec(0.0..=1.0f64, 8..48),
        omega_a in 0.0..=1.0f64,
        omega_b in 0.0..=1.0f64,
        cfl in 0.05..=1.0f64,
        flux_idx in 0usize..3,
    ) {
        let model = model_for(flux_idx);
        let n = cells.len();
        let grid = Grid::new(-1.0, 1.0, n).unwrap();
        let field = DensityField::new(grid, cells.clone(), 0.0);
        let bc = BoundaryInput::new(omega_a, omega_b);
        let dt = cfl_dt(&field, bc, &model, cfl).min(0.015);
        let next = step(&field, bc, dt, &model).unwrap();
        let lo = cells.iter().copied().fold(omega_a.min(omega_b), f64::min);
        let hi = cells.iter().copied().fold(omega_a.max(omega_b), f64::max);
        for &u in &next.u {
            prop_assert!(u >= lo - 1e-12 && u <= hi + 1e-12, "u = {u} outside [{lo}, {hi}]");
            prop_assert!((0.0 - 1e-12..=1.0 + 1e-12).contains(&u));
        }
    }

    /// Telescoping finite-volume update: the mass change of one step equals
    /// dt times the boundary flux difference, to rounding.
    #[test]
    fn godunov_step_conserves_mass(
        cells in prop::collection::vec(0.0..=1.0f64, 8..48),
        omega_a in 0.0..=1.0f64,
        omega_b in 0.0..=1.0f64,
        flux_idx in 0usize..3,
    ) {
        let model = model_for(flux_idx);
        let n = cells.len();
        let grid = Grid::new(-1.0, 1.0, n).unwrap();
        let field = DensityField::new(grid, cells, 0.0);
        let bc = BoundaryInput::new(omega_a, omega_b);
        let dt = cfl_dt(&field, bc, &model, 0.9).min(0.015);
        let (f_in, f_out) = boundary_fluxes(&field, bc, &model);
        let next = step(&field, bc, dt, &model).unwrap();
        let expected = field.mass() + dt * (f_in - f_out);
        prop_assert!((next.mass() - expected).abs() <= 1e-13);
    }

    /// The numerical flux is consistent and bounded by the capacity.
    #[test]
    fn godunov_flux_consistent_and_capped(
        u_l in 0.0..=1.0f64,
        u_r in 0.0..=1.0f64,
        flux_idx in 0usize..3,
    ) {
        let model = model_for(flux_idx);
        let flux = godunov_flux(u_l, u_r, &model);
        prop_assert!(flux <= model.capacity() + 1e-12);
        prop_assert!(flux >= -1e-12);
        let same = godunov_flux(u_l, u_l, &model);
        prop_assert!((same - model.flow(u_l)).abs() <= 1e-12);
    }

    /// The self-similar solution takes values between the two states and
    /// settles to them far from the wave.
    #[test]
    fn riemann_solution_stays_between_states(
        u_l in 0.0..=1.0f64,
        u_r in 0.0..=1.0f64,
        xi in -3.0..=3.0f64,
        flux_idx in 0usize..3,
    ) {
        let model = model_for(flux_idx);
        let u = riemann_exact(u_l, u_r, xi, &model);
        let (lo, hi) = (u_l.min(u_r), u_l.max(u_r));
        prop_assert!(u >= lo - 1e-12 && u <= hi + 1e-12);
        let wide = 1.0 + model.flow_prime(0.0).abs().max(model.flow_prime(1.0).abs());
        prop_assert_eq!(riemann_exact(u_l, u_r, -wide, &model), u_l);
        prop_assert_eq!(riemann_exact(u_l, u_r, wide, &model), u_r);
    }

    /// k is g with the target density at the empty road, for every flux.
    #[test]
    fn invariance_rate_is_stability_rate_at_zero_target(
        s in 0.0..=1.0f64,
        z in 0.0..=1.0f64,
        flux_idx in 0usize..3,
    ) {
        let model = model_for(flux_idx);
        prop_assert!((rate_k(s, z, &model) - rate_g(s, z, &model, 0.0)).abs() <= 1e-14);
        prop_assert!(rate_g(s, s, &model, 0.3).abs() <= 1e-14);
    }

    /// V and B respond to the state as quadratic functionals should.
    #[test]
    fn functionals_sign_structure(
        cells in prop::collection::vec(0.0..=1.0f64, 4..40),
        u_star in 0.0..=1.0f64,
        u_bar in 0.05..=1.0f64,
    ) {
        let n = cells.len();
        let grid = Grid::new(-1.0, 1.0, n).unwrap();
        let field = DensityField::new(grid, cells, 0.0);
        prop_assert!(lyapunov_v(&field, u_star) >= 0.0);
        prop_assert!(barrier_b(&field, u_bar) <= u_bar * u_bar + 1e-12);
    }

    /// Convexity-split structure for sampled shifts: the two sides cover the
    /// range, the invariance left set nests inside the stability left set,
    /// and the stability right set nests inside the invariance right set.
    #[test]
    fn partition_inclusions_for_random_target(
        u_star in 0.0..=1.0f64,
        flux_idx in 0usize..3,
    ) {
        let model = model_for(flux_idx);
        let stability = convexity_split(&model, u_star).unwrap();
        let invariance = convexity_split(&model, 0.0).unwrap();
        prop_assert!(stability.left_contains(0.0, 1e-12));
        prop_assert!(stability.right_contains(1.0, 1e-12));
        prop_assert!(interval_set_subset(&invariance.left_set, &stability.left_set, 1e-9));
        prop_assert!(interval_set_subset(&stability.right_set, &invariance.right_set, 1e-9));
    }

    /// Feasible decisions re-verify through the rate functions at the stated
    /// tolerance and stay inside the admissible set.
    #[test]
    fn feasible_decisions_carry_valid_certificates(
        trace in 0.0..=1.0f64,
        c_raw in 0.0..=1.0f64,
        d_raw in 0.0..=1.0f64,
        u_star in 0.0..=1.0f64,
        flux_idx in 0usize..3,
        side_right in proptest::bool::ANY,
    ) {
        let model = model_for(flux_idx);
        let scale = model.capacity();
        let c = 0.5 * scale * c_raw * c_raw;
        let d = 0.25 * scale * d_raw * d_raw;
        let side = if side_right { Side::Right } else { Side::Left };
        let decision = match side {
            Side::Left => {
                let ia = convexity_split(&model, 0.0).unwrap().left_set;
                let dec = solve_left(trace, c, d, &model, u_star, &ia).unwrap();
                if dec.feasible {
                    let s = dec.omega_a().unwrap();
                    prop_assert!(ia.iter().any(|iv| iv.contains(s, 1e-9)));
                    prop_assert!(rate_g(s, trace, &model, u_star) <= -c + CONSTRAINT_TOL);
                    prop_assert!(rate_k(s, trace, &model) <= d + CONSTRAINT_TOL);
                }
                dec
            }
            Side::Right => {
                let cb = convexity_split(&model, u_star).unwrap().right_set;
                let dec = solve_right(trace, c, d, &model, u_star, &cb).unwrap();
                if dec.feasible {
                    let z = dec.omega_b().unwrap();
                    prop_assert!(cb.iter().any(|iv| iv.contains(z, 1e-9)));
                    prop_assert!(rate_g(trace, z, &model, u_star) <= -c + CONSTRAINT_TOL);
                    prop_assert!(rate_k(trace, z, &model) <= d + CONSTRAINT_TOL);
                }
                dec
            }
        };
        if !decision.feasible {
            prop_assert!(decision.violation >= 0.0);
        }
    }

    /// Flux kind tags survive construction.
    #[test]
    fn builtin_kinds_round_trip(flux_idx in 0usize..3) {
        let model = model_for(flux_idx);
        let expected = match flux_idx % 3 {
            0 => FluxKind::Greenshields,
            1 => FluxKind::Sextic,
            _ => FluxKind::GreenbergLog,
        };
        prop_assert_eq!(model.kind(), expected);
    }
}
