//! Lyapunov and barrier functionals, their decay thresholds, and the
//! boundary-rate functions that reduce the decrease/invariance conditions to
//! inequalities on the boundary traces.
//!
//! With s the left trace, z the right trace, and F a primitive of the flux:
//!
//!   V(u)    = ½ ∫ (u − u*)² dx           (distance to the target density)
//!   B(u)    = ū² − ∫ u² dx               (≥ 0 inside the safe set)
//!   g(s, z) = (s − u*) f(s) − (z − u*) f(z) − F(s) + F(z)
//!   k(s, z) = s f(s) − z f(z) − F(s) + F(z)
//!
//! Enforcing g ≤ −α(V) at the traces certifies V̇ + α(V) ≤ 0, and k ≤ β(B)
//! certifies Ḃ + β(B) ≥ 0, so the controllers only ever reason about g and k.

use thiserror::Error;

use crate::flux::FluxModel;
use crate::solver::DensityField;

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("Lyapunov value must be nonnegative, got {0}")]
    NegativeLyapunov(f64),
    #[error("class-K gain must be positive, got {0}")]
    NonPositiveGain(f64),
}

/// Supported class-𝒦 shapes. Only the linear form is instantiated; the tag
/// keeps the door open for saturating variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKForm {
    Linear,
}

/// A class-𝒦 function: continuous, strictly increasing, zero at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassK {
    gain: f64,
    form: ClassKForm,
}

impl ClassK {
    pub fn linear(gain: f64) -> Result<Self, FunctionalError> {
        if !gain.is_finite() || gain <= 0.0 {
            return Err(FunctionalError::NonPositiveGain(gain));
        }
        Ok(Self {
            gain,
            form: ClassKForm::Linear,
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.form {
            ClassKForm::Linear => self.gain * x,
        }
    }
}

/// The functional values the controller consumes at one control instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalSnapshot {
    pub t: f64,
    pub v: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Lyapunov functional ½ Σ (uᵢ − u*)² Δx over the cell averages.
pub fn lyapunov_v(field: &DensityField, u_star: f64) -> f64 {
    let dx = field.grid.dx();
    0.5 * field
        .u
        .iter()
        .map(|&u| (u - u_star) * (u - u_star))
        .sum::<f64>()
        * dx
}

/// Barrier functional ū² − Σ uᵢ² Δx; positive while the L² bound holds.
pub fn barrier_b(field: &DensityField, u_bar: f64) -> f64 {
    let dx = field.grid.dx();
    u_bar * u_bar - field.u.iter().map(|&u| u * u).sum::<f64>() * dx
}

/// Stability rate g(s, z); g ≤ −C at the traces certifies the Lyapunov
/// decrease condition.
pub fn rate_g(s: f64, z: f64, model: &FluxModel, u_star: f64) -> f64 {
    assert_density(s, model);
    assert_density(z, model);
    (s - u_star) * model.flow(s) - (z - u_star) * model.flow(z) - model.primitive(s)
        + model.primitive(z)
}

/// Invariance rate k(s, z); k ≤ D at the traces certifies the barrier
/// condition. Identical to [`rate_g`] with u* = 0.
pub fn rate_k(s: f64, z: f64, model: &FluxModel) -> f64 {
    assert_density(s, model);
    assert_density(z, model);
    s * model.flow(s) - z * model.flow(z) - model.primitive(s) + model.primitive(z)
}

fn assert_density(u: f64, model: &FluxModel) {
    assert!(
        u >= -1e-9 && u <= model.u_max() + 1e-9,
        "density {u} outside [0, {}]",
        model.u_max()
    );
}

/// Decay thresholds C = α(V) and D = β(max(B, 0)).
///
/// β is only defined on nonnegative arguments; clamping B at zero makes the
/// invariance constraint degenerate to k ≤ 0 whenever the state has already
/// left the safe set, which steers the controller back toward it.
pub fn decay_thresholds(
    v: f64,
    b: f64,
    alpha: &ClassK,
    beta: &ClassK,
) -> Result<(f64, f64), FunctionalError> {
    if v < 0.0 {
        return Err(FunctionalError::NegativeLyapunov(v));
    }
    Ok((alpha.eval(v), beta.eval(b.max(0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{adaptive_simpson, FluxModel};
    use crate::solver::{initial_profile, DensityField, Grid, InitialProfile};

    fn greenshields() -> FluxModel {
        FluxModel::greenshields(1.0).unwrap()
    }

    fn sinusoid_field(n: usize) -> DensityField {
        let grid = Grid::new(-1.0, 1.0, n).unwrap();
        initial_profile(InitialProfile::sinusoid_default(), grid, 1.0).unwrap()
    }

    #[test]
    fn lyapunov_vanishes_at_target() {
        let grid = Grid::new(-1.0, 1.0, 64).unwrap();
        let field = DensityField::new(grid, vec![1.0 / 3.0; 64], 0.0);
        assert!(lyapunov_v(&field, 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_of_constant_state() {
        // u ≡ 0, u* = 1/3 on [-1, 1]: V = ½ (1/9) · 2 = 1/9.
        let grid = Grid::new(-1.0, 1.0, 128).unwrap();
        let field = DensityField::new(grid, vec![0.0; 128], 0.0);
        assert!((lyapunov_v(&field, 1.0 / 3.0) - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_of_sinusoid_matches_quadrature_oracle() {
        // Independent oracle: adaptive quadrature of the continuum integrand.
        let u_star = 1.0 / 3.0;
        let integrand = |x: f64| {
            let u = 0.1 - 0.1 * (std::f64::consts::PI * x).sin();
            (u - u_star) * (u - u_star)
        };
        let oracle = 0.5 * adaptive_simpson(integrand, -1.0, 1.0, 1e-13);
        // Closed form: ½ (2 (7/30)² + 0.01) = 107/1800.
        assert!((oracle - 107.0 / 1800.0).abs() < 1e-12);
        let field = sinusoid_field(4000);
        assert!((lyapunov_v(&field, u_star) - oracle).abs() < 1e-7);
    }

    #[test]
    fn barrier_of_empty_road() {
        let grid = Grid::new(-1.0, 1.0, 64).unwrap();
        let field = DensityField::new(grid, vec![0.0; 64], 0.0);
        assert!((barrier_b(&field, 0.25) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn barrier_zero_on_safe_set_boundary() {
        // Constant c with ∫ c² dx = ū²: c = ū / sqrt(b - a).
        let grid = Grid::new(-1.0, 1.0, 64).unwrap();
        let c = 0.25 / 2.0f64.sqrt();
        let field = DensityField::new(grid, vec![c; 64], 0.0);
        assert!(barrier_b(&field, 0.25).abs() < 1e-15);
    }

    #[test]
    fn barrier_of_sinusoid_matches_quadrature_oracle() {
        let integrand = |x: f64| {
            let u = 0.1 - 0.1 * (std::f64::consts::PI * x).sin();
            u * u
        };
        let oracle = 0.0625 - adaptive_simpson(integrand, -1.0, 1.0, 1e-13);
        // ∫ u² dx = 0.02 + 0.01 = 0.03, so B = 1/16 − 0.03 = 0.0325.
        assert!((oracle - 0.0325).abs() < 1e-12);
        let field = sinusoid_field(4000);
        assert!((barrier_b(&field, 0.25) - oracle).abs() < 1e-7);
    }

    #[test]
    fn functionals_converge_first_order_on_jump_data() {
        let profile = InitialProfile::Riemann {
            left: 0.1,
            right: 0.6,
            split: 0.3137,
        };
        let value = |n: usize| {
            let grid = Grid::new(-1.0, 1.0, n).unwrap();
            let field = initial_profile(profile, grid, 1.0).unwrap();
            (lyapunov_v(&field, 0.25), barrier_b(&field, 0.25))
        };
        let (v1, b1) = value(100);
        let (v2, b2) = value(200);
        let (v4, b4) = value(400);
        let (v8, b8) = value(800);
        let dv = [(v1 - v2).abs(), (v2 - v4).abs(), (v4 - v8).abs()];
        let db = [(b1 - b2).abs(), (b2 - b4).abs(), (b4 - b8).abs()];
        assert!(dv[2] < dv[0] && db[2] < db[0], "dv {dv:?} db {db:?}");
        assert!(dv[2] < 6e-3 && db[2] < 6e-3);
    }

    #[test]
    fn rate_functions_vanish_on_diagonal() {
        let m = greenshields();
        for s in [0.0, 0.17, 0.5, 0.93, 1.0] {
            assert!(rate_g(s, s, &m, 1.0 / 3.0).abs() < 1e-15);
            assert!(rate_k(s, s, &m).abs() < 1e-15);
        }
    }

    #[test]
    fn rate_g_closed_form_values() {
        let m = greenshields();
        let u_star = 1.0 / 3.0;
        // g(1/2, 0) = (1/6)(1/4) − F(1/2) = 1/24 − 1/12 = −1/24.
        assert!((rate_g(0.5, 0.0, &m, u_star) + 1.0 / 24.0).abs() < 1e-15);
        // g(0, 1/3) = F(1/3) = 7/162.
        assert!((rate_g(0.0, 1.0 / 3.0, &m, u_star) - 7.0 / 162.0).abs() < 1e-15);
    }

    #[test]
    fn rate_k_closed_form_value() {
        let m = greenshields();
        // k(1/2, 0) = 1/8 − F(1/2) = 1/24.
        assert!((rate_k(0.5, 0.0, &m) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn rate_k_equals_rate_g_with_zero_target() {
        let m = FluxModel::greenberg_log(1.0, 0.1).unwrap();
        let mut x = 0.0;
        for _ in 0..50 {
            x += 0.31;
            let s = x % 1.0;
            let z = (x * 0.7) % 1.0;
            assert!((rate_k(s, z, &m) - rate_g(s, z, &m, 0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn rate_g_curvature_matches_analytic_second_derivative() {
        let h = 1e-4;
        for model in [
            greenshields(),
            FluxModel::sextic(1.0).unwrap(),
            FluxModel::greenberg_log(1.0, 0.1).unwrap(),
        ] {
            let u_star = 0.3 * model.u_max();
            let z = 0.6 * model.u_max();
            for i in 1..20 {
                let s = model.u_max() * i as f64 / 20.0;
                let fd = (rate_g(s + h, z, &model, u_star) - 2.0 * rate_g(s, z, &model, u_star)
                    + rate_g(s - h, z, &model, u_star))
                    / (h * h);
                let analytic =
                    (s - u_star) * model.flow_double_prime(s) + model.flow_prime(s);
                assert!(
                    (fd - analytic).abs() < 1e-5,
                    "{:?} s {s}: {fd} vs {analytic}",
                    model.kind()
                );
            }
        }
    }

    #[test]
    fn rate_functions_convex_on_admissible_sets() {
        use crate::flux::convexity_split;
        let h = 1e-4;
        for model in [
            greenshields(),
            FluxModel::sextic(1.0).unwrap(),
            FluxModel::greenberg_log(1.0, 0.1).unwrap(),
        ] {
            let u_star = 0.3 * model.u_max();
            let z = 0.5 * model.u_max();
            let stability = convexity_split(&model, u_star).unwrap();
            let invariance = convexity_split(&model, 0.0).unwrap();
            let second = |f: &dyn Fn(f64) -> f64, x: f64| {
                (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
            };
            // g(·, z) convex where the stability split says so; k(·, z) on the
            // invariance split; mirrored signs for the z-slots.
            for iv in &stability.left_set {
                for j in 1..20 {
                    let s = iv.lo + iv.len() * j as f64 / 20.0;
                    if s - h < 0.0 || s + h > model.u_max() {
                        continue;
                    }
                    let gs = |x: f64| rate_g(x, z, &model, u_star);
                    assert!(second(&gs, s) >= -1e-8);
                }
            }
            for iv in &invariance.left_set {
                for j in 1..20 {
                    let s = iv.lo + iv.len() * j as f64 / 20.0;
                    if s - h < 0.0 || s + h > model.u_max() {
                        continue;
                    }
                    let kf = |x: f64| rate_k(x, z, &model);
                    assert!(second(&kf, s) >= -1e-8);
                }
            }
            for iv in &stability.right_set {
                for j in 1..20 {
                    let zz = iv.lo + iv.len() * j as f64 / 20.0;
                    if zz - h < 0.0 || zz + h > model.u_max() {
                        continue;
                    }
                    let gz = |x: f64| rate_g(z, x, &model, u_star);
                    assert!(second(&gz, zz) >= -1e-8);
                }
            }
            for iv in &invariance.right_set {
                for j in 1..20 {
                    let zz = iv.lo + iv.len() * j as f64 / 20.0;
                    if zz - h < 0.0 || zz + h > model.u_max() {
                        continue;
                    }
                    let kz = |x: f64| rate_k(z, x, &model);
                    assert!(second(&kz, zz) >= -1e-8);
                }
            }
        }
    }

    #[test]
    fn thresholds_follow_linear_gains() {
        let alpha = ClassK::linear(0.5).unwrap();
        let beta = ClassK::linear(0.5).unwrap();
        let (c, d) = decay_thresholds(0.0, 0.2, &alpha, &beta).unwrap();
        assert_eq!(c, 0.0);
        assert!((d - 0.1).abs() < 1e-15);
        let (c, _) = decay_thresholds(1.0 / 9.0, 0.0, &alpha, &beta).unwrap();
        assert!((c - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn negative_barrier_clamps_to_zero_threshold() {
        let alpha = ClassK::linear(0.5).unwrap();
        let beta = ClassK::linear(0.5).unwrap();
        let (_, d) = decay_thresholds(0.1, -0.3, &alpha, &beta).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn negative_lyapunov_is_rejected() {
        let alpha = ClassK::linear(0.5).unwrap();
        let beta = ClassK::linear(0.5).unwrap();
        assert!(decay_thresholds(-1e-9, 0.0, &alpha, &beta).is_err());
    }

    #[test]
    fn class_k_requires_positive_gain() {
        assert!(ClassK::linear(0.0).is_err());
        assert!(ClassK::linear(-1.0).is_err());
    }
}
