//! Randomized equivalence audit between the case-analysis solvers and the
//! brute-force grid-scan oracle.
//!
//! Instances draw the target density, the opposite boundary trace, and both
//! decay thresholds from a seeded generator, so a reported failure is exactly
//! reproducible from its seed.

use crate::controller::{grid_scan_oracle, solve_left, solve_right, ControlError, Side};
use crate::flux::{convexity_split, FluxModel};

/// SplitMix64: tiny deterministic generator, stable across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// One disagreement between solver and oracle, with everything needed to
/// replay it.
#[derive(Debug, Clone)]
pub struct AuditMismatch {
    pub side: Side,
    pub u_star: f64,
    pub trace: f64,
    pub c_thresh: f64,
    pub d_thresh: f64,
    pub solver_feasible: bool,
    pub oracle_feasible: bool,
    pub solver_value: Option<f64>,
    pub oracle_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub side: Side,
    pub samples: usize,
    pub feasible_count: usize,
    pub max_value_diff: f64,
    pub mismatches: Vec<AuditMismatch>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Maximum |value| disagreement tolerated between solver and oracle.
pub const AUDIT_VALUE_TOL: f64 = 1e-6;

/// Runs `samples` random instances of the given side against the oracle.
///
/// Thresholds are biased toward small values (squaring a uniform draw) so
/// the sweep exercises interior optima, boundary-active optima, and genuine
/// infeasibility; D is pinned to exactly zero in a slice of the draws to
/// cover the clamped-barrier regime.
pub fn audit_side(
    model: &FluxModel,
    side: Side,
    samples: usize,
    seed: u64,
    resolution: usize,
) -> Result<AuditReport, ControlError> {
    let mut rng = SplitMix64::new(seed ^ side_salt(side));
    let u_max = model.u_max();
    let scale = model.capacity() * u_max;
    let left_admissible = convexity_split(model, 0.0)
        .expect("admissible flux has an invariance split")
        .left_set;

    let mut report = AuditReport {
        side,
        samples,
        feasible_count: 0,
        max_value_diff: 0.0,
        mismatches: Vec::new(),
    };

    for _ in 0..samples {
        let u_star = rng.uniform(0.0, u_max);
        let trace = rng.uniform(0.0, u_max);
        let c = 0.6 * scale * rng.next_f64().powi(2);
        let d = if rng.next_f64() < 0.15 {
            0.0
        } else {
            0.3 * scale * rng.next_f64().powi(2)
        };

        let (decision, oracle) = match side {
            Side::Left => {
                let dec = solve_left(trace, c, d, model, u_star, &left_admissible)?;
                let orc = grid_scan_oracle(
                    Side::Left,
                    trace,
                    c,
                    d,
                    model,
                    u_star,
                    &left_admissible,
                    resolution,
                );
                (dec, orc)
            }
            Side::Right => {
                let right_admissible = convexity_split(model, u_star)
                    .expect("admissible flux has a stability split")
                    .right_set;
                let dec = solve_right(trace, c, d, model, u_star, &right_admissible)?;
                let orc = grid_scan_oracle(
                    Side::Right,
                    trace,
                    c,
                    d,
                    model,
                    u_star,
                    &right_admissible,
                    resolution,
                );
                (dec, orc)
            }
        };

        let solver_value = match side {
            Side::Left => decision.omega_a(),
            Side::Right => decision.omega_b(),
        };
        let oracle_value = match side {
            Side::Left => oracle.omega_a(),
            Side::Right => oracle.omega_b(),
        };

        let mut agree = decision.feasible == oracle.feasible;
        if agree && decision.feasible {
            report.feasible_count += 1;
            let diff = (solver_value.unwrap() - oracle_value.unwrap()).abs();
            report.max_value_diff = report.max_value_diff.max(diff);
            agree = diff <= AUDIT_VALUE_TOL;
        }
        if !agree {
            report.mismatches.push(AuditMismatch {
                side,
                u_star,
                trace,
                c_thresh: c,
                d_thresh: d,
                solver_feasible: decision.feasible,
                oracle_feasible: oracle.feasible,
                solver_value,
                oracle_value,
            });
        }
    }

    Ok(report)
}

fn side_salt(side: Side) -> u64 {
    match side {
        Side::Left => 0x6c65_6674, // "left"
        Side::Right => 0x7269_6768_7400, // "right"
    }
}
