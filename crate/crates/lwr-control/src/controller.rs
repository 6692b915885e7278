//! Single-boundary control synthesis.
//!
//! At each control instant the boundary value is the solution of a convex
//! program: minimize the squared input over the admissible density interval
//! subject to the stability inequality g ≤ −C and the invariance inequality
//! k ≤ D, with the opposite boundary trace held fixed.
//!
//! The solvers exploit the monotone structure of the one-variable slices.
//! With p(s) = g(s, z) and ℓ(s) = k(s, z) for fixed z,
//!
//!   p'(s) = (s − u*) f'(s),    ℓ'(s) = s f'(s),
//!
//! so on the left admissible set (where f' > 0) p is monotone on either side
//! of u* and ℓ is increasing. With q(z) = g(s, z) and ρ(z) = k(s, z) for
//! fixed s,
//!
//!   q'(z) = −(z − u*) f'(z),   ρ'(z) = −z f'(z),
//!
//! so q changes monotonicity only at min(u*, û) and max(u*, û), and ρ only
//! at û. Candidate optima are therefore the admissible-set minimum, the
//! roots of the active-constraint equalities on each monotone segment, and
//! the segment break points; the solver returns the feasible candidate of
//! minimal squared value. A candidate taken from one equality is accepted
//! only after the *other* inequality has been verified as well, and the
//! minimum-input branch likewise checks both inequalities before returning.
//!
//! `+∞` in place of C or D is the documented sentinel for "constraint
//! disabled"; the solvers and the oracle both honor it.
//!
//! When no admissible input satisfies both inequalities, the solvers return
//! a flagged best-effort value instead: the invariance inequality is kept
//! hard whenever it is attainable on its own (the stability gap is then
//! minimized subject to it), and only when even invariance alone is
//! unattainable does the fallback minimize the worst violation. Keeping the
//! barrier side hard is what lets the closed loop ride the safe-set boundary
//! instead of drifting through it while it chases an unreachable decay rate.

use thiserror::Error;

use crate::flux::{FluxModel, Interval};
use crate::functionals::{rate_g, rate_k};

/// Absolute tolerance on the g and k inequalities.
pub const CONSTRAINT_TOL: f64 = 1e-8;
/// Bisection bracket width for equality roots.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("boundary trace {trace} outside [0, {u_max}]")]
    TraceOutOfRange { trace: f64, u_max: f64 },
    #[error("decay threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
}

/// Which boundary the single-input program actuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Constraint status at the selected input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveConstraint {
    /// The unconstrained minimum of the admissible set was feasible.
    InteriorMinimum,
    /// The stability equality g = −C holds at the solution.
    StabilityActive,
    /// The invariance equality k = D holds at the solution.
    InvarianceActive,
    BothActive,
    Infeasible,
}

impl ActiveConstraint {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActiveConstraint::InteriorMinimum => "interior_minimum",
            ActiveConstraint::StabilityActive => "stability_active",
            ActiveConstraint::InvarianceActive => "invariance_active",
            ActiveConstraint::BothActive => "both_active",
            ActiveConstraint::Infeasible => "infeasible",
        }
    }
}

/// Selected boundary input(s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlValue {
    Left(f64),
    Right(f64),
    Both { left: f64, right: f64 },
}

/// Outcome of one boundary-control program.
///
/// When `feasible` is false the value is the staged best-effort input
/// (invariance held hard when attainable, least-worst violation otherwise)
/// and `violation` carries the worst constraint violation at that input.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub value: ControlValue,
    pub active: ActiveConstraint,
    pub feasible: bool,
    pub violation: f64,
    /// Admissible constraint-boundary candidates examined by the case
    /// analysis (each satisfies one equality and the other inequality).
    pub candidates: Vec<f64>,
}

impl ControlDecision {
    pub fn omega_a(&self) -> Option<f64> {
        match self.value {
            ControlValue::Left(v) => Some(v),
            ControlValue::Both { left, .. } => Some(left),
            ControlValue::Right(_) => None,
        }
    }

    pub fn omega_b(&self) -> Option<f64> {
        match self.value {
            ControlValue::Right(v) => Some(v),
            ControlValue::Both { right, .. } => Some(right),
            ControlValue::Left(_) => None,
        }
    }

    /// Squared-input objective of the selected value.
    pub fn objective(&self) -> f64 {
        match self.value {
            ControlValue::Left(v) | ControlValue::Right(v) => v * v,
            ControlValue::Both { left, right } => left * left + right * right,
        }
    }
}

fn check_trace(trace: f64, model: &FluxModel) -> Result<(), ControlError> {
    if trace.is_nan() || trace < -1e-12 || trace > model.u_max() + 1e-12 {
        return Err(ControlError::TraceOutOfRange {
            trace,
            u_max: model.u_max(),
        });
    }
    Ok(())
}

fn check_threshold(value: f64) -> Result<(), ControlError> {
    // +inf is the documented "constraint disabled" sentinel.
    if value.is_nan() || value < 0.0 {
        return Err(ControlError::NegativeThreshold(value));
    }
    Ok(())
}

/// Bisection root of a continuous, monotone `f` on [lo, hi] for
/// `f(x) = target`, resolved to bracket width `tol`. Returns `None` when
/// `f(lo) − target` and `f(hi) − target` share a strict sign.
pub fn find_root_monotone(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    target: f64,
    tol: f64,
) -> Option<f64> {
    assert!(lo < hi, "invalid bracket [{lo}, {hi}]");
    assert!(tol > 0.0, "tolerance must be positive");
    let d_lo = f(lo) - target;
    let d_hi = f(hi) - target;
    if d_lo == 0.0 {
        return Some(lo);
    }
    if d_hi == 0.0 {
        return Some(hi);
    }
    if d_lo.signum() == d_hi.signum() {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    let lo_sign = d_lo.signum();
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let dm = f(mid) - target;
        if dm == 0.0 {
            return Some(mid);
        }
        if dm.signum() == lo_sign {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b <= a {
        return (a, f(a));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a < 1e-13 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// One single-input program, expressed on its own decision variable. Both
/// boundary programs reduce to this shape.
struct SingleInputProgram<'a> {
    stability: Box<dyn Fn(f64) -> f64 + 'a>,
    invariance: Box<dyn Fn(f64) -> f64 + 'a>,
    c_thresh: f64,
    d_thresh: f64,
    /// Monotonicity break points of the stability slice.
    stability_breaks: Vec<f64>,
    /// Monotonicity break points of the invariance slice.
    invariance_breaks: Vec<f64>,
    admissible: &'a [Interval],
}

impl SingleInputProgram<'_> {
    fn stability_ok(&self, x: f64) -> bool {
        self.c_thresh.is_infinite() || (self.stability)(x) <= -self.c_thresh + CONSTRAINT_TOL
    }

    fn invariance_ok(&self, x: f64) -> bool {
        self.d_thresh.is_infinite() || (self.invariance)(x) <= self.d_thresh + CONSTRAINT_TOL
    }

    fn feasible(&self, x: f64) -> bool {
        self.stability_ok(x) && self.invariance_ok(x)
    }

    /// Worst signed constraint violation; ≤ 0 means strictly feasible.
    fn violation(&self, x: f64) -> f64 {
        let mut v = f64::NEG_INFINITY;
        if self.c_thresh.is_finite() {
            v = v.max((self.stability)(x) + self.c_thresh);
        }
        if self.d_thresh.is_finite() {
            v = v.max((self.invariance)(x) - self.d_thresh);
        }
        if v == f64::NEG_INFINITY {
            v = -1.0; // both constraints disabled
        }
        v
    }

    fn classify(&self, x: f64) -> ActiveConstraint {
        let g_active = self.c_thresh.is_finite()
            && ((self.stability)(x) + self.c_thresh).abs() <= CONSTRAINT_TOL;
        let k_active = self.d_thresh.is_finite()
            && ((self.invariance)(x) - self.d_thresh).abs() <= CONSTRAINT_TOL;
        match (g_active, k_active) {
            (true, true) => ActiveConstraint::BothActive,
            (true, false) => ActiveConstraint::StabilityActive,
            (false, true) => ActiveConstraint::InvarianceActive,
            (false, false) => ActiveConstraint::InteriorMinimum,
        }
    }

    fn segments(interval: Interval, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&x| x > interval.lo && x < interval.hi)
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut segs = Vec::with_capacity(cuts.len() + 1);
        let mut lo = interval.lo;
        for cut in cuts {
            segs.push((lo, cut));
            lo = cut;
        }
        segs.push((lo, interval.hi));
        segs
    }

    fn solve(&self) -> (f64, ActiveConstraint, bool, f64, Vec<f64>) {
        if self.admissible.is_empty() {
            return (f64::NAN, ActiveConstraint::Infeasible, false, f64::INFINITY, Vec::new());
        }

        // Densities are nonnegative, so the minimum squared value over the
        // admissible set sits at its smallest element.
        let minimum = self.admissible[0].lo;
        if self.feasible(minimum) {
            return (minimum, ActiveConstraint::InteriorMinimum, true, 0.0, Vec::new());
        }

        // Constraint-boundary candidates: equality roots per monotone segment.
        let mut boundary_candidates: Vec<f64> = Vec::new();
        for &iv in self.admissible {
            if iv.is_empty() {
                continue;
            }
            if self.c_thresh.is_finite() {
                for (lo, hi) in Self::segments(iv, &self.stability_breaks) {
                    if hi - lo <= ROOT_TOL {
                        continue;
                    }
                    if let Some(root) =
                        find_root_monotone(&self.stability, lo, hi, -self.c_thresh, ROOT_TOL)
                    {
                        if self.invariance_ok(root) {
                            boundary_candidates.push(root);
                        }
                    }
                }
            }
            if self.d_thresh.is_finite() {
                for (lo, hi) in Self::segments(iv, &self.invariance_breaks) {
                    if hi - lo <= ROOT_TOL {
                        continue;
                    }
                    if let Some(root) =
                        find_root_monotone(&self.invariance, lo, hi, self.d_thresh, ROOT_TOL)
                    {
                        if self.stability_ok(root) {
                            boundary_candidates.push(root);
                        }
                    }
                }
            }
        }

        // Feasibility probes at interval ends and monotonicity breaks. These
        // cover non-contiguous admissible sets (feasible re-entry at an
        // interval edge) and constraint levels tangent at a slice extremum.
        let mut probes: Vec<f64> = Vec::new();
        for &iv in self.admissible {
            probes.push(iv.lo);
            probes.push(iv.hi);
            for &brk in self.stability_breaks.iter().chain(&self.invariance_breaks) {
                if brk > iv.lo && brk < iv.hi {
                    probes.push(brk);
                }
            }
        }
        probes.retain(|&x| self.feasible(x));

        let winner = boundary_candidates
            .iter()
            .chain(probes.iter())
            .copied()
            .fold(f64::INFINITY, f64::min);

        if winner.is_finite() {
            boundary_candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            boundary_candidates.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * ROOT_TOL);
            let active = self.classify(winner);
            return (winner, active, true, 0.0, boundary_candidates);
        }

        // Infeasible. Stage one: if some admissible input still satisfies
        // the invariance inequality alone, apply the one minimizing the
        // stability gap subject to it (ties broken toward the smaller
        // input). The candidates are exact: invariance-boundary roots,
        // interval ends, and the stationary points of the stability slice.
        if self.d_thresh.is_finite() && self.c_thresh.is_finite() {
            let mut invariance_ok_candidates: Vec<f64> = Vec::new();
            for &iv in self.admissible {
                let mut points = vec![iv.lo, iv.hi];
                for &brk in self.stability_breaks.iter().chain(&self.invariance_breaks) {
                    if brk > iv.lo && brk < iv.hi {
                        points.push(brk);
                    }
                }
                if !iv.is_empty() {
                    for (lo, hi) in Self::segments(iv, &self.invariance_breaks) {
                        if hi - lo <= ROOT_TOL {
                            continue;
                        }
                        if let Some(root) =
                            find_root_monotone(&self.invariance, lo, hi, self.d_thresh, ROOT_TOL)
                        {
                            points.push(root);
                        }
                    }
                }
                points.retain(|&x| self.invariance_ok(x));
                invariance_ok_candidates.extend(points);
            }
            if !invariance_ok_candidates.is_empty() {
                let mut best = (f64::NAN, f64::INFINITY);
                for &x in &invariance_ok_candidates {
                    let gap = (self.stability)(x) + self.c_thresh;
                    if gap < best.1 - 1e-15 || (gap <= best.1 + 1e-15 && x < best.0) {
                        best = (x, gap);
                    }
                }
                let violation = self.violation(best.0).max(0.0);
                return (best.0, ActiveConstraint::Infeasible, false, violation, Vec::new());
            }
        }

        // Stage two: nothing satisfies even the invariance inequality
        // alone; minimize the worst violation over the admissible set.
        let mut best = (f64::NAN, f64::INFINITY);
        for &iv in self.admissible {
            let viol = |x: f64| self.violation(x);
            let (x, v) = if iv.is_empty() {
                (iv.lo, viol(iv.lo))
            } else {
                golden_min(&viol, iv.lo, iv.hi)
            };
            // The slice violation is convex on the admissible intervals, but
            // probe the ends anyway; golden section only sees the interior.
            let mut local = (x, v);
            for e in [iv.lo, iv.hi] {
                let ve = viol(e);
                if ve < local.1 {
                    local = (e, ve);
                }
            }
            if local.1 < best.1 {
                best = local;
            }
        }
        (
            best.0,
            ActiveConstraint::Infeasible,
            false,
            best.1.max(0.0),
            Vec::new(),
        )
    }
}

/// Minimal-squared left boundary input ω_a with the right trace `z` fixed:
/// min ω_a² over the left admissible set subject to g(ω_a, z) ≤ −C and
/// k(ω_a, z) ≤ D. The admissible intervals are expected in ascending order,
/// as produced by [`crate::flux::convexity_split`].
pub fn solve_left(
    z: f64,
    c_thresh: f64,
    d_thresh: f64,
    model: &FluxModel,
    u_star: f64,
    left_admissible: &[Interval],
) -> Result<ControlDecision, ControlError> {
    check_trace(z, model)?;
    check_threshold(c_thresh)?;
    check_threshold(d_thresh)?;
    let program = SingleInputProgram {
        stability: Box::new(move |s| rate_g(s, z, model, u_star)),
        invariance: Box::new(move |s| rate_k(s, z, model)),
        c_thresh,
        d_thresh,
        // p'(s) = (s − u*) f'(s): sign flips only at u* where f' > 0.
        stability_breaks: vec![u_star],
        // ℓ'(s) = s f'(s) ≥ 0 on the left admissible set.
        invariance_breaks: vec![],
        admissible: left_admissible,
    };
    let (value, active, feasible, violation, candidates) = program.solve();
    Ok(ControlDecision {
        value: ControlValue::Left(value),
        active,
        feasible,
        violation,
        candidates,
    })
}

/// Minimal-squared right boundary input ω_b with the left trace `s` fixed:
/// min ω_b² over the right admissible set subject to g(s, ω_b) ≤ −C and
/// k(s, ω_b) ≤ D.
pub fn solve_right(
    s: f64,
    c_thresh: f64,
    d_thresh: f64,
    model: &FluxModel,
    u_star: f64,
    right_admissible: &[Interval],
) -> Result<ControlDecision, ControlError> {
    check_trace(s, model)?;
    check_threshold(c_thresh)?;
    check_threshold(d_thresh)?;
    let u_hat = model.u_hat();
    let program = SingleInputProgram {
        stability: Box::new(move |z| rate_g(s, z, model, u_star)),
        invariance: Box::new(move |z| rate_k(s, z, model)),
        c_thresh,
        d_thresh,
        // q'(z) = −(z − u*) f'(z): monotone between min{u*, û} and max{u*, û}.
        stability_breaks: vec![u_star.min(u_hat), u_star.max(u_hat)],
        // ρ'(z) = −z f'(z): decreasing below û, increasing above.
        invariance_breaks: vec![u_hat],
        admissible: right_admissible,
    };
    let (value, active, feasible, violation, candidates) = program.solve();
    Ok(ControlDecision {
        value: ControlValue::Right(value),
        active,
        feasible,
        violation,
        candidates,
    })
}

/// Brute-force reference solver: dense ascending scan of the admissible
/// interval(s) with local refinement at the feasibility edge. Checks the
/// same inequalities at the same tolerance as the case-analysis solvers but
/// shares none of their monotone-segment reasoning.
#[allow(clippy::too_many_arguments)]
pub fn grid_scan_oracle(
    side: Side,
    trace: f64,
    c_thresh: f64,
    d_thresh: f64,
    model: &FluxModel,
    u_star: f64,
    admissible: &[Interval],
    resolution: usize,
) -> ControlDecision {
    assert!(resolution >= 1000, "oracle resolution must be >= 1000");
    let stability: Box<dyn Fn(f64) -> f64> = match side {
        Side::Left => Box::new(move |x| rate_g(x, trace, model, u_star)),
        Side::Right => Box::new(move |x| rate_g(trace, x, model, u_star)),
    };
    let invariance: Box<dyn Fn(f64) -> f64> = match side {
        Side::Left => Box::new(move |x| rate_k(x, trace, model)),
        Side::Right => Box::new(move |x| rate_k(trace, x, model)),
    };
    let violation = |x: f64| -> f64 {
        let mut v = f64::NEG_INFINITY;
        if c_thresh.is_finite() {
            v = v.max(stability(x) + c_thresh);
        }
        if d_thresh.is_finite() {
            v = v.max(invariance(x) - d_thresh);
        }
        if v == f64::NEG_INFINITY {
            v = -1.0;
        }
        v
    };

    let wrap = |value: f64| match side {
        Side::Left => ControlValue::Left(value),
        Side::Right => ControlValue::Right(value),
    };
    let classify = |x: f64| -> ActiveConstraint {
        let g_active = c_thresh.is_finite() && (stability(x) + c_thresh).abs() <= CONSTRAINT_TOL;
        let k_active = d_thresh.is_finite() && (invariance(x) - d_thresh).abs() <= CONSTRAINT_TOL;
        match (g_active, k_active) {
            (true, true) => ActiveConstraint::BothActive,
            (true, false) => ActiveConstraint::StabilityActive,
            (false, true) => ActiveConstraint::InvarianceActive,
            (false, false) => ActiveConstraint::InteriorMinimum,
        }
    };
    let decide = |value: f64| ControlDecision {
        value: wrap(value),
        active: classify(value),
        feasible: true,
        violation: 0.0,
        candidates: Vec::new(),
    };

    let mut best_effort = (f64::NAN, f64::INFINITY);
    for &iv in admissible {
        if iv.is_empty() {
            let v = violation(iv.lo);
            if v <= CONSTRAINT_TOL {
                return decide(iv.lo);
            }
            if v < best_effort.1 {
                best_effort = (iv.lo, v);
            }
            continue;
        }
        let h = iv.len() / resolution as f64;
        let mut first_strict: Option<usize> = None;
        let mut min_idx = 0usize;
        let mut min_val = f64::INFINITY;
        for j in 0..=resolution {
            let x = iv.lo + h * j as f64;
            let v = violation(x);
            if v <= 0.0 {
                first_strict = Some(j);
                break;
            }
            if v < min_val {
                min_val = v;
                min_idx = j;
            }
        }
        match first_strict {
            Some(0) => return decide(iv.lo),
            Some(j) => {
                // Refine the feasibility edge: sign crossing of the violation.
                let lo = iv.lo + h * (j - 1) as f64;
                let hi = iv.lo + h * j as f64;
                let edge = find_root_monotone(violation, lo, hi, 0.0, ROOT_TOL).unwrap_or(hi);
                return decide(edge);
            }
            None => {
                // No strictly feasible grid point; the slice violation is
                // convex on these intervals, so one local refinement around
                // the grid minimizer settles this interval.
                let lo = iv.lo + h * min_idx.saturating_sub(1) as f64;
                let hi = (iv.lo + h * (min_idx + 1) as f64).min(iv.hi);
                let (xm, vm) = golden_min(&violation, lo, hi);
                if vm <= 0.0 {
                    // Sub-grid feasible sliver: walk back to its left edge.
                    let edge = find_root_monotone(violation, lo, xm, 0.0, ROOT_TOL).unwrap_or(xm);
                    return decide(edge);
                }
                if vm <= CONSTRAINT_TOL {
                    return decide(xm);
                }
                if vm < best_effort.1 {
                    best_effort = (xm, vm);
                }
            }
        }
    }

    ControlDecision {
        value: wrap(best_effort.0),
        active: ActiveConstraint::Infeasible,
        feasible: false,
        violation: if best_effort.1.is_finite() {
            best_effort.1.max(0.0)
        } else {
            f64::INFINITY
        },
        candidates: Vec::new(),
    }
}

/// Two-input baseline: minimize ω_a² + ω_b² over the product of the two
/// admissible sets subject to g(ω_a, ω_b) ≤ −C and the invariance
/// inequality.
///
/// Starts from the unconstrained minimum of the box, then alternates the two
/// single-input solvers (each exact in its own coordinate) and backs the
/// result with a zoomed grid scan, since pure coordinate descent can stall
/// on a corner of the feasible set where the constraint surfaces meet.
///
/// The boundary coupling is weak, so a right value on the free-flow side of
/// the critical density is not attained by the state. The invariance check
/// therefore caps the outflow relief term of k at its value at the current
/// outflow trace `z_trace`: it enforces
/// max(k(ω_a, ω_b), k(ω_a, z_trace)) ≤ D, never crediting the barrier with
/// outflow the boundary cannot realize. `s_trace` is validated for range but
/// carries no such correction: inflow values in the left admissible set sit
/// below the critical density and are attained whenever they matter.
#[allow(clippy::too_many_arguments)]
pub fn solve_two_input(
    s_trace: f64,
    z_trace: f64,
    c_thresh: f64,
    d_thresh: f64,
    model: &FluxModel,
    u_star: f64,
    left_admissible: &[Interval],
    right_admissible: &[Interval],
) -> Result<ControlDecision, ControlError> {
    check_trace(s_trace, model)?;
    check_trace(z_trace, model)?;
    check_threshold(c_thresh)?;
    check_threshold(d_thresh)?;
    if left_admissible.is_empty() || right_admissible.is_empty() {
        return Ok(ControlDecision {
            value: ControlValue::Both {
                left: f64::NAN,
                right: f64::NAN,
            },
            active: ActiveConstraint::Infeasible,
            feasible: false,
            violation: f64::INFINITY,
            candidates: Vec::new(),
        });
    }

    let invariance_rate =
        |sa: f64, zb: f64| rate_k(sa, zb, model).max(rate_k(sa, z_trace, model));
    let pair_violation = |sa: f64, zb: f64| -> f64 {
        let mut v = f64::NEG_INFINITY;
        if c_thresh.is_finite() {
            v = v.max(rate_g(sa, zb, model, u_star) + c_thresh);
        }
        if d_thresh.is_finite() {
            v = v.max(invariance_rate(sa, zb) - d_thresh);
        }
        if v == f64::NEG_INFINITY {
            v = -1.0;
        }
        v
    };
    let pair_feasible = |sa: f64, zb: f64| pair_violation(sa, zb) <= CONSTRAINT_TOL;

    let seed = (left_admissible[0].lo, right_admissible[0].lo);
    if pair_feasible(seed.0, seed.1) {
        return Ok(ControlDecision {
            value: ControlValue::Both {
                left: seed.0,
                right: seed.1,
            },
            active: ActiveConstraint::InteriorMinimum,
            feasible: true,
            violation: 0.0,
            candidates: Vec::new(),
        });
    }

    let objective = |p: (f64, f64)| p.0 * p.0 + p.1 * p.1;
    let mut best: Option<(f64, f64)> = None;
    let consider = |pair: (f64, f64), best: &mut Option<(f64, f64)>| {
        if best.is_none_or(|b| objective(pair) < objective(b)) {
            *best = Some(pair);
        }
    };

    // Coordinate descent: each half-step is the exact single-input solve.
    let descend = |start: (f64, f64), best: &mut Option<(f64, f64)>| -> Result<(), ControlError> {
        let (mut sa, mut zb) = start;
        for _ in 0..60 {
            let mut moved = false;
            let dl = solve_left(zb, c_thresh, d_thresh, model, u_star, left_admissible)?;
            if dl.feasible {
                let new_sa = dl.omega_a().expect("left decision");
                if pair_feasible(new_sa, zb) {
                    consider((new_sa, zb), best);
                }
                moved |= (new_sa - sa).abs() > 1e-13;
                sa = new_sa;
            }
            let dr = solve_right(sa, c_thresh, d_thresh, model, u_star, right_admissible)?;
            if dr.feasible {
                let new_zb = dr.omega_b().expect("right decision");
                if pair_feasible(sa, new_zb) {
                    consider((sa, new_zb), best);
                }
                moved |= (new_zb - zb).abs() > 1e-13;
                zb = new_zb;
            }
            if !moved {
                break;
            }
        }
        Ok(())
    };
    descend(seed, &mut best)?;

    // Zoomed grid scan over each admissible box; guards against descent
    // stalls (coordinate moves cannot slide along a corner where both
    // constraint surfaces meet) and finds feasible pockets the seed sweep
    // never reaches. The combination lands within about 1e-4 of the optimal
    // objective; a corner pinched between both constraint surfaces can
    // retain a residual of that order because neither half-step can slide
    // along the intersection.
    for &iva in left_admissible {
        for &ivb in right_admissible {
            let mut box_a = (iva.lo, iva.hi);
            let mut box_b = (ivb.lo, ivb.hi);
            let mut local: Option<(f64, f64)> = None;
            for level in 0..7 {
                let n = if level == 0 { 96 } else { 64 };
                let mut level_best: Option<(f64, f64)> = None;
                for i in 0..=n {
                    let sa = box_a.0 + (box_a.1 - box_a.0) * i as f64 / n as f64;
                    for j in 0..=n {
                        let zb = box_b.0 + (box_b.1 - box_b.0) * j as f64 / n as f64;
                        if pair_feasible(sa, zb)
                            && level_best.is_none_or(|b| objective((sa, zb)) < objective(b))
                        {
                            level_best = Some((sa, zb));
                        }
                    }
                }
                let Some((sa, zb)) = level_best else { break };
                local = Some((sa, zb));
                let da = 2.0 * (box_a.1 - box_a.0) / n as f64;
                let db = 2.0 * (box_b.1 - box_b.0) / n as f64;
                box_a = ((sa - da).max(iva.lo), (sa + da).min(iva.hi));
                box_b = ((zb - db).max(ivb.lo), (zb + db).min(ivb.hi));
            }
            if let Some(pair) = local {
                consider(pair, &mut best);
            }
        }
    }

    if let Some(pair) = best {
        // Polish: descent from a feasible pair is monotone in the objective.
        let mut polished = best;
        descend(pair, &mut polished)?;
        let (left, right) = polished.unwrap_or(pair);
        let g_active = c_thresh.is_finite()
            && (rate_g(left, right, model, u_star) + c_thresh).abs() <= CONSTRAINT_TOL;
        let k_active = d_thresh.is_finite()
            && (invariance_rate(left, right) - d_thresh).abs() <= CONSTRAINT_TOL;
        let active = match (g_active, k_active) {
            (true, true) => ActiveConstraint::BothActive,
            (true, false) => ActiveConstraint::StabilityActive,
            (false, true) => ActiveConstraint::InvarianceActive,
            (false, false) => ActiveConstraint::InteriorMinimum,
        };
        return Ok(ControlDecision {
            value: ControlValue::Both { left, right },
            active,
            feasible: true,
            violation: 0.0,
            candidates: Vec::new(),
        });
    }

    // No feasible pair. Zoomed scans over each admissible box, staged like
    // the single-input fallback: first keep the invariance inequality hard
    // and minimize the stability gap; only if invariance alone is
    // unattainable minimize the worst violation.
    let scan = |score: &dyn Fn(f64, f64) -> Option<f64>| -> Option<((f64, f64), f64)> {
        let mut best: Option<((f64, f64), f64)> = None;
        for &iva in left_admissible {
            for &ivb in right_admissible {
                let mut box_a = (iva.lo, iva.hi);
                let mut box_b = (ivb.lo, ivb.hi);
                for level in 0..4 {
                    let n = if level == 0 { 96 } else { 24 };
                    let mut level_best: Option<((f64, f64), f64)> = None;
                    for i in 0..=n {
                        let sa = box_a.0 + (box_a.1 - box_a.0) * i as f64 / n as f64;
                        for j in 0..=n {
                            let zb = box_b.0 + (box_b.1 - box_b.0) * j as f64 / n as f64;
                            if let Some(v) = score(sa, zb) {
                                if level_best.is_none_or(|(_, b)| v < b) {
                                    level_best = Some(((sa, zb), v));
                                }
                            }
                        }
                    }
                    let Some(((sa, zb), v)) = level_best else { break };
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some(((sa, zb), v));
                    }
                    let da = 2.0 * (box_a.1 - box_a.0) / n as f64;
                    let db = 2.0 * (box_b.1 - box_b.0) / n as f64;
                    box_a = ((sa - da).max(iva.lo), (sa + da).min(iva.hi));
                    box_b = ((zb - db).max(ivb.lo), (zb + db).min(ivb.hi));
                }
            }
        }
        best
    };

    let invariance_ok = |sa: f64, zb: f64| {
        d_thresh.is_infinite() || invariance_rate(sa, zb) <= d_thresh + CONSTRAINT_TOL
    };
    let staged = if c_thresh.is_finite() && d_thresh.is_finite() {
        scan(&|sa, zb| {
            invariance_ok(sa, zb).then(|| rate_g(sa, zb, model, u_star) + c_thresh)
        })
    } else {
        None
    };
    let best_effort = match staged {
        Some((pair, _)) => (pair, pair_violation(pair.0, pair.1)),
        None => scan(&|sa, zb| Some(pair_violation(sa, zb)))
            .expect("violation scan always scores every point"),
    };

    Ok(ControlDecision {
        value: ControlValue::Both {
            left: best_effort.0 .0,
            right: best_effort.0 .1,
        },
        active: ActiveConstraint::Infeasible,
        feasible: false,
        violation: best_effort.1.max(0.0),
        candidates: Vec::new(),
    })
}
