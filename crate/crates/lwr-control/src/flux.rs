//! Traffic flux functions (fundamental diagrams) and their analytic structure.
//!
//! An admissible flux f: [0, u_max] → ℝ₊ is C², strictly concave, and vanishes
//! at both ends of the density range, which gives it a unique maximizer û.
//! Besides evaluating f, f', f'' and a primitive F (normalized so F(0) = 0),
//! this module partitions the density range by the sign of
//!
//!   h_c(u) = (u − c) f''(u) + f'(u)
//!
//! for a shift constant c. The sign of h_c is what decides where the boundary
//! rate functions are convex in each boundary value, so these partitions are
//! the admissible sets the boundary controllers draw from.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Shared function object for user-supplied flux components.
pub type FluxFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tag identifying which flux family a model was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    /// Quadratic f(u) = u (1 − u/u_max).
    Greenshields,
    /// Degree-six polynomial u (1 − u/u_max)(u⁴ + 2u³ + 3u² + 4u + 5).
    Sextic,
    /// Logarithmic f(u) = u ln((u_max + ε)/(u + ε)).
    GreenbergLog,
    /// User-supplied evaluators.
    Custom,
}

impl fmt::Display for FluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FluxKind::Greenshields => "greenshields",
            FluxKind::Sextic => "sextic",
            FluxKind::GreenbergLog => "greenberg_log",
            FluxKind::Custom => "custom",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum FluxError {
    #[error("u_max must be positive, got {0}")]
    NonPositiveUMax(f64),
    #[error("epsilon must be positive for the logarithmic flux, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("flux derivative has no sign change on [0, u_max]; no interior maximizer")]
    NoCriticalDensity,
    #[error("custom fluxes are built with FluxModel::custom, not FluxModel::builtin")]
    NotABuiltin,
    #[error("flux validation failed:\n{0}")]
    ValidationFailed(ValidationReport),
    #[error("convexity scan found no admissible split: h({0}) and h(u_max) share a strict sign")]
    DegenerateSplit(f64),
}

/// User-supplied flux evaluators. Derivatives and the primitive are optional;
/// missing ones fall back to central differences and adaptive quadrature.
#[derive(Clone)]
pub struct CustomFlux {
    pub flow: FluxFn,
    pub flow_prime: Option<FluxFn>,
    pub flow_double_prime: Option<FluxFn>,
    pub primitive: Option<FluxFn>,
}

impl CustomFlux {
    pub fn from_flow(flow: FluxFn) -> Self {
        Self {
            flow,
            flow_prime: None,
            flow_double_prime: None,
            primitive: None,
        }
    }
}

#[derive(Clone)]
enum FluxForm {
    Greenshields,
    Sextic,
    GreenbergLog { epsilon: f64 },
    Custom(CustomFlux),
}

/// An admissible LWR flux together with its derivatives, primitive, and
/// critical density. Immutable after construction; cheap to clone and safe
/// to share across concurrent simulations.
#[derive(Clone)]
pub struct FluxModel {
    kind: FluxKind,
    u_max: f64,
    u_hat: f64,
    form: FluxForm,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("kind", &self.kind)
            .field("u_max", &self.u_max)
            .field("u_hat", &self.u_hat)
            .finish()
    }
}

impl FluxModel {
    /// Builds one of the built-in flux families. `epsilon` is only consulted
    /// (and required) by [`FluxKind::GreenbergLog`].
    pub fn builtin(kind: FluxKind, u_max: f64, epsilon: Option<f64>) -> Result<Self, FluxError> {
        if !u_max.is_finite() || u_max <= 0.0 {
            return Err(FluxError::NonPositiveUMax(u_max));
        }
        let form = match kind {
            FluxKind::Greenshields => FluxForm::Greenshields,
            FluxKind::Sextic => FluxForm::Sextic,
            FluxKind::GreenbergLog => {
                let epsilon = epsilon.unwrap_or(f64::NAN);
                if !epsilon.is_finite() || epsilon <= 0.0 {
                    return Err(FluxError::NonPositiveEpsilon(epsilon));
                }
                FluxForm::GreenbergLog { epsilon }
            }
            FluxKind::Custom => return Err(FluxError::NotABuiltin),
        };
        let model = Self::assemble(kind, u_max, form)?;
        let report = model.validate(256);
        if !report.passed {
            return Err(FluxError::ValidationFailed(report));
        }
        Ok(model)
    }

    pub fn greenshields(u_max: f64) -> Result<Self, FluxError> {
        Self::builtin(FluxKind::Greenshields, u_max, None)
    }

    pub fn sextic(u_max: f64) -> Result<Self, FluxError> {
        Self::builtin(FluxKind::Sextic, u_max, None)
    }

    pub fn greenberg_log(u_max: f64, epsilon: f64) -> Result<Self, FluxError> {
        Self::builtin(FluxKind::GreenbergLog, u_max, Some(epsilon))
    }

    /// Wraps user-supplied evaluators. The model is *not* validated here so
    /// that [`FluxModel::validate`] can report on deliberately broken fluxes;
    /// callers that need the admissibility guarantees should check the report.
    pub fn custom(u_max: f64, parts: CustomFlux) -> Result<Self, FluxError> {
        if !u_max.is_finite() || u_max <= 0.0 {
            return Err(FluxError::NonPositiveUMax(u_max));
        }
        Self::assemble(FluxKind::Custom, u_max, FluxForm::Custom(parts))
    }

    fn assemble(kind: FluxKind, u_max: f64, form: FluxForm) -> Result<Self, FluxError> {
        let mut model = Self {
            kind,
            u_max,
            u_hat: f64::NAN,
            form,
        };
        model.u_hat = match model.locate_critical_density() {
            Ok(u) => u,
            // Keep a best-effort argmax so validation can still run and
            // report the missing sign change.
            Err(_) => model.argmax_on_grid(4096),
        };
        Ok(model)
    }

    pub fn kind(&self) -> FluxKind {
        self.kind
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// The critical density û, the unique maximizer of f on (0, u_max).
    pub fn u_hat(&self) -> f64 {
        self.u_hat
    }

    /// Maximum flow f(û), the capacity of the fundamental diagram.
    pub fn capacity(&self) -> f64 {
        self.flow(self.u_hat)
    }

    /// Flow f(u).
    pub fn flow(&self, u: f64) -> f64 {
        match &self.form {
            FluxForm::Greenshields => u * (1.0 - u / self.u_max),
            FluxForm::Sextic => {
                let m = 1.0 / self.u_max;
                u * (1.0 - u * m) * ((((u + 2.0) * u + 3.0) * u + 4.0) * u + 5.0)
            }
            FluxForm::GreenbergLog { epsilon } => {
                u * ((self.u_max + epsilon) / (u + epsilon)).ln()
            }
            FluxForm::Custom(parts) => (parts.flow)(u),
        }
    }

    /// First derivative f'(u).
    pub fn flow_prime(&self, u: f64) -> f64 {
        match &self.form {
            FluxForm::Greenshields => 1.0 - 2.0 * u / self.u_max,
            FluxForm::Sextic => {
                let m = 1.0 / self.u_max;
                // f = -m u^6 + (1-2m) u^5 + (2-3m) u^4 + (3-4m) u^3 + (4-5m) u^2 + 5u
                ((((-6.0 * m * u + 5.0 * (1.0 - 2.0 * m)) * u + 4.0 * (2.0 - 3.0 * m)) * u
                    + 3.0 * (3.0 - 4.0 * m))
                    * u
                    + 2.0 * (4.0 - 5.0 * m))
                    * u
                    + 5.0
            }
            FluxForm::GreenbergLog { epsilon } => {
                ((self.u_max + epsilon) / (u + epsilon)).ln() - u / (u + epsilon)
            }
            FluxForm::Custom(parts) => match &parts.flow_prime {
                Some(fp) => fp(u),
                None => central_difference(|x| (parts.flow)(x), u, self.diff_step()),
            },
        }
    }

    /// Second derivative f''(u).
    pub fn flow_double_prime(&self, u: f64) -> f64 {
        match &self.form {
            FluxForm::Greenshields => -2.0 / self.u_max,
            FluxForm::Sextic => {
                let m = 1.0 / self.u_max;
                (((-30.0 * m * u + 20.0 * (1.0 - 2.0 * m)) * u + 12.0 * (2.0 - 3.0 * m)) * u
                    + 6.0 * (3.0 - 4.0 * m))
                    * u
                    + 2.0 * (4.0 - 5.0 * m)
            }
            FluxForm::GreenbergLog { epsilon } => {
                let w = u + epsilon;
                -1.0 / w - epsilon / (w * w)
            }
            FluxForm::Custom(parts) => match &parts.flow_double_prime {
                Some(fpp) => fpp(u),
                None => second_central_difference(|x| (parts.flow)(x), u, self.diff2_step()),
            },
        }
    }

    /// Primitive F(u) = ∫₀ᵘ f(s) ds. Only differences F(s) − F(z) enter any
    /// downstream formula, so the normalization F(0) = 0 costs nothing.
    pub fn primitive(&self, u: f64) -> f64 {
        match &self.form {
            FluxForm::Greenshields => u * u / 2.0 - u * u * u / (3.0 * self.u_max),
            FluxForm::Sextic => {
                let m = 1.0 / self.u_max;
                ((((((-m / 7.0) * u + (1.0 - 2.0 * m) / 6.0) * u + (2.0 - 3.0 * m) / 5.0) * u
                    + (3.0 - 4.0 * m) / 4.0)
                    * u
                    + (4.0 - 5.0 * m) / 3.0)
                    * u
                    + 5.0 / 2.0)
                    * u
                    * u
            }
            FluxForm::GreenbergLog { epsilon } => {
                // ∫ s ln(s+ε) ds = G(s+ε) with G(w) = (w²/2 − εw) ln w − w²/4 + εw.
                let g = |w: f64| (w * w / 2.0 - epsilon * w) * w.ln() - w * w / 4.0 + epsilon * w;
                u * u / 2.0 * (self.u_max + epsilon).ln() - (g(u + epsilon) - g(*epsilon))
            }
            FluxForm::Custom(parts) => match &parts.primitive {
                Some(prim) => prim(u) - prim(0.0),
                None => adaptive_simpson(|x| (parts.flow)(x), 0.0, u, 1e-12),
            },
        }
    }

    fn diff_step(&self) -> f64 {
        1e-6 * self.u_max.max(1.0)
    }

    fn diff2_step(&self) -> f64 {
        1e-4 * self.u_max.max(1.0)
    }

    fn argmax_on_grid(&self, n: usize) -> f64 {
        let mut best = (0.0, self.flow(0.0));
        for i in 0..=n {
            let u = self.u_max * i as f64 / n as f64;
            let fu = self.flow(u);
            if fu > best.1 {
                best = (u, fu);
            }
        }
        best.0
    }

    /// Finds û by bracketed bisection of f' on [0, u_max]; closed form for
    /// the quadratic family. Fails when f' never changes sign.
    pub fn locate_critical_density(&self) -> Result<f64, FluxError> {
        if matches!(self.form, FluxForm::Greenshields) {
            return Ok(self.u_max / 2.0);
        }
        let fp = |u: f64| self.flow_prime(u);
        let (mut lo, mut hi) = (0.0, self.u_max);
        let (flo, fhi) = (fp(lo), fp(hi));
        if !(flo > 0.0 && fhi < 0.0) {
            return Err(FluxError::NoCriticalDensity);
        }
        // Bracket width 1e-13 keeps |f'(û)| below 1e-10 for the built-in
        // curvature scales.
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if fp(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Runs the admissibility checks on a sample grid and reports each one.
    /// `samples` is clamped below at 10.
    pub fn validate(&self, samples: usize) -> ValidationReport {
        let n = samples.max(10);
        let mut checks = Vec::new();

        // Endpoint zeros.
        let worst_end = self.flow(0.0).abs().max(self.flow(self.u_max).abs());
        checks.push(ValidationCheck {
            name: "endpoint zeros f(0) = f(u_max) = 0",
            passed: worst_end <= 1e-12,
            worst_residual: worst_end,
        });

        // Strict concavity on the grid.
        let mut max_fpp = f64::NEG_INFINITY;
        for i in 0..=n {
            let u = self.u_max * i as f64 / n as f64;
            max_fpp = max_fpp.max(self.flow_double_prime(u));
        }
        checks.push(ValidationCheck {
            name: "strict concavity f'' < 0",
            passed: max_fpp < 0.0,
            worst_residual: max_fpp,
        });

        // f' changes sign exactly once: positive before û, negative after.
        let mut sign_changes = 0usize;
        let mut prev_positive = self.flow_prime(0.0) > 0.0;
        let first_positive = prev_positive;
        for i in 1..=n {
            let u = self.u_max * i as f64 / n as f64;
            let positive = self.flow_prime(u) > 0.0;
            if positive != prev_positive {
                sign_changes += 1;
            }
            prev_positive = positive;
        }
        let fp_hat = self.flow_prime(self.u_hat).abs();
        checks.push(ValidationCheck {
            name: "single maximizer: f' changes sign once and f'(u_hat) = 0",
            passed: sign_changes == 1 && first_positive && !prev_positive && fp_hat <= 1e-10,
            worst_residual: fp_hat,
        });

        // Primitive consistency: central difference of F reproduces f.
        let h = 1e-5 * self.u_max;
        let mut worst_prim = 0.0f64;
        for i in 0..=n {
            let u = self.u_max * (i as f64 + 0.5) / (n as f64 + 1.0);
            let fd = (self.primitive(u + h) - self.primitive(u - h)) / (2.0 * h);
            worst_prim = worst_prim.max((fd - self.flow(u)).abs());
        }
        checks.push(ValidationCheck {
            name: "primitive consistency dF/du = f",
            passed: worst_prim <= 1e-6,
            worst_residual: worst_prim,
        });

        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { checks, passed }
    }
}

/// Outcome of one admissibility check.
#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst_residual: f64,
}

/// Aggregate admissibility report; failures are carried, not raised.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub passed: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            writeln!(
                f,
                "  [{}] {} (worst residual {:e})",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                check.worst_residual
            )?;
        }
        write!(
            f,
            "flux validation: {}",
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// A closed density interval [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn contains(&self, u: f64, tol: f64) -> bool {
        u >= self.lo - tol && u <= self.hi + tol
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Sign partition of [0, u_max] under h_c(u) = (u − c) f''(u) + f'(u).
///
/// `left_set` collects the closed intervals where h_c ≥ 0 (the rate functions
/// are convex in the left boundary value there), `right_set` those where
/// h_c ≤ 0. Crossing points belong to both sets. When there is exactly one
/// crossing the partition is the contiguous two-interval split and
/// `split_point` carries the crossing.
#[derive(Debug, Clone)]
pub struct IntervalPartition {
    pub shift_c: f64,
    pub left_set: Vec<Interval>,
    pub right_set: Vec<Interval>,
    pub split_point: Option<f64>,
}

impl IntervalPartition {
    pub fn left_contains(&self, u: f64, tol: f64) -> bool {
        self.left_set.iter().any(|iv| iv.contains(u, tol))
    }

    pub fn right_contains(&self, u: f64, tol: f64) -> bool {
        self.right_set.iter().any(|iv| iv.contains(u, tol))
    }
}

/// Checks that every interval of `inner` is covered by some interval of
/// `outer`, up to `tol` on the endpoints.
pub fn interval_set_subset(inner: &[Interval], outer: &[Interval], tol: f64) -> bool {
    inner.iter().all(|iv| {
        outer
            .iter()
            .any(|ov| iv.lo >= ov.lo - tol && iv.hi <= ov.hi + tol)
    })
}

/// Number of sample intervals in the sign scan. Crossings are then resolved
/// by bisection, so this only needs to separate distinct sign regions.
const SIGN_SCAN_CELLS: usize = 2000;
const SPLIT_TOL: f64 = 1e-10;

/// Partitions [0, u_max] by the sign of h_c(u) = (u − shift_c) f''(u) + f'(u).
///
/// Uses a dense sign scan followed by bisection at each sign change. The
/// output supports any number of disjoint intervals per side; fluxes for
/// which h_c keeps one strict sign on the whole range are rejected because
/// then one of the two sets would be empty.
pub fn convexity_split(model: &FluxModel, shift_c: f64) -> Result<IntervalPartition, FluxError> {
    let u_max = model.u_max();
    assert!(
        (0.0..=u_max).contains(&shift_c),
        "shift constant {shift_c} outside [0, {u_max}]"
    );
    let h = |u: f64| (u - shift_c) * model.flow_double_prime(u) + model.flow_prime(u);

    let n = SIGN_SCAN_CELLS;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev_u = 0.0;
    let mut prev_nonneg = h(0.0) >= 0.0;
    let first_nonneg = prev_nonneg;
    for i in 1..=n {
        let u = u_max * i as f64 / n as f64;
        let nonneg = h(u) >= 0.0;
        if nonneg != prev_nonneg {
            crossings.push(bisect_sign_change(&h, prev_u, u, SPLIT_TOL));
        }
        prev_u = u;
        prev_nonneg = nonneg;
    }

    if crossings.is_empty() {
        // h(u_max) = 0 (or h(0) = 0) still yields a valid degenerate split
        // with a point interval on the starved side.
        return if !first_nonneg && h(0.0) == 0.0 {
            Ok(IntervalPartition {
                shift_c,
                left_set: vec![Interval::new(0.0, 0.0)],
                right_set: vec![Interval::new(0.0, u_max)],
                split_point: Some(0.0),
            })
        } else if first_nonneg && h(u_max) == 0.0 {
            Ok(IntervalPartition {
                shift_c,
                left_set: vec![Interval::new(0.0, u_max)],
                right_set: vec![Interval::new(u_max, u_max)],
                split_point: Some(u_max),
            })
        } else {
            Err(FluxError::DegenerateSplit(shift_c))
        };
    }

    let mut left_set = Vec::new();
    let mut right_set = Vec::new();
    let mut boundaries = Vec::with_capacity(crossings.len() + 2);
    boundaries.push(0.0);
    boundaries.extend_from_slice(&crossings);
    boundaries.push(u_max);
    let mut nonneg = first_nonneg;
    for pair in boundaries.windows(2) {
        let iv = Interval::new(pair[0], pair[1]);
        if nonneg {
            left_set.push(iv);
        } else {
            right_set.push(iv);
        }
        nonneg = !nonneg;
    }

    let split_point = if crossings.len() == 1 {
        Some(crossings[0])
    } else {
        None
    };

    Ok(IntervalPartition {
        shift_c,
        left_set,
        right_set,
        split_point,
    })
}

fn bisect_sign_change(h: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let lo_nonneg = h(lo) >= 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (h(mid) >= 0.0) == lo_nonneg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn second_central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (sign, lo, hi) = if a <= b { (1.0, a, b) } else { (-1.0, b, a) };
    let c = 0.5 * (lo + hi);
    let (fa, fb, fc) = (f(lo), f(hi), f(c));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fc + fb);
    sign * simpson_recurse(f, lo, hi, fa, fb, fc, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: impl Fn(f64) -> f64 + Copy,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1)
            + simpson_recurse(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1)
    }
}
