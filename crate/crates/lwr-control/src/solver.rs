//! Godunov finite-volume solver for the scalar conservation law
//! u_t + f(u)_x = 0 on [a, b] with weakly enforced boundary data.
//!
//! Boundary values are imposed through ghost cells: the prescribed value
//! enters the boundary Riemann problem and is attained only when the
//! characteristics admit it. For a strictly concave flux the Godunov
//! interface flux has the closed demand/supply form
//!
//!   F(u_l, u_r) = min(demand(u_l), supply(u_r)),
//!   demand(u) = f(min(u, û)),  supply(u) = f(max(u, û)).
//!
//! The scheme is monotone under the CFL condition, so cell averages stay in
//! [0, u_max] and mass is conserved up to the boundary fluxes exactly.

use thiserror::Error;

use crate::flux::FluxModel;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid must satisfy a < b and n_cells >= 2 (got a={a}, b={b}, n_cells={n_cells})")]
    InvalidGrid { a: f64, b: f64, n_cells: usize },
    #[error("time step {dt} violates the CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("initial profile leaves [0, {u_max}] at x={x} (value {value})")]
    ProfileOutOfRange { x: f64, value: f64, u_max: f64 },
}

/// Uniform finite-volume grid on [a, b].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n_cells: usize,
    dx: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self, SolverError> {
        if a.is_nan() || b.is_nan() || a >= b || n_cells < 2 {
            return Err(SolverError::InvalidGrid { a, b, n_cells });
        }
        Ok(Self {
            a,
            b,
            n_cells,
            dx: (b - a) / n_cells as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Center of cell i: a + (i + ½) dx.
    pub fn cell_center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.dx
    }

    pub fn cell_centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|i| self.cell_center(i))
    }
}

/// Cell-average densities at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    pub fn new(grid: Grid, u: Vec<f64>, t: f64) -> Self {
        assert_eq!(grid.n_cells(), u.len(), "cell count mismatch");
        Self { grid, u, t }
    }

    /// Total mass ∫ u dx of the discrete state.
    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.grid.dx()
    }

    /// Interior trace next to the left boundary, u(t, a).
    pub fn left_trace(&self) -> f64 {
        self.u[0]
    }

    /// Interior trace next to the right boundary, u(t, b).
    pub fn right_trace(&self) -> f64 {
        *self.u.last().expect("grid guarantees n_cells >= 2")
    }
}

/// Boundary data pair held constant over a control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryInput {
    pub omega_a: f64,
    pub omega_b: f64,
}

impl BoundaryInput {
    pub fn new(omega_a: f64, omega_b: f64) -> Self {
        Self { omega_a, omega_b }
    }
}

/// Godunov interface flux for a strictly concave flux function.
pub fn godunov_flux(u_left: f64, u_right: f64, model: &FluxModel) -> f64 {
    debug_assert!(in_density_range(u_left, model) && in_density_range(u_right, model));
    let u_hat = model.u_hat();
    let demand = if u_left <= u_hat {
        model.flow(u_left)
    } else {
        model.flow(u_hat)
    };
    let supply = if u_right <= u_hat {
        model.flow(u_hat)
    } else {
        model.flow(u_right)
    };
    demand.min(supply)
}

fn in_density_range(u: f64, model: &FluxModel) -> bool {
    (-1e-12..=model.u_max() + 1e-12).contains(&u)
}

/// Interface fluxes at the two domain boundaries for the given ghost data.
/// These are exactly the values [`step`] uses, so accumulating them over the
/// sub-steps reproduces the discrete mass balance to rounding.
pub fn boundary_fluxes(field: &DensityField, bc: BoundaryInput, model: &FluxModel) -> (f64, f64) {
    let left = godunov_flux(bc.omega_a, field.left_trace(), model);
    let right = godunov_flux(field.right_trace(), bc.omega_b, model);
    (left, right)
}

/// Largest stable time step: cfl · dx / max |f'| over all cells and the two
/// boundary inputs. The wave-speed floor keeps the result finite near u ≡ û;
/// callers clip the step to their own horizon (control period or output time).
pub fn cfl_dt(field: &DensityField, bc: BoundaryInput, model: &FluxModel, cfl: f64) -> f64 {
    assert!(cfl > 0.0 && cfl <= 1.0, "cfl must lie in (0, 1], got {cfl}");
    let mut speed = 1e-12f64;
    for &u in field.u.iter() {
        speed = speed.max(model.flow_prime(u).abs());
    }
    speed = speed.max(model.flow_prime(bc.omega_a).abs());
    speed = speed.max(model.flow_prime(bc.omega_b).abs());
    cfl * field.grid.dx() / speed
}

/// Advances the field by one forward-Euler Godunov step with ghost-cell
/// boundary data. Returns a new field; the input is untouched.
pub fn step(
    field: &DensityField,
    bc: BoundaryInput,
    dt: f64,
    model: &FluxModel,
) -> Result<DensityField, SolverError> {
    let bound = cfl_dt(field, bc, model, 1.0);
    if dt > bound * (1.0 + 1e-12) {
        return Err(SolverError::CflViolation { dt, bound });
    }
    let n = field.grid.n_cells();
    let dx = field.grid.dx();
    let lambda = dt / dx;

    // Interface fluxes F_{i-1/2} for i = 0..=n, ghosts at both ends.
    let mut fluxes = Vec::with_capacity(n + 1);
    fluxes.push(godunov_flux(bc.omega_a, field.u[0], model));
    for i in 0..n - 1 {
        fluxes.push(godunov_flux(field.u[i], field.u[i + 1], model));
    }
    fluxes.push(godunov_flux(field.u[n - 1], bc.omega_b, model));

    let u: Vec<f64> = field
        .u
        .iter()
        .enumerate()
        .map(|(i, &ui)| ui - lambda * (fluxes[i + 1] - fluxes[i]))
        .collect();

    Ok(DensityField::new(field.grid, u, field.t + dt))
}

/// Self-similar entropy solution of the Riemann problem at ξ = x/t.
///
/// For a strictly concave flux the solution is a shock when u_l < u_r
/// (travelling at the Rankine–Hugoniot speed) and a rarefaction fan when
/// u_l > u_r, with the fan profile given by inverting f'.
pub fn riemann_exact(u_l: f64, u_r: f64, xi: f64, model: &FluxModel) -> f64 {
    debug_assert!(in_density_range(u_l, model) && in_density_range(u_r, model));
    if u_l == u_r {
        return u_l;
    }
    if u_l < u_r {
        // Entropy shock: f'(u_l) > sigma > f'(u_r).
        let sigma = (model.flow(u_r) - model.flow(u_l)) / (u_r - u_l);
        if xi < sigma {
            u_l
        } else {
            u_r
        }
    } else {
        // Rarefaction: f' is decreasing, so the fan spans [f'(u_l), f'(u_r)].
        let speed_l = model.flow_prime(u_l);
        let speed_r = model.flow_prime(u_r);
        if xi <= speed_l {
            u_l
        } else if xi >= speed_r {
            u_r
        } else {
            invert_flow_prime(xi, u_r, u_l, model)
        }
    }
}

/// Solves f'(u) = xi for u in [lo, hi] by bisection (f' is decreasing).
fn invert_flow_prime(xi: f64, mut lo: f64, mut hi: f64, model: &FluxModel) -> f64 {
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if model.flow_prime(mid) > xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Built-in initial density profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    /// offset − amplitude · sin(πx). The defaults 0.1/0.1 give the low-density
    /// sinusoid used by the stock scenarios.
    Sinusoid { offset: f64, amplitude: f64 },
    Constant(f64),
    /// Piecewise-constant datum: `left` for x < split, `right` for x ≥ split.
    Riemann { left: f64, right: f64, split: f64 },
}

impl InitialProfile {
    pub fn sinusoid_default() -> Self {
        InitialProfile::Sinusoid {
            offset: 0.1,
            amplitude: 0.1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Sinusoid { offset, amplitude } => {
                offset - amplitude * (std::f64::consts::PI * x).sin()
            }
            InitialProfile::Constant(c) => c,
            InitialProfile::Riemann { left, right, split } => {
                if x < split {
                    left
                } else {
                    right
                }
            }
        }
    }
}

/// Samples the profile at cell midpoints and validates the density range.
pub fn initial_profile(
    profile: InitialProfile,
    grid: Grid,
    u_max: f64,
) -> Result<DensityField, SolverError> {
    let mut u = Vec::with_capacity(grid.n_cells());
    for i in 0..grid.n_cells() {
        let x = grid.cell_center(i);
        let value = profile.eval(x);
        if !(0.0..=u_max).contains(&value) {
            return Err(SolverError::ProfileOutOfRange {
                x,
                value,
                u_max,
            });
        }
        u.push(value);
    }
    Ok(DensityField::new(grid, u, 0.0))
}
