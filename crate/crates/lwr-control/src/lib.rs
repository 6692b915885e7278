//! Optimization-based single-boundary control of the LWR traffic model.
//!
//! The crate couples three pieces around a shared flux abstraction:
//!
//! * [`flux`] — admissible fundamental diagrams (quadratic, sextic,
//!   logarithmic, or custom) with derivatives, primitives, and the
//!   convexity-interval partitions that define the admissible control sets;
//! * [`solver`] — a Godunov finite-volume scheme for the conservation law
//!   with weak (ghost-cell) boundary data, plus an exact Riemann solution
//!   for convergence studies;
//! * [`functionals`] / [`controller`] — the Lyapunov and barrier
//!   functionals, their boundary-trace rate functions, and the single- and
//!   two-input programs that pick the minimal-norm boundary value enforcing
//!   both a decrease and an invariance condition.
//!
//! [`scenario`] closes the loop on a configurable timing grid, [`config`]
//! parses the flat key-value scenario format, [`output`] exports CSV and SVG
//! artifacts, and [`audit`] replays seeded random instances of the control
//! programs against a brute-force oracle.

pub mod audit;
pub mod config;
pub mod controller;
pub mod flux;
pub mod functionals;
pub mod output;
pub mod scenario;
pub mod solver;

pub use audit::{audit_side, AuditReport, SplitMix64};
pub use config::{parse_config, ConfigError, ControllerMode, ScenarioConfig};
pub use controller::{
    find_root_monotone, grid_scan_oracle, solve_left, solve_right, solve_two_input,
    ActiveConstraint, ControlDecision, ControlError, ControlValue, Side, CONSTRAINT_TOL,
};
pub use flux::{
    adaptive_simpson, convexity_split, interval_set_subset, CustomFlux, FluxError, FluxKind,
    FluxModel, Interval, IntervalPartition, ValidationReport,
};
pub use functionals::{
    barrier_b, decay_thresholds, lyapunov_v, rate_g, rate_k, ClassK, FunctionalError,
    FunctionalSnapshot,
};
pub use output::{export_csv, export_plots, format_full, parse_timeseries_csv, CsvRow};
pub use scenario::{run_scenario, ControlRow, RunError, SnapshotRecord, TimeSeriesLog};
pub use solver::{
    boundary_fluxes, cfl_dt, godunov_flux, initial_profile, riemann_exact, step, BoundaryInput,
    DensityField, Grid, InitialProfile, SolverError,
};
