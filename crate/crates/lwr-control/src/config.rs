//! Scenario configuration: a flat `key = value` text format with strict key
//! checking, plus the validated [`ScenarioConfig`] it produces.
//!
//! Unset keys fall back to the stock quadratic-flux scenario (target density
//! 1/3, barrier level 1/4, domain [−1, 1], 15 s horizon with a 0.015 s
//! control period).

use std::collections::HashSet;
use std::path::PathBuf;

use thiserror::Error;

use crate::flux::{FluxError, FluxKind, FluxModel};
use crate::solver::InitialProfile;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("{key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("{field}: {message}")]
    Constraint { field: &'static str, message: String },
    #[error("flux: {0}")]
    Flux(#[from] FluxError),
}

/// Which boundary the closed loop actuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    Left,
    Right,
    TwoInput,
    /// No controller: both boundaries run free (zero-gradient ghosts).
    Uncontrolled,
}

impl ControllerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerMode::Left => "left",
            ControllerMode::Right => "right",
            ControllerMode::TwoInput => "two_input",
            ControllerMode::Uncontrolled => "none",
        }
    }
}

/// Everything a closed-loop run needs, validated as a whole.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub flux: FluxKind,
    pub u_max: f64,
    pub epsilon: Option<f64>,
    pub u_star: f64,
    pub u_bar: f64,
    pub kappa_v: f64,
    pub kappa_b: f64,
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
    pub t_end: f64,
    pub control_period: f64,
    pub controller_mode: ControllerMode,
    pub cfl: f64,
    pub initial: InitialProfile,
    pub snapshot_times: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            flux: FluxKind::Greenshields,
            u_max: 1.0,
            epsilon: None,
            u_star: 1.0 / 3.0,
            u_bar: 0.25,
            kappa_v: 0.5,
            kappa_b: 0.5,
            a: -1.0,
            b: 1.0,
            n_cells: 200,
            t_end: 15.0,
            control_period: 0.015,
            controller_mode: ControllerMode::Left,
            cfl: 0.9,
            initial: InitialProfile::sinusoid_default(),
            snapshot_times: vec![0.0, 5.0, 10.0, 15.0],
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    /// Applies one `key = value` assignment. Shared by the parser and by
    /// `sweep`-style programmatic overrides.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::InvalidValue {
            key: key.to_string(),
            message,
        };
        match key {
            "flux" => {
                self.flux = match value {
                    "greenshields" => FluxKind::Greenshields,
                    "sextic" => FluxKind::Sextic,
                    "greenberg_log" => FluxKind::GreenbergLog,
                    other => {
                        return Err(bad(format!(
                            "unknown flux `{other}` (expected greenshields, sextic, or greenberg_log)"
                        )))
                    }
                };
            }
            "u_max" => self.u_max = parse_f64(key, value)?,
            "epsilon" => self.epsilon = Some(parse_f64(key, value)?),
            "u_star" => self.u_star = parse_f64(key, value)?,
            "u_bar" => self.u_bar = parse_f64(key, value)?,
            "kappa_V" => self.kappa_v = parse_f64(key, value)?,
            "kappa_B" => self.kappa_b = parse_f64(key, value)?,
            "a" => self.a = parse_f64(key, value)?,
            "b" => self.b = parse_f64(key, value)?,
            "n_cells" => {
                self.n_cells = value
                    .parse::<usize>()
                    .map_err(|e| bad(format!("not a cell count: {e}")))?
            }
            "t_end" => self.t_end = parse_f64(key, value)?,
            "control_period" => self.control_period = parse_f64(key, value)?,
            "controller_mode" => {
                self.controller_mode = match value {
                    "left" => ControllerMode::Left,
                    "right" => ControllerMode::Right,
                    "two_input" => ControllerMode::TwoInput,
                    "none" => ControllerMode::Uncontrolled,
                    other => {
                        return Err(bad(format!(
                            "unknown controller mode `{other}` (expected left, right, two_input, or none)"
                        )))
                    }
                };
            }
            "cfl" => self.cfl = parse_f64(key, value)?,
            "initial" => self.initial = parse_initial(value).map_err(bad)?,
            "snapshot_times" => {
                let mut times = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    times.push(
                        part.parse::<f64>()
                            .map_err(|e| bad(format!("bad snapshot time `{part}`: {e}")))?,
                    );
                }
                self.snapshot_times = times;
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Cross-field validation with field-level messages.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &'static str, message: String| Err(ConfigError::Constraint { field, message });
        if !self.u_max.is_finite() || self.u_max <= 0.0 {
            return err("u_max", format!("must be positive, got {}", self.u_max));
        }
        if self.flux == FluxKind::GreenbergLog && !self.epsilon.is_some_and(|e| e > 0.0) {
            return err(
                "epsilon",
                "the logarithmic flux requires epsilon > 0".to_string(),
            );
        }
        if !(0.0..=self.u_max).contains(&self.u_star) {
            return err(
                "u_star",
                format!("must lie in [0, u_max] = [0, {}], got {}", self.u_max, self.u_star),
            );
        }
        if !self.u_bar.is_finite() || self.u_bar <= 0.0 {
            return err("u_bar", format!("must be positive, got {}", self.u_bar));
        }
        if !(self.kappa_v.is_finite() && self.kappa_v > 0.0)
            || !(self.kappa_b.is_finite() && self.kappa_b > 0.0)
        {
            return err(
                "kappa_V/kappa_B",
                format!("gains must be positive, got {} and {}", self.kappa_v, self.kappa_b),
            );
        }
        if self.a.is_nan() || self.b.is_nan() || self.a >= self.b {
            return err("a/b", format!("domain requires a < b, got [{}, {}]", self.a, self.b));
        }
        if self.n_cells < 2 {
            return err("n_cells", format!("need at least 2 cells, got {}", self.n_cells));
        }
        if !self.control_period.is_finite() || self.control_period <= 0.0 {
            return err(
                "control_period",
                format!("must be positive, got {}", self.control_period),
            );
        }
        if self.t_end.is_nan() || self.t_end < self.control_period {
            return err(
                "t_end",
                format!(
                    "must cover at least one control period ({}), got {}",
                    self.control_period, self.t_end
                ),
            );
        }
        if self.cfl.is_nan() || self.cfl <= 0.0 || self.cfl > 1.0 {
            return err("cfl", format!("must lie in (0, 1], got {}", self.cfl));
        }
        Ok(())
    }

    /// Builds and validates the configured flux model.
    pub fn build_model(&self) -> Result<FluxModel, ConfigError> {
        Ok(FluxModel::builtin(self.flux, self.u_max, self.epsilon)?)
    }

    /// Number of whole control periods covering the horizon.
    pub fn control_steps(&self) -> usize {
        (self.t_end / self.control_period).round().max(1.0) as usize
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        message: format!("not a number: {e}"),
    })
}

fn parse_initial(value: &str) -> Result<InitialProfile, String> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let num = |s: &str| -> Result<f64, String> {
        s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"))
    };
    match parts.as_slice() {
        ["sinusoid"] => Ok(InitialProfile::sinusoid_default()),
        ["sinusoid", offset, amplitude] => Ok(InitialProfile::Sinusoid {
            offset: num(offset)?,
            amplitude: num(amplitude)?,
        }),
        ["constant", c] => Ok(InitialProfile::Constant(num(c)?)),
        ["riemann", left, right] => Ok(InitialProfile::Riemann {
            left: num(left)?,
            right: num(right)?,
            split: 0.0,
        }),
        ["riemann", left, right, split] => Ok(InitialProfile::Riemann {
            left: num(left)?,
            right: num(right)?,
            split: num(split)?,
        }),
        _ => Err(format!(
            "unknown initial profile `{value}` (expected sinusoid[:offset:amplitude], constant:c, or riemann:left:right[:split])"
        )),
    }
}

/// Parses the flat key-value document, applies defaults for unset keys, and
/// validates the result. Unknown and duplicate keys are rejected.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut config = ScenarioConfig::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: line_no,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        config.apply(key, value).map_err(|e| match e {
            ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: line_no, key },
            other => other,
        })?;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_stock_scenario() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.flux, FluxKind::Greenshields);
        assert_eq!(cfg.u_max, 1.0);
        assert!((cfg.u_star - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cfg.u_bar, 0.25);
        assert_eq!((cfg.a, cfg.b), (-1.0, 1.0));
        assert_eq!(cfg.t_end, 15.0);
        assert_eq!(cfg.control_period, 0.015);
        assert_eq!(cfg.n_cells, 200);
        assert_eq!(cfg.control_steps(), 1000);
        assert_eq!(cfg.initial, InitialProfile::sinusoid_default());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# heading\n\nu_star = 0.25\n  # trailing comment line\n").unwrap();
        assert_eq!(cfg.u_star, 0.25);
    }

    #[test]
    fn logarithmic_scenario_parses() {
        let text = "flux = greenberg_log\nepsilon = 0.1\nu_star = 0.25\nu_bar = 0.2\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.flux, FluxKind::GreenbergLog);
        assert_eq!(cfg.epsilon, Some(0.1));
        assert_eq!(cfg.u_star, 0.25);
        assert_eq!(cfg.u_bar, 0.2);
        cfg.build_model().unwrap();
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = parse_config("u_star = 0.2\nwavelength = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "wavelength");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_config("cfl = 0.5\ncfl = 0.6\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }));
    }

    #[test]
    fn target_above_jam_density_is_rejected() {
        let err = parse_config("u_star = 2\n").unwrap_err();
        match err {
            ConfigError::Constraint { field, .. } => assert_eq!(field, "u_star"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn greenberg_without_epsilon_is_rejected() {
        let err = parse_config("flux = greenberg_log\n").unwrap_err();
        assert!(matches!(err, ConfigError::Constraint { field: "epsilon", .. }));
    }

    #[test]
    fn malformed_line_reports_syntax_error() {
        let err = parse_config("just words\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn initial_profile_grammar() {
        let cfg = parse_config("initial = constant:0.3\n").unwrap();
        assert_eq!(cfg.initial, InitialProfile::Constant(0.3));
        let cfg = parse_config("initial = riemann:0.2:0.8\n").unwrap();
        assert_eq!(
            cfg.initial,
            InitialProfile::Riemann {
                left: 0.2,
                right: 0.8,
                split: 0.0
            }
        );
        let cfg = parse_config("initial = sinusoid:0.2:0.05\n").unwrap();
        assert_eq!(
            cfg.initial,
            InitialProfile::Sinusoid {
                offset: 0.2,
                amplitude: 0.05
            }
        );
        assert!(parse_config("initial = plateau\n").is_err());
    }

    #[test]
    fn snapshot_times_parse_as_list() {
        let cfg = parse_config("snapshot_times = 0, 2.5, 7\n").unwrap();
        assert_eq!(cfg.snapshot_times, vec![0.0, 2.5, 7.0]);
        let cfg = parse_config("snapshot_times =\n").unwrap();
        assert!(cfg.snapshot_times.is_empty());
    }
}
