//! `key = value` run configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use nmqsd::propagator::Mode;
use nmqsd::{InitialStateSpec, SystemParams, Truncation};

pub const KEYS: &[&str] = &[
    "omega_A",
    "omega_B",
    "kappa",
    "Gamma",
    "gamma",
    "dt",
    "t_max",
    "n_traj",
    "seed",
    "order",
    "mode",
    "initial",
    "amplitudes",
    "stride",
    "output",
    "kappa_step",
    "lags",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: cannot parse `{value}` for `{key}`: {reason}")]
    Value {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: `{key}`: {constraint}")]
    Constraint {
        line: usize,
        key: String,
        constraint: String,
    },
}

impl ConfigError {
    pub fn line(&self) -> usize {
        match self {
            ConfigError::Syntax { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::Value { line, .. }
            | ConfigError::Constraint { line, .. } => *line,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub mode: Mode,
    pub initial: InitialStateSpec,
    /// Time between output rows.
    pub stride: f64,
    /// Output file stem, relative to the output directory unless absolute.
    pub output: Option<PathBuf>,
    /// Spacing of the steady-state κ grid on (0, 1].
    pub kappa_step: f64,
    /// Lags for `noise-check`.
    pub lags: Vec<f64>,
    /// Line on which each key was set, for error reporting after overrides.
    lines: HashMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            mode: Mode::Nonlinear,
            initial: InitialStateSpec::Bell,
            stride: nmqsd::ensemble::DEFAULT_STRIDE,
            output: None,
            kappa_step: 0.01,
            lags: vec![0.0, 1.0, 3.0, 10.0],
            lines: HashMap::new(),
        }
    }
}

fn value_err(line: usize, key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Value {
        line,
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| value_err(line, key, value, e))
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(|s| s.trim().replace(' ', ""))
        .map(|s| s.parse::<T>().map_err(|e| value_err(line, key, &s, e)))
        .collect()
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "nonlinear" => Some(Mode::Nonlinear),
        "linear" => Some(Mode::Linear),
        _ => None,
    }
}

pub fn parse_order(s: &str) -> Option<Truncation> {
    match s.to_ascii_lowercase().as_str() {
        "f-only" => Some(Truncation::FOnly),
        "f-plus-z" => Some(Truncation::FPlusZ),
        _ => None,
    }
}

pub fn parse_initial(s: &str) -> Option<InitialStateSpec> {
    match s {
        "bell" => Some(InitialStateSpec::Bell),
        "product-20" => Some(InitialStateSpec::Product20),
        "psi-kappa" => Some(InitialStateSpec::PsiKappa),
        "phi-kappa" => Some(InitialStateSpec::PhiKappa),
        "custom" => Some(InitialStateSpec::Custom(Vec::new())),
        _ => None,
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut amplitudes: Option<Vec<Complex64>> = None;
    let mut initial_tag = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: body.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if let Some(&first) = cfg.lines.get(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
                first,
            });
        }
        cfg.lines.insert(key.to_string(), line);

        let p = &mut cfg.params;
        match key {
            "omega_A" => p.omega_a = parse_num(line, key, value)?,
            "omega_B" => p.omega_b = parse_num(line, key, value)?,
            "kappa" => p.kappa = parse_num(line, key, value)?,
            "Gamma" => p.dissipation = parse_num(line, key, value)?,
            "gamma" => p.memory_rate = parse_num(line, key, value)?,
            "dt" => p.dt = parse_num(line, key, value)?,
            "t_max" => p.t_max = parse_num(line, key, value)?,
            "n_traj" => p.n_traj = parse_num(line, key, value)?,
            "seed" => p.seed = parse_num(line, key, value)?,
            "order" => {
                p.order = parse_order(value).ok_or_else(|| value_err(line, key, value, "expected f-only or f-plus-z"))?
            }
            "mode" => {
                cfg.mode = parse_mode(value).ok_or_else(|| value_err(line, key, value, "expected nonlinear or linear"))?
            }
            "initial" => {
                initial_tag = Some(parse_initial(value).ok_or_else(|| {
                    value_err(line, key, value, "expected bell, product-20, psi-kappa, phi-kappa or custom")
                })?)
            }
            "amplitudes" => amplitudes = Some(parse_list(line, key, value)?),
            "stride" => cfg.stride = parse_num(line, key, value)?,
            "output" => cfg.output = Some(PathBuf::from(value)),
            "kappa_step" => cfg.kappa_step = parse_num(line, key, value)?,
            "lags" => cfg.lags = parse_list(line, key, value)?,
            _ => unreachable!("key list and match arms disagree"),
        }
    }

    cfg.initial = match (initial_tag, amplitudes) {
        (None | Some(InitialStateSpec::Custom(_)), Some(a)) => InitialStateSpec::Custom(a),
        (Some(InitialStateSpec::Custom(_)), None) => {
            return Err(cfg.constraint("initial", "custom initial state needs `amplitudes`"));
        }
        (Some(_), Some(_)) => {
            return Err(cfg.constraint("amplitudes", "only allowed with `initial = custom`"));
        }
        (Some(tag), None) => tag,
        (None, None) => InitialStateSpec::Bell,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn constraint(&self, key: &str, constraint: impl Into<String>) -> ConfigError {
        ConfigError::Constraint {
            line: self.lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            constraint: constraint.into(),
        }
    }

    /// Re-checks every constraint; errors carry the line that set the offending key (0 if defaulted).
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Err(nmqsd::Error::InvalidParams { field, constraint }) = self.params.validate() {
            return Err(self.constraint(field, constraint));
        }
        if !(self.stride > 0.0 && self.stride.is_finite()) {
            return Err(self.constraint("stride", "stride > 0 required"));
        }
        if !(self.kappa_step > 0.0 && self.kappa_step <= 1.0) {
            return Err(self.constraint("kappa_step", "0 < kappa_step <= 1 required"));
        }
        if self.lags.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(self.constraint("lags", "lags must be finite and >= 0"));
        }
        if let InitialStateSpec::Custom(a) = &self.initial {
            if a.len() != nmqsd::linalg::DIM {
                return Err(self.constraint("amplitudes", format!("need 6 amplitudes, got {}", a.len())));
            }
            if a.iter().all(|z| z.norm() == 0.0) {
                return Err(self.constraint("amplitudes", "all amplitudes are zero"));
            }
        }
        Ok(())
    }

    /// Lags must fit inside the sampled window.
    pub fn check_lags(&self) -> Result<(), ConfigError> {
        if self.lags.iter().any(|l| *l > self.params.t_max) {
            return Err(self.constraint("lags", "lags must not exceed t_max"));
        }
        Ok(())
    }

    /// Resolved configuration in the same `key = value` syntax, parseable by [`parse_config`].
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let mut out = vec![
            format!("omega_A = {}", p.omega_a),
            format!("omega_B = {}", p.omega_b),
            format!("kappa = {}", p.kappa),
            format!("Gamma = {}", p.dissipation),
            format!("gamma = {}", p.memory_rate),
            format!("dt = {}", p.dt),
            format!("t_max = {}", p.t_max),
            format!("n_traj = {}", p.n_traj),
            format!("seed = {}", p.seed),
            format!("order = {}", p.order),
            format!("mode = {}", self.mode),
            format!("initial = {}", self.initial.tag()),
        ];
        if let InitialStateSpec::Custom(a) = &self.initial {
            let amps: Vec<String> = a.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
            out.push(format!("amplitudes = {}", amps.join(", ")));
        }
        out.push(format!("stride = {}", self.stride));
        if let Some(o) = &self.output {
            out.push(format!("output = {}", o.display()));
        }
        out.push(format!("kappa_step = {}", self.kappa_step));
        let lags: Vec<String> = self.lags.iter().map(f64::to_string).collect();
        out.push(format!("lags = {}", lags.join(", ")));
        out.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.params.dissipation, 1.0);
        assert_eq!(cfg.params.omega_a, 1.0);
        assert_eq!(cfg.params.omega_b, 1.0);
        assert_eq!(cfg.params.dt, 1e-3);
        assert_eq!(cfg.params.t_max, 10.0);
        assert_eq!(cfg.params.n_traj, 1000);
        assert_eq!(cfg.mode, Mode::Nonlinear);
        assert_eq!(cfg.params.order, Truncation::FPlusZ);
    }

    #[test]
    fn memory_preset() {
        let cfg = parse_config("gamma = 0.3\nkappa = 1\ninitial = bell").unwrap();
        assert_eq!(cfg.params.memory_rate, 0.3);
        assert_eq!(cfg.params.kappa, 1.0);
        assert_eq!(cfg.initial, InitialStateSpec::Bell);
    }

    #[test]
    fn negative_dt_names_constraint() {
        let err = parse_config("# header\n\ndt = -1").unwrap_err();
        assert_eq!(err.line(), 3);
        assert!(err.to_string().contains("dt > 0"), "{err}");
    }

    #[test]
    fn unknown_key_has_line() {
        let err = parse_config("kappa = 0.5\nbeta = 2\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "beta".into()
            }
        );
    }

    #[test]
    fn gamma_keys_are_case_sensitive() {
        let cfg = parse_config("Gamma = 2\ngamma = 0.1").unwrap();
        assert_eq!(cfg.params.dissipation, 2.0);
        assert_eq!(cfg.params.memory_rate, 0.1);
    }

    #[test]
    fn bad_values_and_syntax() {
        assert!(matches!(parse_config("kappa = abc"), Err(ConfigError::Value { line: 1, .. })));
        assert!(matches!(parse_config("n_traj = 1.5"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse_config("mode = markov"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse_config("kappa 1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_config("kappa = 1\nkappa = 2"),
            Err(ConfigError::Duplicate { line: 2, first: 1, .. })
        ));
        assert!(matches!(parse_config("n_traj = 0"), Err(ConfigError::Constraint { .. })));
        assert!(matches!(parse_config("stride = 0"), Err(ConfigError::Constraint { .. })));
    }

    #[test]
    fn custom_amplitudes() {
        let cfg = parse_config("amplitudes = 1, 0, 0, 0, 0, 0.5-0.25i # comment").unwrap();
        match &cfg.initial {
            InitialStateSpec::Custom(a) => {
                assert_eq!(a.len(), 6);
                assert_eq!(a[5], Complex64::new(0.5, -0.25));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config("initial = custom").is_err());
        assert!(parse_config("initial = bell\namplitudes = 1,0,0,0,0,0").is_err());
        assert!(parse_config("amplitudes = 1,0,0").is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let text = "kappa = 0.4\ngamma = 3\nmode = linear\norder = F-only\ninitial = custom\n\
                    amplitudes = 0.1+0.2i, 0, 0, 1, 0, -0.5i\nstride = 0.1\noutput = run\nlags = 0, 2";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_config_text()).unwrap();
        assert_eq!(again.params, cfg.params);
        assert_eq!(again.mode, cfg.mode);
        assert_eq!(again.initial, cfg.initial);
        assert_eq!(again.stride, cfg.stride);
        assert_eq!(again.output, cfg.output);
        assert_eq!(again.lags, cfg.lags);
    }
}
