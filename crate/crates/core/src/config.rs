//! Flat `key = value` experiment files.
//!
//! Lines are `key = value`; `#` starts a comment. Values are numbers, bare
//! words or bracketed number lists `[a, b, c]`. Only `pump.harmonic` may be
//! repeated. Unknown keys are rejected so that typos cannot silently fall
//! back to defaults.

use std::collections::HashSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonic::Branch;
use crate::model::{Harmonic, ModelConstants, PhysicalParams, PureState, ReducedState};
use crate::ode::{Method, SolverConfig};
use crate::reduction::{lift_state, project_state};
use crate::EnvelopeState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
}

/// Initial data; whichever block is needed by the run is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub a: f64,
    pub b: f64,
    pub c1: Complex64,
    pub c2: Complex64,
    /// Envelope / harmonic-orbit data `(MM, QQ)`.
    pub m: Complex64,
    pub q: Complex64,
    /// Set when any of `init.A`, `init.B`, `init.C1`, `init.C2` was given.
    pub full_given: bool,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c1: Complex64::new(1.0, 0.0),
            c2: Complex64::new(0.0, 0.0),
            m: Complex64::new(0.0, 0.0),
            q: Complex64::new(0.5, 0.0),
            full_given: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub constants: ModelConstants,
    pub carrier: Complex64,
    pub harmonics: Vec<Harmonic>,
    pub solver: SolverConfig,
    pub init: InitialData,
    pub seed: u64,
    pub p_list: Option<Vec<f64>>,
    pub horizon_multiple: f64,
    pub branch: Option<Branch>,
    pub d0: Vec<f64>,
    /// Slow-time horizon of the basin probe.
    pub basin_tau: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            constants: ModelConstants::default(),
            carrier: Complex64::new(0.0, 0.0),
            harmonics: Vec::new(),
            solver: SolverConfig::default(),
            init: InitialData::default(),
            seed: 0,
            p_list: None,
            horizon_multiple: 10.0,
            branch: None,
            d0: vec![1e-2, 5e-3],
            basin_tau: 400.0,
        }
    }
}

enum Value {
    Number(f64),
    List(Vec<f64>),
    Word(String),
}

fn parse_value(raw: &str, line: usize) -> Result<Value, ConfigError> {
    let err = |reason: String| ConfigError::Syntax { line, reason };
    if let Some(inner) = raw.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or_else(|| err(format!("unterminated list `{raw}`")))?;
        if inner.trim().is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        let items = inner
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| err(format!("`{}` is not a number", x.trim()))))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Value::List(items));
    }
    match raw.parse::<f64>() {
        Ok(v) => Ok(Value::Number(v)),
        Err(_) if raw.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) && !raw.is_empty() => {
            Ok(Value::Word(raw.to_string()))
        }
        Err(_) => Err(err(format!("cannot parse value `{raw}`"))),
    }
}

impl Value {
    fn number(self, key: &str, line: usize) -> Result<f64, ConfigError> {
        match self {
            Value::Number(v) => Ok(v),
            _ => Err(ConfigError::Syntax {
                line,
                reason: format!("`{key}` expects a number"),
            }),
        }
    }

    fn list(self, key: &str, line: usize, len: Option<usize>) -> Result<Vec<f64>, ConfigError> {
        let bad = |reason: String| ConfigError::Syntax { line, reason };
        let v = match self {
            Value::List(v) => v,
            Value::Number(x) => vec![x],
            Value::Word(_) => return Err(bad(format!("`{key}` expects a list"))),
        };
        match len {
            Some(n) if v.len() != n => Err(bad(format!("`{key}` expects {n} numbers, got {}", v.len()))),
            _ => Ok(v),
        }
    }

    fn complex(self, key: &str, line: usize) -> Result<Complex64, ConfigError> {
        let v = self.list(key, line, Some(2))?;
        Ok(Complex64::new(v[0], v[1]))
    }

    fn word(self, key: &str, line: usize) -> Result<String, ConfigError> {
        match self {
            Value::Word(w) => Ok(w),
            _ => Err(ConfigError::Syntax {
                line,
                reason: format!("`{key}` expects a word"),
            }),
        }
    }
}

fn parse_method(w: &str, line: usize) -> Result<Method, ConfigError> {
    match w.to_ascii_lowercase().as_str() {
        "rk4" | "rk4fixed" => Ok(Method::Rk4Fixed),
        "rk45" | "rk45adaptive" | "dopri5" => Ok(Method::Rk45Adaptive),
        "dop853" | "dop853adaptive" => Ok(Method::Dop853Adaptive),
        _ => Err(ConfigError::Syntax {
            line,
            reason: format!("unknown method `{w}` (rk4, rk45, dop853)"),
        }),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut abs_tol_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let v = parse_value(value.trim(), line)?;
            if key != "pump.harmonic" && !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            let k = &mut cfg.constants;
            match key {
                "omega1" => k.omega1 = v.number(key, line)?,
                "omega2" => k.omega2 = v.number(key, line)?,
                "Omega" => k.cavity_freq = v.number(key, line)?,
                "gamma" => k.gamma = v.number(key, line)?,
                "p" => k.dipole = v.number(key, line)?,
                "c" => k.c = v.number(key, line)?,
                "hbar" => k.hbar = v.number(key, line)?,
                "pump.carrier.re" => cfg.carrier.re = v.number(key, line)?,
                "pump.carrier.im" => cfg.carrier.im = v.number(key, line)?,
                "pump.harmonic" => {
                    let h = v.list(key, line, Some(3))?;
                    cfg.harmonics.push(Harmonic {
                        amplitude: Complex64::new(h[0], h[1]),
                        freq: h[2],
                    });
                }
                "method" => cfg.solver.method = parse_method(&v.word(key, line)?, line)?,
                "dt" => cfg.solver.dt = v.number(key, line)?,
                "rel_tol" => cfg.solver.rel_tol = v.number(key, line)?,
                "abs_tol" => {
                    cfg.solver.abs_tol = v.number(key, line)?;
                    abs_tol_given = true;
                }
                "sample_dt" => cfg.solver.sample_dt = v.number(key, line)?,
                "t_end" => cfg.solver.t_end = v.number(key, line)?,
                "init.A" => {
                    cfg.init.a = v.number(key, line)?;
                    cfg.init.full_given = true;
                }
                "init.B" => {
                    cfg.init.b = v.number(key, line)?;
                    cfg.init.full_given = true;
                }
                "init.C1" => {
                    cfg.init.c1 = v.complex(key, line)?;
                    cfg.init.full_given = true;
                }
                "init.C2" => {
                    cfg.init.c2 = v.complex(key, line)?;
                    cfg.init.full_given = true;
                }
                "init.M" => cfg.init.m = v.complex(key, line)?,
                "init.Q" => cfg.init.q = v.complex(key, line)?,
                "seed" => {
                    let s = v.number(key, line)?;
                    if !(s >= 0.0 && s.fract() == 0.0 && s < 2f64.powi(53)) {
                        return Err(ConfigError::Syntax {
                            line,
                            reason: format!("seed must be a non-negative integer, got {s}"),
                        });
                    }
                    cfg.seed = s as u64;
                }
                "p_list" => cfg.p_list = Some(v.list(key, line, None)?),
                "horizon_multiple" => cfg.horizon_multiple = v.number(key, line)?,
                "branch" => {
                    let w = v.word(key, line)?;
                    cfg.branch = Some(w.parse().map_err(|_| ConfigError::Syntax {
                        line,
                        reason: format!("unknown branch `{w}`"),
                    })?);
                }
                "d0" => cfg.d0 = v.list(key, line, None)?,
                "basin_tau" => cfg.basin_tau = v.number(key, line)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        if seen.contains("rel_tol") && !abs_tol_given {
            cfg.solver.abs_tol = cfg.solver.rel_tol * 1e-2;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn params(&self) -> crate::Result<PhysicalParams> {
        Ok(PhysicalParams::new(self.constants)?)
    }

    pub fn pump(&self) -> crate::Result<crate::Pumping> {
        Ok(crate::Pumping::new(self.carrier, self.harmonics.clone(), self.constants.cavity_freq)?)
    }

    /// `p / gamma`.
    pub fn ratio(&self) -> crate::Result<f64> {
        let k = &self.constants;
        if k.dipole > 0.0 && k.gamma > 0.0 {
            Ok(k.dipole / k.gamma)
        } else {
            Err(crate::Error::InvalidParams("sweeps need p > 0 and gamma > 0 to fix r = p / gamma".into()))
        }
    }

    /// Full initial state: explicit `init.A/B/C1/C2` when given, otherwise
    /// the canonical lift of `(init.M, init.Q)`.
    pub fn initial_full(&self, params: &PhysicalParams) -> crate::Result<PureState> {
        if self.init.full_given {
            let i = &self.init;
            Ok(PureState::new(i.a, i.b, i.c1, i.c2)?)
        } else {
            let x = lift_state(&ReducedState::north(self.init.m, self.init.q), params);
            Ok(PureState::new(x.a, x.b, x.c1, x.c2)?)
        }
    }

    pub fn initial_reduced(&self, params: &PhysicalParams) -> crate::Result<ReducedState> {
        project_state(&self.initial_full(params)?, params)
    }

    pub fn initial_envelope(&self) -> EnvelopeState {
        EnvelopeState::new(self.init.m, self.init.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "
            # resonance, r = 2
            omega1 = 0
            omega2 = 1
            Omega = 1
            gamma = 5e-4   # p / r
            p = 1e-3
            c = 1
            hbar = 1
            pump.carrier.re = 1.0
            pump.carrier.im = -0.5
            pump.harmonic = [0.2, 0.1, 1.4142]
            pump.harmonic = [0.3, 0.0, 2.5]
            method = rk45
            rel_tol = 1e-9
            t_end = 100
            sample_dt = 0.5
            init.M = [-1, 0]
            init.Q = [-0.27, 0.0]
            seed = 7
            p_list = [3e-3, 1e-3, 3e-4]
            branch = NonZeroInvPlus
        ";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.constants.gamma, 5e-4);
        assert_eq!(cfg.carrier, Complex64::new(1.0, -0.5));
        assert_eq!(cfg.harmonics.len(), 2);
        assert_eq!(cfg.harmonics[1].freq, 2.5);
        assert_eq!(cfg.solver.method, Method::Rk45Adaptive);
        assert!((cfg.solver.abs_tol - 1e-11).abs() < 1e-25);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.branch, Some(Branch::NonZeroInvPlus));
        assert!((cfg.ratio().unwrap() - 2.0).abs() < 1e-15);
        assert!(cfg.pump().is_ok());
        assert!(!cfg.init.full_given);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::parse("gama = 1"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("p = 1\np = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(ExperimentConfig::parse("p 1"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(ExperimentConfig::parse("pump.harmonic = [1, 2]"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(ExperimentConfig::parse("p = abc"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(ExperimentConfig::parse("seed = 1.5"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(ExperimentConfig::parse("method = euler"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn harmonic_on_carrier_rejected_at_pump_construction() {
        let cfg = ExperimentConfig::parse("pump.harmonic = [1, 0, 1]").unwrap();
        assert!(cfg.pump().is_err());
    }

    #[test]
    fn initial_state_from_envelope_data() {
        let cfg = ExperimentConfig::parse("init.M = [0.5, -0.25]\ninit.Q = [0.3, 0.4]").unwrap();
        let params = cfg.params().unwrap();
        let x = cfg.initial_full(&params).unwrap();
        assert!((x.charge() - 1.0).abs() < 1e-15);
        assert!((x.maxwell_amplitude(1.0) - Complex64::new(0.5, -0.25)).norm() < 1e-15);
        let y = cfg.initial_reduced(&params).unwrap();
        assert!((y.north_q().unwrap() - Complex64::new(0.3, 0.4)).norm() < 1e-14);
    }
}
