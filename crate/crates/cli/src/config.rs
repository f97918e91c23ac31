//! Scenario files and command-line overrides.
//!
//! A scenario file is UTF-8 TOML with sections mirroring the runtime
//! scenario:
//!
//! ```toml
//! [model]
//! s = 36.0                 # or { base = 36.0, depth = 0.9, omega = 0.0031415 }
//! d = 0.108
//! beta = 9e-5
//! mu1 = 0.5
//! k = 500.0
//! mu2 = 3.0
//! unknown = ["s", "mu1", "k"]
//!
//! [init]
//! x0 = [1000.0, 10.0, 1000.0]
//! y0 = [200.0, 50.0, 20000.0]
//! theta0 = [1.0, 1.0, 1.0]
//!
//! [nrhc]
//! q_diag = [1.0, 1.0, 1.0]
//! r_diag = [1.0, 1.0, 1.0]
//! t_f = 0.1
//! alpha = 0.01
//! a_s = 60.0               # scalar, times identity
//! t_s = 0.01
//! n_tau = 20
//!
//! [estimator]              # optional
//! gain = [1.0, 6e-4, 6e-4] # scalar or one value per unknown parameter
//! pe_window = 5.0
//!
//! [run]
//! duration = 100.0
//!
//! [output]                 # optional
//! csv = "case1.csv"
//! svg = "case1.svg"
//! ```

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rhc_core::model::{HivSignals, ParamSignal, UnknownParam, UnknownSet};
use rhc_core::nrhc::NrhcConfig;
use rhc_core::sim::Scenario;
use rhc_core::StepperKind;
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub init: InitSection,
    pub nrhc: NrhcSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum SignalSpec {
    Constant(f64),
    /// Evaluates as `base * (1 - depth * cos(omega * t))`.
    Sinusoid { base: f64, depth: f64, omega: f64 },
}

impl From<SignalSpec> for ParamSignal {
    fn from(spec: SignalSpec) -> Self {
        match spec {
            SignalSpec::Constant(v) => ParamSignal::Constant(v),
            SignalSpec::Sinusoid { base, depth, omega } => {
                ParamSignal::Sinusoid { base, depth, omega }
            }
        }
    }
}

impl From<ParamSignal> for SignalSpec {
    fn from(sig: ParamSignal) -> Self {
        match sig {
            ParamSignal::Constant(v) => SignalSpec::Constant(v),
            ParamSignal::Sinusoid { base, depth, omega } => {
                SignalSpec::Sinusoid { base, depth, omega }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub s: SignalSpec,
    pub d: SignalSpec,
    pub beta: SignalSpec,
    pub mu1: SignalSpec,
    pub k: SignalSpec,
    pub mu2: SignalSpec,
    pub unknown: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub x0: [f64; 3],
    pub y0: [f64; 3],
    pub theta0: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NrhcSection {
    pub q_diag: [f64; 3],
    pub r_diag: [f64; 3],
    pub t_f: f64,
    pub alpha: f64,
    /// Scalar continuation gain, applied as `a_s * I`.
    pub a_s: f64,
    pub t_s: f64,
    pub n_tau: usize,
    /// `"rk4"` (default) or `"euler"`.
    #[serde(default)]
    pub stepper: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// Scalar (broadcast) or one gain per unknown parameter.
    #[serde(default)]
    pub gain: Option<GainSpec>,
    /// Excitation-monitor window length in days.
    #[serde(default)]
    pub pe_window: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Scalar(f64),
    PerParameter(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration: f64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("scenario file: {e}")))
    }

    /// Mirrors a built-in scenario so overrides apply uniformly.
    pub fn from_scenario(sc: &Scenario) -> Self {
        RunConfig {
            model: ModelSection {
                s: sc.signals.s.into(),
                d: sc.signals.d.into(),
                beta: sc.signals.beta.into(),
                mu1: sc.signals.mu1.into(),
                k: sc.signals.k.into(),
                mu2: sc.signals.mu2.into(),
                unknown: sc.unknown.iter().map(|u| u.name().to_string()).collect(),
            },
            init: InitSection {
                x0: [sc.x0[0], sc.x0[1], sc.x0[2]],
                y0: [sc.y0[0], sc.y0[1], sc.y0[2]],
                theta0: sc.theta0.iter().copied().collect(),
            },
            nrhc: NrhcSection {
                q_diag: [sc.cfg.q[(0, 0)], sc.cfg.q[(1, 1)], sc.cfg.q[(2, 2)]],
                r_diag: [sc.cfg.r[(0, 0)], sc.cfg.r[(1, 1)], sc.cfg.r[(2, 2)]],
                t_f: sc.cfg.t_f,
                alpha: sc.cfg.alpha,
                a_s: sc.cfg.a_s[(0, 0)],
                t_s: sc.cfg.t_s,
                n_tau: sc.cfg.n_tau,
                stepper: None,
            },
            estimator: EstimatorSection {
                gain: Some(GainSpec::PerParameter(sc.adapt_gain.iter().copied().collect())),
                pe_window: Some(sc.pe_window),
            },
            run: RunSection { duration: sc.duration },
            output: OutputSection {
                csv: sc.csv_path.clone(),
                svg: sc.svg_path.clone(),
            },
        }
    }

    /// Applies a single `key=value` override. Supported keys are the
    /// scalar numeric fields, named by their section path.
    pub fn apply_set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse()
                .map_err(|_| ConfigError(format!("cannot parse '{v}' as a number for key '{key}'")))
        };
        match key {
            "model.s" => self.model.s = SignalSpec::Constant(parse_f64(value)?),
            "model.d" => self.model.d = SignalSpec::Constant(parse_f64(value)?),
            "model.beta" => self.model.beta = SignalSpec::Constant(parse_f64(value)?),
            "model.mu1" => self.model.mu1 = SignalSpec::Constant(parse_f64(value)?),
            "model.k" => self.model.k = SignalSpec::Constant(parse_f64(value)?),
            "model.mu2" => self.model.mu2 = SignalSpec::Constant(parse_f64(value)?),
            "nrhc.t_f" => self.nrhc.t_f = parse_f64(value)?,
            "nrhc.alpha" => self.nrhc.alpha = parse_f64(value)?,
            "nrhc.a_s" => self.nrhc.a_s = parse_f64(value)?,
            "nrhc.t_s" => self.nrhc.t_s = parse_f64(value)?,
            "nrhc.n_tau" => {
                self.nrhc.n_tau = value
                    .parse()
                    .map_err(|_| ConfigError(format!("cannot parse '{value}' as a count for key '{key}'")))?
            }
            "estimator.gain" => self.estimator.gain = Some(GainSpec::Scalar(parse_f64(value)?)),
            "estimator.pe_window" => self.estimator.pe_window = Some(parse_f64(value)?),
            "run.duration" => self.run.duration = parse_f64(value)?,
            other => {
                return Err(ConfigError(format!(
                    "unknown override key '{other}' (supported: model.<rate>, nrhc.t_f, nrhc.alpha, \
                     nrhc.a_s, nrhc.t_s, nrhc.n_tau, estimator.gain, estimator.pe_window, run.duration)"
                )))
            }
        }
        Ok(())
    }

    pub fn into_scenario(&self, name: &str) -> Result<Scenario, ConfigError> {
        let unknown = UnknownSet::from_names(&self.model.unknown)
            .map_err(|e| ConfigError(format!("model.unknown: {e}")))?;
        for name in &self.model.unknown {
            name.parse::<UnknownParam>()
                .map_err(|e| ConfigError(format!("model.unknown: {e}")))?;
        }
        let p = unknown.len();
        if self.init.theta0.len() != p {
            return Err(ConfigError(format!(
                "init.theta0 must have one entry per unknown parameter ({p}), got {}",
                self.init.theta0.len()
            )));
        }
        let gain = match &self.estimator.gain {
            None => DVector::from_element(p, 1.0),
            Some(GainSpec::Scalar(g)) => DVector::from_element(p, *g),
            Some(GainSpec::PerParameter(gs)) => {
                if gs.len() != p {
                    return Err(ConfigError(format!(
                        "estimator.gain must be a scalar or have one entry per unknown parameter ({p}), got {}",
                        gs.len()
                    )));
                }
                DVector::from_vec(gs.clone())
            }
        };
        for (key, diag) in [("nrhc.q_diag", &self.nrhc.q_diag), ("nrhc.r_diag", &self.nrhc.r_diag)] {
            if diag.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(ConfigError(format!("{key} entries must be strictly positive")));
            }
        }
        if !self.nrhc.a_s.is_finite() || self.nrhc.a_s <= 0.0 {
            return Err(ConfigError("nrhc.a_s must be strictly positive".to_string()));
        }
        let stepper = match self.nrhc.stepper.as_deref() {
            None | Some("rk4") => StepperKind::RungeKutta4,
            Some("euler") => StepperKind::ForwardEuler,
            Some(other) => {
                return Err(ConfigError(format!(
                    "nrhc.stepper must be 'rk4' or 'euler', got '{other}'"
                )))
            }
        };

        let mut cfg = NrhcConfig::new(
            3,
            self.nrhc.t_f,
            self.nrhc.alpha,
            self.nrhc.a_s,
            self.nrhc.t_s,
            self.nrhc.n_tau,
        );
        cfg.q = DMatrix::from_diagonal(&DVector::from_row_slice(&self.nrhc.q_diag));
        cfg.r = DMatrix::from_diagonal(&DVector::from_row_slice(&self.nrhc.r_diag));
        cfg.stepper = stepper;

        let scenario = Scenario {
            name: name.to_string(),
            signals: HivSignals {
                s: self.model.s.into(),
                d: self.model.d.into(),
                beta: self.model.beta.into(),
                mu1: self.model.mu1.into(),
                k: self.model.k.into(),
                mu2: self.model.mu2.into(),
            },
            unknown,
            x0: DVector::from_row_slice(&self.init.x0),
            y0: DVector::from_row_slice(&self.init.y0),
            theta0: DVector::from_vec(self.init.theta0.clone()),
            cfg,
            duration: self.run.duration,
            adapt_gain: gain,
            pe_window: self.estimator.pe_window.unwrap_or(5.0),
            csv_path: self.output.csv.clone(),
            svg_path: self.output.svg.clone(),
        };
        scenario
            .validate()
            .map_err(|e| ConfigError(format!("scenario validation: {e}")))?;
        Ok(scenario)
    }
}

/// Loads a run target: a built-in preset name or a path to a TOML file.
pub fn load_target(target: &str) -> Result<(String, RunConfig), ConfigError> {
    if let Some(preset) = rhc_core::sim::preset(target) {
        return Ok((preset.name.clone(), RunConfig::from_scenario(&preset)));
    }
    let path = std::path::Path::new(target);
    if !path.exists() {
        return Err(ConfigError(format!(
            "'{target}' is neither a built-in preset (case1, case2) nor a readable file"
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    Ok((name, RunConfig::from_toml_str(&text)?))
}
