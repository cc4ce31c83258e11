//! Scenario configuration, flag parsing and error classification.

use std::fmt;
use std::path::Path;

use ltp_harmonic::case_study::{self, Reading};
use ltp_harmonic::scalar::CMatrix;
use ltp_harmonic::serial::MatrixJson;
use ltp_harmonic::signals::{PeriodicMatrixFunction, SignalSpec};
use nalgebra::Complex;
use serde::{Deserialize, Serialize};

/// Harmonics materialized for closed-form coefficients read from a config.
pub const MATERIALIZED_HARMONICS: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floquet_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: SignalSpec,
    #[serde(rename = "B")]
    pub b: SignalSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignConfig {
    /// `G = B*(V*)⁻¹`, `Λ = −J* − αI`.
    Sufficient { alpha: f64 },
    /// User-supplied `G` and `Λ`; `G` defaults to the sufficient choice.
    Direct {
        #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
        g: Option<SignalSpec>,
        #[serde(rename = "Lambda")]
        lambda: MatrixJson,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub t_end: f64,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentConfig>,
}

/// A reference segment, given either by its input or by a desired state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub t_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_ref: Option<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_desired: Option<SignalSpec>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical { stage: String, message: String },
}

impl CliError {
    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn numerical(stage: &str, e: impl fmt::Display) -> Self {
        CliError::Numerical {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical { stage, message } => write!(f, "numerical failure in stage {stage}: {message}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to library errors.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T> StageExt<T> for ltp_harmonic::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| match e {
            ltp_harmonic::Error::Io(_) => CliError::config(e),
            _ => CliError::numerical(stage, e),
        })
    }
}

impl ScenarioConfig {
    /// The two-state case-study system with the default schedule.
    pub fn case_study() -> Self {
        let (a, b) = case_study::system_specs(Reading::Sawtooth);
        ScenarioConfig {
            system: SystemConfig { a, b },
            design: Some(DesignConfig::Sufficient { alpha: 1.0 }),
            m: Some(vec![4, 6, 8, 10]),
            floquet_steps: None,
            simulation: Some(SimulationConfig {
                x0: Some(vec![1.0, 1.0]),
                t_end: case_study::TRACKING_END,
                step: 1e-3,
                segments: case_study_segments(),
            }),
        }
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg = match path {
            None => Self::case_study(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.system.a.validate().map_err(CliError::config)?;
        self.system.b.validate().map_err(CliError::config)?;
        let (a, b) = (&self.system.a, &self.system.b);
        if a.rows != a.cols {
            return Err(CliError::config("A must be square"));
        }
        if b.rows != a.rows {
            return Err(CliError::config("B must have as many rows as A"));
        }
        if a.period != b.period {
            return Err(CliError::config("A and B must share the period"));
        }
        if let Some(DesignConfig::Direct { g, lambda }) = &self.design {
            let q = lambda.len();
            if q == 0 || lambda.iter().any(|r| r.len() != q) {
                return Err(CliError::config("Lambda must be a non-empty square matrix"));
            }
            if let Some(g) = g {
                g.validate().map_err(CliError::config)?;
                if g.rows != b.cols || g.cols != q || g.period != a.period {
                    return Err(CliError::config("G must be p x q with the system period"));
                }
            }
        }
        if let Some(ms) = &self.m {
            if ms.is_empty() {
                return Err(CliError::config("m list must not be empty"));
            }
        }
        if let Some(sim) = &self.simulation {
            if !(sim.step > 0.0 && sim.t_end > 0.0) {
                return Err(CliError::config("simulation needs step > 0 and t_end > 0"));
            }
            if let Some(x0) = &sim.x0 {
                if x0.len() != a.rows {
                    return Err(CliError::config("x0 length must match A"));
                }
            }
            for s in &sim.segments {
                match (&s.u_ref, &s.x_desired) {
                    (Some(u), None) => {
                        u.validate().map_err(CliError::config)?;
                        if u.rows != b.cols || u.cols != 1 {
                            return Err(CliError::config("u_ref must be a p x 1 signal"));
                        }
                    }
                    (None, Some(x)) => {
                        x.validate().map_err(CliError::config)?;
                        if x.rows != a.rows || x.cols != 1 {
                            return Err(CliError::config("x_desired must be an n x 1 signal"));
                        }
                    }
                    _ => return Err(CliError::config("each segment needs exactly one of u_ref, x_desired")),
                }
            }
            if sim.segments.windows(2).any(|w| w[0].t_start >= w[1].t_start) {
                return Err(CliError::config("segment start times must ascend"));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> CliResult<(PeriodicMatrixFunction<f64>, PeriodicMatrixFunction<f64>)> {
        Ok((signal(&self.system.a)?, signal(&self.system.b)?))
    }
}

pub fn signal(spec: &SignalSpec) -> CliResult<PeriodicMatrixFunction<f64>> {
    let w = spec.to_waveforms::<f64>().map_err(CliError::config)?;
    Ok(PeriodicMatrixFunction::from_waveforms(w, MATERIALIZED_HARMONICS))
}

fn case_study_segments() -> Vec<SegmentConfig> {
    use ltp_harmonic::signals::TermSpec;
    let period = case_study::PERIOD;
    let spec = |rows, terms| SignalSpec {
        rows,
        cols: 1,
        period,
        terms,
    };
    vec![
        SegmentConfig {
            t_start: 0.0,
            u_ref: Some(spec(1, vec![])),
            x_desired: None,
        },
        SegmentConfig {
            t_start: 3.0,
            u_ref: Some(spec(
                1,
                vec![
                    TermSpec::Const {
                        row: 0,
                        col: 0,
                        value: 1.0,
                    },
                    TermSpec::Cos {
                        row: 0,
                        col: 0,
                        amplitude: 1.0,
                        harmonic: 1,
                        phase: 0.0,
                    },
                ],
            )),
            x_desired: None,
        },
        SegmentConfig {
            t_start: 6.0,
            u_ref: None,
            x_desired: Some(spec(
                2,
                vec![TermSpec::Cos {
                    row: 0,
                    col: 0,
                    amplitude: 0.25,
                    harmonic: 1,
                    phase: 0.0,
                }],
            )),
        },
    ]
}

/// Parses `diag(a, b, ...)` (entries real or `x+yj`) or a JSON array of real
/// rows.
pub fn parse_lambda(s: &str) -> Result<CMatrix<f64>, String> {
    let t = s.trim();
    if let Some(inner) = t.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let vals = inner
            .split(',')
            .map(|p| parse_complex(p.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.is_empty() {
            return Err("diag() needs at least one entry".into());
        }
        let mut m = CMatrix::zeros(vals.len(), vals.len());
        for (i, v) in vals.into_iter().enumerate() {
            m[(i, i)] = v;
        }
        return Ok(m);
    }
    let rows: Vec<Vec<f64>> = serde_json::from_str(t).map_err(|e| format!("invalid Lambda {s:?}: {e}"))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err("Lambda must be square".into());
    }
    Ok(CMatrix::from_fn(n, n, |r, c| Complex::new(rows[r][c], 0.0)))
}

fn parse_complex(s: &str) -> Result<Complex<f64>, String> {
    let bad = || format!("invalid number {s:?}");
    let s = s.replace(' ', "");
    if let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            x => x,
        };
        Ok(Complex::new(
            re.parse().map_err(|_| bad())?,
            im.parse().map_err(|_| bad())?,
        ))
    } else {
        Ok(Complex::new(s.parse().map_err(|_| bad())?, 0.0))
    }
}
