//! The two-state example system with square, triangular and sawtooth
//! coefficients, `T = 1`, `ω = 2π`.
//!
//! ```text
//! a11 = 1 + sgn(sin ωt)
//! a12 = 2 + (16/π²) Σ cos((2k+1)ωt)/(2k+1)²
//! a21 = −1 + sawtooth
//! a22 = 1 − 2 sin 2πt − 2 sin 6πt + 2 cos 6πt + 2 cos 10πt
//! b11 = 1 + 2 cos 2ωt + 4 sin 6ωt,   b21 = 0
//! ```
//!
//! Two readings of the sawtooth entry are provided. [`Reading::Sawtooth`] is
//! the rising ramp `−(2/π) Σ sin(k(ωt + π/4))/k`, which yields Floquet
//! exponents `1 ± 1.645j`. [`Reading::AlternatingSeries`] keeps the series
//! `(2/π) Σ (−1)^k/k · sin(ωkt + π/4)` with a single shared phase; it is not
//! a sawtooth (it has a logarithmic peak at `t = 1/2`) and gives `1 ± 1.586j`.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{
    closed_loop_pole_check, controllability_heuristic, design_direct_report, harmonic_equilibrium, nearest_equilibrium,
    observability_heuristic, sufficient_g, sufficient_lambda, DesignOptions, GainPath, GramianReport, PoleReport,
};
use crate::error::{Error, Result};
use crate::floquet::{factorize_with, harmonic_spectrum_prediction, write_matrix_trace, FloquetOptions};
use crate::operators::{central_spectrum, harmonic_state_operator, InvertibilityCertificate};
use crate::scalar::{lit, CMatrix, Real};
use crate::serial::ComplexJson;
use crate::signals::{PeriodicMatrixFunction, SignalSpec, Term, TermSpec, WaveformMatrix};
use crate::sim::{
    complex_state, decay_rate, multiplier_check, riccati_escape_probe, simulate_closed_loop, tracking_scenario,
    verify_z_dynamics, EscapeReport, MultiplierReport, Segment, SegmentMetrics, SimulationResult, ZReport,
};
use crate::sylvester::{convergence_sweep, SweepReport};

pub const PERIOD: f64 = 1.0;

/// Harmonics materialized for the closed-form coefficients.
pub const HARMONICS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reading {
    #[default]
    Sawtooth,
    AlternatingSeries,
}

fn a21_term<T: Real>(reading: Reading) -> Term<T> {
    match reading {
        Reading::Sawtooth => Term::Sawtooth {
            amplitude: T::one(),
            phase: lit(PI / 4.0),
        },
        Reading::AlternatingSeries => Term::AlternatingSine {
            amplitude: T::one(),
            phase: lit(PI / 4.0),
        },
    }
}

pub fn a_waveforms<T: Real>(reading: Reading) -> WaveformMatrix<T> {
    let c = |v: f64| Term::Const { value: lit(v) };
    let cos = |h: u32, a: f64| Term::Cos {
        amplitude: lit(a),
        harmonic: h,
        phase: T::zero(),
    };
    let sin = |h: u32, a: f64| Term::Sin {
        amplitude: lit(a),
        harmonic: h,
        phase: T::zero(),
    };
    WaveformMatrix::new(2, 2, lit(PERIOD))
        .with(0, 0, c(1.0))
        .with(0, 0, Term::Square { amplitude: T::one() })
        .with(0, 1, c(2.0))
        .with(0, 1, Term::Triangle { amplitude: lit(2.0) })
        .with(1, 0, c(-1.0))
        .with(1, 0, a21_term(reading))
        .with(1, 1, c(1.0))
        .with(1, 1, sin(1, -2.0))
        .with(1, 1, sin(3, -2.0))
        .with(1, 1, cos(3, 2.0))
        .with(1, 1, cos(5, 2.0))
}

pub fn b_waveforms<T: Real>() -> WaveformMatrix<T> {
    WaveformMatrix::new(2, 1, lit(PERIOD))
        .with(0, 0, Term::Const { value: T::one() })
        .with(
            0,
            0,
            Term::Cos {
                amplitude: lit(2.0),
                harmonic: 2,
                phase: T::zero(),
            },
        )
        .with(
            0,
            0,
            Term::Sin {
                amplitude: lit(4.0),
                harmonic: 6,
                phase: T::zero(),
            },
        )
}

/// `(A, B)` with closed forms attached and `HARMONICS` phasors stored.
pub fn system<T: Real>(reading: Reading) -> (PeriodicMatrixFunction<T>, PeriodicMatrixFunction<T>) {
    (
        PeriodicMatrixFunction::from_waveforms(a_waveforms(reading), HARMONICS),
        PeriodicMatrixFunction::from_waveforms(b_waveforms(), HARMONICS),
    )
}

/// JSON descriptions of `A` and `B`.
pub fn system_specs(reading: Reading) -> (SignalSpec, SignalSpec) {
    let a21 = match reading {
        Reading::Sawtooth => TermSpec::Sawtooth {
            row: 1,
            col: 0,
            amplitude: 1.0,
            phase: PI / 4.0,
        },
        Reading::AlternatingSeries => TermSpec::AlternatingSine {
            row: 1,
            col: 0,
            amplitude: 1.0,
            phase: PI / 4.0,
        },
    };
    let a = SignalSpec {
        rows: 2,
        cols: 2,
        period: PERIOD,
        terms: vec![
            TermSpec::Const {
                row: 0,
                col: 0,
                value: 1.0,
            },
            TermSpec::Square {
                row: 0,
                col: 0,
                amplitude: 1.0,
            },
            TermSpec::Const {
                row: 0,
                col: 1,
                value: 2.0,
            },
            TermSpec::Triangle {
                row: 0,
                col: 1,
                amplitude: 2.0,
            },
            TermSpec::Const {
                row: 1,
                col: 0,
                value: -1.0,
            },
            a21,
            TermSpec::Const {
                row: 1,
                col: 1,
                value: 1.0,
            },
            TermSpec::Sin {
                row: 1,
                col: 1,
                amplitude: -2.0,
                harmonic: 1,
                phase: 0.0,
            },
            TermSpec::Sin {
                row: 1,
                col: 1,
                amplitude: -2.0,
                harmonic: 3,
                phase: 0.0,
            },
            TermSpec::Cos {
                row: 1,
                col: 1,
                amplitude: 2.0,
                harmonic: 3,
                phase: 0.0,
            },
            TermSpec::Cos {
                row: 1,
                col: 1,
                amplitude: 2.0,
                harmonic: 5,
                phase: 0.0,
            },
        ],
    };
    let b = SignalSpec {
        rows: 2,
        cols: 1,
        period: PERIOD,
        terms: vec![
            TermSpec::Const {
                row: 0,
                col: 0,
                value: 1.0,
            },
            TermSpec::Cos {
                row: 0,
                col: 0,
                amplitude: 2.0,
                harmonic: 2,
                phase: 0.0,
            },
            TermSpec::Sin {
                row: 0,
                col: 0,
                amplitude: 4.0,
                harmonic: 6,
                phase: 0.0,
            },
        ],
    };
    (a, b)
}

/// `G = [1 1]` of the counter-example.
pub fn counter_example_g<T: Real>() -> PeriodicMatrixFunction<T> {
    PeriodicMatrixFunction::constant_real(&DMatrix::from_row_slice(1, 2, &[T::one(), T::one()]), lit(PERIOD))
}

/// `Λ = diag(−5, −7)` of the counter-example.
pub fn counter_example_lambda<T: Real>() -> CMatrix<T> {
    crate::scalar::to_complex(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        lit(-5.0),
        lit(-7.0),
    ])))
}

/// Settings for [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub reading: Reading,
    /// Orders of the convergence sweep; the last one is the reference.
    pub sweep_orders: Vec<usize>,
    /// Truncation order used for the designs.
    pub m: usize,
    pub alpha: f64,
    /// Assigned `Λ` of the second design (with the same `G`), if any.
    pub lambda: Option<CMatrix<f64>>,
    pub floquet_steps: usize,
    pub sim_step: f64,
    /// Initial states for the `z = P⁻¹x` check.
    pub z_initial_states: Vec<Vec<f64>>,
    pub tracking_x0: Vec<f64>,
    /// Only the Floquet stage and the counter-example.
    pub counter_example_only: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            reading: Reading::Sawtooth,
            sweep_orders: vec![4, 6, 8, 10, 12],
            m: 10,
            alpha: 1.0,
            lambda: Some(diag_lambda(&[-10.0, -12.0])),
            floquet_steps: 20000,
            sim_step: 1e-4,
            z_initial_states: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, -1.0]],
            tracking_x0: vec![1.0, 1.0],
            counter_example_only: false,
        }
    }
}

pub fn diag_lambda(values: &[f64]) -> CMatrix<f64> {
    crate::scalar::to_complex(&DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
}

/// Reference switch times and end of the tracking run.
pub const TRACKING_SWITCHES: [f64; 3] = [0.0, 3.0, 6.0];
pub const TRACKING_END: f64 = 9.0;
/// Periods covered by the z-dynamics check and the decay fit.
pub const Z_HORIZON: f64 = 3.0;
pub const DECAY_PERIODS: usize = 6;
/// Central band half-width in units of `ω/2` for the spectrum checks.
pub const CENTRAL_KEEP: usize = 6;
/// Samples per period of the exported `P̃(t)` and `K(t)` traces.
pub const TRACE_SAMPLES: usize = 1000;
/// Simulation samples kept in exported trajectories.
pub const CSV_STRIDE: usize = 10;

/// The three-segment reference schedule: `u_ref = 0`, then
/// `u_ref = 1 + cos ωt`, then the equilibrium nearest to `(¼cos ωt, 0)`.
pub fn tracking_segments(
    a: &PeriodicMatrixFunction<f64>,
    b: &PeriodicMatrixFunction<f64>,
    m: usize,
) -> Result<Vec<Segment<f64>>> {
    let zero = PeriodicMatrixFunction::zeros(1, 1, PERIOD);
    let u1 = PeriodicMatrixFunction::from_waveforms(
        WaveformMatrix::new(1, 1, PERIOD)
            .with(0, 0, Term::Const { value: 1.0 })
            .with(
                0,
                0,
                Term::Cos {
                    amplitude: 1.0,
                    harmonic: 1,
                    phase: 0.0,
                },
            ),
        1,
    );
    let xd = PeriodicMatrixFunction::from_waveforms(
        WaveformMatrix::new(2, 1, PERIOD).with(
            0,
            0,
            Term::Cos {
                amplitude: 0.25,
                harmonic: 1,
                phase: 0.0,
            },
        ),
        1,
    );
    Ok(vec![
        Segment {
            t_start: TRACKING_SWITCHES[0],
            equilibrium: harmonic_equilibrium(a, b, &zero, m)?,
        },
        Segment {
            t_start: TRACKING_SWITCHES[1],
            equilibrium: harmonic_equilibrium(a, b, &u1, m)?,
        },
        Segment {
            t_start: TRACKING_SWITCHES[2],
            equilibrium: nearest_equilibrium(a, b, &xd, m)?,
        },
    ])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FloquetSummary {
    pub exponents: Vec<ComplexJson>,
    pub multipliers: Vec<ComplexJson>,
    pub steps: usize,
    pub monodromy_delta: f64,
    pub periodicity_defect: f64,
    pub similarity_defect: f64,
    pub eigenvector_condition: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub m: usize,
    pub band: f64,
    pub central: Vec<ComplexJson>,
    /// Largest distance from a central eigenvalue to `λ_p + jωk`.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub report: SweepReport,
    /// Order whose phasor tail is measured.
    pub tail_order: usize,
    /// `max_{|k|>8} ‖P_k‖ / max_k ‖P_k‖` at `tail_order`.
    pub tail_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignSummary {
    pub label: String,
    pub lambda_eigenvalues: Vec<ComplexJson>,
    pub certificate: InvertibilityCertificate,
    pub k_is_real: bool,
    pub k_imag_residue: f64,
    pub algebraic_residual: f64,
    pub galerkin_residual: f64,
    pub differential_residual: f64,
    pub poles: Option<PoleReport>,
    pub multipliers: Option<MultiplierReport>,
    pub z_dynamics: Vec<ZReport>,
    pub decay_rate: Option<f64>,
    pub tracking: Vec<SegmentMetrics>,
    /// `max` over segments of `error_at_end / error_at_start`.
    pub tracking_worst_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransientImprovement {
    /// Mean settling time over the segments, first design.
    pub baseline_settling: Option<f64>,
    /// Same for the design with the assigned `Λ`.
    pub assigned_settling: Option<f64>,
    /// `Σ ‖e‖² dt` over the run, first design.
    pub baseline_error_energy: f64,
    pub assigned_error_energy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterExampleSummary {
    pub status: String,
    pub certificate: InvertibilityCertificate,
    pub observability: GramianReport,
    pub escape: EscapeReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseStudySummary {
    pub status: String,
    pub reading: String,
    pub floquet_exponents: Vec<ComplexJson>,
    pub floquet: FloquetSummary,
    pub harmonic_spectrum: Option<SpectrumSummary>,
    pub controllability: Option<GramianReport>,
    pub sweep: Option<SweepSummary>,
    pub designs: Vec<DesignSummary>,
    pub transient_improvement: Option<TransientImprovement>,
    pub counter_example: CounterExampleSummary,
}

/// Failure of one pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

fn cj(v: &[Complex<f64>]) -> Vec<ComplexJson> {
    v.iter().map(|z| ComplexJson::from_complex(*z)).collect()
}

fn write_file(dir: Option<&Path>, name: &str, f: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
    if let Some(dir) = dir {
        let file = std::fs::File::create(dir.join(name))?;
        let mut w = std::io::BufWriter::new(file);
        f(&mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    Ok(())
}

fn write_json<S: Serialize>(dir: Option<&Path>, name: &str, value: &S) -> Result<()> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Runs the full case study and, when `out_dir` is given, writes
/// `floquet.json`, `floquet_v.csv`, `sweep.json`, `p_phasors_m{m}.csv`,
/// `p_trace_m{m}.csv`, `k_trace_{label}.csv`, `gain_{label}.json`,
/// `tracking_{label}.csv`, `counter_example.json` and `summary.json`.
pub fn run(opts: &RunOptions, out_dir: Option<&Path>) -> std::result::Result<CaseStudySummary, StageError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(Error::from).stage("output")?;
    }
    let (a, b) = system::<f64>(opts.reading);
    let fopts = FloquetOptions {
        steps: opts.floquet_steps,
        ..FloquetOptions::default()
    };
    let clock = Instant::now();
    let fl = factorize_with(&a, fopts).stage("floquet")?;
    let runtime_s = clock.elapsed().as_secs_f64();
    write_json(out_dir, "floquet.json", &fl.to_json()).stage("floquet")?;
    write_file(out_dir, "floquet_v.csv", |w| fl.write_v_csv(w)).stage("floquet")?;
    let floquet = FloquetSummary {
        exponents: cj(&fl.exponents),
        multipliers: cj(&fl.multipliers),
        steps: fl.steps,
        monodromy_delta: fl.monodromy_delta,
        periodicity_defect: fl.periodicity_defect,
        similarity_defect: fl.similarity_defect,
        eigenvector_condition: fl.eigenvector_condition,
        runtime_s,
    };

    let counter_example = counter_example_stage(&a, &b, opts.m, opts.sim_step, out_dir)?;
    if opts.counter_example_only {
        let summary = CaseStudySummary {
            status: counter_example.status.clone(),
            reading: format!("{:?}", opts.reading),
            floquet_exponents: floquet.exponents.clone(),
            floquet,
            harmonic_spectrum: None,
            controllability: None,
            sweep: None,
            designs: Vec::new(),
            transient_improvement: None,
            counter_example,
        };
        write_json(out_dir, "summary.json", &summary).stage("output")?;
        return Ok(summary);
    }

    let h = harmonic_state_operator(&a, opts.m).stage("spectrum")?;
    let central = central_spectrum(&h, opts.m, CENTRAL_KEEP, a.omega()).stage("spectrum")?;
    let kk = opts.m as i64 + 1;
    let predicted = harmonic_spectrum_prediction(&fl, -kk..=kk);
    let max_deviation = central
        .iter()
        .map(|z| predicted.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let harmonic_spectrum = SpectrumSummary {
        m: opts.m,
        band: a.omega() * CENTRAL_KEEP as f64 / 2.0,
        central: cj(&central),
        max_deviation,
    };
    let controllability = controllability_heuristic(&a, &b, opts.m, PERIOD).stage("controllability")?;

    let finest = *opts.sweep_orders.iter().max().unwrap_or(&opts.m);
    let g_sweep = sufficient_g(&b, &fl, finest).stage("sweep")?;
    let lambda_alpha = sufficient_lambda(&fl, opts.alpha);
    let (report, sols) = convergence_sweep(&a, &b, &g_sweep, &lambda_alpha, &opts.sweep_orders).stage("sweep")?;
    write_json(out_dir, "sweep.json", &report).stage("sweep")?;
    for sol in &sols {
        write_file(out_dir, &format!("p_phasors_m{}.csv", sol.m), |w| {
            sol.write_magnitudes_csv(w)
        })
        .stage("sweep")?;
        let rows = (0..=TRACE_SAMPLES).map(|i| {
            let t = PERIOD * i as f64 / TRACE_SAMPLES as f64;
            (t, sol.p.synthesize(t))
        });
        write_file(out_dir, &format!("p_trace_m{}.csv", sol.m), |w| {
            write_matrix_trace(rows, "P", w)
        })
        .stage("sweep")?;
    }
    let tail_order = if opts.sweep_orders.contains(&opts.m) {
        opts.m
    } else {
        finest
    };
    let tail_sol = sols.iter().find(|s| s.m == tail_order).expect("order is in the sweep");
    let sweep = SweepSummary {
        report,
        tail_order,
        tail_ratio: tail_ratio(&tail_sol.p, 8),
    };

    let segments = tracking_segments(&a, &b, opts.m).stage("equilibrium")?;
    let dopts = DesignOptions {
        floquet: fopts,
        ..DesignOptions::default()
    };
    let g = sufficient_g(&b, &fl, opts.m).stage("design")?;
    let mut jobs = vec![(format!("alpha{}", opts.alpha), lambda_alpha.clone())];
    if let Some(l) = &opts.lambda {
        jobs.push(("lambda".to_string(), l.clone()));
    }
    let results: Vec<(DesignSummary, Option<SimulationResult<f64>>)> = jobs
        .par_iter()
        .map(|(label, lambda)| design_stage(label, &a, &b, &g, lambda, &segments, opts, dopts, out_dir))
        .collect::<std::result::Result<_, _>>()?;
    let transient_improvement = match results.as_slice() {
        [(d0, Some(r0)), (d1, Some(r1))] => Some(TransientImprovement {
            baseline_settling: mean_settling(&d0.tracking),
            assigned_settling: mean_settling(&d1.tracking),
            baseline_error_energy: error_energy(r0),
            assigned_error_energy: error_energy(r1),
        }),
        _ => None,
    };
    let summary = CaseStudySummary {
        status: "ok".into(),
        reading: format!("{:?}", opts.reading),
        floquet_exponents: floquet.exponents.clone(),
        floquet,
        harmonic_spectrum: Some(harmonic_spectrum),
        controllability: Some(controllability),
        sweep: Some(sweep),
        designs: results.into_iter().map(|(d, _)| d).collect(),
        transient_improvement,
        counter_example,
    };
    write_json(out_dir, "summary.json", &summary).stage("output")?;
    Ok(summary)
}

/// `max_{|k|>k0} ‖F_k‖_F / max_k ‖F_k‖_F`.
pub fn tail_ratio(f: &PeriodicMatrixFunction<f64>, k0: usize) -> f64 {
    let kk = f.harmonics() as i64;
    let mags: Vec<(i64, f64)> = f
        .phasors()
        .iter()
        .enumerate()
        .map(|(i, p)| (i as i64 - kk, crate::scalar::fro(p)))
        .collect();
    let max = mags.iter().map(|x| x.1).fold(0.0, f64::max);
    let tail = mags
        .iter()
        .filter(|x| x.0.unsigned_abs() as usize > k0)
        .map(|x| x.1)
        .fold(0.0, f64::max);
    if max > 0.0 {
        tail / max
    } else {
        0.0
    }
}

fn mean_settling(m: &[SegmentMetrics]) -> Option<f64> {
    let v: Option<Vec<f64>> = m.iter().map(|s| s.settling_time).collect();
    v.map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64)
}

fn error_energy(r: &SimulationResult<f64>) -> f64 {
    r.e.as_ref()
        .map(|e| e.iter().map(|v| v.norm_squared()).sum::<f64>() * r.step)
        .unwrap_or(0.0)
}

#[allow(clippy::too_many_arguments)]
fn design_stage(
    label: &str,
    a: &PeriodicMatrixFunction<f64>,
    b: &PeriodicMatrixFunction<f64>,
    g: &PeriodicMatrixFunction<f64>,
    lambda: &CMatrix<f64>,
    segments: &[Segment<f64>],
    opts: &RunOptions,
    dopts: DesignOptions,
    out_dir: Option<&Path>,
) -> std::result::Result<(DesignSummary, Option<SimulationResult<f64>>), StageError> {
    let d = design_direct_report(a, b, g, lambda, opts.m, dopts).stage("design")?;
    let mut summary = DesignSummary {
        label: label.to_string(),
        lambda_eigenvalues: cj(&crate::linalg::eigenvalues(lambda).stage("design")?),
        certificate: d.certificate.clone(),
        k_is_real: false,
        k_imag_residue: f64::NAN,
        algebraic_residual: d.solution.algebraic_residual,
        galerkin_residual: d.solution.galerkin_residual,
        differential_residual: d.solution.differential_residual,
        poles: None,
        multipliers: None,
        z_dynamics: Vec::new(),
        decay_rate: None,
        tracking: Vec::new(),
        tracking_worst_ratio: None,
    };
    let Some(gain) = d.gain else {
        return Ok((summary, None));
    };
    summary.k_is_real = gain.is_real();
    summary.k_imag_residue = gain.imag_residue;
    write_json(out_dir, &format!("gain_{label}.json"), &gain.to_json()).stage("design")?;
    write_file(out_dir, &format!("k_trace_{label}.csv"), |w| {
        gain.write_k_csv(TRACE_SAMPLES, GainPath::Pointwise, w)
    })
    .stage("design")?;
    summary.poles = Some(closed_loop_pole_check(&gain, a, b, opts.m, CENTRAL_KEEP).stage("poles")?);
    summary.multipliers = Some(multiplier_check(&gain, a, b, opts.floquet_steps, GainPath::Pointwise).stage("poles")?);
    for x0 in &opts.z_initial_states {
        summary.z_dynamics.push(
            verify_z_dynamics(&gain, a, b, &complex_state(x0), (0.0, Z_HORIZON), opts.sim_step).stage("simulate")?,
        );
    }
    let horizon = DECAY_PERIODS as f64 * PERIOD;
    let regulation = simulate_closed_loop(
        &gain,
        a,
        b,
        &complex_state(&opts.tracking_x0),
        (0.0, horizon),
        opts.sim_step,
        GainPath::Pointwise,
    )
    .stage("simulate")?;
    summary.decay_rate = decay_rate(&regulation, 0.0, DECAY_PERIODS, PERIOD).ok();
    let (track, metrics) = tracking_scenario(
        &gain,
        a,
        b,
        segments,
        &complex_state(&opts.tracking_x0),
        TRACKING_END,
        opts.sim_step,
        GainPath::Pointwise,
    )
    .stage("tracking")?;
    write_file(out_dir, &format!("tracking_{label}.csv"), |w| {
        track.write_csv_every(w, CSV_STRIDE)
    })
    .stage("tracking")?;
    summary.tracking_worst_ratio = metrics
        .iter()
        .map(|s| {
            if s.error_at_start > 0.0 {
                s.error_at_end / s.error_at_start
            } else {
                0.0
            }
        })
        .reduce(f64::max);
    summary.tracking = metrics;
    Ok((summary, Some(track)))
}

fn counter_example_stage(
    a: &PeriodicMatrixFunction<f64>,
    b: &PeriodicMatrixFunction<f64>,
    m: usize,
    step: f64,
    out_dir: Option<&Path>,
) -> std::result::Result<CounterExampleSummary, StageError> {
    let g = counter_example_g::<f64>();
    let lambda = counter_example_lambda::<f64>();
    let d = design_direct_report(a, b, &g, &lambda, m, DesignOptions::default()).stage("counter-example")?;
    let observability = observability_heuristic(&g, &lambda, m, PERIOD).stage("counter-example")?;
    let p0 = d.solution.p.synthesize(0.0);
    let escape = match crate::linalg::inverse(&p0) {
        Ok(p0_inv) => riccati_escape_probe(a, b, &g, &lambda, &p0_inv, step).stage("escape-probe")?,
        Err(_) => EscapeReport {
            escaped: true,
            escape_time: Some(0.0),
            final_norm: f64::INFINITY,
        },
    };
    let summary = CounterExampleSummary {
        status: if d.certificate.invertible {
            "Invertible"
        } else {
            "NotInvertible"
        }
        .into(),
        certificate: d.certificate,
        observability,
        escape,
    };
    write_json(out_dir, "counter_example.json", &summary).stage("counter-example")?;
    let rows = (0..=TRACE_SAMPLES).map(|i| {
        let t = PERIOD * i as f64 / TRACE_SAMPLES as f64;
        (t, d.solution.p.synthesize(t))
    });
    write_file(out_dir, "counter_example_p_trace.csv", |w| {
        write_matrix_trace(rows, "P", w)
    })
    .stage("counter-example")?;
    Ok(summary)
}
