//! `ltp-harmonic`: runs each stage of the harmonic pole-placement pipeline on a
//! JSON scenario and writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ltp_harmonic::case_study::{self, RunOptions};
use ltp_harmonic::control::{
    design_direct_report, harmonic_equilibrium, nearest_equilibrium, sufficient_g, sufficient_lambda, DesignOptions,
    GainJson, GainPath, GainSchedule, HarmonicEquilibrium,
};
use ltp_harmonic::floquet::{factorize_with, FloquetFactorization, FloquetOptions};
use ltp_harmonic::operators::{harmonic_state_operator, write_matrix_csv, TruncatedBlockToeplitz};
use ltp_harmonic::scalar::CMatrix;
use ltp_harmonic::serial::{ComplexJson, PeriodicJson};
use ltp_harmonic::signals::PeriodicMatrixFunction;
use ltp_harmonic::sim::{
    complex_state, simulate_closed_loop, simulate_open_loop, tracking_scenario, Event, Segment, SegmentMetrics,
};
use ltp_harmonic::sylvester::{convergence_sweep, solve_truncated};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::{parse_lambda, signal, CliError, CliResult, DesignConfig, ScenarioConfig, StageExt};

#[derive(Parser, Debug)]
#[command(
    name = "ltp-harmonic",
    version,
    about = "Harmonic modeling and periodic pole placement for LTP systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario JSON; defaults to the built-in two-state case study.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Truncation orders, comma separated.
    #[arg(long = "m", value_delimiter = ',', num_args = 1)]
    m: Option<Vec<usize>>,
    /// Sufficient design with `Λ = −J* − αI`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Assigned `Λ`, e.g. `diag(-10,-12)` or `[[-1,0],[0,-2]]`.
    #[arg(long, value_parser = parse_lambda)]
    lambda: Option<CMatrix<f64>>,
    /// RK4 steps per period for the monodromy.
    #[arg(long)]
    steps: Option<usize>,
    /// Seed for randomly drawn initial states.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Phasors of A and B up to the largest order.
    Phasors(Common),
    /// Dense lifts 𝒜_m, ℬ_m and 𝒜_m − 𝒩_m.
    Lift(Common),
    /// Truncated harmonic Sylvester solutions and the convergence sweep.
    Sylvester(Common),
    /// Monodromy, Floquet exponents and the periodic factor V(t).
    Floquet(Common),
    /// Gain schedule K(t) = G(t) P(t)⁻¹ with its invertibility certificate.
    Design(Common),
    /// Open-loop, regulation or tracking simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Gain JSON written by `design`; open loop when absent.
        #[arg(long)]
        gain: Option<PathBuf>,
        /// Evaluate K from its order-m phasors instead of pointwise G P⁻¹.
        #[arg(long)]
        phasor_gain: bool,
    },
    /// Harmonic equilibria of the configured reference segments.
    Equilibrium(Common),
    /// Full case study with every artifact and a summary JSON.
    CaseStudy {
        #[command(flatten)]
        common: Common,
        /// Only the non-invertible counter-example and its escape probe.
        #[arg(long)]
        counter_example: bool,
        /// Use the literal alternating series for the sawtooth entry.
        #[arg(long)]
        alternating_series: bool,
    },
    /// Print the built-in case-study scenario JSON.
    Config,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("ltp-harmonic: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Phasors(c) => phasors(&c),
        Command::Lift(c) => lift(&c),
        Command::Sylvester(c) => sylvester(&c),
        Command::Floquet(c) => floquet(&c).map(|_| ()),
        Command::Design(c) => design(&c),
        Command::Simulate {
            common,
            gain,
            phasor_gain,
        } => simulate(&common, gain.as_deref(), phasor_gain),
        Command::Equilibrium(c) => equilibrium(&c),
        Command::CaseStudy {
            common,
            counter_example,
            alternating_series,
        } => run_case_study(&common, counter_example, alternating_series),
        Command::Config => {
            let text = serde_json::to_string_pretty(&ScenarioConfig::case_study()).map_err(CliError::config)?;
            println!("{text}");
            Ok(())
        }
    }
}

struct Context {
    cfg: ScenarioConfig,
    a: PeriodicMatrixFunction<f64>,
    b: PeriodicMatrixFunction<f64>,
    orders: Vec<usize>,
    out: PathBuf,
}

fn context(c: &Common) -> CliResult<Context> {
    let mut cfg = ScenarioConfig::load(c.config.as_deref())?;
    if let Some(alpha) = c.alpha {
        cfg.design = Some(DesignConfig::Sufficient { alpha });
    }
    if let Some(l) = &c.lambda {
        let g = match &cfg.design {
            Some(DesignConfig::Direct { g, .. }) => g.clone(),
            _ => None,
        };
        cfg.design = Some(DesignConfig::Direct {
            g,
            lambda: ltp_harmonic::serial::matrix_to_json(l),
        });
    }
    if let Some(s) = c.steps {
        if s == 0 {
            return Err(CliError::config("--steps must be positive"));
        }
        cfg.floquet_steps = Some(s);
    }
    cfg.validate()?;
    let orders = c.m.clone().or_else(|| cfg.m.clone()).unwrap_or_else(|| vec![10]);
    let (a, b) = cfg.system()?;
    std::fs::create_dir_all(&c.out).map_err(|e| CliError::config(format!("{}: {e}", c.out.display())))?;
    Ok(Context {
        cfg,
        a,
        b,
        orders,
        out: c.out.clone(),
    })
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::config)?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::config)
}

fn write_with(
    dir: &Path,
    name: &str,
    stage: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> ltp_harmonic::Result<()>,
) -> CliResult<()> {
    let mut w = create(dir, name)?;
    f(&mut w).stage(stage)?;
    w.flush().map_err(CliError::config)
}

fn max_order(orders: &[usize]) -> usize {
    orders.iter().copied().max().unwrap_or(0)
}

fn phasors(c: &Common) -> CliResult<()> {
    let ctx = context(c)?;
    let kk = 2 * max_order(&ctx.orders);
    #[derive(Serialize)]
    struct Out {
        #[serde(rename = "A")]
        a: PeriodicJson,
        #[serde(rename = "B")]
        b: PeriodicJson,
    }
    let out = Out {
        a: PeriodicJson::from_function(&ctx.a.materialize(kk).stage("phasors")?),
        b: PeriodicJson::from_function(&ctx.b.materialize(kk).stage("phasors")?),
    };
    write_json(&ctx.out, "phasors.json", &out)?;
    write_with(&ctx.out, "phasors_A.csv", "phasors", |w| {
        ltp_harmonic::sylvester::write_phasor_magnitudes(&ctx.a.materialize(kk)?, w)
    })?;
    write_with(&ctx.out, "phasors_B.csv", "phasors", |w| {
        ltp_harmonic::sylvester::write_phasor_magnitudes(&ctx.b.materialize(kk)?, w)
    })
}

fn lift(c: &Common) -> CliResult<()> {
    let ctx = context(c)?;
    for &m in &ctx.orders {
        let al = TruncatedBlockToeplitz::lift(&ctx.a, m).stage("lift")?.dense();
        let bl = TruncatedBlockToeplitz::lift(&ctx.b, m).stage("lift")?.dense();
        let h = harmonic_state_operator(&ctx.a, m).stage("lift")?;
        write_with(&ctx.out, &format!("lift_A_m{m}.csv"), "lift", |w| {
            write_matrix_csv(&al, w)
        })?;
        write_with(&ctx.out, &format!("lift_B_m{m}.csv"), "lift", |w| {
            write_matrix_csv(&bl, w)
        })?;
        write_with(&ctx.out, &format!("harmonic_operator_m{m}.csv"), "lift", |w| {
            write_matrix_csv(&h, w)
        })?;
    }
    Ok(())
}

fn floquet(c: &Common) -> CliResult<FloquetFactorization<f64>> {
    let ctx = context(c)?;
    floquet_of(&ctx)
}

fn floquet_options(ctx: &Context) -> FloquetOptions {
    FloquetOptions {
        steps: ctx.cfg.floquet_steps.unwrap_or(FloquetOptions::default().steps),
        ..FloquetOptions::default()
    }
}

fn floquet_of(ctx: &Context) -> CliResult<FloquetFactorization<f64>> {
    let f = factorize_with(&ctx.a, floquet_options(ctx)).stage("floquet")?;
    write_json(&ctx.out, "floquet.json", &f.to_json())?;
    write_with(&ctx.out, "floquet_v.csv", "floquet", |w| f.write_v_csv(w))?;
    Ok(f)
}

/// `G` and `Λ` from the design choice (sufficient with `α = 1` by default).
fn design_pair(
    ctx: &Context,
    m: usize,
    fl: &mut Option<FloquetFactorization<f64>>,
) -> CliResult<(PeriodicMatrixFunction<f64>, CMatrix<f64>)> {
    let design = ctx
        .cfg
        .design
        .clone()
        .unwrap_or(DesignConfig::Sufficient { alpha: 1.0 });
    let mut floq = |ctx: &Context| -> CliResult<FloquetFactorization<f64>> {
        if fl.is_none() {
            *fl = Some(factorize_with(&ctx.a, floquet_options(ctx)).stage("floquet")?);
        }
        Ok(fl.clone().expect("set above"))
    };
    match design {
        DesignConfig::Sufficient { alpha } => {
            let f = floq(ctx)?;
            Ok((
                sufficient_g(&ctx.b, &f, m).stage("design")?,
                sufficient_lambda(&f, alpha),
            ))
        }
        DesignConfig::Direct { g, lambda } => {
            let lambda = ltp_harmonic::serial::matrix_from_json(&lambda).map_err(CliError::config)?;
            let g = match g {
                Some(spec) => signal(&spec)?,
                None => sufficient_g(&ctx.b, &floq(ctx)?, m).stage("design")?,
            };
            if g.rows() != ctx.b.cols() || g.cols() != lambda.nrows() {
                return Err(CliError::config("G must be p x q for a q x q Lambda"));
            }
            Ok((g, lambda))
        }
    }
}

fn sylvester(c: &Common) -> CliResult<()> {
    let ctx = context(c)?;
    let mut orders = ctx.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let mut fl = None;
    let (g, lambda) = design_pair(&ctx, max_order(&orders), &mut fl)?;
    let sols = if orders.len() > 1 {
        let (report, sols) = convergence_sweep(&ctx.a, &ctx.b, &g, &lambda, &orders).stage("sylvester")?;
        write_json(&ctx.out, "sweep.json", &report)?;
        sols
    } else {
        vec![solve_truncated(&ctx.a, &ctx.b, &g, &lambda, orders[0]).stage("sylvester")?]
    };
    for s in &sols {
        write_json(&ctx.out, &format!("sylvester_m{}.json", s.m), &s.to_json())?;
        write_with(&ctx.out, &format!("p_phasors_m{}.csv", s.m), "sylvester", |w| {
            s.write_magnitudes_csv(w)
        })?;
    }
    Ok(())
}

fn design(c: &Common) -> CliResult<()> {
    let ctx = context(c)?;
    let m = max_order(&ctx.orders);
    let mut fl = None;
    let (g, lambda) = design_pair(&ctx, m, &mut fl)?;
    let opts = DesignOptions {
        floquet: floquet_options(&ctx),
        ..DesignOptions::default()
    };
    let d = design_direct_report(&ctx.a, &ctx.b, &g, &lambda, m, opts).stage("design")?;
    write_json(&ctx.out, "certificate.json", &d.certificate)?;
    let Some(gain) = d.gain else {
        return Err(CliError::numerical(
            "design",
            format!(
                "P(t) is not invertible (min |det P| = {:e} at t = {}, threshold {:e})",
                d.certificate.min_abs_det, d.certificate.argmin_t, d.certificate.threshold
            ),
        ));
    };
    write_json(&ctx.out, "gain.json", &gain.to_json())?;
    write_with(&ctx.out, "k_trace.csv", "design", |w| {
        gain.write_k_csv(case_study::TRACE_SAMPLES, GainPath::Pointwise, w)
    })
}

fn segments(ctx: &Context, m: usize) -> CliResult<Vec<Segment<f64>>> {
    let Some(sim) = &ctx.cfg.simulation else {
        return Ok(Vec::new());
    };
    sim.segments
        .iter()
        .map(|s| {
            let eq = match (&s.u_ref, &s.x_desired) {
                (Some(u), _) => harmonic_equilibrium(&ctx.a, &ctx.b, &signal(u)?, m).stage("equilibrium")?,
                (None, Some(x)) => nearest_equilibrium(&ctx.a, &ctx.b, &signal(x)?, m).stage("equilibrium")?,
                (None, None) => unreachable!("validated"),
            };
            Ok(Segment {
                t_start: s.t_start,
                equilibrium: eq,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct EquilibriumJson {
    t_start: f64,
    m: usize,
    x_phasors: Vec<ComplexJson>,
    u_phasors: Vec<ComplexJson>,
    residual: f64,
    min_singular_value: f64,
    distance: Option<f64>,
    rank_deficient: bool,
}

fn equilibrium_json(t_start: f64, e: &HarmonicEquilibrium<f64>) -> EquilibriumJson {
    let cj = |v: &nalgebra::DVector<nalgebra::Complex<f64>>| v.iter().map(|z| ComplexJson::from_complex(*z)).collect();
    EquilibriumJson {
        t_start,
        m: e.m,
        x_phasors: cj(&e.x_phasors),
        u_phasors: cj(&e.u_phasors),
        residual: e.residual,
        min_singular_value: e.min_singular_value,
        distance: e.distance,
        rank_deficient: e.rank_deficient,
    }
}

fn equilibrium(c: &Common) -> CliResult<()> {
    let ctx = context(c)?;
    let m = max_order(&ctx.orders);
    let segs = segments(&ctx, m)?;
    if segs.is_empty() {
        return Err(CliError::config("no reference segments in simulation.segments"));
    }
    let out: Vec<EquilibriumJson> = segs
        .iter()
        .map(|s| equilibrium_json(s.t_start, &s.equilibrium))
        .collect();
    write_json(&ctx.out, "equilibria.json", &out)?;
    for (i, s) in segs.iter().enumerate() {
        let n = case_study::TRACE_SAMPLES;
        let period = ctx.a.period();
        let rows = (0..=n).map(|j| {
            let t = period * j as f64 / n as f64;
            let x = s.equilibrium.x_ref.synthesize(t);
            let u = s.equilibrium.u_ref.synthesize(t);
            let mut v = CMatrix::zeros(x.nrows() + u.nrows(), 1);
            v.view_mut((0, 0), (x.nrows(), 1)).copy_from(&x);
            v.view_mut((x.nrows(), 0), (u.nrows(), 1)).copy_from(&u);
            (t, v)
        });
        write_with(&ctx.out, &format!("equilibrium_{i}.csv"), "equilibrium", |w| {
            ltp_harmonic::floquet::write_matrix_trace(rows, "XU", w)
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationJson {
    x0: Vec<f64>,
    step: f64,
    t_end: f64,
    closed_loop: bool,
    events: Vec<Event>,
    segments: Vec<SegmentMetrics>,
    final_norm: f64,
    state_imag_residue: f64,
}

fn draw_x0(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn simulate(c: &Common, gain_path: Option<&Path>, phasor_gain: bool) -> CliResult<()> {
    let ctx = context(c)?;
    let sim = ctx
        .cfg
        .simulation
        .clone()
        .ok_or_else(|| CliError::config("simulate needs a simulation section"))?;
    let x0 = sim.x0.clone().unwrap_or_else(|| draw_x0(ctx.a.rows(), c.seed));
    let x0c = complex_state(&x0);
    let path = if phasor_gain {
        GainPath::Phasors
    } else {
        GainPath::Pointwise
    };
    let (res, metrics) = match gain_path {
        None => (
            simulate_open_loop(&ctx.a, &ctx.b, &x0c, (0.0, sim.t_end), sim.step).stage("simulate")?,
            Vec::new(),
        ),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            let gj: GainJson =
                serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            let gain = GainSchedule::<f64>::from_json(&gj).map_err(CliError::config)?;
            if gain.p.rows() != ctx.a.rows() || gain.k.cols() != ctx.a.rows() || gain.period != ctx.a.period() {
                return Err(CliError::config("gain does not match the system"));
            }
            let segs = segments(&ctx, gain.m)?;
            if segs.is_empty() {
                (
                    simulate_closed_loop(&gain, &ctx.a, &ctx.b, &x0c, (0.0, sim.t_end), sim.step, path)
                        .stage("simulate")?,
                    Vec::new(),
                )
            } else {
                let t0 = segs[0].t_start;
                if t0 != 0.0 {
                    return Err(CliError::config("the first segment must start at t = 0"));
                }
                tracking_scenario(&gain, &ctx.a, &ctx.b, &segs, &x0c, sim.t_end, sim.step, path).stage("simulate")?
            }
        }
    };
    write_with(&ctx.out, "simulation.csv", "simulate", |w| res.write_csv(w))?;
    let summary = SimulationJson {
        x0,
        step: sim.step,
        t_end: sim.t_end,
        closed_loop: gain_path.is_some(),
        events: res.events.clone(),
        segments: metrics,
        final_norm: res.x.last().map(|v| v.norm()).unwrap_or(0.0),
        state_imag_residue: res.imag_residue(),
    };
    write_json(&ctx.out, "simulation.json", &summary)
}

fn run_case_study(c: &Common, counter_example: bool, alternating: bool) -> CliResult<()> {
    if c.config.is_some() {
        return Err(CliError::config(
            "case-study uses the built-in system; --config is not accepted",
        ));
    }
    let mut opts = RunOptions {
        counter_example_only: counter_example,
        ..RunOptions::default()
    };
    if alternating {
        opts.reading = case_study::Reading::AlternatingSeries;
    }
    if let Some(ms) = &c.m {
        let mut ms = ms.clone();
        ms.sort_unstable();
        ms.dedup();
        opts.m = max_order(&ms);
        ms.push(opts.m + 2);
        opts.sweep_orders = ms;
    }
    if let Some(a) = c.alpha {
        opts.alpha = a;
    }
    if let Some(l) = &c.lambda {
        if l.nrows() != 2 {
            return Err(CliError::config("Lambda must be 2x2 for the case study"));
        }
        opts.lambda = Some(l.clone());
    }
    if let Some(s) = c.steps {
        if s == 0 {
            return Err(CliError::config("--steps must be positive"));
        }
        opts.floquet_steps = s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    opts.z_initial_states = (0..5)
        .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let summary = case_study::run(&opts, Some(&c.out)).map_err(|e| match e.error {
        ltp_harmonic::Error::Io(_) => CliError::config(e),
        _ => CliError::numerical(e.stage, e.error),
    })?;
    println!(
        "status {}; Floquet exponents {}",
        summary.status,
        summary
            .floquet_exponents
            .iter()
            .map(|z| format!("{:.4}{:+.4}j", z.re, z.im))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if let Some(t) = summary.counter_example.escape.escape_time {
        println!(
            "counter-example: {}; escape at t = {t:.4}",
            summary.counter_example.status
        );
    }
    Ok(())
}
