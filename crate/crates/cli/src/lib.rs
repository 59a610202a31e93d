//! Command-line front end: argument parsing and the subcommand drivers.
//!
//! Every subcommand writes its data files into the output directory and a JSON
//! report both to `<command>.json` there and to stdout. The process exits with
//! 0 when every requested computation converged and 2 otherwise.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qbrachy_core::ds_baseline::{self, Comparison};
use qbrachy_core::dynamics::{Integrator, InvariantReport, Trajectory, XiGrid};
use qbrachy_core::export::fmt_full;
use qbrachy_core::phases::{derive_phases, to_physical, PhaseSet, PhysicalPulses};
use qbrachy_core::propagator::{
    self, boundary_check, check_f_evolution, default_steps, fidelity_from_moduli, fidelity_ghz,
    propagate, BoundaryReport, ComplexState, FEvolutionReport,
};
use qbrachy_core::robustness::{self, SweepCell};
use qbrachy_core::shooting::{
    verify_xi_max, Method, ScanPoint, Shooter, ShootingReport, ShootingResult, XiMaxRow,
    CONVERGENCE_THRESHOLD, DEFAULT_MAX_ITER, DEFAULT_XI_MAX,
};

/// Exit status for runs in which some computation did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qbrachy", version, about = "Time-optimal W-to-GHZ conversion by quantum brachistochrone")]
pub struct Cli {
    /// Output directory.
    #[arg(long, env = "QBRACHY_OUT", default_value = "out", global = true)]
    pub out: PathBuf,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the optimal pulses and write the report, pulse, trajectory and fidelity files.
    Solve {
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        phases: PhaseArgs,
    },
    /// Map the error landscape over the initial-value disc.
    Scan {
        #[command(flatten)]
        solver: SolverArgs,
        /// Grid resolution; samples u = i/n and phi_u = 2 pi j/n for i, j = 0..=n.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Also run a local minimization from every sample and record its basin.
        #[arg(long)]
        minimize: bool,
    },
    /// Recompute the optimum for several upper bounds of the scaled time window.
    VerifyXimax {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 2.5, 3.0, 3.5, 5.0, 10.0])]
        xi_values: Vec<f64>,
    },
    /// Compare the optimal time with trapezoidal dynamical-symmetry pulses of equal energy.
    DsCompare {
        #[command(flatten)]
        solver: SolverArgs,
        /// Rise fractions; `1/3` style fractions are accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_fraction, allow_negative_numbers = true, default_values_t = vec![0.0, 1.0 / 3.0])]
        tau: Vec<f64>,
    },
    /// Infidelity of distorted optimal pulses.
    Robustness {
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        phases: PhaseArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
        pulses: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = robustness::DEFAULT_KAPPAS.to_vec())]
        kappas: Vec<u32>,
        /// Distortion timescales as fractions of the conversion time.
        #[arg(long, value_delimiter = ',', default_values_t = robustness::default_fractions())]
        fractions: Vec<f64>,
    },
    /// Solve and run the invariant and oracle checks.
    Selftest {
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Upper bound of the scaled time window.
    #[arg(long, default_value_t = DEFAULT_XI_MAX, allow_negative_numbers = true)]
    pub xi_max: f64,
    /// RK4 step in scaled time.
    #[arg(long, default_value_t = qbrachy_core::dynamics::DEFAULT_STEP)]
    pub step: f64,
    /// Integrate with the adaptive Dormand-Prince pair instead of fixed-step RK4.
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long, default_value_t = Method::NelderMead, value_parser = parse_method)]
    pub method: Method,
    /// Multistart grid size per axis.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Error below which a conversion counts as achieved.
    #[arg(long, default_value_t = CONVERGENCE_THRESHOLD)]
    pub threshold: f64,
    /// Total pulse energy E; times are reported in units of hbar/E.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub energy: f64,
}

impl Default for SolverArgs {
    fn default() -> Self {
        Self {
            xi_max: DEFAULT_XI_MAX,
            step: qbrachy_core::dynamics::DEFAULT_STEP,
            adaptive: false,
            method: Method::NelderMead,
            starts: 8,
            max_iter: DEFAULT_MAX_ITER,
            threshold: CONVERGENCE_THRESHOLD,
            energy: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi3: f64,
    /// Relative phase of the GHZ target.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub varphi: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_w: f64,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: qbrachy_core::QbError| e.to_string())
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        return Ok(a / b);
    }
    s.parse().map_err(|e| format!("{e}"))
}

impl SolverArgs {
    pub fn shooter(&self) -> Result<Shooter> {
        if self.starts == 0 {
            bail!("--starts must be positive");
        }
        if !(self.energy > 0.0 && self.energy.is_finite()) {
            bail!("--energy must be positive");
        }
        XiGrid::with_step(self.xi_max, self.step).context("invalid --xi-max/--step")?;
        Ok(Shooter {
            xi_max: self.xi_max,
            step: self.step,
            integrator: if self.adaptive {
                Integrator::adaptive()
            } else {
                Integrator::Rk4
            },
            max_iter: self.max_iter,
            threshold: self.threshold,
            ..Shooter::default()
        })
    }
}

impl PhaseArgs {
    pub fn phase_set(&self) -> Result<PhaseSet> {
        Ok(derive_phases(self.phi1, self.phi3, self.varphi, self.phi_w)?)
    }
}

/// Result of a command: the JSON report and whether everything converged.
pub struct Outcome {
    pub report: serde_json::Value,
    pub converged: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            0
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

/// Runs the parsed command inside a thread pool sized by `--jobs`.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let out = OutDir::create(&cli.out)?;
    let (name, outcome) = match &cli.command {
        Command::Solve { solver, phases } => ("solve", cmd_solve(&out, solver, phases)?),
        Command::Scan { solver, n, minimize } => ("scan", cmd_scan(&out, cli.format, solver, *n, *minimize)?),
        Command::VerifyXimax { solver, xi_values } => (
            "verify_ximax",
            cmd_verify_ximax(&out, cli.format, solver, xi_values)?,
        ),
        Command::DsCompare { solver, tau } => ("ds_compare", cmd_ds_compare(&out, cli.format, solver, tau)?),
        Command::Robustness {
            solver,
            phases,
            pulses,
            kappas,
            fractions,
        } => (
            "robustness",
            cmd_robustness(&out, cli.format, solver, phases, pulses, kappas, fractions)?,
        ),
        Command::Selftest { solver } => ("selftest", cmd_selftest(&out, solver)?),
    };
    out.write(&format!("{name}.json"), |w| write_json(w, &outcome.report))?;
    Ok(outcome)
}

struct OutDir(PathBuf);

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    fn write<F>(&self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.0.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn write_json<W: Write, T: Serialize + ?Sized>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

/// The optimal solution together with its trajectory.
pub struct Solution {
    pub shooter: Shooter,
    pub result: ShootingResult,
    pub traj: Trajectory,
}

pub fn find_solution(args: &SolverArgs) -> Result<Solution> {
    let shooter = args.shooter()?;
    let result = shooter.solve(args.starts, args.method)?;
    let traj = shooter.trajectory(result.x_star)?;
    Ok(Solution {
        shooter,
        result,
        traj,
    })
}

#[derive(Serialize)]
struct Diagnostic {
    status: &'static str,
    reason: String,
    best: ShootingReport,
    iterations: usize,
    evaluations: usize,
    threshold: f64,
}

fn diagnostic(sol: &Solution, args: &SolverArgs) -> Outcome {
    let report = serde_json::to_value(Diagnostic {
        status: "not_converged",
        reason: format!(
            "no start reached D < {} within xi_max = {}",
            args.threshold, args.xi_max
        ),
        best: sol.result.report(args.energy),
        iterations: sol.result.iterations,
        evaluations: sol.result.evaluations,
        threshold: args.threshold,
    })
    .expect("serializable");
    Outcome {
        report,
        converged: false,
    }
}

#[derive(Serialize)]
struct SolveReport {
    status: &'static str,
    #[serde(flatten)]
    result: ShootingReport,
    iterations: usize,
    evaluations: usize,
    energy: f64,
    lambda_wr0: f64,
    phases: PhaseSet,
    /// GHZ fidelity at the conversion time from the reduced moduli.
    final_fidelity: f64,
    /// Same, from full complex propagation of the exported pulses.
    propagated_fidelity: f64,
    boundary: BoundaryReport,
    invariants: InvariantReport,
    xi_max: f64,
    step: f64,
    starts: usize,
}

fn cmd_solve(out: &OutDir, args: &SolverArgs, phase_args: &PhaseArgs) -> Result<Outcome> {
    let phases = phase_args.phase_set()?;
    let sol = find_solution(args)?;
    if !sol.result.converged {
        return Ok(diagnostic(&sol, args));
    }
    let pulses = to_physical(&sol.traj, sol.result.x_star, sol.result.xi_qb, &phases, args.energy)?;
    let lambda = pulses.lambda_wr0;

    out.write("pulses.csv", |w| pulses.write_csv(w))?;
    out.write("trajectory.csv", |w| sol.traj.write_csv(w))?;
    let rows = reduced_rows(&sol.traj, &pulses)?;
    out.write("fidelity.csv", |w| {
        propagator::write_fidelity_csv(
            w,
            rows.iter().map(|(t, m)| (*t, fidelity_from_moduli(m[0], m[3]))),
        )
    })?;
    out.write("state_components.csv", |w| {
        propagator::write_components_csv(w, rows.iter().copied())
    })?;

    let end = sol.traj.interpolate(sol.result.xi_qb)?;
    let run = propagate(
        ComplexState::w_state(phases.phi_w),
        &pulses,
        pulses.t_qb,
        default_steps(&pulses),
    )?;
    let report = SolveReport {
        status: "converged",
        result: sol.result.report(args.energy),
        iterations: sol.result.iterations,
        evaluations: sol.result.evaluations,
        energy: args.energy,
        lambda_wr0: lambda,
        phases: phases.reduced(),
        final_fidelity: fidelity_from_moduli(end.psi_g, end.psi_r),
        propagated_fidelity: fidelity_ghz(run.last(), phases.varphi),
        boundary: boundary_check(&sol.traj, sol.result.xi_qb, &phases, lambda)?,
        invariants: sol.traj.check_invariants(sol.result.xi_qb),
        xi_max: args.xi_max,
        step: args.step,
        starts: args.starts,
    };
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        converged: true,
    })
}

/// Reduced moduli at the pulse time nodes.
fn reduced_rows(traj: &Trajectory, pulses: &PhysicalPulses) -> Result<Vec<(f64, [f64; 4])>> {
    pulses
        .t
        .iter()
        .map(|&t| Ok((t, traj.interpolate(t * pulses.lambda_wr0)?.amplitudes())))
        .collect()
}

#[derive(Serialize)]
struct ScanReport {
    status: &'static str,
    n: usize,
    xi_max: f64,
    samples: usize,
    argmin: ScanPoint,
    basins_converged: Option<usize>,
    table: String,
}

fn cmd_scan(out: &OutDir, format: Format, args: &SolverArgs, n: usize, minimize: bool) -> Result<Outcome> {
    let shooter = args.shooter()?;
    let map = shooter.grid_scan(n, minimize.then_some(args.method))?;
    let table = match format {
        Format::Csv => {
            out.write("scan.csv", |w| map.write_csv(w))?;
            if minimize {
                out.write("basins.csv", |w| map.write_basins_csv(w))?;
            }
            "scan.csv"
        }
        Format::Json => {
            out.write("scan_table.json", |w| write_json(w, &map))?;
            "scan_table.json"
        }
    };
    let report = ScanReport {
        status: "ok",
        n,
        xi_max: args.xi_max,
        samples: map.points.len(),
        argmin: *map.argmin(),
        basins_converged: minimize.then(|| {
            map.points
                .iter()
                .filter(|p| p.basin.is_some_and(|b| b.converged))
                .count()
        }),
        table: table.into(),
    };
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        converged: true,
    })
}

#[derive(Serialize)]
struct XiMaxReport<'a> {
    status: &'static str,
    /// Scaled conversion time shared by every window that admits a conversion.
    xi_qb: Option<f64>,
    rows: &'a [XiMaxRow],
}

fn cmd_verify_ximax(out: &OutDir, format: Format, args: &SolverArgs, xi_values: &[f64]) -> Result<Outcome> {
    let shooter = args.shooter()?;
    let rows = verify_xi_max(&shooter, xi_values, args.starts, args.method)?;
    match format {
        Format::Csv => out.write("verify_ximax.csv", |w| {
            writeln!(w, "xi_max,best_D,xi,u,phi_u,converged")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    fmt_full(r.xi_max),
                    fmt_full(r.best_d),
                    fmt_full(r.xi),
                    fmt_full(r.x.u),
                    fmt_full(r.x.phi_u),
                    u8::from(r.converged)
                )?;
            }
            Ok(())
        })?,
        Format::Json => out.write("verify_ximax_table.json", |w| write_json(w, &rows))?,
    }
    let xi_qb = rows.iter().filter(|r| r.converged).map(|r| r.xi).reduce(f64::min);
    let report = XiMaxReport {
        status: "ok",
        xi_qb,
        rows: &rows,
    };
    // Windows too short for a conversion are an expected outcome, not a failure.
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        converged: xi_qb.is_some(),
    })
}

#[derive(Serialize)]
struct DsReport<'a> {
    status: &'static str,
    energy: f64,
    t_qb: f64,
    rows: &'a [Comparison],
}

fn cmd_ds_compare(out: &OutDir, format: Format, args: &SolverArgs, taus: &[f64]) -> Result<Outcome> {
    let sol = find_solution(args)?;
    if !sol.result.converged {
        return Ok(diagnostic(&sol, args));
    }
    let t_qb = sol.result.t_qb(args.energy);
    let rows = ds_baseline::compare(taus, t_qb, args.energy)?;
    match format {
        Format::Csv => out.write("ds_compare.csv", |w| {
            writeln!(w, "tau,t_ds,t_qb,ratio")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_full(r.tau),
                    fmt_full(r.t_ds),
                    fmt_full(r.t_qb),
                    fmt_full(r.ratio)
                )?;
            }
            Ok(())
        })?,
        Format::Json => out.write("ds_compare_table.json", |w| write_json(w, &rows))?,
    }
    let report = DsReport {
        status: "ok",
        energy: args.energy,
        t_qb,
        rows: &rows,
    };
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        converged: true,
    })
}

#[derive(Serialize)]
struct RobustnessReport {
    status: &'static str,
    t_qb: f64,
    cells: usize,
    failed_cells: usize,
    clamped_cells: usize,
    max_infidelity: f64,
}

fn cmd_robustness(
    out: &OutDir,
    format: Format,
    args: &SolverArgs,
    phase_args: &PhaseArgs,
    indices: &[usize],
    kappas: &[u32],
    fractions: &[f64],
) -> Result<Outcome> {
    let phases = phase_args.phase_set()?;
    let sol = find_solution(args)?;
    if !sol.result.converged {
        return Ok(diagnostic(&sol, args));
    }
    let pulses = to_physical(&sol.traj, sol.result.x_star, sol.result.xi_qb, &phases, args.energy)?;
    let cells = robustness::infidelity_sweep(&pulses, &phases, indices, kappas, fractions, default_steps(&pulses));
    match format {
        Format::Csv => out.write("robustness.csv", |w| robustness::write_sweep_csv(w, &cells))?,
        Format::Json => out.write("robustness_table.json", |w| write_json(w, &cells))?,
    }
    let failed: Vec<&SweepCell> = cells.iter().filter(|c| c.error.is_some()).collect();
    let report = RobustnessReport {
        status: if failed.is_empty() { "ok" } else { "partial" },
        t_qb: pulses.t_qb,
        cells: cells.len(),
        failed_cells: failed.len(),
        clamped_cells: cells.iter().filter(|c| c.clamped).count(),
        max_infidelity: cells
            .iter()
            .filter_map(|c| c.infidelity)
            .fold(0.0, f64::max),
    };
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        converged: failed.is_empty(),
    })
}

/// One line of the self-test: a measured value and the bound it must respect.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `value ≤ limit` when true, `value ≥ limit` otherwise.
    pub upper: bool,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            upper: true,
            pass: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            upper: false,
            pass: value >= limit,
        }
    }
}

/// Invariant and oracle checks on a converged solution.
pub fn self_checks(sol: &Solution, energy: f64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let r = &sol.result;
    checks.push(Check::at_most("error D", r.d_error, CONVERGENCE_THRESHOLD));

    let inv = sol.traj.check_invariants(r.xi_qb);
    checks.push(Check::at_most("pulse power drift", inv.pulse_power_drift, 1e-8));
    checks.push(Check::at_most("costate power drift", inv.costate_power_drift, 1e-8));
    checks.push(Check::at_most("norm drift", inv.norm_drift, 1e-8));

    let grid = sol.shooter.grid()?;
    let fine = XiGrid::with_step(grid.xi_max(), 0.5 * grid.step())?;
    let a = sol.traj.last().to_array();
    let b = qbrachy_core::integrate(r.x_star, &fine).last().to_array();
    let halving = a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("step halving change", halving, 1e-6));

    for &varphi in &[0.0, PI / 3.0, PI] {
        for &(p1, p3) in &[(0.0, 0.0), (0.7, -1.9)] {
            let phases = derive_phases(p1, p3, varphi, 0.0)?;
            let tag = format!("varphi={varphi:.4} phi1={p1} phi3={p3}");
            let pulses = to_physical(&sol.traj, r.x_star, r.xi_qb, &phases, energy)?;
            let run = propagate(ComplexState::w_state(phases.phi_w), &pulses, pulses.t_qb, default_steps(&pulses))?;
            let mut worst: f64 = 0.0;
            for (t, st) in run.t.iter().zip(&run.states) {
                let m = sol.traj.interpolate(t * pulses.lambda_wr0)?.amplitudes();
                for (x, y) in st.moduli().iter().zip(m) {
                    worst = worst.max((x - y.abs()).abs());
                }
            }
            checks.push(Check::at_most(format!("oracle moduli ({tag})"), worst, 1e-6));
            checks.push(Check::at_least(
                format!("propagated fidelity ({tag})"),
                fidelity_ghz(run.last(), varphi),
                0.999,
            ));
            checks.push(Check::at_most(format!("propagation norm drift ({tag})"), run.max_norm_drift(), 1e-8));

            let f: FEvolutionReport = check_f_evolution(&sol.traj, &phases);
            checks.push(Check::at_most(format!("F residual ({tag})"), f.max_residual, 1e-4));
            checks.push(Check::at_most(format!("Tr F^2 drift ({tag})"), f.trace_f2_drift, 1e-6));
            checks.push(Check::at_most(format!("Tr F^3 drift ({tag})"), f.trace_f3_drift, 1e-6));
            checks.push(Check::at_most(format!("F hermiticity ({tag})"), f.max_hermiticity_error, 1e-12));
        }
    }

    let phases = PhaseSet::default();
    let pulses = to_physical(&sol.traj, r.x_star, r.xi_qb, &phases, energy)?;
    let b = boundary_check(&sol.traj, r.xi_qb, &phases, pulses.lambda_wr0)?;
    checks.push(Check::at_most("|Omega3(0)|", b.omega3_start, 1e-3));
    checks.push(Check::at_most("|Omega2(T)|", b.omega2_end, 1e-3));
    checks.push(Check::at_most("| |lambda_Wr(T)| - |Omega1(T)| |", b.wr_minus_omega1_end.abs(), 1e-3));
    checks.push(Check::at_most("| |lambda_gW'(T)| - |Omega3(T)| |", b.gwp_minus_omega3_end.abs(), 1e-3));
    checks.push(Check::at_most(
        "pulse energy error",
        (pulses.energy_trapezoid() / energy - 1.0).abs(),
        1e-4,
    ));
    Ok(checks)
}

#[derive(Serialize)]
struct SelftestReport {
    status: &'static str,
    passed: usize,
    failed: usize,
    checks: Vec<Check>,
}

fn cmd_selftest(out: &OutDir, args: &SolverArgs) -> Result<Outcome> {
    let sol = find_solution(args)?;
    if !sol.result.converged {
        return Ok(diagnostic(&sol, args));
    }
    let checks = self_checks(&sol, args.energy)?;
    out.write("selftest.txt", |w| {
        for c in &checks {
            let op = if c.upper { "<=" } else { ">=" };
            writeln!(
                w,
                "{} {}: {:.3e} {op} {:.1e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.limit
            )?;
        }
        Ok(())
    })?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = SelftestReport {
        status: if failed == 0 { "ok" } else { "failed" },
        passed: checks.len() - failed,
        failed,
        checks,
    };
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        converged: failed == 0,
    })
}
