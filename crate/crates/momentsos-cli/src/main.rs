//! Command-line front end: solve moment problems, certify piecewise
//! non-negativity, run the application builders and sweeps, query the grid
//! oracle, and export SDPA files.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use momentsos::apps::{
    self, NewsvendorSpec, RevenueSpec,
};
use momentsos::model::{DiscreteMeasure, MomentProblem, Validation};
use momentsos::oracle;
use momentsos::recovery::{self, RecoveryReport};
use momentsos::sdpa;
use momentsos::solver::{solve, SolveOptions};
use momentsos::sos::{
    self, CertifyOutcome, PiecewiseNonnegCertificate, TOL_PSD, TOL_RES, WITNESS_SEED,
};
use momentsos::support::ProjectedSpectrahedron;
use momentsos::{CompiledPair, PiecewiseSosConvex, Solution, SolveStatus};

const EXIT_SOLVER: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_UNCERTIFIED: u8 = 3;

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure {
            code,
            msg: msg.into(),
        }
    }

    fn input(msg: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_INPUT, msg.to_string())
    }

    fn solver(msg: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_SOLVER, msg.to_string())
    }
}

#[derive(Parser)]
#[command(name = "momentsos", version, about = "Piecewise SOS-convex moment optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Builtin,
    External,
}

#[derive(Args)]
struct SolveFlags {
    /// Interior-point convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Run the Slater and SOS-convexity checks before solving.
    #[arg(long)]
    strict_validate: bool,
    /// Write the recovery report as JSON.
    #[arg(long, value_name = "OUT.json")]
    report: Option<PathBuf>,
    /// Solve with the built-in solver or an external SDPA binary
    /// (set MOMENTSOS_SDPA_SOLVER to its path).
    #[arg(long, value_enum, default_value = "builtin")]
    solver: SolverChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepApp {
    /// Newsvendor cost over the order quantity, first two moments.
    Newsvendor,
    /// Newsvendor with the fourth-moment bound added.
    Newsvendor4,
    /// Revenue over gamma1 with gamma2 = gamma1^2.
    RevenueGamma1,
    /// Revenue over gamma2 at fixed gamma1 = 2.
    RevenueGamma2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Primal,
    Dual,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a moment problem from JSON and recover the optimal measure.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Certify non-negativity of a piecewise SOS-convex function on a support.
    Certify {
        piecewise: PathBuf,
        omega: PathBuf,
        /// PSD tolerance for the certificate SDPs.
        #[arg(long, default_value_t = TOL_PSD)]
        tol: f64,
        /// RNG seed for the witness search on failure.
        #[arg(long, default_value_t = WITNESS_SEED)]
        seed: u64,
        /// Write the certificate bundle as JSON.
        #[arg(long, value_name = "OUT.json")]
        report: Option<PathBuf>,
    },
    /// Re-check a serialized certificate bundle without re-solving.
    Verify { certificate: PathBuf },
    /// Worst-case Newsvendor cost at a given order quantity.
    Newsvendor {
        /// Order quantity.
        #[arg(long)]
        x: f64,
        /// Spec JSON; defaults to the reference instance.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Use the reference instance with the fourth-moment bound.
        #[arg(long)]
        fourth_moment: bool,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Worst-case expected revenue for the customer model.
    Revenue {
        /// Spec JSON; defaults to the reference instance.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Parameter sweep over an application builder, emitting CSV.
    Sweep {
        app: SweepApp,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write the CSV to a file instead of stdout.
        #[arg(long, value_name = "OUT.csv")]
        csv: Option<PathBuf>,
    },
    /// Lower-bound a moment problem on a uniform support grid.
    Oracle {
        problem: PathBuf,
        /// Grid points per dimension.
        #[arg(long, default_value_t = 1001)]
        grid: usize,
        #[arg(long)]
        strict_validate: bool,
    },
    /// Export the compiled SDP in sparse SDPA format.
    ExportSdpa {
        problem: PathBuf,
        out: PathBuf,
        /// Which side of the compiled pair to export.
        #[arg(long, value_enum, default_value = "dual")]
        side: Side,
    },
}

/// On-disk form of a certificate together with the data it certifies.
#[derive(serde::Serialize, serde::Deserialize)]
struct CertificateBundle {
    piecewise: PiecewiseSosConvex,
    omega: ProjectedSpectrahedron,
    certificate: PiecewiseNonnegCertificate,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::input(format!("serializing report: {e}")))?;
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn format_measure(mu: &DiscreteMeasure) -> String {
    let mut out = String::new();
    for a in &mu.atoms {
        let pt = a
            .point
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "  {:.6} @ ({pt})", a.weight);
    }
    out
}

fn validate_problem(problem: &MomentProblem, strict: bool) -> Result<(), Failure> {
    let level = if strict {
        Validation::Strict
    } else {
        Validation::None
    };
    problem.validate(level).map_err(Failure::input)
}

fn solve_pair(problem: &MomentProblem, tol: f64) -> Result<(CompiledPair, Solution), Failure> {
    let pair = momentsos::compile(problem).map_err(Failure::input)?;
    let opts = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let sol = solve(pair.dual(), &opts).map_err(Failure::solver)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::NumericalLimit {
        return Err(Failure::solver(format!(
            "moment program not solved to optimality: {:?}",
            sol.status
        )));
    }
    Ok((pair, sol))
}

fn solve_external_value(problem: &MomentProblem) -> Result<f64, Failure> {
    let pair = momentsos::compile(problem).map_err(Failure::input)?;
    let dir = std::env::temp_dir().join(format!("momentsos-{}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    let value = sdpa::solve_external(pair.dual(), &dir).map_err(Failure::solver)?;
    Ok(0.5 * (value.obj_primal + value.obj_dual))
}

/// Solves, recovers, and prints one moment problem. `derived` maps the
/// moment-program value to the quantity reported to the user.
fn report_solution(
    problem: &MomentProblem,
    flags: &SolveFlags,
    label: &str,
    derived: impl Fn(f64) -> f64,
) -> Result<RecoveryReport, Failure> {
    let (pair, sol) = solve_pair(problem, flags.tol)?;
    let report = recovery::recover(&pair, &sol, recovery::DEFAULT_ATOM_THRESHOLD)
        .map_err(Failure::solver)?;
    println!("{label}: {:.6}", derived(report.sdp_value));
    println!("optimal measure:");
    print!("{}", format_measure(&report.measure));
    println!("certified: {}", report.certified);
    if let Some(path) = &flags.report {
        write_json(path, &report)?;
    }
    if !report.certified {
        return Err(Failure::new(
            EXIT_UNCERTIFIED,
            "recovered measure failed certification",
        ));
    }
    Ok(report)
}

fn cmd_solve(path: &PathBuf, flags: &SolveFlags) -> Result<(), Failure> {
    let problem: MomentProblem = read_json(path)?;
    validate_problem(&problem, flags.strict_validate)?;
    if flags.solver == SolverChoice::External {
        let value = solve_external_value(&problem)?;
        println!("value: {value:.6}");
        return Ok(());
    }
    report_solution(&problem, flags, "value", |v| v)?;
    Ok(())
}

fn cmd_certify(
    piecewise: &PathBuf,
    omega: &PathBuf,
    tol: f64,
    seed: u64,
    report: &Option<PathBuf>,
) -> Result<(), Failure> {
    let g: PiecewiseSosConvex = read_json(piecewise)?;
    let om: ProjectedSpectrahedron = read_json(omega)?;
    if g.num_vars() != om.dim() {
        return Err(Failure::input(format!(
            "function has {} variables, support has {}",
            g.num_vars(),
            om.dim()
        )));
    }
    match sos::certify_piecewise_nonneg(&g, &om, tol) {
        CertifyOutcome::Certified(cert) => {
            println!(
                "certified non-negative (degree {}, {} branches)",
                cert.degree,
                cert.per_k.len()
            );
            if let Some(path) = report {
                let bundle = CertificateBundle {
                    piecewise: g,
                    omega: om,
                    certificate: cert,
                };
                write_json(path, &bundle)?;
            }
            Ok(())
        }
        CertifyOutcome::NotCertified { k, reason, witness } => {
            println!("not certified: branch {k}, {reason:?}");
            let witness = witness.or_else(|| sos::search_witness_with_seed(&g, &om, seed));
            if let Some(w) = witness {
                let pt = w
                    .point
                    .iter()
                    .map(|c| format!("{c:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                println!("witness: g({pt}) = {:.6e}", w.value);
            }
            Err(Failure::new(EXIT_UNCERTIFIED, "certification failed"))
        }
    }
}

fn cmd_verify(path: &PathBuf) -> Result<(), Failure> {
    let bundle: CertificateBundle = read_json(path)?;
    match sos::verify_piecewise_certificate(
        &bundle.certificate,
        &bundle.piecewise,
        &bundle.omega,
        TOL_PSD,
        TOL_RES,
    ) {
        Ok(()) => {
            println!("certificate verifies");
            Ok(())
        }
        Err(msg) => {
            println!("certificate rejected: {msg}");
            Err(Failure::new(EXIT_UNCERTIFIED, "verification failed"))
        }
    }
}

fn load_newsvendor_spec(
    spec: &Option<PathBuf>,
    fourth_moment: bool,
) -> Result<NewsvendorSpec, Failure> {
    let spec = match spec {
        Some(path) => read_json(path)?,
        None if fourth_moment => NewsvendorSpec::reference_first2plus4(),
        None => NewsvendorSpec::reference_first2(),
    };
    spec.validate().map_err(Failure::input)?;
    Ok(spec)
}

fn cmd_newsvendor(
    x: f64,
    spec: &Option<PathBuf>,
    fourth_moment: bool,
    flags: &SolveFlags,
) -> Result<(), Failure> {
    let spec = load_newsvendor_spec(spec, fourth_moment)?;
    let problem = apps::newsvendor_problem(&spec, x).map_err(Failure::input)?;
    validate_problem(&problem, flags.strict_validate)?;
    if flags.solver == SolverChoice::External {
        let value = solve_external_value(&problem)?;
        println!("worst-case cost: {:.6}", spec.cost * x - value);
        return Ok(());
    }
    let cost = spec.cost;
    report_solution(&problem, flags, "worst-case cost", |v| cost * x - v)?;
    Ok(())
}

fn cmd_revenue(spec: &Option<PathBuf>, flags: &SolveFlags) -> Result<(), Failure> {
    let spec: RevenueSpec = match spec {
        Some(path) => read_json(path)?,
        None => RevenueSpec::reference(),
    };
    spec.validate().map_err(Failure::input)?;
    let problem = apps::revenue_problem(&spec).map_err(Failure::input)?;
    validate_problem(&problem, flags.strict_validate)?;
    if flags.solver == SolverChoice::External {
        let value = solve_external_value(&problem)?;
        println!("max expected revenue: {:.6}", -value);
        return Ok(());
    }
    report_solution(&problem, flags, "max expected revenue", |v| -v)?;
    Ok(())
}

fn cmd_sweep(
    app: SweepApp,
    from: Option<f64>,
    to: Option<f64>,
    steps: usize,
    tol: f64,
    csv: &Option<PathBuf>,
) -> Result<(), Failure> {
    if steps < 2 {
        return Err(Failure::input("sweep needs at least 2 steps"));
    }
    let opts = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let rows = match app {
        SweepApp::Newsvendor | SweepApp::Newsvendor4 => {
            let spec = if matches!(app, SweepApp::Newsvendor4) {
                NewsvendorSpec::reference_first2plus4()
            } else {
                NewsvendorSpec::reference_first2()
            };
            let xs = apps::linspace(from.unwrap_or(0.0), to.unwrap_or(10.0), steps);
            apps::newsvendor_sweep(&spec, &xs, &opts)
        }
        SweepApp::RevenueGamma1 => {
            let gs = apps::linspace(from.unwrap_or(0.5), to.unwrap_or(3.0), steps);
            let pairs: Vec<(f64, f64)> = gs.iter().map(|&g| (g, g * g)).collect();
            apps::revenue_sweep(&RevenueSpec::reference(), &pairs, &opts)
        }
        SweepApp::RevenueGamma2 => {
            let gs = apps::linspace(from.unwrap_or(0.5), to.unwrap_or(4.0), steps);
            let pairs: Vec<(f64, f64)> = gs.iter().map(|&g| (2.0, g)).collect();
            let mut rows = apps::revenue_sweep(&RevenueSpec::reference(), &pairs, &opts);
            for (row, &g) in rows.iter_mut().zip(&gs) {
                row.param = g;
            }
            rows
        }
    };
    let text = apps::sweep_csv(&rows);
    match csv {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_oracle(path: &PathBuf, grid: usize, strict: bool) -> Result<(), Failure> {
    let problem: MomentProblem = read_json(path)?;
    validate_problem(&problem, strict)?;
    let (value, measure) = oracle::oracle_value(&problem, grid).map_err(Failure::solver)?;
    println!("grid lower bound ({grid} points per dimension): {value:.6}");
    println!("supporting measure:");
    print!("{}", format_measure(&measure));
    Ok(())
}

fn cmd_export_sdpa(path: &PathBuf, out: &PathBuf, side: Side) -> Result<(), Failure> {
    let problem: MomentProblem = read_json(path)?;
    validate_problem(&problem, false)?;
    let pair = momentsos::compile(&problem).map_err(Failure::input)?;
    let cp = match side {
        Side::Primal => pair.primal(),
        Side::Dual => pair.dual(),
    };
    sdpa::export_sdpa(cp, out).map_err(Failure::input)?;
    println!(
        "wrote {} ({} variables, {} rows)",
        out.display(),
        cp.num_vars(),
        cp.num_rows()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve { problem, flags } => cmd_solve(problem, flags),
        Command::Certify {
            piecewise,
            omega,
            tol,
            seed,
            report,
        } => cmd_certify(piecewise, omega, *tol, *seed, report),
        Command::Verify { certificate } => cmd_verify(certificate),
        Command::Newsvendor {
            x,
            spec,
            fourth_moment,
            flags,
        } => cmd_newsvendor(*x, spec, *fourth_moment, flags),
        Command::Revenue { spec, flags } => cmd_revenue(spec, flags),
        Command::Sweep {
            app,
            from,
            to,
            steps,
            tol,
            csv,
        } => cmd_sweep(*app, *from, *to, *steps, *tol, csv),
        Command::Oracle {
            problem,
            grid,
            strict_validate,
        } => cmd_oracle(problem, *grid, *strict_validate),
        Command::ExportSdpa { problem, out, side } => cmd_export_sdpa(problem, out, *side),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
