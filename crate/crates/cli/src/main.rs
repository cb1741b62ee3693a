//! `junction`: validate, solve and study problem files from the command line.
//!
//! Exit codes: 0 success, 1 solver failure, 2 a FAIL verdict, 3 I/O or
//! schema errors. A problem argument is a JSON path or `builtin:<name>`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use junction_pde::analysis::{run_estimates, EstimateOptions};
use junction_pde::convergence::{run_convergence, Ladder, LadderAxis, OrderVerdict, Reference};
use junction_pde::export::{export_elliptic, export_solution, ExportFormat};
use junction_pde::model::{validate_assumptions, AssumptionFamily, SamplingPlan};
use junction_pde::problem_file::{load_problem_file, LoadedProblem};
use junction_pde::rothe::{solve_parabolic, truncation_study, RotheConfig, TruncationConfig};
use junction_pde::shooting::{solve_elliptic_junction, ShootingOptions};
use junction_pde::JunctionGrid;

/// Stdout writes that tolerate a closed pipe (`junction ... | head`).
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! emit_raw {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "junction", version, about = "Quasilinear parabolic problems on star junctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the structural assumptions of a problem.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Family::Parabolic)]
        family: Family,
        /// Seed of the sampling generator.
        #[arg(long, default_value_t = SamplingPlan::default().seed)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Solve the stationary junction problem (time frozen at 0).
    SolveElliptic {
        file: PathBuf,
        #[arg(long, default_value_t = 401)]
        nodes: usize,
        #[arg(long, default_value_t = ShootingOptions::default().theta_tol)]
        theta_tol: f64,
        #[arg(long, default_value_t = ShootingOptions::default().f_tol)]
        f_tol: f64,
        #[command(flatten)]
        export: Export,
        #[command(flatten)]
        output: Output,
    },
    /// Solve the time-dependent problem with implicit steps.
    SolveParabolic {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value_t = 201)]
        nodes: usize,
        #[command(flatten)]
        export: Export,
        #[command(flatten)]
        output: Output,
    },
    /// Time-difference, barrier, interpolation and n-uniformity monitors.
    Estimates {
        file: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        nodes: usize,
        /// Step counts for the n-uniformity monitors (default: n, 2n, 4n).
        #[arg(long, value_delimiter = ',')]
        ladder: Vec<usize>,
        #[arg(long, default_value_t = 0.2)]
        margin: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Fit a convergence order over a ladder of resolutions.
    Convergence {
        file: PathBuf,
        /// `steps:16,32,64,128` or `nodes:51,101,201,401`.
        #[arg(long)]
        ladder: LadderArg,
        /// Resolution on the other axis.
        #[arg(long)]
        fixed: usize,
        #[arg(long, value_enum, default_value_t = ReferenceArg::ClosedForm)]
        reference: ReferenceArg,
        #[command(flatten)]
        output: Output,
    },
    /// Compare solutions on growing truncations of the edges.
    TruncateStudy {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<f64>,
        #[arg(long)]
        window: f64,
        #[arg(long, default_value_t = 0.02)]
        spacing: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Export {
    /// Write the solution table here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: FormatArg,
}

#[derive(Clone, Copy)]
struct FormatArg(ExportFormat);

impl FromStr for FormatArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(FormatArg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Parabolic,
    Elliptic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    /// Exact solution from the file's `reference` section.
    ClosedForm,
    /// The finest rung of the ladder.
    #[value(name = "self")]
    SelfReference,
}

#[derive(Clone)]
struct LadderArg {
    axis: LadderAxis,
    values: Vec<usize>,
}

impl FromStr for LadderArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (axis, list) = s.split_once(':').ok_or("expected `steps:...` or `nodes:...`")?;
        let axis = match axis {
            "steps" | "n" => LadderAxis::Steps,
            "nodes" | "N" => LadderAxis::Nodes,
            other => return Err(format!("unknown ladder axis `{other}`")),
        };
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<_, _>>()?;
        Ok(Self { axis, values })
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 1,
            CliError::Input(_) => 3,
        }
    }
}

/// Outcome of a command that ran to completion.
enum Status {
    Success,
    Failed,
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn solver(e: impl std::fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn load(path: &Path) -> Result<LoadedProblem<f64>, CliError> {
    load_problem_file(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn print_json(value: serde_json::Value) {
    emit!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
}

fn grid(problem: &LoadedProblem<f64>, nodes: usize) -> Result<JunctionGrid<f64>, CliError> {
    JunctionGrid::uniform(problem.spec.junction().clone(), nodes).map_err(input)
}

fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Validate {
            file,
            family,
            seed,
            output,
        } => {
            let problem = load(&file)?;
            let plan = SamplingPlan {
                seed,
                ..SamplingPlan::default()
            };
            let family = match family {
                Family::Parabolic => AssumptionFamily::Parabolic,
                Family::Elliptic => AssumptionFamily::Elliptic,
            };
            let report = validate_assumptions(&problem.spec, &plan, family);
            if output.json {
                print_json(serde_json::to_value(&report).expect("serializable"));
            } else {
                emit_raw!("{}", report.to_text());
            }
            Ok(if report.has_failure() { Status::Failed } else { Status::Success })
        }

        Command::SolveElliptic {
            file,
            nodes,
            theta_tol,
            f_tol,
            export,
            output,
        } => {
            let problem = load(&file)?;
            let opts = ShootingOptions {
                theta_tol,
                f_tol,
                ..ShootingOptions::default()
            };
            let sol = solve_elliptic_junction(&problem.spec, &grid(&problem, nodes)?, &opts).map_err(solver)?;
            if let Some(path) = &export.out {
                export_elliptic(&sol, path, export.format.0).map_err(input)?;
            }
            let summary = json!({
                "theta_star": sol.theta_star,
                "vertex_flux": sol.vertex_flux,
                "f_residual": sol.f_residual,
                "f_tolerance": sol.f_tolerance,
                "bracket": [sol.bracket.0, sol.bracket.1],
                "bracket_doublings": sol.bracket_doublings,
                "bisection_iterations": sol.bisection_iterations,
                "shots": sol.shots,
                "newton_iterations": sol.newton_iterations,
            });
            if output.json {
                print_json(summary);
            } else {
                emit!("theta*            {:.16e}", sol.theta_star);
                emit!("|F| at theta*     {:.3e} (tolerance {:.3e})", sol.f_residual.abs(), sol.f_tolerance);
                let flux: Vec<String> = sol.vertex_flux.iter().map(|p| format!("{p:.10e}")).collect();
                emit!("vertex slopes     {}", flux.join(" "));
                emit!("bracket           [{:.6e}, {:.6e}]", sol.bracket.0, sol.bracket.1);
                emit!(
                    "iterations        {} bisection, {} shots, {} Newton",
                    sol.bisection_iterations, sol.shots, sol.newton_iterations
                );
            }
            Ok(Status::Success)
        }

        Command::SolveParabolic {
            file,
            steps,
            nodes,
            export,
            output,
        } => {
            let problem = load(&file)?;
            let cfg = RotheConfig::new(steps, grid(&problem, nodes)?);
            let sol = solve_parabolic(&problem.spec, &cfg).map_err(solver)?;
            if let Some(path) = &export.out {
                export_solution(&sol, path, export.format.0).map_err(input)?;
            }
            let worst = sol
                .steps
                .iter()
                .map(|d| d.f_residual.abs())
                .fold(0.0, f64::max);
            let shots: usize = sol.steps.iter().map(|d| d.shots).sum();
            let newton: usize = sol.steps.iter().map(|d| d.newton_iterations).sum();
            let last = sol.snapshots.last().expect("u_0 is always present");
            if output.json {
                print_json(json!({
                    "steps": sol.completed(),
                    "dt": sol.dt,
                    "final_vertex_value": last.vertex_value(),
                    "final_sup_norm": last.sup_norm(),
                    "max_f_residual": worst,
                    "shots": shots,
                    "newton_iterations": newton,
                    "diagnostics": sol.steps,
                }));
            } else {
                emit!("steps             {} (dt = {:.6e})", sol.completed(), sol.dt);
                emit!("u(T, 0)           {:.16e}", last.vertex_value());
                emit!("sup |u(T)|        {:.16e}", last.sup_norm());
                emit!("max |F|           {worst:.3e}");
                emit!("work              {shots} shots, {newton} Newton iterations");
            }
            Ok(Status::Success)
        }

        Command::Estimates {
            file,
            steps,
            nodes,
            ladder,
            margin,
            output,
        } => {
            let problem = load(&file)?;
            let mut all = vec![steps];
            if ladder.is_empty() {
                all.extend([2 * steps, 4 * steps]);
            } else {
                all.extend(ladder.into_iter().filter(|&n| n != steps));
            }
            let opts = EstimateOptions {
                nodes,
                steps: all,
                shooting: ShootingOptions::default(),
                margin,
            };
            let report = run_estimates(&problem.spec, &opts).map_err(solver)?;
            if output.json {
                print_json(report.to_json());
            } else {
                emit_raw!("{}", report.to_text());
            }
            Ok(if report.has_failure() { Status::Failed } else { Status::Success })
        }

        Command::Convergence {
            file,
            ladder,
            fixed,
            reference,
            output,
        } => {
            let problem = load(&file)?;
            let reference = match reference {
                ReferenceArg::ClosedForm => Reference::ClosedForm(
                    problem
                        .reference
                        .clone()
                        .ok_or_else(|| CliError::Input("the problem file has no reference solution".into()))?,
                ),
                ReferenceArg::SelfReference => Reference::SelfReference,
            };
            let ladder = Ladder {
                axis: ladder.axis,
                values: ladder.values,
                fixed,
            };
            let report = run_convergence(&problem.spec, &reference, &ladder, &ShootingOptions::default()).map_err(|e| match e {
                junction_pde::ConvergenceError::Config(m) => CliError::Input(m),
                junction_pde::ConvergenceError::Rung {
                    resolution,
                    source,
                    partial,
                } => CliError::Solver(format!(
                    "rung {resolution}: {source}\npartial report:\n{}",
                    partial.to_text()
                )),
                other => solver(other),
            })?;
            if output.json {
                print_json(serde_json::to_value(&report).expect("serializable"));
            } else {
                emit_raw!("{}", report.to_text());
            }
            Ok(if report.verdict == OrderVerdict::Fail { Status::Failed } else { Status::Success })
        }

        Command::TruncateStudy {
            file,
            lengths,
            window,
            spacing,
            steps,
            output,
        } => {
            let problem = load(&file)?;
            let cfg = TruncationConfig {
                lengths,
                window,
                spacing,
                steps,
                shooting: ShootingOptions::default(),
            };
            let report = truncation_study(&problem.spec, &cfg).map_err(|e| match e {
                junction_pde::RotheError::Config(m) => CliError::Input(m),
                other => solver(other),
            })?;
            if output.json {
                print_json(serde_json::to_value(&report).expect("serializable"));
            } else {
                emit!("window [0, {}], spacing {}, {} steps", report.window, report.spacing, report.steps);
                for (pair, d) in report.lengths.windows(2).zip(&report.distances) {
                    emit!("a = {:<8} vs a = {:<8} sup distance {d:.6e}", pair[0], pair[1]);
                }
                emit!("monotone decrease: {}", if report.monotone { "yes" } else { "no" });
            }
            Ok(if report.monotone { Status::Success } else { Status::Failed })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
