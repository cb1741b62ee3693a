//! Quasilinear parabolic equations on a star-shaped junction with a
//! nonlinear condition at the central vertex.
//!
//! Time stepping follows the method of lines in time (Rothe): each backward
//! Euler step is a stationary junction problem, solved by shooting on the
//! common vertex value with one Dirichlet problem per edge.

// `!(a <= b)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod convergence;
pub mod edge;
pub mod export;
pub mod expr;
pub mod graph;
pub mod model;
pub mod problem_file;
pub mod rothe;
pub mod scalar;
pub mod shooting;

pub use expr::{parse_expr, CoefficientKind, EvalError, Expr, ParseError, ParseErrorKind, Vars};
pub use graph::{build_junction, sup_norm, vertex_gradient, GridError, GridFunction, Junction, JunctionGrid};
pub use model::{
    compatibility_check, parse_coefficient, validate_assumptions, AssumptionCheck, AssumptionFamily, Coefficient,
    CompatibilityReport, GrowthEnvelope, ModelError, ProblemParts, ProblemSpec, SamplingPlan, ValidationReport,
    Verdict, Witness,
};
pub use scalar::Real;

pub use analysis::{
    barrier_params, check_comparison, check_interpolation, elliptic_residual, holder_seminorm_t, holder_seminorm_x,
    interpolation_bound, recursion_table, run_estimates, snapshot_residual, time_difference_bound, uniform_bounds,
    verify_barrier, AnalysisError, BarrierParams, EstimateEntry, EstimateOptions, EstimateReport, EstimateVerdict,
    SpaceTimeSamples,
};
pub use convergence::{run_convergence, ConvergenceError, ConvergenceReport, Ladder, LadderAxis, OrderVerdict, Reference};
pub use edge::{solve_dirichlet_edge, EdgeError, EdgeProblem, EdgeSolution, EdgeSolverOptions};
pub use export::{export_elliptic, export_solution, ExportError, ExportFormat};
pub use problem_file::{load_builtin, load_problem, load_problem_file, LoadedProblem, ProblemFileError};
pub use rothe::{
    interpolant_eval, rothe_step, solve_parabolic, truncation_study, ParabolicSolution, RotheConfig, RotheError,
    TruncationConfig, TruncationReport,
};
pub use shooting::{solve_elliptic_junction, EllipticSolution, JunctionProblem, Shooter, ShootingOptions, SolveError};

pub type JunctionF64 = Junction<f64>;
pub type JunctionGridF64 = JunctionGrid<f64>;
pub type GridFunctionF64 = GridFunction<f64>;
pub type ProblemSpecF64 = ProblemSpec<f64>;
pub type EllipticSolutionF64 = EllipticSolution<f64>;
pub type ParabolicSolutionF64 = ParabolicSolution<f64>;
