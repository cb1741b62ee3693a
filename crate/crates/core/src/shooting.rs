//! Stationary junction problems solved by shooting on the vertex value:
//! for each trial `theta` every edge gets a Dirichlet problem, and the vertex
//! condition evaluated on the resulting slopes is driven to zero by bisection.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::edge::{solve_dirichlet_edge_from, EdgeError, EdgeProblem, EdgeSolution, EdgeSolverOptions};
use crate::graph::{vertex_gradient, GridError, GridFunction, JunctionGrid};
use crate::model::{ModelError, ProblemSpec};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("the envelope has no root pair (b, B) with F(b, B) = 0; add root_b and root_B to bracket the vertex value")]
    MissingRootPair,
    #[error("SIGN_BRACKET_FAILED: F({theta_lo}) = {f_lo} and F({theta_hi}) = {f_hi} have the same sign")]
    SignBracketFailed {
        theta_lo: f64,
        theta_hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("edge {edge} at theta = {theta}: {source}")]
    Edge {
        edge: usize,
        theta: f64,
        source: EdgeError,
    },
    #[error("edge {edge} at theta = {theta}: Newton stopped ({reason}) with scaled residual {residual:e}")]
    EdgeDiverged {
        edge: usize,
        theta: f64,
        reason: String,
        residual: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("configuration: {0}")]
    Config(String),
}

/// A stationary junction problem on a fixed grid. Besides the plain
/// problem at `t = 0` it can represent one backward Euler step, where the
/// Hamiltonian gains `(u - u_prev) / dt`.
#[derive(Debug, Clone)]
pub struct JunctionProblem<'a, T> {
    spec: &'a ProblemSpec<T>,
    grid: JunctionGrid<T>,
    time: T,
    outer: Vec<T>,
    reaction: T,
    anchors: Option<Vec<Vec<T>>>,
    sources: Option<Vec<Vec<T>>>,
    monotonicity: T,
}

impl<'a, T: Real> JunctionProblem<'a, T> {
    /// The stationary problem with outer data `phi_i(0)` and forcing at `t = 0`.
    pub fn elliptic(spec: &'a ProblemSpec<T>, grid: &JunctionGrid<T>) -> Result<Self, SolveError> {
        check_grid(spec, grid)?;
        let time = T::zero();
        let outer = (0..spec.num_edges())
            .map(|i| spec.outer(i, time))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            spec,
            grid: grid.clone(),
            time,
            outer,
            reaction: T::zero(),
            anchors: None,
            sources: node_sources(spec, grid, time)?,
            monotonicity: spec.envelope().c_h,
        })
    }

    /// One implicit step to time `time` from `prev` with step `dt`.
    pub fn rothe_step(
        spec: &'a ProblemSpec<T>,
        prev: &GridFunction<T>,
        time: T,
        dt: T,
    ) -> Result<Self, SolveError> {
        let grid = prev.grid();
        check_grid(spec, grid)?;
        let reaction = T::one() / dt;
        let monotonicity = reaction - spec.envelope().c_h;
        if !(dt > T::zero()) || !(monotonicity > T::zero()) {
            return Err(SolveError::Config(format!(
                "time step {dt} must satisfy 0 < dt < 1 / C_H = {}",
                T::one() / spec.envelope().c_h
            )));
        }
        let outer = (0..spec.num_edges())
            .map(|i| spec.outer(i, time))
            .collect::<Result<Vec<_>, _>>()?;
        let anchors = (0..spec.num_edges()).map(|i| prev.edge_nodes(i)).collect();
        Ok(Self {
            spec,
            grid: grid.clone(),
            time,
            outer,
            reaction,
            anchors: Some(anchors),
            sources: node_sources(spec, grid, time)?,
            monotonicity,
        })
    }

    /// Replaces the outer Dirichlet values.
    pub fn with_outer(mut self, outer: Vec<T>) -> Result<Self, SolveError> {
        if outer.len() != self.spec.num_edges() {
            return Err(SolveError::Config(format!(
                "{} outer values for {} edges",
                outer.len(),
                self.spec.num_edges()
            )));
        }
        self.outer = outer;
        Ok(self)
    }

    pub fn spec(&self) -> &ProblemSpec<T> {
        self.spec
    }

    pub fn grid(&self) -> &JunctionGrid<T> {
        &self.grid
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn outer(&self) -> &[T] {
        &self.outer
    }

    /// Constant `C` with `H(u) - H(v) >= C (u - v)` used in the bracket.
    pub fn monotonicity(&self) -> T {
        self.monotonicity
    }

    fn edge_problem(&self, edge: usize, theta: T) -> Result<EdgeProblem<'_, T>, EdgeError> {
        let mut p = EdgeProblem::new(
            self.grid.junction().length(edge),
            self.grid.nodes(edge),
            self.spec.sigma_coefficient(edge),
            self.spec.hamiltonian_coefficient(edge),
            theta,
            self.outer[edge],
        )?;
        if let Some(a) = &self.anchors {
            p = p.with_reaction(self.reaction, &a[edge])?;
        }
        if let Some(s) = &self.sources {
            p = p.with_source(&s[edge])?;
        }
        Ok(p)
    }

    /// Augmented Hamiltonian at an arbitrary point of `edge`; the previous
    /// step enters through linear interpolation between nodes.
    fn augmented_hamiltonian(&self, edge: usize, x: T, u: T, p: T) -> Result<T, ModelError> {
        let mut h = self.spec.hamiltonian(edge, self.time, x, u, p)?;
        if let Some(a) = &self.anchors {
            h = h + self.reaction * (u - interpolate(&a[edge], self.grid.junction().length(edge), x));
        }
        Ok(h)
    }
}

fn check_grid<T: Real>(spec: &ProblemSpec<T>, grid: &JunctionGrid<T>) -> Result<(), SolveError> {
    if grid.junction().lengths() != spec.junction().lengths() {
        return Err(SolveError::Config("grid and problem have different edge lengths".into()));
    }
    Ok(())
}

fn node_sources<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &JunctionGrid<T>,
    time: T,
) -> Result<Option<Vec<Vec<T>>>, SolveError> {
    if spec.forcing_coefficient(0).is_none() {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(spec.num_edges());
    for i in 0..spec.num_edges() {
        out.push(
            grid.coordinates(i)
                .into_iter()
                .map(|x| spec.forcing(i, time, x))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(Some(out))
}

fn interpolate<T: Real>(values: &[T], length: T, x: T) -> T {
    let n = values.len();
    let s = (x / length).max(T::zero()).min(T::one()) * T::from_count(n - 1);
    let j = s.floor().to_usize().unwrap_or(0).min(n - 2);
    let w = s - T::from_count(j);
    values[j] * (T::one() - w) + values[j + 1] * w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingOptions {
    pub theta_tol: f64,
    /// Relative tolerance on `|F|`, scaled by `1 + |F(lo)| + |F(hi)|`.
    pub f_tol: f64,
    pub min_half_width: f64,
    pub max_doublings: usize,
    /// Samples per edge for the `K_i` estimate.
    pub k_samples: usize,
    pub k_inflation: f64,
    pub edge: EdgeSolverOptions,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            theta_tol: 1e-12,
            f_tol: 1e-9,
            min_half_width: 0.1,
            max_doublings: 8,
            k_samples: 1025,
            k_inflation: 1.1,
            edge: EdgeSolverOptions::default(),
        }
    }
}

/// `(-theta_hi, theta_hi)` with
/// `theta_hi = |b| + max_i (|phi_i| + |a_i B_i| + K_i / C)` and
/// `K_i` the inflated sampled maximum of `|H_i(x, B_i x, B_i)|`.
pub fn theta_bracket<T: Real>(p: &JunctionProblem<'_, T>, opts: &ShootingOptions) -> Result<(T, T), SolveError> {
    let (b, big_b) = p.spec.envelope().root_pair.clone().ok_or(SolveError::MissingRootPair)?;
    let c = p.monotonicity;
    let samples = opts.k_samples.max(2);
    let mut widest = T::zero();
    for (i, &bi) in big_b.iter().enumerate() {
        let a = p.grid.junction().length(i);
        let mut k = T::zero();
        for s in 0..samples {
            let x = a * T::from_count(s) / T::from_count(samples - 1);
            k = k.max(p.augmented_hamiltonian(i, x, bi * x, bi)?.abs());
        }
        k = k * T::lit(opts.k_inflation);
        widest = widest.max(p.outer[i].abs() + (a * bi).abs() + k / c);
    }
    let hi = (b.abs() + widest).max(T::lit(opts.min_half_width));
    Ok((-hi, hi))
}

/// Edge solutions and vertex data for one trial vertex value.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot<T> {
    pub theta: T,
    pub flux: Vec<T>,
    pub f_value: T,
    pub edges: Vec<EdgeSolution<T>>,
}

/// Evaluates `theta -> F(theta, slopes)`, reusing the previous edge
/// solutions as Newton starting points.
pub struct Shooter<'p, 'a, T> {
    problem: &'p JunctionProblem<'a, T>,
    opts: ShootingOptions,
    warm: Option<(T, Vec<Vec<T>>)>,
    shots: usize,
    newton_iterations: usize,
}

impl<'p, 'a, T: Real> Shooter<'p, 'a, T> {
    pub fn new(problem: &'p JunctionProblem<'a, T>, opts: ShootingOptions) -> Self {
        Self {
            problem,
            opts,
            warm: None,
            shots: 0,
            newton_iterations: 0,
        }
    }

    /// Seeds the warm start with full edge node values at vertex value `theta`.
    pub fn with_warm_start(mut self, theta: T, edges: Vec<Vec<T>>) -> Self {
        self.warm = Some((theta, edges));
        self
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    pub fn shoot(&mut self, theta: T) -> Result<Shot<T>, SolveError> {
        let p = self.problem;
        let edges = p.spec.num_edges();
        let warm = self.warm.as_ref();
        let edge_opts = self.opts.edge;
        let results: Vec<Result<EdgeSolution<T>, SolveError>> = (0..edges)
            .into_par_iter()
            .map(|i| {
                let ep = p.edge_problem(i, theta).map_err(|source| SolveError::Edge {
                    edge: i,
                    theta: theta.as_f64(),
                    source,
                })?;
                // Shift the previous solution so its left end matches theta.
                let start = warm.map(|(t0, w)| {
                    let last = T::from_count(w[i].len() - 1);
                    w[i].iter()
                        .enumerate()
                        .map(|(j, v)| *v + (theta - *t0) * (T::one() - T::from_count(j) / last))
                        .collect::<Vec<_>>()
                });
                let sol = solve_dirichlet_edge_from(&ep, start.as_deref(), &edge_opts).map_err(|source| {
                    SolveError::Edge {
                        edge: i,
                        theta: theta.as_f64(),
                        source,
                    }
                })?;
                if !sol.converged {
                    return Err(SolveError::EdgeDiverged {
                        edge: i,
                        theta: theta.as_f64(),
                        reason: format!("{:?}", sol.stop),
                        residual: sol.residual_sup.as_f64(),
                    });
                }
                Ok(sol)
            })
            .collect();
        let sols = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        self.shots += 1;
        self.newton_iterations += sols.iter().map(|s| s.newton_iterations).sum::<usize>();

        let flux: Vec<T> = sols
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let h = p.grid.spacing(i);
                let v = &s.values;
                (-T::lit(3.0) * v[0] + T::lit(4.0) * v[1] - v[2]) / (h + h)
            })
            .collect();
        let f_value = p.spec.vertex(theta, &flux)?;
        self.warm = Some((theta, sols.iter().map(|s| s.values.clone()).collect()));
        Ok(Shot {
            theta,
            flux,
            f_value,
            edges: sols,
        })
    }

    /// Bisection inside `bracket`, or inside [`theta_bracket`] when `None`.
    /// A bracket without a sign change is doubled about its centre.
    pub fn solve(&mut self, bracket: Option<(T, T)>) -> Result<EllipticSolution<T>, SolveError> {
        let (mut lo, mut hi) = match bracket {
            Some(b) => b,
            None => theta_bracket(self.problem, &self.opts)?,
        };
        if !(lo < hi) {
            return Err(SolveError::Config(format!("empty bracket ({lo}, {hi})")));
        }
        let mut shot_lo = self.shoot(lo)?;
        let mut shot_hi = self.shoot(hi)?;
        let mut doublings = 0;
        while shot_lo.f_value * shot_hi.f_value > T::zero() {
            if doublings == self.opts.max_doublings {
                return Err(SolveError::SignBracketFailed {
                    theta_lo: lo.as_f64(),
                    theta_hi: hi.as_f64(),
                    f_lo: shot_lo.f_value.as_f64(),
                    f_hi: shot_hi.f_value.as_f64(),
                });
            }
            doublings += 1;
            let mid = (lo + hi) * T::lit(0.5);
            let half = hi - lo;
            lo = mid - half;
            hi = mid + half;
            shot_lo = self.shoot(lo)?;
            shot_hi = self.shoot(hi)?;
        }
        let bracket = (lo, hi);
        let f_tol = T::lit(self.opts.f_tol) * (T::one() + shot_lo.f_value.abs() + shot_hi.f_value.abs());
        let theta_tol = T::lit(self.opts.theta_tol);
        let lo_positive = shot_lo.f_value > T::zero();
        let mut iterations = 0;

        let best = loop {
            if shot_lo.f_value.abs() <= f_tol {
                break shot_lo;
            }
            if shot_hi.f_value.abs() <= f_tol {
                break shot_hi;
            }
            if hi - lo <= theta_tol {
                break if shot_lo.f_value.abs() <= shot_hi.f_value.abs() {
                    shot_lo
                } else {
                    shot_hi
                };
            }
            let mid = lo + (hi - lo) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break if shot_lo.f_value.abs() <= shot_hi.f_value.abs() {
                    shot_lo
                } else {
                    shot_hi
                };
            }
            iterations += 1;
            let shot = self.shoot(mid)?;
            if (shot.f_value > T::zero()) == lo_positive && shot.f_value != T::zero() {
                lo = mid;
                shot_lo = shot;
            } else {
                hi = mid;
                shot_hi = shot;
            }
        };

        self.finish(best, bracket, iterations, doublings, f_tol)
    }

    /// Tries `center` first and accepts it when `|F| <= f_tol`; otherwise
    /// bisects on `center -/+ half_width`.
    pub fn solve_around(&mut self, center: T, half_width: T) -> Result<EllipticSolution<T>, SolveError> {
        let shot = self.shoot(center)?;
        let tol = T::lit(self.opts.f_tol);
        if shot.f_value.abs() <= tol {
            return self.finish(shot, (center, center), 0, 0, tol);
        }
        self.solve(Some((center - half_width, center + half_width)))
    }

    fn finish(
        &self,
        best: Shot<T>,
        bracket: (T, T),
        iterations: usize,
        doublings: usize,
        f_tol: T,
    ) -> Result<EllipticSolution<T>, SolveError> {
        let grid = self.problem.grid.clone();
        let nodes: Vec<Vec<T>> = best.edges.iter().map(|e| e.values.clone()).collect();
        let solution = GridFunction::from_edge_nodes(grid, &nodes)?;
        let vertex_flux = vertex_gradient(&solution);
        let f_residual = self.problem.spec.vertex(best.theta, &vertex_flux)?;
        Ok(EllipticSolution {
            theta_star: best.theta,
            solution,
            vertex_flux,
            f_residual,
            f_tolerance: f_tol,
            bisection_iterations: iterations,
            bracket,
            bracket_doublings: doublings,
            shots: self.shots,
            newton_iterations: self.newton_iterations,
            edges: best.edges,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSolution<T> {
    pub theta_star: T,
    pub solution: GridFunction<T>,
    /// One-sided vertex slopes of `solution`.
    pub vertex_flux: Vec<T>,
    pub f_residual: T,
    /// Absolute tolerance the bisection applied to `|F|`.
    pub f_tolerance: T,
    pub bisection_iterations: usize,
    /// Final bracket with a sign change of `F`.
    pub bracket: (T, T),
    pub bracket_doublings: usize,
    pub shots: usize,
    pub newton_iterations: usize,
    pub edges: Vec<EdgeSolution<T>>,
}

/// Solves the stationary problem of `spec` on `grid`.
pub fn solve_elliptic_junction<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &JunctionGrid<T>,
    opts: &ShootingOptions,
) -> Result<EllipticSolution<T>, SolveError> {
    let problem = JunctionProblem::elliptic(spec, grid)?;
    Shooter::new(&problem, *opts).solve(None)
}

/// Maximum of `|R|` over interior nodes of the unscaled edge residual of
/// `sol` for `problem`.
pub fn junction_residual<T: Real>(problem: &JunctionProblem<'_, T>, sol: &GridFunction<T>) -> Result<T, SolveError> {
    let mut worst = T::zero();
    for i in 0..problem.spec.num_edges() {
        let values = sol.edge_nodes(i);
        let ep = problem
            .edge_problem(i, values[0])
            .map_err(|source| SolveError::Edge {
                edge: i,
                theta: values[0].as_f64(),
                source,
            })?;
        let r = crate::edge::assemble_residual(&ep, &values).map_err(|source| SolveError::Edge {
            edge: i,
            theta: values[0].as_f64(),
            source,
        })?;
        worst = worst.max(crate::scalar::sup_abs(&r));
    }
    Ok(worst)
}

/// Plain evaluation of `F` on a grid function through its vertex slopes.
pub fn vertex_residual<T: Real>(spec: &ProblemSpec<T>, sol: &GridFunction<T>) -> Result<T, SolveError> {
    Ok(spec.vertex(sol.vertex_value(), &vertex_gradient(sol))?)
}
