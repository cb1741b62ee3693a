//! Backward Euler in time (Rothe's method): every step is a stationary
//! junction problem whose Hamiltonian carries `(u - u_prev) / dt`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::CoefficientKind;
use crate::graph::{build_junction, GridFunction, JunctionGrid};
use crate::model::{compatibility_check, parse_coefficient, CompatibilityReport, ModelError, ProblemSpec};
use crate::scalar::Real;
use crate::shooting::{EllipticSolution, JunctionProblem, Shooter, ShootingOptions, SolveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotheError<T: Real> {
    #[error("configuration: {0}")]
    Config(String),
    #[error("initial data are not compatible (vertex residual {}, outer residuals {:?})", .0.vertex_residual, .0.outer_residuals)]
    Incompatible(CompatibilityReport),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step {k}: {source}")]
    Step {
        k: usize,
        source: SolveError,
        /// Snapshots `u_0 .. u_{k-1}`.
        partial: Box<ParabolicSolution<T>>,
    },
    #[error("t = {t} or x = {x} outside [0, {horizon}] x [0, {length}]")]
    OutOfRange { t: f64, x: f64, horizon: f64, length: f64 },
}

#[derive(Debug, Clone)]
pub struct RotheConfig<T> {
    pub steps: usize,
    pub grid: JunctionGrid<T>,
    pub shooting: ShootingOptions,
    /// Bracket each step around the previous vertex value first.
    pub local_bracket: bool,
    /// Tolerance of the compatibility pre-check; `None` skips it.
    pub compatibility_tol: Option<f64>,
}

impl<T: Real> RotheConfig<T> {
    pub fn new(steps: usize, grid: JunctionGrid<T>) -> Self {
        Self {
            steps,
            grid,
            shooting: ShootingOptions::default(),
            local_bracket: true,
            compatibility_tol: Some(1e-4),
        }
    }

    /// Checks `n >= 2` and `n > C_H T`, returning `dt = T / n`.
    pub fn time_step(&self, spec: &ProblemSpec<T>) -> Result<T, RotheError<T>> {
        let n = T::from_count(self.steps);
        let c_tilde = spec.envelope().c_h * spec.horizon();
        if self.steps < 2 || !(n > c_tilde) {
            return Err(RotheError::Config(format!(
                "need n >= 2 and n > C_H T = {c_tilde}, got n = {}",
                self.steps
            )));
        }
        if self.grid.junction().lengths() != spec.junction().lengths() {
            return Err(RotheError::Config("grid and problem have different edge lengths".into()));
        }
        Ok(spec.horizon() / n)
    }
}

/// Per-step solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub k: usize,
    pub t: f64,
    pub theta_star: f64,
    pub f_residual: f64,
    pub f_tolerance: f64,
    pub bisection_iterations: usize,
    pub shots: usize,
    pub newton_iterations: usize,
    pub local_bracket: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicSolution<T> {
    /// `u_0 .. u_n`; `u_0` is the sampled initial datum.
    pub snapshots: Vec<GridFunction<T>>,
    pub times: Vec<T>,
    pub steps: Vec<StepDiagnostics>,
    pub horizon: T,
    pub dt: T,
}

impl<T: Real> ParabolicSolution<T> {
    pub fn grid(&self) -> &JunctionGrid<T> {
        self.snapshots[0].grid()
    }

    /// Number of completed steps.
    pub fn completed(&self) -> usize {
        self.snapshots.len() - 1
    }
}

/// The initial datum sampled on `grid`, vertex value from edge 0.
pub fn sample_initial<T: Real>(spec: &ProblemSpec<T>, grid: &JunctionGrid<T>) -> Result<GridFunction<T>, ModelError> {
    let mut nodes = Vec::with_capacity(grid.num_edges());
    for i in 0..grid.num_edges() {
        nodes.push(
            grid.coordinates(i)
                .into_iter()
                .map(|x| spec.initial(i, x))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(GridFunction::from_edge_nodes(grid.clone(), &nodes)?)
}

/// `M_0 = max_i (sup_j |-sigma(x_j, Dg) D^2 g + H(x_j, g, Dg) - f(0, x_j)| + sup |phi_i'|)`
/// with central stencils at the interior grid nodes and `phi'` sampled by
/// central differences on 257 points of `[0, T]`.
pub fn initial_defect<T: Real>(spec: &ProblemSpec<T>, grid: &JunctionGrid<T>) -> Result<T, ModelError> {
    let g = sample_initial(spec, grid)?;
    let horizon = spec.horizon();
    let mut m0 = T::zero();
    for i in 0..grid.num_edges() {
        let v = g.edge_nodes(i);
        let h = grid.spacing(i);
        let mut sup = T::zero();
        for j in 1..v.len() - 1 {
            let x = grid.coordinate(i, j);
            let p = (v[j + 1] - v[j - 1]) / (h + h);
            let d2 = (v[j + 1] - v[j] - v[j] + v[j - 1]) / (h * h);
            let r = -spec.sigma(i, x, p)? * d2 + spec.hamiltonian(i, T::zero(), x, v[j], p)?;
            sup = sup.max(r.abs());
        }
        let samples = 256;
        let dt = horizon / T::from_count(samples);
        let mut dphi = T::zero();
        for s in 0..=samples {
            let t = T::from_count(s) * dt;
            let (a, b) = ((t - dt).max(T::zero()), (t + dt).min(horizon));
            dphi = dphi.max(((spec.outer(i, b)? - spec.outer(i, a)?) / (b - a)).abs());
        }
        m0 = m0.max(sup + dphi);
    }
    Ok(m0)
}

/// One implicit step from `prev` to `t_k = k dt`, bracketed globally.
pub fn rothe_step<T: Real>(
    spec: &ProblemSpec<T>,
    prev: &GridFunction<T>,
    k: usize,
    cfg: &RotheConfig<T>,
) -> Result<EllipticSolution<T>, RotheError<T>> {
    let dt = cfg.time_step(spec)?;
    if k == 0 || k > cfg.steps {
        return Err(RotheError::Config(format!("step index {k} outside 1..={}", cfg.steps)));
    }
    let t = T::from_count(k) * dt;
    step(spec, prev, t, dt, cfg, None).map(|(sol, _)| sol).map_err(|source| RotheError::Step {
        k,
        source,
        partial: Box::new(ParabolicSolution {
            snapshots: vec![prev.clone()],
            times: vec![t - dt],
            steps: Vec::new(),
            horizon: spec.horizon(),
            dt,
        }),
    })
}

fn step<T: Real>(
    spec: &ProblemSpec<T>,
    prev: &GridFunction<T>,
    t: T,
    dt: T,
    cfg: &RotheConfig<T>,
    local: Option<T>,
) -> Result<(EllipticSolution<T>, bool), SolveError> {
    let problem = JunctionProblem::rothe_step(spec, prev, t, dt)?;
    let warm: Vec<Vec<T>> = (0..spec.num_edges()).map(|i| prev.edge_nodes(i)).collect();
    let theta0 = prev.vertex_value();
    if let Some(half_width) = local {
        let opts = ShootingOptions {
            max_doublings: 0,
            ..cfg.shooting
        };
        match Shooter::new(&problem, opts)
            .with_warm_start(theta0, warm.clone())
            .solve_around(theta0, half_width)
        {
            Ok(sol) => return Ok((sol, true)),
            Err(SolveError::SignBracketFailed { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let sol = Shooter::new(&problem, cfg.shooting)
        .with_warm_start(theta0, warm)
        .solve(None)?;
    Ok((sol, false))
}

/// Runs `n` steps from the sampled initial datum.
pub fn solve_parabolic<T: Real>(spec: &ProblemSpec<T>, cfg: &RotheConfig<T>) -> Result<ParabolicSolution<T>, RotheError<T>> {
    let dt = cfg.time_step(spec)?;
    if let Some(tol) = cfg.compatibility_tol {
        let report = compatibility_check(spec, T::lit(tol))?;
        if !report.passed {
            return Err(RotheError::Incompatible(report));
        }
    }
    let u0 = sample_initial(spec, &cfg.grid)?;
    let m0 = initial_defect(spec, &cfg.grid)?;
    let mut out = ParabolicSolution {
        snapshots: vec![u0],
        times: vec![T::zero()],
        steps: Vec::with_capacity(cfg.steps),
        horizon: spec.horizon(),
        dt,
    };
    let theta_tol = T::lit(cfg.shooting.theta_tol);
    let mut last_move = T::zero();
    for k in 1..=cfg.steps {
        let t = if k == cfg.steps {
            spec.horizon()
        } else {
            T::from_count(k) * dt
        };
        let prev = out.snapshots.last().expect("u_0 present");
        let theta_prev = prev.vertex_value();
        let local = cfg
            .local_bracket
            .then(|| (T::lit(10.0) * theta_tol).max(T::lit(2.0) * last_move.abs() + dt * m0));
        match step(spec, prev, t, dt, cfg, local) {
            Ok((sol, used_local)) => {
                last_move = sol.theta_star - theta_prev;
                out.steps.push(StepDiagnostics {
                    k,
                    t: t.as_f64(),
                    theta_star: sol.theta_star.as_f64(),
                    f_residual: sol.f_residual.as_f64(),
                    f_tolerance: sol.f_tolerance.as_f64(),
                    bisection_iterations: sol.bisection_iterations,
                    shots: sol.shots,
                    newton_iterations: sol.newton_iterations,
                    local_bracket: used_local,
                });
                out.snapshots.push(sol.solution);
                out.times.push(t);
            }
            Err(source) => {
                return Err(RotheError::Step {
                    k,
                    source,
                    partial: Box::new(out),
                })
            }
        }
    }
    Ok(out)
}

/// The interpolant: linear in `t` between snapshots and linear in `x`
/// between nodes.
pub fn interpolant_eval<T: Real>(sol: &ParabolicSolution<T>, t: T, x: T, edge: usize) -> Result<T, RotheError<T>> {
    let length = sol.grid().junction().length(edge);
    let last = *sol.times.last().expect("u_0 present");
    if !(t >= T::zero() && t <= last && x >= T::zero() && x <= length) {
        return Err(RotheError::OutOfRange {
            t: t.as_f64(),
            x: x.as_f64(),
            horizon: last.as_f64(),
            length: length.as_f64(),
        });
    }
    let k = sol.times.partition_point(|&tk| tk <= t) - 1;
    let here = sol.snapshots[k].interpolate(edge, x);
    if sol.times[k] == t || k + 1 == sol.times.len() {
        return Ok(here);
    }
    let s = (t - sol.times[k]) / (sol.times[k + 1] - sol.times[k]);
    let next = sol.snapshots[k + 1].interpolate(edge, x);
    Ok(here + s * (next - here))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub lengths: Vec<f64>,
    pub window: f64,
    pub spacing: f64,
    pub steps: usize,
    /// `distances[j]`: sup over `[0, window] x [0, T]` between the runs with
    /// `lengths[j]` and `lengths[j + 1]`.
    pub distances: Vec<f64>,
    /// Distances nonincreasing: each strictly smaller than its predecessor,
    /// or both at most 1e-12.
    pub monotone: bool,
}

/// Settings shared by every run of a truncation ladder.
#[derive(Debug, Clone)]
pub struct TruncationConfig<T> {
    pub lengths: Vec<T>,
    pub window: T,
    /// Common grid spacing; each edge of length `a` gets `a / spacing + 1` nodes.
    pub spacing: T,
    pub steps: usize,
    pub shooting: ShootingOptions,
}

/// Solves the problem on junctions with every edge of length `a` for each
/// `a` of the ladder, with the far Dirichlet value frozen at `g_i(a)`, and
/// compares consecutive runs on the window near the vertex.
pub fn truncation_study<T: Real>(spec: &ProblemSpec<T>, cfg: &TruncationConfig<T>) -> Result<TruncationReport, RotheError<T>> {
    if cfg.lengths.len() < 2 || cfg.lengths.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(RotheError::Config("lengths must be an increasing ladder of at least two values".into()));
    }
    if !(cfg.window > T::zero()) || cfg.window > cfg.lengths[0] {
        return Err(RotheError::Config(format!(
            "window {} must lie in (0, {}]",
            cfg.window, cfg.lengths[0]
        )));
    }
    let edges = spec.num_edges();
    let runs: Vec<Result<ParabolicSolution<T>, RotheError<T>>> = cfg
        .lengths
        .par_iter()
        .map(|&a| {
            let cells = (a / cfg.spacing).round().to_usize().unwrap_or(0);
            if ((T::from_count(cells) * cfg.spacing - a) / a).abs() > T::lit(1e-9) || cells < 2 {
                return Err(RotheError::Config(format!("length {a} is not a multiple of the spacing {}", cfg.spacing)));
            }
            let junction = build_junction(edges, &vec![a; edges]).map_err(ModelError::from)?;
            let mut frozen = Vec::with_capacity(edges);
            for i in 0..edges {
                let v = spec.initial(i, a)?;
                let c = parse_coefficient(&format!("{:?}", v.as_f64()), CoefficientKind::OuterBoundary)
                    .map_err(|e| RotheError::Config(e.to_string()))?;
                frozen.push(c);
            }
            let truncated = spec.with_junction(junction.clone())?.with_outer_boundary(frozen)?;
            let grid = JunctionGrid::uniform(junction, cells + 1).map_err(ModelError::from)?;
            let mut rc = RotheConfig::new(cfg.steps, grid);
            rc.shooting = cfg.shooting;
            rc.compatibility_tol = None;
            solve_parabolic(&truncated, &rc)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let window_nodes = (cfg.window / cfg.spacing).round().to_usize().unwrap_or(0) + 1;
    let mut distances = Vec::with_capacity(runs.len() - 1);
    for pair in runs.windows(2) {
        let mut d = T::zero();
        for (a, b) in pair[0].snapshots.iter().zip(&pair[1].snapshots) {
            for i in 0..edges {
                for j in 0..window_nodes {
                    d = d.max((a.value(i, j) - b.value(i, j)).abs());
                }
            }
        }
        distances.push(d.as_f64());
    }
    let monotone = distances
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= 1e-12 && w[1] <= 1e-12));
    Ok(TruncationReport {
        lengths: cfg.lengths.iter().map(|a| a.as_f64()).collect(),
        window: cfg.window.as_f64(),
        spacing: cfg.spacing.as_f64(),
        steps: cfg.steps,
        distances,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GrowthEnvelope, ProblemParts};
    use std::f64::consts::FRAC_PI_2;

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn spec(
        lengths: &[f64],
        ham: &str,
        vertex: &str,
        initial: &[&str],
        outer: &[&str],
        horizon: f64,
        c_h: f64,
        root: (f64, Vec<f64>),
    ) -> ProblemSpec<f64> {
        let edges = lengths.len();
        let c = |s: &str, k| parse_coefficient(s, k).unwrap();
        ProblemSpec::new(ProblemParts {
            junction: build_junction(edges, lengths).unwrap(),
            sigma: vec![c("1", CoefficientKind::Sigma); edges],
            hamiltonian: vec![c(ham, CoefficientKind::Hamiltonian); edges],
            vertex_condition: c(vertex, CoefficientKind::VertexCondition { edges }),
            initial: initial.iter().map(|s| c(s, CoefficientKind::Initial)).collect(),
            outer_boundary: outer.iter().map(|s| c(s, CoefficientKind::OuterBoundary)).collect(),
            forcing: None,
            horizon,
            envelope: GrowthEnvelope::new(2.0, 1.0, 1.0, c_h).unwrap().with_root_pair(root.0, root.1),
        })
        .unwrap()
    }

    fn heat(horizon: f64) -> ProblemSpec<f64> {
        spec(&[1.0], "0", "p1", &["cos(pi*x/2)"], &["0"], horizon, 1e-9, (0.0, vec![0.0]))
    }

    fn config(spec: &ProblemSpec<f64>, steps: usize, nodes: usize) -> RotheConfig<f64> {
        RotheConfig::new(steps, JunctionGrid::uniform(spec.junction().clone(), nodes).unwrap())
    }

    #[test]
    fn single_heat_step_matches_eigen_relation() {
        let p = heat(0.5);
        let cfg = config(&p, 10, 201);
        let u0 = sample_initial(&p, &cfg.grid).unwrap();
        let sol = rothe_step(&p, &u0, 1, &cfg).unwrap();
        let dt = 0.05;
        let mut err = 0.0f64;
        for (j, x) in cfg.grid.coordinates(0).into_iter().enumerate() {
            let want = (FRAC_PI_2 * x).cos() / (1.0 + dt * FRAC_PI_2 * FRAC_PI_2);
            err = err.max((sol.solution.value(0, j) - want).abs());
        }
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn constant_state_is_stationary() {
        let p = spec(&[1.0, 2.0], "u - 0.5", "p1 + p2 - u + 0.5", &["0.5", "0.5"], &["0.5", "0.5"], 1.0, 1.0, (0.5, vec![0.0, 0.0]));
        let sol = solve_parabolic(&p, &config(&p, 7, 31)).unwrap();
        for s in &sol.snapshots {
            assert!(s.sub(&sol.snapshots[0]).unwrap().sup_norm() < 1e-12);
        }
    }

    #[test]
    fn elliptic_solution_is_a_fixed_point() {
        let c1 = 1f64.cosh();
        let phi = format!("{c1:?}");
        let p = spec(&[1.0, 1.0], "u", "p1 + p2", &["cosh(x)", "cosh(x)"], &[&phi, &phi], 1.0, 1.0, (0.0, vec![0.0, 0.0]));
        let cfg = config(&p, 4, 201);
        let u0 = sample_initial(&p, &cfg.grid).unwrap();
        let sol = rothe_step(&p, &u0, 1, &cfg).unwrap();
        assert!(sol.solution.sub(&u0).unwrap().sup_norm() < 2e-5);
    }

    fn heat_error(sol: &ParabolicSolution<f64>) -> f64 {
        let mut err = 0.0f64;
        for (s, &t) in sol.snapshots.iter().zip(&sol.times) {
            for (j, x) in s.grid().coordinates(0).into_iter().enumerate() {
                let exact = (-FRAC_PI_2 * FRAC_PI_2 * t).exp() * (FRAC_PI_2 * x).cos();
                err = err.max((s.value(0, j) - exact).abs());
            }
        }
        err
    }

    #[test]
    fn heat_problem_to_half() {
        let p = heat(0.5);
        let sol = solve_parabolic(&p, &config(&p, 64, 201)).unwrap();
        assert_eq!(sol.snapshots.len(), 65);
        assert_eq!(*sol.times.last().unwrap(), 0.5);
        // First-order time error bound (pi/2)^4 T dt / 2.
        let bound = FRAC_PI_2.powi(4) * 0.5 * sol.dt / 2.0;
        assert!(heat_error(&sol) <= bound, "{}", heat_error(&sol));
        // The backward Euler factor (1 + dt (pi/2)^2)^(-k) is reproduced up to O(h^2).
        let lambda = FRAC_PI_2 * FRAC_PI_2;
        for (k, s) in sol.snapshots.iter().enumerate() {
            let decay = (1.0 + sol.dt * lambda).powi(-(k as i32));
            for (j, x) in s.grid().coordinates(0).into_iter().enumerate() {
                assert!((s.value(0, j) - decay * (FRAC_PI_2 * x).cos()).abs() < 1e-4);
            }
        }
        assert!(sol.steps.iter().all(|s| s.f_residual.abs() <= s.f_tolerance));
        assert!(sol.steps.iter().filter(|s| s.local_bracket).count() > 50);
    }

    #[test]
    fn three_edge_kirchhoff_first_order() {
        // u_i = e^{-t}(cos x + c_i sin x) with c = (1, -0.5, -0.5) solves the heat equation exactly.
        let lengths = [1.0, 0.8, 1.2];
        let cs = [1.0, -0.5, -0.5];
        let initial: Vec<String> = cs.iter().map(|c| format!("cos(x) + {c:?}*sin(x)")).collect();
        let outer: Vec<String> = lengths
            .iter()
            .zip(&cs)
            .map(|(a, c)| format!("exp(-t)*(cos({a:?}) + {c:?}*sin({a:?}))"))
            .collect();
        let init: Vec<&str> = initial.iter().map(String::as_str).collect();
        let out: Vec<&str> = outer.iter().map(String::as_str).collect();
        let p = spec(&lengths, "0", "p1 + p2 + p3", &init, &out, 0.5, 1e-9, (0.0, vec![0.0; 3]));
        let errors: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let sol = solve_parabolic(&p, &config(&p, n, 401)).unwrap();
                let mut err = 0.0f64;
                for (s, &t) in sol.snapshots.iter().zip(&sol.times) {
                    for (i, c) in cs.iter().enumerate() {
                        for (j, x) in s.grid().coordinates(i).into_iter().enumerate() {
                            let exact = (-t).exp() * (x.cos() + c * x.sin());
                            err = err.max((s.value(i, j) - exact).abs());
                        }
                    }
                }
                err
            })
            .collect();
        assert!(errors[0] / errors[1] > 1.8 && errors[1] / errors[2] > 1.8, "{errors:?}");
    }

    #[test]
    fn interpolant_knots_and_midpoints() {
        let p = heat(0.5);
        let sol = solve_parabolic(&p, &config(&p, 16, 51)).unwrap();
        let x = sol.grid().coordinate(0, 10);
        assert_eq!(interpolant_eval(&sol, sol.times[3], x, 0).unwrap(), sol.snapshots[3].value(0, 10));
        let mid = 0.5 * (sol.times[3] + sol.times[4]);
        let want = 0.5 * (sol.snapshots[3].value(0, 10) + sol.snapshots[4].value(0, 10));
        assert!((interpolant_eval(&sol, mid, x, 0).unwrap() - want).abs() < 1e-15);
        assert!(interpolant_eval(&sol, 0.6, 0.1, 0).is_err());
        assert!(interpolant_eval(&sol, 0.1, 1.1, 0).is_err());
        assert_eq!(interpolant_eval(&sol, 0.5, 1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn interpolant_tracks_exact_heat() {
        let p = heat(0.5);
        let sol = solve_parabolic(&p, &config(&p, 64, 201)).unwrap();
        let bound = 2e-3 + FRAC_PI_2 * FRAC_PI_2 * sol.dt / 2.0;
        for (t, x) in [(0.013, 0.31), (0.2718, 0.777), (0.49, 0.05)] {
            let exact = (-FRAC_PI_2 * FRAC_PI_2 * t).exp() * (FRAC_PI_2 * x).cos();
            assert!((interpolant_eval(&sol, t, x, 0).unwrap() - exact).abs() <= bound);
        }
    }

    #[test]
    fn step_condition_on_n() {
        let p = spec(&[1.0], "u", "p1", &["0"], &["0"], 2.0, 3.0, (0.0, vec![0.0]));
        assert!(config(&p, 6, 11).time_step(&p).is_err());
        assert!(config(&p, 7, 11).time_step(&p).is_ok());
        assert!(config(&heat(1.0), 1, 11).time_step(&heat(1.0)).is_err());
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let p = spec(&[1.0], "0", "p1", &["x"], &["1"], 1.0, 1.0, (0.0, vec![0.0]));
        assert!(matches!(solve_parabolic(&p, &config(&p, 4, 11)), Err(RotheError::Incompatible(_))));
    }

    #[test]
    fn failing_step_keeps_partial_solution() {
        // F = 1 + p1^2 has no root, so step 1 fails with one retained snapshot.
        let p = spec(&[1.0], "0", "1 + p1^2", &["0"], &["0"], 1.0, 1.0, (0.0, vec![0.0]));
        let mut cfg = config(&p, 4, 11);
        cfg.compatibility_tol = None;
        let Err(RotheError::Step { k, partial, .. }) = solve_parabolic(&p, &cfg) else {
            panic!("expected step failure")
        };
        assert_eq!(k, 1);
        assert_eq!(partial.snapshots.len(), 1);
    }

    #[test]
    fn parabolic_comparison() {
        let lo = spec(&[1.0, 1.0], "u", "p1 + p2 - u", &["0.2*cos(x)", "0.2*cos(x)"], &["0.2*cos(1)", "0.2*cos(1)"], 0.5, 1.0, (0.0, vec![0.0, 0.0]));
        let hi = spec(&[1.0, 1.0], "u", "p1 + p2 - u", &["0.5*cos(x)", "0.5*cos(x)"], &["0.5*cos(1)", "0.5*cos(1)"], 0.5, 1.0, (0.0, vec![0.0, 0.0]));
        let mut cfg = config(&lo, 8, 41);
        cfg.compatibility_tol = None;
        let a = solve_parabolic(&lo, &cfg).unwrap();
        let b = solve_parabolic(&hi, &cfg).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            for i in 0..2 {
                for j in 0..41 {
                    assert!(x.value(i, j) <= y.value(i, j) + 1e-8);
                }
            }
        }
    }

    #[test]
    fn truncation_of_constant_state() {
        let p = spec(&[1.0, 1.0], "u - 0.5", "p1 + p2 - u + 0.5", &["0.5", "0.5"], &["0.5", "0.5"], 0.2, 1.0, (0.5, vec![0.0, 0.0]));
        let cfg = TruncationConfig {
            lengths: vec![1.0, 2.0, 4.0],
            window: 1.0,
            spacing: 0.05,
            steps: 4,
            shooting: ShootingOptions::default(),
        };
        let r = truncation_study(&p, &cfg).unwrap();
        assert!(r.distances.iter().all(|d| *d <= 1e-12), "{:?}", r.distances);
        assert!(r.monotone);
    }

    #[test]
    fn truncation_of_compact_bump() {
        let g = "(1 + cos(pi*min(x, 1)))/2";
        let p = spec(&[1.0, 1.0], "0", "p1 + p2", &[g, g], &["0", "0"], 0.5, 1e-9, (0.0, vec![0.0, 0.0]));
        let cfg = TruncationConfig {
            lengths: vec![2.0, 4.0, 8.0],
            window: 1.0,
            spacing: 0.05,
            steps: 16,
            shooting: ShootingOptions::default(),
        };
        let r = truncation_study(&p, &cfg).unwrap();
        assert!(r.distances[1] < r.distances[0], "{:?}", r.distances);
        assert!(r.monotone);
    }
}
