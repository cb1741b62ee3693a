//! Two-point Dirichlet problems on a single edge,
//! `-sigma(x, u') u'' + H(x, u, u') = 0`, `u(0) = theta`, `u(a) = phi`,
//! discretized with central differences and solved by damped Newton.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Vars};
use crate::model::Coefficient;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdgeError {
    #[error("invalid edge problem: {0}")]
    Invalid(String),
    #[error("coefficient evaluation failed at node {node}: {source}")]
    Eval { node: usize, source: EvalError },
}

/// One edge problem. Optional terms turn it into a backward Euler step:
/// the residual gains `reaction * (u - anchor) - source`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeProblem<'a, T> {
    pub length: T,
    pub nodes: usize,
    pub sigma: &'a Coefficient,
    pub hamiltonian: &'a Coefficient,
    pub left: T,
    pub right: T,
    pub reaction: T,
    pub anchor: Option<&'a [T]>,
    pub source: Option<&'a [T]>,
}

impl<'a, T: Real> EdgeProblem<'a, T> {
    pub fn new(
        length: T,
        nodes: usize,
        sigma: &'a Coefficient,
        hamiltonian: &'a Coefficient,
        left: T,
        right: T,
    ) -> Result<Self, EdgeError> {
        let p = Self {
            length,
            nodes,
            sigma,
            hamiltonian,
            left,
            right,
            reaction: T::zero(),
            anchor: None,
            source: None,
        };
        p.check()?;
        Ok(p)
    }

    /// Adds `reaction * (u - anchor)`; `anchor` holds all node values.
    pub fn with_reaction(mut self, reaction: T, anchor: &'a [T]) -> Result<Self, EdgeError> {
        self.reaction = reaction;
        self.anchor = Some(anchor);
        self.check()?;
        Ok(self)
    }

    /// Subtracts `source` (node values) from the residual.
    pub fn with_source(mut self, source: &'a [T]) -> Result<Self, EdgeError> {
        self.source = Some(source);
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<(), EdgeError> {
        if self.nodes < 3 {
            return Err(EdgeError::Invalid(format!("need at least 3 nodes, got {}", self.nodes)));
        }
        if !(self.length > T::zero()) || !self.length.is_finite() {
            return Err(EdgeError::Invalid(format!("length must be > 0, got {}", self.length)));
        }
        if !self.left.is_finite() || !self.right.is_finite() {
            return Err(EdgeError::Invalid("boundary values must be finite".into()));
        }
        for (name, v) in [("anchor", self.anchor), ("source", self.source)] {
            if let Some(v) = v {
                if v.len() != self.nodes {
                    return Err(EdgeError::Invalid(format!(
                        "{name} has {} values for {} nodes",
                        v.len(),
                        self.nodes
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> T {
        self.length / T::from_count(self.nodes - 1)
    }

    pub fn coordinate(&self, j: usize) -> T {
        if j == self.nodes - 1 {
            self.length
        } else {
            self.length * T::from_count(j) / T::from_count(self.nodes - 1)
        }
    }

    /// Straight line from `left` to `right`.
    pub fn linear_guess(&self) -> Vec<T> {
        let last = T::from_count(self.nodes - 1);
        (0..self.nodes)
            .map(|j| {
                if j == self.nodes - 1 {
                    self.right
                } else {
                    let s = T::from_count(j) / last;
                    self.left + (self.right - self.left) * s
                }
            })
            .collect()
    }

    fn extra(&self, j: usize, v: T) -> T {
        let mut r = T::zero();
        if let Some(anchor) = self.anchor {
            r = r + self.reaction * (v - anchor[j]);
        }
        if let Some(source) = self.source {
            r = r - source[j];
        }
        r
    }

    fn local(&self, j: usize, vl: T, vc: T, vr: T) -> Result<T, EdgeError> {
        let h = self.spacing();
        let x = self.coordinate(j);
        let p = (vr - vl) / (h + h);
        let d2 = (vr - vc - vc + vl) / (h * h);
        let err = |source| EdgeError::Eval { node: j, source };
        let s = self.sigma.eval(&Vars { x, p, ..Vars::default() }).map_err(err)?;
        let hv = self
            .hamiltonian
            .eval(&Vars { x, u: vc, p, ..Vars::default() })
            .map_err(err)?;
        Ok(-s * d2 + hv + self.extra(j, vc))
    }

    /// Rounding-error scale of the residual at node `j`.
    fn local_magnitude(&self, j: usize, vl: T, vc: T, vr: T) -> Result<T, EdgeError> {
        let h = self.spacing();
        let x = self.coordinate(j);
        let p = (vr - vl) / (h + h);
        let err = |source| EdgeError::Eval { node: j, source };
        let s = self.sigma.eval(&Vars { x, p, ..Vars::default() }).map_err(err)?;
        let hv = self
            .hamiltonian
            .eval(&Vars { x, u: vc, p, ..Vars::default() })
            .map_err(err)?;
        let stencil = (vl.abs() + vc.abs() + vc.abs() + vr.abs()) / (h * h);
        Ok(s.abs() * stencil + hv.abs() + self.extra(j, vc).abs())
    }

    /// Residual and its derivatives in `(v_{j-1}, v_j, v_{j+1})`.
    fn local_jacobian(&self, j: usize, vl: T, vc: T, vr: T, mode: JacobianMode) -> Result<[T; 4], EdgeError> {
        if mode == JacobianMode::Analytic {
            if let Some(row) = self.analytic_row(j, vl, vc, vr)? {
                return Ok(row);
            }
        }
        self.fd_row(j, vl, vc, vr)
    }

    fn analytic_row(&self, j: usize, vl: T, vc: T, vr: T) -> Result<Option<[T; 4]>, EdgeError> {
        let h = self.spacing();
        let two_h = h + h;
        let h2 = h * h;
        let x = self.coordinate(j);
        let p = (vr - vl) / two_h;
        let d2 = (vr - vc - vc + vl) / h2;
        let err = |source| EdgeError::Eval { node: j, source };
        let s = self
            .sigma
            .expr()
            .eval_partials(&Vars { x, p, ..Vars::default() })
            .map_err(err)?;
        let hp = self
            .hamiltonian
            .expr()
            .eval_partials(&Vars { x, u: vc, p, ..Vars::default() })
            .map_err(err)?;
        let r = -s.value * d2 + hp.value + self.extra(j, vc);
        let react = if self.anchor.is_some() { self.reaction } else { T::zero() };
        let dl = s.dp * d2 / two_h - s.value / h2 - hp.dp / two_h;
        let dc = (s.value + s.value) / h2 + hp.du + react;
        let dr = -s.dp * d2 / two_h - s.value / h2 + hp.dp / two_h;
        let row = [r, dl, dc, dr];
        Ok(row.iter().all(|v| v.is_finite()).then_some(row))
    }

    fn fd_row(&self, j: usize, vl: T, vc: T, vr: T) -> Result<[T; 4], EdgeError> {
        let r = self.local(j, vl, vc, vr)?;
        let step = |v: T| T::lit(1e-7) * v.abs().max(T::one());
        let (hl, hc, hr) = (step(vl), step(vc), step(vr));
        let dl = (self.local(j, vl + hl, vc, vr)? - r) / hl;
        let dc = (self.local(j, vl, vc + hc, vr)? - r) / hc;
        let dr = (self.local(j, vl, vc, vr + hr)? - r) / hr;
        Ok([r, dl, dc, dr])
    }
}

/// Central-difference residual at the interior nodes of `v`.
pub fn assemble_residual<T: Real>(p: &EdgeProblem<'_, T>, v: &[T]) -> Result<Vec<T>, EdgeError> {
    p.check()?;
    if v.len() != p.nodes {
        return Err(EdgeError::Invalid(format!("{} values for {} nodes", v.len(), p.nodes)));
    }
    (1..p.nodes - 1).map(|j| p.local(j, v[j - 1], v[j], v[j + 1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Partials of the coefficient expressions; falls back to finite
    /// differences at nodes where they are not finite.
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeSolverOptions {
    /// Tolerance on `sup|R| / (1 + sup|v|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub jacobian: JacobianMode,
    /// Number of boundary-data continuation stages tried after a failed
    /// direct solve; 0 disables the fallback.
    pub continuation_stages: usize,
}

impl Default for EdgeSolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            max_halvings: 40,
            armijo: 1e-4,
            jacobian: JacobianMode::Analytic,
            continuation_stages: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailed,
    SingularJacobian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSolution<T> {
    /// All node values, `values[0] = theta`, last = `phi`.
    pub values: Vec<T>,
    /// `sup|R| / (1 + sup|v|)` at the returned iterate.
    pub residual_sup: T,
    /// Estimated rounding floor of `residual_sup`; convergence is declared
    /// below `max(tol, residual_floor)`.
    pub residual_floor: T,
    pub newton_iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub residual_history: Vec<T>,
}

pub fn solve_dirichlet_edge<T: Real>(
    p: &EdgeProblem<'_, T>,
    opts: &EdgeSolverOptions,
) -> Result<EdgeSolution<T>, EdgeError> {
    solve_dirichlet_edge_from(p, None, opts)
}

/// As [`solve_dirichlet_edge`], starting from `warm` (all node values) when
/// given. The endpoints of `warm` are overwritten by the boundary data.
pub fn solve_dirichlet_edge_from<T: Real>(
    p: &EdgeProblem<'_, T>,
    warm: Option<&[T]>,
    opts: &EdgeSolverOptions,
) -> Result<EdgeSolution<T>, EdgeError> {
    p.check()?;
    let init = match warm {
        Some(w) if w.len() == p.nodes && w.iter().all(|v| v.is_finite()) => w.to_vec(),
        Some(w) if w.len() != p.nodes => {
            return Err(EdgeError::Invalid(format!("warm start has {} values for {} nodes", w.len(), p.nodes)))
        }
        _ => p.linear_guess(),
    };
    let first = newton(p, init, opts)?;
    if first.converged || opts.continuation_stages == 0 {
        return Ok(first);
    }

    // Walk the left value from the right one towards theta.
    let stages = opts.continuation_stages;
    let mut v = vec![p.right; p.nodes];
    let mut iterations = first.newton_iterations;
    let mut history = first.residual_history.clone();
    let mut last = first;
    for k in 1..=stages {
        let s = T::from_count(k) / T::from_count(stages);
        let mut stage = *p;
        stage.left = p.right + (p.left - p.right) * s;
        let sol = newton(&stage, v, opts)?;
        iterations += sol.newton_iterations;
        history.extend_from_slice(&sol.residual_history);
        v = sol.values.clone();
        let ok = sol.converged;
        last = sol;
        if !ok {
            break;
        }
    }
    last.newton_iterations = iterations;
    last.residual_history = history;
    Ok(last)
}

fn norms<T: Real>(p: &EdgeProblem<'_, T>, v: &[T]) -> Result<(Vec<T>, T, T), EdgeError> {
    let r = assemble_residual(p, v)?;
    let scale = T::one() + crate::scalar::sup_abs(v);
    let sup = crate::scalar::sup_abs(&r) / scale;
    let l2 = r.iter().map(|x| *x * *x).sum::<T>().sqrt();
    Ok((r, sup, l2))
}

fn residual_floor<T: Real>(p: &EdgeProblem<'_, T>, v: &[T]) -> Result<T, EdgeError> {
    let mut worst = T::zero();
    for j in 1..p.nodes - 1 {
        worst = worst.max(p.local_magnitude(j, v[j - 1], v[j], v[j + 1])?);
    }
    let scale = T::one() + crate::scalar::sup_abs(v);
    Ok(T::lit(8.0) * T::epsilon() * worst / scale)
}

fn newton<T: Real>(p: &EdgeProblem<'_, T>, mut v: Vec<T>, opts: &EdgeSolverOptions) -> Result<EdgeSolution<T>, EdgeError> {
    let n = p.nodes;
    v[0] = p.left;
    v[n - 1] = p.right;
    let tol = T::lit(opts.tol);
    let armijo = T::lit(opts.armijo);
    let (_, mut sup, mut l2) = norms(p, &v)?;
    let mut history = vec![sup];
    let mut iterations = 0;
    let m = n - 2;
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m]);

    let finish = |v: Vec<T>, sup: T, iterations: usize, stop: StopReason, history: Vec<T>| -> Result<EdgeSolution<T>, EdgeError> {
        let floor = residual_floor(p, &v)?;
        Ok(EdgeSolution {
            values: v,
            residual_sup: sup,
            residual_floor: floor,
            newton_iterations: iterations,
            converged: stop == StopReason::Converged,
            stop,
            residual_history: history,
        })
    };

    // Below the rounding floor the residual says nothing more, but the
    // iterate may still be far from the root (a straight-line start in f32
    // can sit there), so one update from below the floor is required.
    let mut polished = false;
    loop {
        let floor = residual_floor(p, &v)?;
        let below_floor = sup <= floor;
        if sup <= tol || (below_floor && polished) {
            return finish(v, sup, iterations, StopReason::Converged, history);
        }
        if iterations >= opts.max_iter {
            return finish(v, sup, iterations, StopReason::MaxIterations, history);
        }
        iterations += 1;

        for j in 1..n - 1 {
            let [r, dl, dc, dr] = p.local_jacobian(j, v[j - 1], v[j], v[j + 1], opts.jacobian)?;
            let k = j - 1;
            lower[k] = dl;
            diag[k] = dc;
            upper[k] = dr;
            rhs[k] = -r;
        }
        let Some(step) = thomas(&lower, &diag, &upper, &rhs) else {
            return finish(v, sup, iterations, StopReason::SingularJacobian, history);
        };

        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = v.clone();
            for (k, d) in step.iter().enumerate() {
                trial[k + 1] = v[k + 1] + lambda * *d;
            }
            // Evaluation failures along a trial step count as no decrease.
            if let Ok((_, tsup, tl2)) = norms(p, &trial) {
                if tl2 <= (T::one() - armijo * lambda) * l2 {
                    accepted = Some((trial, tsup, tl2));
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        match accepted {
            Some((trial, tsup, tl2)) => {
                v = trial;
                sup = tsup;
                l2 = tl2;
                history.push(sup);
                polished = below_floor;
            }
            None if below_floor => return finish(v, sup, iterations, StopReason::Converged, history),
            None => return finish(v, sup, iterations, StopReason::LineSearchFailed, history),
        }
    }
}

/// Tridiagonal solve without pivoting; `None` on a vanishing pivot.
fn thomas<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Option<Vec<T>> {
    let m = diag.len();
    let mut c = vec![T::zero(); m];
    let mut d = vec![T::zero(); m];
    let tiny = T::min_positive_value();
    let mut beta = diag[0];
    if beta.abs() <= tiny || !beta.is_finite() {
        return None;
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..m {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.abs() <= tiny || !beta.is_finite() {
            return None;
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..m - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    d.iter().all(|v| v.is_finite()).then_some(d)
}
