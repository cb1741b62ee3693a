//! Convergence ladders: solve at a sequence of resolutions in `n` (time
//! steps) or `N` (nodes per edge), measure sup errors and fit the order.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::Vars;
use crate::graph::JunctionGrid;
use crate::model::{Coefficient, ModelError, ProblemSpec};
use crate::rothe::{solve_parabolic, ParabolicSolution, RotheConfig, RotheError};
use crate::scalar::Real;
use crate::shooting::ShootingOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderAxis {
    /// Varies `n`; the node count is held fixed.
    Steps,
    /// Varies `N`; the step count is held fixed.
    Nodes,
}

impl LadderAxis {
    /// Order a smooth problem must reach for a PASS.
    pub fn threshold(self) -> f64 {
        match self {
            LadderAxis::Steps => 0.9,
            LadderAxis::Nodes => 1.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub axis: LadderAxis,
    pub values: Vec<usize>,
    /// The resolution held fixed on the other axis.
    pub fixed: usize,
}

/// Where a reference value is wanted: snapshot `k` at time `t`, node at
/// `x` of `edge`, for a run with step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub edge: usize,
    pub k: usize,
    pub t: f64,
    pub x: f64,
    pub dt: f64,
}

pub type OracleFn = Arc<dyn Fn(OraclePoint) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Reference {
    /// Exact `u_i(t, x)` per edge.
    ClosedForm(Vec<Coefficient>),
    /// Every rung against the finest one, sampled at the coarse points.
    SelfReference,
    /// A reference that may depend on the discretization, such as the exact
    /// solution of the time-discrete problem.
    Oracle { name: String, eval: OracleFn },
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

impl Reference {
    pub fn descriptor(&self) -> String {
        match self {
            Reference::ClosedForm(c) => {
                let parts: Vec<&str> = c.iter().map(|c| c.text()).collect();
                format!("closed form [{}]", parts.join("; "))
            }
            Reference::SelfReference => "finest rung".to_string(),
            Reference::Oracle { name, .. } => format!("oracle {name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderVerdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT-APPLICABLE")]
    NotApplicable,
}

impl OrderVerdict {
    pub fn label(self) -> &'static str {
        match self {
            OrderVerdict::Pass => "PASS",
            OrderVerdict::Fail => "FAIL",
            OrderVerdict::NotApplicable => "NOT-APPLICABLE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rung {
    pub resolution: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub axis: LadderAxis,
    pub fixed: usize,
    pub reference: String,
    pub rungs: Vec<Rung>,
    /// Least-squares slope of `ln error` against `ln(1 / resolution)`.
    pub order: Option<f64>,
    /// Root-mean-square residual of that fit.
    pub fit_residual: Option<f64>,
    pub threshold: f64,
    pub verdict: OrderVerdict,
}

impl ConvergenceReport {
    pub fn to_text(&self) -> String {
        let axis = match self.axis {
            LadderAxis::Steps => "n",
            LadderAxis::Nodes => "N",
        };
        let other = match self.axis {
            LadderAxis::Steps => "N",
            LadderAxis::Nodes => "n",
        };
        let mut out = format!("reference: {}\nfixed {other} = {}\n", self.reference, self.fixed);
        for r in &self.rungs {
            out.push_str(&format!("{axis} = {:<6} sup error {:.6e}\n", r.resolution, r.error));
        }
        match (self.order, self.fit_residual) {
            (Some(o), Some(res)) => out.push_str(&format!(
                "order {o:.4} (fit residual {res:.2e}, threshold {}) {}\n",
                self.threshold,
                self.verdict.label()
            )),
            _ => out.push_str(&format!("order {}\n", self.verdict.label())),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError<T: Real> {
    #[error("ladder: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rung {resolution}: {source}")]
    Rung {
        resolution: usize,
        source: RotheError<T>,
        /// Errors of the rungs below the failing one.
        partial: Box<ConvergenceReport>,
    },
}

/// All errors at or below this level make the order NOT-APPLICABLE.
pub const EXACT_LEVEL: f64 = 1e-12;

/// `(slope, rms residual)` of the least-squares line through `(x, y)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}

fn step_measure(axis: LadderAxis, resolution: usize) -> f64 {
    match axis {
        LadderAxis::Steps => 1.0 / resolution as f64,
        LadderAxis::Nodes => 1.0 / (resolution - 1) as f64,
    }
}

fn report(ladder: &Ladder, reference: &Reference, rungs: Vec<Rung>) -> ConvergenceReport {
    let threshold = ladder.axis.threshold();
    let positive: Vec<&Rung> = rungs.iter().filter(|r| r.error > 0.0).collect();
    let (order, fit_residual, verdict) = if rungs.iter().all(|r| r.error <= EXACT_LEVEL) {
        (None, None, OrderVerdict::NotApplicable)
    } else if positive.len() < 2 {
        (None, None, OrderVerdict::Fail)
    } else {
        let x: Vec<f64> = positive.iter().map(|r| step_measure(ladder.axis, r.resolution).ln()).collect();
        let y: Vec<f64> = positive.iter().map(|r| r.error.ln()).collect();
        let (slope, res) = fit_line(&x, &y);
        let verdict = if slope >= threshold {
            OrderVerdict::Pass
        } else {
            OrderVerdict::Fail
        };
        (Some(slope), Some(res), verdict)
    };
    ConvergenceReport {
        axis: ladder.axis,
        fixed: ladder.fixed,
        reference: reference.descriptor(),
        rungs,
        order,
        fit_residual,
        threshold,
        verdict,
    }
}

fn closed_form_error<T: Real>(sol: &ParabolicSolution<T>, exact: &[Coefficient]) -> Result<f64, ModelError> {
    let grid = sol.grid();
    let mut worst = 0.0f64;
    for (snap, &t) in sol.snapshots.iter().zip(&sol.times) {
        for (i, c) in exact.iter().enumerate() {
            for (j, x) in grid.coordinates(i).into_iter().enumerate() {
                let u = c
                    .eval(&Vars {
                        t,
                        x,
                        ..Vars::default()
                    })
                    .map_err(|source| ModelError::Eval {
                        coefficient: format!("reference[{i}]"),
                        point: format!("t={t}, x={x}"),
                        source,
                    })?;
                worst = worst.max((snap.value(i, j) - u).as_f64().abs());
            }
        }
    }
    Ok(worst)
}

fn oracle_error<T: Real>(sol: &ParabolicSolution<T>, eval: &OracleFn) -> f64 {
    let grid = sol.grid();
    let dt = sol.dt.as_f64();
    let mut worst = 0.0f64;
    for (k, (snap, t)) in sol.snapshots.iter().zip(&sol.times).enumerate() {
        for i in 0..grid.num_edges() {
            for (j, x) in grid.coordinates(i).into_iter().enumerate() {
                let u = eval(OraclePoint {
                    edge: i,
                    k,
                    t: t.as_f64(),
                    x: x.as_f64(),
                    dt,
                });
                worst = worst.max((snap.value(i, j).as_f64() - u).abs());
            }
        }
    }
    worst
}

/// Sup distance between a run and a finer nested one at the coarse points.
fn cauchy_error<T: Real>(axis: LadderAxis, coarse: &ParabolicSolution<T>, fine: &ParabolicSolution<T>) -> f64 {
    let (kr, jr) = match axis {
        LadderAxis::Steps => (fine.completed() / coarse.completed(), 1),
        LadderAxis::Nodes => (1, (fine.grid().nodes(0) - 1) / (coarse.grid().nodes(0) - 1)),
    };
    let mut worst = 0.0f64;
    for (k, snap) in coarse.snapshots.iter().enumerate() {
        let other = &fine.snapshots[k * kr];
        for i in 0..snap.grid().num_edges() {
            for j in 0..snap.grid().nodes(i) {
                worst = worst.max((snap.value(i, j) - other.value(i, j * jr)).as_f64().abs());
            }
        }
    }
    worst
}

fn check_ladder<T: Real>(spec: &ProblemSpec<T>, ladder: &Ladder, reference: &Reference) -> Result<(), ConvergenceError<T>> {
    let v = &ladder.values;
    let needed = match reference {
        Reference::ClosedForm(c) => {
            if c.len() != spec.num_edges() {
                return Err(ConvergenceError::Config(format!(
                    "reference has {} expressions for {} edges",
                    c.len(),
                    spec.num_edges()
                )));
            }
            3
        }
        Reference::SelfReference => 4,
        Reference::Oracle { .. } => 3,
    };
    if v.len() < needed {
        return Err(ConvergenceError::Config(format!(
            "need at least {needed} rungs, got {}",
            v.len()
        )));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConvergenceError::Config("rungs must increase strictly".into()));
    }
    if ladder.axis == LadderAxis::Nodes && v[0] < 3 {
        return Err(ConvergenceError::Config("node rungs need at least 3 nodes".into()));
    }
    if matches!(reference, Reference::SelfReference) {
        let finest = v[v.len() - 1];
        let nested = v.iter().all(|&r| match ladder.axis {
            LadderAxis::Steps => finest.is_multiple_of(r),
            LadderAxis::Nodes => (finest - 1).is_multiple_of(r - 1),
        });
        if !nested {
            return Err(ConvergenceError::Config(
                "self-reference needs every rung to divide the finest one".into(),
            ));
        }
    }
    Ok(())
}

/// Runs every rung of the ladder (concurrently) and fits the order.
pub fn run_convergence<T: Real>(
    spec: &ProblemSpec<T>,
    reference: &Reference,
    ladder: &Ladder,
    shooting: &ShootingOptions,
) -> Result<ConvergenceReport, ConvergenceError<T>> {
    check_ladder(spec, ladder, reference)?;
    let runs: Vec<Result<ParabolicSolution<T>, RotheError<T>>> = ladder
        .values
        .par_iter()
        .map(|&r| {
            let (steps, nodes) = match ladder.axis {
                LadderAxis::Steps => (r, ladder.fixed),
                LadderAxis::Nodes => (ladder.fixed, r),
            };
            let grid = JunctionGrid::uniform(spec.junction().clone(), nodes).map_err(ModelError::from)?;
            let mut cfg = RotheConfig::new(steps, grid);
            cfg.shooting = *shooting;
            solve_parabolic(spec, &cfg)
        })
        .collect();

    let failed = runs.iter().position(|r| r.is_err());
    let ok: Vec<&ParabolicSolution<T>> = runs.iter().take_while(|r| r.is_ok()).map(|r| r.as_ref().unwrap()).collect();
    let mut rungs = Vec::new();
    match reference {
        Reference::ClosedForm(exact) => {
            for (sol, &r) in ok.iter().zip(&ladder.values) {
                rungs.push(Rung {
                    resolution: r,
                    error: closed_form_error(sol, exact)?,
                });
            }
        }
        Reference::SelfReference => {
            // Without the finest run there is nothing to compare against.
            if failed.is_none() {
                let finest = ok[ok.len() - 1];
                for (sol, &r) in ok[..ok.len() - 1].iter().zip(&ladder.values) {
                    rungs.push(Rung {
                        resolution: r,
                        error: cauchy_error(ladder.axis, sol, finest),
                    });
                }
            }
        }
        Reference::Oracle { eval, .. } => {
            for (sol, &r) in ok.iter().zip(&ladder.values) {
                rungs.push(Rung {
                    resolution: r,
                    error: oracle_error(sol, eval),
                });
            }
        }
    }
    if let Some(i) = failed {
        let source = runs.into_iter().nth(i).unwrap().unwrap_err();
        return Err(ConvergenceError::Rung {
            resolution: ladder.values[i],
            source,
            partial: Box::new(report(ladder, reference, rungs)),
        });
    }
    Ok(report(ladder, reference, rungs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CoefficientKind;
    use crate::model::parse_coefficient;
    use crate::problem_file::load_builtin;

    #[test]
    fn line_fit_recovers_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (s, r) = fit_line(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn synthetic_errors_give_orders() {
        let ladder = Ladder {
            axis: LadderAxis::Steps,
            values: vec![10, 20, 40],
            fixed: 11,
        };
        let rungs = ladder
            .values
            .iter()
            .map(|&n| Rung {
                resolution: n,
                error: 3.0 / n as f64,
            })
            .collect();
        let r = report(&ladder, &Reference::SelfReference, rungs);
        assert!((r.order.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.verdict, OrderVerdict::Pass);
        let zero = report(
            &ladder,
            &Reference::SelfReference,
            ladder.values.iter().map(|&n| Rung { resolution: n, error: 1e-14 }).collect(),
        );
        assert_eq!(zero.verdict, OrderVerdict::NotApplicable);
        assert!(zero.order.is_none());
    }

    #[test]
    fn zero_solution_is_not_applicable() {
        let p = load_builtin::<f64>("zero_solution").unwrap();
        let ladder = Ladder {
            axis: LadderAxis::Steps,
            values: vec![4, 8, 16],
            fixed: 21,
        };
        let r = run_convergence(&p.spec, &Reference::ClosedForm(p.reference.unwrap()), &ladder, &ShootingOptions::default())
            .unwrap();
        assert!(r.rungs.iter().all(|g| g.error <= 1e-12), "{r:?}");
        assert_eq!(r.verdict, OrderVerdict::NotApplicable);
        assert!(r.to_text().contains("NOT-APPLICABLE"));
    }

    #[test]
    fn ladder_validation() {
        let p = load_builtin::<f64>("zero_solution").unwrap();
        let opts = ShootingOptions::default();
        let bad = |values: Vec<usize>, reference: &Reference| {
            let ladder = Ladder {
                axis: LadderAxis::Nodes,
                values,
                fixed: 4,
            };
            matches!(run_convergence(&p.spec, reference, &ladder, &opts), Err(ConvergenceError::Config(_)))
        };
        let exact = Reference::ClosedForm(p.reference.clone().unwrap());
        assert!(bad(vec![11, 21], &exact));
        assert!(bad(vec![21, 11, 41], &exact));
        assert!(bad(vec![11, 21, 41], &Reference::SelfReference));
        assert!(bad(vec![11, 21, 31, 41], &Reference::SelfReference));
        assert!(!bad(vec![5, 11, 21, 41], &Reference::SelfReference));
        let one = Reference::ClosedForm(vec![parse_coefficient("0", CoefficientKind::Solution).unwrap()]);
        assert!(bad(vec![11, 21, 41], &one));
    }

    #[test]
    fn failing_rung_keeps_partial_report() {
        let p = load_builtin::<f64>("kirchhoff_cosh_2edge").unwrap();
        let mut opts = ShootingOptions::default();
        opts.edge.max_iter = 0;
        let ladder = Ladder {
            axis: LadderAxis::Steps,
            values: vec![4, 8, 16],
            fixed: 11,
        };
        match run_convergence(&p.spec, &Reference::ClosedForm(p.reference.unwrap()), &ladder, &opts) {
            Err(ConvergenceError::Rung { resolution, partial, .. }) => {
                assert_eq!(resolution, 4);
                assert!(partial.rungs.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
