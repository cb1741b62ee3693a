//! Estimate monitors on computed solutions: discrete Hölder seminorms, the
//! interpolation constant, time-difference and uniform bounds, boundary
//! barriers, comparison and residual checks.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use rayon::prelude::*;

use crate::graph::{node_derivatives, GridFunction, JunctionGrid};
use crate::model::{ModelError, ProblemSpec};
use crate::rothe::{initial_defect, solve_parabolic, ParabolicSolution, RotheConfig, RotheError};
use crate::scalar::Real;
use crate::shooting::{junction_residual, JunctionProblem, ShootingOptions, SolveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("empty sample set")]
    Empty,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("solutions live on different grids or time grids")]
    GridMismatch,
    #[error("no beta <= 2^60 satisfies the barrier condition")]
    NoBarrier,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Values `values[k][j]` of a function at `(times[k], xs[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSamples {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeSamples {
    pub fn from_fn(times: Vec<f64>, xs: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = times.iter().map(|&t| xs.iter().map(|&x| f(t, x)).collect()).collect();
        Self { times, xs, values }
    }

    /// One edge of a parabolic solution, every snapshot and node.
    pub fn from_solution<T: Real>(sol: &ParabolicSolution<T>, edge: usize) -> Self {
        let xs = sol.grid().coordinates(edge).iter().map(|x| x.as_f64()).collect();
        let values = sol
            .snapshots
            .iter()
            .map(|s| s.edge_nodes(edge).iter().map(|v| v.as_f64()).collect())
            .collect();
        Self {
            times: sol.times.iter().map(|t| t.as_f64()).collect(),
            xs,
            values,
        }
    }

    /// Discrete `d/dx` in every time slice.
    pub fn x_derivative(&self) -> Result<Self, AnalysisError> {
        if self.xs.len() < 3 {
            return Err(AnalysisError::Invalid("need at least 3 x samples".into()));
        }
        let h = (self.xs[self.xs.len() - 1] - self.xs[0]) / (self.xs.len() - 1) as f64;
        Ok(Self {
            times: self.times.clone(),
            xs: self.xs.clone(),
            values: self.values.iter().map(|row| node_derivatives(row, h)).collect(),
        })
    }

    fn check(&self) -> Result<(), AnalysisError> {
        if self.times.is_empty() || self.xs.is_empty() {
            return Err(AnalysisError::Empty);
        }
        if self.values.len() != self.times.len() || self.values.iter().any(|r| r.len() != self.xs.len()) {
            return Err(AnalysisError::Invalid("value table does not match the sample axes".into()));
        }
        Ok(())
    }
}

/// `sup |f(a) - f(b)| / |a - b|^alpha` over pairs of distinct points with
/// separation at most `max_sep`, plus the number of pairs visited.
fn holder_1d(points: &[f64], values: impl Fn(usize) -> f64, alpha: f64, max_sep: f64) -> (f64, usize) {
    let mut best = 0.0f64;
    let mut pairs = 0;
    for a in 0..points.len() {
        let fa = values(a);
        for b in a + 1..points.len() {
            let d = (points[b] - points[a]).abs();
            if d > max_sep || d == 0.0 {
                continue;
            }
            pairs += 1;
            best = best.max((values(b) - fa).abs() / d.powf(alpha));
        }
    }
    (best, pairs)
}

fn check_alpha(alpha: f64) -> Result<(), AnalysisError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(AnalysisError::Invalid(format!("exponent {alpha} outside (0, 1]")))
    }
}

/// Hölder seminorm in `x`, all pairs within each time slice, `|x - y| <= 1`.
pub fn holder_seminorm_x(f: &SpaceTimeSamples, alpha: f64) -> Result<f64, AnalysisError> {
    Ok(holder_x(f, alpha, 1.0)?.0)
}

/// Hölder seminorm in `t`, all pairs within each spatial column, `|t - s| <= 1`.
pub fn holder_seminorm_t(f: &SpaceTimeSamples, alpha: f64) -> Result<f64, AnalysisError> {
    Ok(holder_t(f, alpha, 1.0)?.0)
}

fn holder_x(f: &SpaceTimeSamples, alpha: f64, max_sep: f64) -> Result<(f64, usize), AnalysisError> {
    f.check()?;
    check_alpha(alpha)?;
    Ok(f.values.iter().fold((0.0, 0), |(s, n), row| {
        let (v, c) = holder_1d(&f.xs, |j| row[j], alpha, max_sep);
        (s.max(v), n + c)
    }))
}

fn holder_t(f: &SpaceTimeSamples, alpha: f64, max_sep: f64) -> Result<(f64, usize), AnalysisError> {
    f.check()?;
    check_alpha(alpha)?;
    Ok((0..f.xs.len()).fold((0.0, 0), |(s, n), j| {
        let (v, c) = holder_1d(&f.times, |k| f.values[k][j], alpha, max_sep);
        (s.max(v), n + c)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub alpha: f64,
    pub seminorm_x: f64,
    pub seminorm_t: f64,
    pub pair_count: usize,
    pub max_pair_separation: f64,
}

pub fn holder_report(f: &SpaceTimeSamples, alpha: f64) -> Result<HolderReport, AnalysisError> {
    let (sx, nx) = holder_x(f, alpha, 1.0)?;
    let (st, nt) = holder_t(f, alpha, 1.0)?;
    Ok(HolderReport {
        alpha,
        seminorm_x: sx,
        seminorm_t: st,
        pair_count: nx + nt,
        max_pair_separation: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateVerdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "UNCHECKED")]
    Unchecked,
}

impl EstimateVerdict {
    pub fn label(self) -> &'static str {
        match self {
            EstimateVerdict::Pass => "PASS",
            EstimateVerdict::Fail => "FAIL",
            EstimateVerdict::Unchecked => "UNCHECKED",
        }
    }
}

/// One monitored inequality `measured <= bound (1 + margin)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateEntry {
    pub lemma_id: String,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub verdict: EstimateVerdict,
    pub witnesses: Vec<WitnessMap>,
}

impl EstimateEntry {
    fn judged(lemma_id: &str, measured: f64, bound: f64, margin: f64, witnesses: Vec<WitnessMap>) -> Self {
        let verdict = if measured <= bound * (1.0 + margin) {
            EstimateVerdict::Pass
        } else {
            EstimateVerdict::Fail
        };
        Self {
            lemma_id: lemma_id.to_string(),
            measured,
            bound,
            margin,
            verdict,
            witnesses,
        }
    }

    fn unchecked(lemma_id: &str, reason: &str) -> Self {
        Self {
            lemma_id: lemma_id.to_string(),
            measured: f64::NAN,
            bound: f64::NAN,
            margin: 0.0,
            verdict: EstimateVerdict::Unchecked,
            witnesses: vec![WitnessMap::from([("reason".to_string(), Value::from(reason))])],
        }
    }
}

/// Named values locating or explaining a verdict.
pub type WitnessMap = BTreeMap<String, Value>;

/// Whole numbers (indices, counts) are stored as JSON integers.
fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

fn witness(pairs: &[(&str, f64)]) -> WitnessMap {
    pairs.iter().map(|(k, v)| (k.to_string(), number(*v))).collect()
}

/// `C(nu1, nu2, gamma) = 2 nu2 (nu1 / (gamma nu2))^(gamma/(1+gamma)) + 2 nu1 (gamma nu2 / nu1)^(-1/(1+gamma))`.
pub fn interpolation_bound(nu1: f64, nu2: f64, gamma: f64) -> Result<f64, AnalysisError> {
    if !(nu1 > 0.0 && nu2 > 0.0) || !(gamma > 0.0 && gamma <= 1.0) {
        return Err(AnalysisError::Invalid(format!(
            "need nu1, nu2 > 0 and gamma in (0, 1], got ({nu1}, {nu2}, {gamma})"
        )));
    }
    let e = 1.0 + gamma;
    Ok(2.0 * nu2 * (nu1 / (gamma * nu2)).powf(gamma / e) + 2.0 * nu1 * (gamma * nu2 / nu1).powf(-1.0 / e))
}

/// Measures `nu1` (Hölder-`alpha` constant of `f` in `t`) and `nu2`
/// (Hölder-`gamma` constant of `d_x f` in `x`), then compares the
/// Hölder-`alpha gamma / (1 + gamma)` constant of `d_x f` in `t` with
/// `C(nu1, nu2, gamma)`. Time pairs are limited to the range where the
/// inequality is derived: `|t - s| <= min(1, ((3R/2)^(1+gamma) gamma nu2 / nu1)^(1/alpha))`.
pub fn check_interpolation(f: &SpaceTimeSamples, alpha: f64, gamma: f64, margin: f64) -> Result<EstimateEntry, AnalysisError> {
    check_alpha(alpha)?;
    check_alpha(gamma)?;
    let fx = f.x_derivative()?;
    let (nu1, _) = holder_t(f, alpha, 1.0)?;
    let (nu2, _) = holder_x(&fx, gamma, 1.0)?;
    let id = "interpolation";
    if nu1 == 0.0 || nu2 == 0.0 {
        // Constant in t or affine in x: d_x f is constant in t.
        let (measured, _) = holder_t(&fx, alpha * gamma / (1.0 + gamma), 1.0)?;
        return Ok(EstimateEntry::judged(id, measured, 0.0, margin, vec![witness(&[("nu1", nu1), ("nu2", nu2)])]));
    }
    let r = f.xs[f.xs.len() - 1] - f.xs[0];
    let window = ((1.5 * r).powf(1.0 + gamma) * gamma * nu2 / nu1).powf(1.0 / alpha).min(1.0);
    let (measured, pairs) = holder_t(&fx, alpha * gamma / (1.0 + gamma), window)?;
    let bound = interpolation_bound(nu1, nu2, gamma)?;
    Ok(EstimateEntry::judged(
        id,
        measured,
        bound,
        margin,
        vec![witness(&[
            ("nu1", nu1),
            ("nu2", nu2),
            ("alpha", alpha),
            ("gamma", gamma),
            ("t_window", window),
            ("pairs", pairs as f64),
        ])],
    ))
}

/// `M_0, M_1, ..., M_n` with `M_k = n / (n - c_tilde) M_{k-1}`.
pub fn recursion_table(m0: f64, c_tilde: f64, n: usize) -> Result<Vec<f64>, AnalysisError> {
    let nf = n as f64;
    if !(nf > c_tilde) {
        return Err(AnalysisError::Invalid(format!("n = {n} must exceed C_H T = {c_tilde}")));
    }
    let q = nf / (nf - c_tilde);
    let mut table = Vec::with_capacity(n + 1);
    table.push(m0);
    for k in 1..=n {
        table.push(q * table[k - 1]);
    }
    Ok(table)
}

/// `max_k sup|u_k - u_{k-1}| / dt` with the location of the maximum.
fn time_difference<T: Real>(sol: &ParabolicSolution<T>) -> (f64, WitnessMap) {
    let dt = sol.dt.as_f64();
    let mut best = (0.0, witness(&[]));
    for k in 1..sol.snapshots.len() {
        let (a, b) = (&sol.snapshots[k - 1], &sol.snapshots[k]);
        for i in 0..a.grid().num_edges() {
            for j in 0..a.grid().nodes(i) {
                let d = (b.value(i, j) - a.value(i, j)).as_f64().abs() / dt;
                if d > best.0 {
                    best = (d, witness(&[("k", k as f64), ("edge", i as f64), ("node", j as f64)]));
                }
            }
        }
    }
    best
}

/// `sup |d_t f|` sampled at the grid nodes and 257 times.
fn forcing_rate<T: Real>(spec: &ProblemSpec<T>, sol: &ParabolicSolution<T>) -> Result<f64, AnalysisError> {
    if spec.forcing_coefficient(0).is_none() {
        return Ok(0.0);
    }
    let horizon = spec.horizon();
    let samples = 256;
    let dt = horizon / T::from_count(samples);
    let mut rate = 0.0f64;
    for i in 0..spec.num_edges() {
        for x in sol.grid().coordinates(i) {
            for s in 0..=samples {
                let t = T::from_count(s) * dt;
                let (a, b) = ((t - dt).max(T::zero()), (t + dt).min(horizon));
                let d = (spec.forcing(i, b, x)? - spec.forcing(i, a, x)?) / (b - a);
                rate = rate.max(d.as_f64().abs());
            }
        }
    }
    Ok(rate)
}

/// Checks `max_k sup|u_k - u_{k-1}| / dt <= (n / (n - C_H T))^n (M_0 + T sup|d_t f|)`.
/// Returns the entry and the recursion table `M_0 .. M_n`.
pub fn time_difference_bound<T: Real>(
    spec: &ProblemSpec<T>,
    sol: &ParabolicSolution<T>,
    margin: f64,
) -> Result<(EstimateEntry, Vec<f64>), AnalysisError> {
    let n = sol.completed();
    let c_tilde = (spec.envelope().c_h * spec.horizon()).as_f64();
    let m0 = initial_defect(spec, sol.grid())?.as_f64() + spec.horizon().as_f64() * forcing_rate(spec, sol)?;
    let table = recursion_table(m0, c_tilde, n)?;
    let (measured, w) = time_difference(sol);
    let mut entry = EstimateEntry::judged("time_difference", measured, table[n], margin, vec![w]);
    entry.witnesses.push(witness(&[("m0", m0), ("c_tilde", c_tilde), ("n", n as f64)]));
    Ok((entry, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierParams {
    pub beta: f64,
    pub theta_bar: f64,
    pub kappa: f64,
}

/// Smallest `beta` in `{1, 2, 4, ..., 2^60}` with
/// `beta >= mu(2M)/nu (1 + 1/beta^2) + M/(nu beta^2)`, then
/// `theta_bar = beta^2 e^(2 beta M) + e^(2 beta M) / min a` and
/// `kappa = (e^(2 beta M) - 1) / theta_bar`.
pub fn barrier_params(m: f64, mu_2m: f64, nu_lower: f64, min_length: f64) -> Result<BarrierParams, AnalysisError> {
    if !(m > 0.0) || !(nu_lower > 0.0) || !(min_length > 0.0) || !(mu_2m >= 0.0) {
        return Err(AnalysisError::Invalid(format!(
            "need M > 0, mu >= 0, nu > 0, min a > 0; got ({m}, {mu_2m}, {nu_lower}, {min_length})"
        )));
    }
    let beta = (0..=60)
        .map(|e| 2f64.powi(e))
        .find(|&b| b >= mu_2m / nu_lower * (1.0 + 1.0 / (b * b)) + m / (nu_lower * b * b))
        .ok_or(AnalysisError::NoBarrier)?;
    let growth = (2.0 * beta * m).exp();
    let theta_bar = beta * beta * growth + growth / min_length;
    Ok(BarrierParams {
        beta,
        theta_bar,
        kappa: (2.0 * beta * m).exp_m1() / theta_bar,
    })
}

/// `M = sup|u| + sup|u_k - u_{k-1}| / dt` over all snapshots.
pub fn barrier_level<T: Real>(sol: &ParabolicSolution<T>) -> f64 {
    let sup_u = sol.snapshots.iter().map(|s| s.sup_norm().as_f64()).fold(0.0, f64::max);
    sup_u + time_difference(sol).0
}

/// Checks `|u(x) - u(0)| <= ln(1 + theta_bar x) / beta` at every node with
/// `x <= kappa` of every snapshot. `measured` is the largest ratio of the
/// two sides; `tol` absorbs solver round-off.
pub fn verify_barrier<T: Real>(sol: &ParabolicSolution<T>, params: &BarrierParams, tol: f64) -> EstimateEntry {
    let mut ratio = 0.0f64;
    let mut violation = None;
    let mut nodes = 0;
    for (k, s) in sol.snapshots.iter().enumerate() {
        let u0 = s.vertex_value().as_f64();
        for i in 0..s.grid().num_edges() {
            for j in 1..s.grid().nodes(i) {
                let x = s.grid().coordinate(i, j).as_f64();
                if x > params.kappa {
                    break;
                }
                nodes += 1;
                let w = (params.theta_bar * x).ln_1p() / params.beta;
                let d = (s.value(i, j).as_f64() - u0).abs();
                ratio = ratio.max(d / w);
                if d > w + tol && violation.is_none() {
                    violation = Some(witness(&[("k", k as f64), ("edge", i as f64), ("node", j as f64), ("excess", d - w)]));
                }
            }
        }
    }
    let mut w = vec![witness(&[
        ("beta", params.beta),
        ("theta_bar", params.theta_bar),
        ("kappa", params.kappa),
        ("nodes", nodes as f64),
    ])];
    let verdict = if nodes == 0 {
        EstimateVerdict::Unchecked
    } else if violation.is_some() {
        EstimateVerdict::Fail
    } else {
        EstimateVerdict::Pass
    };
    w.extend(violation);
    EstimateEntry {
        lemma_id: "boundary_barrier".into(),
        measured: ratio,
        bound: 1.0,
        margin: 0.0,
        verdict,
        witnesses: w,
    }
}

/// Barrier parameters from the measured level and the envelope's `mu`,
/// followed by [`verify_barrier`]. UNCHECKED when `mu` is not declared.
pub fn barrier_check<T: Real>(spec: &ProblemSpec<T>, sol: &ParabolicSolution<T>) -> Result<EstimateEntry, AnalysisError> {
    let m = barrier_level(sol);
    if m == 0.0 {
        // u vanishes identically, so both barriers hold with equality.
        return Ok(EstimateEntry::judged("boundary_barrier", 0.0, 1.0, 0.0, vec![witness(&[("level_m", 0.0)])]));
    }
    let Some(mu) = spec.envelope().mu_at(T::lit(2.0 * m)) else {
        return Ok(EstimateEntry::unchecked("boundary_barrier", "no mu bound declared"));
    };
    let mu = mu.map_err(|e| AnalysisError::Invalid(format!("mu bound: {e}")))?.as_f64();
    let params = barrier_params(
        m,
        mu,
        spec.envelope().nu_lower.as_f64(),
        spec.junction().min_length().as_f64(),
    )?;
    let mut entry = verify_barrier(sol, &params, 1e-9);
    entry.witnesses[0].insert("level_m".into(), number(m));
    entry.witnesses[0].insert("mu_2m".into(), number(mu));
    Ok(entry)
}

/// `sup|u|`, discrete `sup|d_x u|` and `max_k sup|u_k - u_{k-1}| / dt` of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformObservation {
    pub n: usize,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

pub fn observe_uniform<T: Real>(sol: &ParabolicSolution<T>) -> UniformObservation {
    let mut m1 = 0.0f64;
    let mut m2 = 0.0f64;
    for s in &sol.snapshots {
        m1 = m1.max(s.sup_norm().as_f64());
        for i in 0..s.grid().num_edges() {
            let d = node_derivatives(&s.edge_nodes(i), s.grid().spacing(i));
            m2 = m2.max(crate::scalar::sup_abs(&d).as_f64());
        }
    }
    UniformObservation {
        n: sol.completed(),
        m1,
        m2,
        m3: time_difference(sol).0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBoundsReport {
    pub observations: Vec<UniformObservation>,
    /// `(max - min) / max` over the ladder for `M1`, `M2`, `M3`.
    pub spread: [f64; 3],
    pub entries: Vec<EstimateEntry>,
}

/// n-independence of `(M1, M2, M3)`: every observation must stay within
/// twice the largest-n value.
pub fn uniform_bounds(observations: Vec<UniformObservation>) -> Result<UniformBoundsReport, AnalysisError> {
    let last = *observations
        .iter()
        .max_by_key(|o| o.n)
        .ok_or(AnalysisError::Empty)?;
    let pick = |o: &UniformObservation, c: usize| [o.m1, o.m2, o.m3][c];
    let mut spread = [0.0; 3];
    let mut entries = Vec::new();
    for (c, name) in ["uniform_bounds.m1", "uniform_bounds.m2", "uniform_bounds.m3"].iter().enumerate() {
        let hi = observations.iter().map(|o| pick(o, c)).fold(f64::MIN, f64::max);
        let lo = observations.iter().map(|o| pick(o, c)).fold(f64::MAX, f64::min);
        spread[c] = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
        let worst = observations
            .iter()
            .max_by(|a, b| pick(a, c).total_cmp(&pick(b, c)))
            .expect("non-empty");
        entries.push(EstimateEntry::judged(
            name,
            pick(worst, c),
            2.0 * pick(&last, c),
            0.0,
            vec![witness(&[("n", worst.n as f64), ("spread", spread[c])])],
        ));
    }
    Ok(UniformBoundsReport {
        observations,
        spread,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonWitness {
    pub k: usize,
    pub edge: usize,
    pub node: usize,
    pub excess: f64,
}

/// `sub <= sup + tol` at every node of every snapshot; the first violation
/// in (k, edge, node) order otherwise.
pub fn check_comparison<T: Real>(
    sub: &[GridFunction<T>],
    sup: &[GridFunction<T>],
    tol: f64,
) -> Result<Option<ComparisonWitness>, AnalysisError> {
    if sub.len() != sup.len() || sub.iter().zip(sup).any(|(a, b)| a.grid() != b.grid()) {
        return Err(AnalysisError::GridMismatch);
    }
    for (k, (a, b)) in sub.iter().zip(sup).enumerate() {
        for i in 0..a.grid().num_edges() {
            for j in 0..a.grid().nodes(i) {
                let excess = (a.value(i, j) - b.value(i, j)).as_f64();
                if excess > tol {
                    return Ok(Some(ComparisonWitness { k, edge: i, node: j, excess }));
                }
            }
        }
    }
    Ok(None)
}

/// Scaled residual `sup|R| / (1 + sup|u|)` of a grid function as a
/// solution of the stationary problem at `t = 0`.
pub fn elliptic_residual<T: Real>(spec: &ProblemSpec<T>, u: &GridFunction<T>) -> Result<T, AnalysisError> {
    let problem = JunctionProblem::elliptic(spec, u.grid())?;
    Ok(junction_residual(&problem, u)? / (T::one() + u.sup_norm()))
}

/// Scaled residual of snapshot `k >= 1` of the implicit scheme, with the
/// backward difference `(u_k - u_{k-1}) / dt` as time derivative.
pub fn snapshot_residual<T: Real>(spec: &ProblemSpec<T>, sol: &ParabolicSolution<T>, k: usize) -> Result<T, AnalysisError> {
    if k == 0 || k >= sol.snapshots.len() {
        return Err(AnalysisError::Invalid(format!("snapshot {k} has no predecessor")));
    }
    let problem = JunctionProblem::rothe_step(spec, &sol.snapshots[k - 1], sol.times[k], sol.dt)?;
    let u = &sol.snapshots[k];
    Ok(junction_residual(&problem, u)? / (T::one() + u.sup_norm()))
}

/// Collected estimate entries with the recursion table and the ladder
/// observations used to produce them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub entries: Vec<EstimateEntry>,
    pub recursion_table: Vec<f64>,
    pub uniform: Option<UniformBoundsReport>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn has_failure(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == EstimateVerdict::Fail)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{:<9} {:<20} measured {:.6e}  bound {:.6e}  margin {}\n",
                e.verdict.label(),
                e.lemma_id,
                e.measured,
                e.bound,
                e.margin
            ));
            for w in &e.witnesses {
                let parts: Vec<String> = w
                    .iter()
                    .map(|(k, v)| match v {
                        Value::String(s) => format!("{k}: {s}"),
                        other => format!("{k}={other}"),
                    })
                    .collect();
                out.push_str(&format!("          {}\n", parts.join(" ")));
            }
        }
        if let Some(u) = &self.uniform {
            out.push_str("uniform bounds ladder:\n");
            for o in &u.observations {
                out.push_str(&format!("  n={:<6} M1={:.6e} M2={:.6e} M3={:.6e}\n", o.n, o.m1, o.m2, o.m3));
            }
            out.push_str(&format!(
                "  spread M1={:.3}% M2={:.3}% M3={:.3}%\n",
                100.0 * u.spread[0],
                100.0 * u.spread[1],
                100.0 * u.spread[2]
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report is serializable")
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub nodes: usize,
    /// Step counts; the first is the base run, all of them feed the
    /// n-uniformity monitors.
    pub steps: Vec<usize>,
    pub shooting: ShootingOptions,
    /// Relative slack of the time-difference bound.
    pub margin: f64,
}

/// Solves on every step count of the ladder and collects the
/// time-difference bound and barrier check of each run, the interpolation
/// check per edge of the base run and the n-uniformity monitors.
pub fn run_estimates<T: Real>(spec: &ProblemSpec<T>, opts: &EstimateOptions) -> Result<EstimateReport, EstimateError<T>> {
    if opts.steps.is_empty() {
        return Err(EstimateError::Analysis(AnalysisError::Empty));
    }
    let grid = JunctionGrid::uniform(spec.junction().clone(), opts.nodes).map_err(ModelError::from)?;
    let runs: Vec<Result<ParabolicSolution<T>, RotheError<T>>> = opts
        .steps
        .par_iter()
        .map(|&n| {
            let mut cfg = RotheConfig::new(n, grid.clone());
            cfg.shooting = opts.shooting;
            solve_parabolic(spec, &cfg)
        })
        .collect();
    let runs: Vec<ParabolicSolution<T>> = runs.into_iter().collect::<Result<_, _>>()?;

    let mut entries = Vec::new();
    let mut recursion = Vec::new();
    for (i, sol) in runs.iter().enumerate() {
        let (mut td, table) = time_difference_bound(spec, sol, opts.margin)?;
        let mut barrier = barrier_check(spec, sol)?;
        for e in [&mut td, &mut barrier] {
            e.witnesses[0].insert("n".into(), sol.completed().into());
        }
        if i == 0 {
            recursion = table;
        }
        entries.push(td);
        entries.push(barrier);
    }
    for edge in 0..spec.num_edges() {
        let mut e = check_interpolation(&SpaceTimeSamples::from_solution(&runs[0], edge), 1.0, 1.0, 0.0)?;
        e.witnesses[0].insert("edge".into(), edge.into());
        entries.push(e);
    }
    let uniform = uniform_bounds(runs.iter().map(observe_uniform).collect())?;
    entries.extend(uniform.entries.iter().cloned());
    Ok(EstimateReport {
        entries,
        recursion_table: recursion,
        uniform: Some(uniform),
        notes: vec![
            format!("time-difference bounds allow a relative margin of {}", opts.margin),
            "interpolation check uses alpha = gamma = 1 on the base run".into(),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError<T: Real> {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] RotheError<T>),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_1d(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn holder_examples() {
        let xs = grid_1d(1001);
        let c = SpaceTimeSamples::from_fn(vec![0.0], xs.clone(), |_, _| 3.0);
        assert_eq!(holder_seminorm_x(&c, 0.5).unwrap(), 0.0);
        let r = SpaceTimeSamples::from_fn(vec![0.0], xs.clone(), |_, x| x.sqrt());
        assert!((holder_seminorm_x(&r, 0.5).unwrap() - 1.0).abs() < 1e-3);
        let l = SpaceTimeSamples::from_fn(vec![0.0], grid_1d(101), |_, x| x);
        assert!((holder_seminorm_x(&l, 0.5).unwrap() - 1.0).abs() < 1e-12);
        let empty = SpaceTimeSamples::from_fn(vec![], xs, |_, _| 0.0);
        assert_eq!(holder_seminorm_x(&empty, 0.5), Err(AnalysisError::Empty));
    }

    #[test]
    fn separation_is_capped_at_one() {
        // On [0, 4], f = x: pairs further apart than 1 are ignored.
        let xs: Vec<f64> = (0..=40).map(|j| j as f64 * 0.1).collect();
        let f = SpaceTimeSamples::from_fn(vec![0.0], xs, |_, x| x);
        let r = holder_report(&f, 0.25).unwrap();
        assert!((r.seminorm_x - 1.0).abs() < 1e-12);
        assert_eq!(r.max_pair_separation, 1.0);
    }

    #[test]
    fn holder_in_time() {
        let ts = grid_1d(101);
        let f = SpaceTimeSamples::from_fn(ts, vec![0.0, 0.5], |t, x| (1.0 + x) * t);
        assert!((holder_seminorm_t(&f, 1.0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn interpolation_constant() {
        assert_eq!(interpolation_bound(1.0, 1.0, 1.0).unwrap(), 4.0);
        let c = interpolation_bound(1.0, 2.0, 1.0).unwrap();
        assert!((c - (4.0 * 0.5f64.sqrt() + 2.0 / 2f64.sqrt())).abs() < 1e-14);
        assert!((c - 4.2426).abs() < 1e-4);
        assert!(interpolation_bound(0.0, 1.0, 1.0).is_err());
        assert!(interpolation_bound(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn interpolation_check_on_smooth_function() {
        let f = SpaceTimeSamples::from_fn(grid_1d(41), grid_1d(81), |t, x| (-t).exp() * (std::f64::consts::FRAC_PI_2 * x).cos());
        let e = check_interpolation(&f, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(e.verdict, EstimateVerdict::Pass, "{e:?}");
        assert!(e.measured > 0.0 && e.measured < e.bound);
    }

    #[test]
    fn recursion_examples() {
        let t = recursion_table(1.0, 1.0, 10).unwrap();
        assert!((t[10] - (10.0f64 / 9.0).powi(10)).abs() < 1e-12);
        assert!((t[10] - 2.86797).abs() < 1e-5);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
        assert!(recursion_table(1.0, 10.0, 10).is_err());
        let flat = recursion_table(2.0, 1e-9, 64).unwrap();
        assert!((flat[64] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn recursion_limit_decreases_in_n() {
        let c = 1.5;
        let ends: Vec<f64> = [4, 8, 16, 32, 64, 128]
            .iter()
            .map(|&n| recursion_table(1.0, c, n).unwrap()[n])
            .collect();
        assert!(ends.windows(2).all(|w| w[1] <= w[0]));
        assert!(ends.iter().all(|&m| m >= c.exp()));
        assert!((ends[5] - c.exp()).abs() < 0.05);
    }

    #[test]
    fn barrier_examples() {
        let p = barrier_params(1.0, 1.0, 1.0, 1.0).unwrap();
        let e4 = 4f64.exp();
        assert_eq!(p.beta, 2.0);
        assert!((p.theta_bar - 5.0 * e4).abs() <= 1e-12 * p.theta_bar);
        assert!((p.kappa - (e4 - 1.0) / (5.0 * e4)).abs() < 1e-12);
        for m in [0.5, 3.0, 100.0, 1e6] {
            let b = barrier_params(m, 0.0, 1.0, 1.0).unwrap().beta;
            assert!(b * b * b >= m && (b == 1.0 || (b / 2.0).powi(3) < m), "{m} -> {b}");
        }
        assert_eq!(barrier_params(1.0, 1e30, 1.0, 1.0), Err(AnalysisError::NoBarrier));
    }

    proptest! {
        #[test]
        fn holder_is_monotone_in_alpha(
            values in proptest::collection::vec(-3.0f64..3.0, 12),
            a in 0.05f64..1.0,
            b in 0.05f64..1.0,
        ) {
            let (lo, hi) = (a.min(b), a.max(b));
            let xs = grid_1d(12);
            let f = SpaceTimeSamples { times: vec![0.0], xs, values: vec![values] };
            prop_assert!(holder_seminorm_x(&f, lo).unwrap() <= holder_seminorm_x(&f, hi).unwrap() + 1e-12);
        }

        #[test]
        fn interpolation_bound_is_homogeneous(nu1 in 0.01f64..10.0, nu2 in 0.01f64..10.0, g in 0.05f64..1.0, l in 0.01f64..10.0) {
            let c = interpolation_bound(nu1, nu2, g).unwrap();
            let cl = interpolation_bound(l * nu1, l * nu2, g).unwrap();
            prop_assert!((cl - l * c).abs() <= 1e-12 * cl.abs().max(1.0));
        }
    }
}
