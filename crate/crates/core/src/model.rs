//! Problem data: coefficients, growth envelope, and sampled checks of the
//! structural assumptions the solvers rely on.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse_expr, CoefficientKind, EvalError, Expr, ParseError, Vars};
use crate::graph::Junction;
use crate::scalar::Real;

/// A parsed coefficient together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    kind: CoefficientKind,
    expr: Expr,
    text: String,
}

impl Coefficient {
    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval<T: Real>(&self, vars: &Vars<'_, T>) -> Result<T, EvalError> {
        self.expr.eval(vars)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

pub fn parse_coefficient(text: &str, kind: CoefficientKind) -> Result<Coefficient, ParseError> {
    Ok(Coefficient {
        kind,
        expr: parse_expr(text, kind)?,
        text: text.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Grid(#[from] crate::graph::GridError),
    #[error("{slot}: expected {expected} entries, got {got}")]
    Arity {
        slot: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{slot}: expected a {expected} coefficient, got {got}")]
    WrongKind {
        slot: &'static str,
        expected: &'static str,
        got: &'static str,
    },
    #[error("invalid envelope: {0}")]
    Envelope(String),
    #[error("horizon must be finite and > 0, got {0}")]
    Horizon(f64),
    #[error("evaluating {coefficient} at {point}: {source}")]
    Eval {
        coefficient: String,
        point: String,
        source: EvalError,
    },
}

/// Structural constants of the problem and optional bound functions.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEnvelope<T> {
    pub m: T,
    pub nu_lower: T,
    pub nu_upper: T,
    pub c_h: T,
    /// `(b, B)` with `F(b, B) = 0`.
    pub root_pair: Option<(T, Vec<T>)>,
    /// `mu(|u|)`, growth of the Hamiltonian.
    pub mu: Option<Coefficient>,
    /// `gamma(|u|)`, growth of the p-derivatives.
    pub gamma: Option<Coefficient>,
    /// `epsilon(|u|)`, growth of the x- and u-derivatives.
    pub epsilon: Option<Coefficient>,
    /// `P(|u|, |p|)`, decaying companion of `epsilon`.
    pub p_decay: Option<Coefficient>,
}

impl<T: Real> GrowthEnvelope<T> {
    pub fn new(m: T, nu_lower: T, nu_upper: T, c_h: T) -> Result<Self, ModelError> {
        let env = Self {
            m,
            nu_lower,
            nu_upper,
            c_h,
            root_pair: None,
            mu: None,
            gamma: None,
            epsilon: None,
            p_decay: None,
        };
        env.check()?;
        Ok(env)
    }

    pub fn with_root_pair(mut self, b: T, big_b: Vec<T>) -> Self {
        self.root_pair = Some((b, big_b));
        self
    }

    fn check(&self) -> Result<(), ModelError> {
        let two = T::lit(2.0);
        if !(self.m >= two) {
            return Err(ModelError::Envelope(format!("m = {} must be >= 2", self.m)));
        }
        if !(self.nu_lower > T::zero()) || !(self.nu_upper >= self.nu_lower) {
            return Err(ModelError::Envelope(format!(
                "need 0 < nu_lower <= nu_upper, got {} and {}",
                self.nu_lower, self.nu_upper
            )));
        }
        if !(self.c_h > T::zero()) || !self.c_h.is_finite() {
            return Err(ModelError::Envelope(format!("c_h = {} must be > 0", self.c_h)));
        }
        for (name, c, kind) in [
            ("mu", &self.mu, CoefficientKind::GrowthBound),
            ("gamma", &self.gamma, CoefficientKind::GrowthBound),
            ("epsilon", &self.epsilon, CoefficientKind::GrowthBound),
            ("p_bound", &self.p_decay, CoefficientKind::DecayBound),
        ] {
            if let Some(c) = c {
                if c.kind() != kind {
                    return Err(ModelError::Envelope(format!("{name} must be a {kind} expression")));
                }
            }
        }
        Ok(())
    }

    /// `mu(2M)` if declared.
    pub fn mu_at(&self, u: T) -> Option<Result<T, EvalError>> {
        self.mu.as_ref().map(|c| {
            c.eval(&Vars {
                u,
                ..Vars::default()
            })
        })
    }
}

/// Complete data of the parabolic junction problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<T> {
    junction: Junction<T>,
    sigma: Vec<Coefficient>,
    hamiltonian: Vec<Coefficient>,
    vertex_condition: Coefficient,
    initial: Vec<Coefficient>,
    outer_boundary: Vec<Coefficient>,
    forcing: Option<Vec<Coefficient>>,
    horizon: T,
    envelope: GrowthEnvelope<T>,
}

/// Parts handed to [`ProblemSpec::new`].
#[derive(Debug, Clone)]
pub struct ProblemParts<T> {
    pub junction: Junction<T>,
    pub sigma: Vec<Coefficient>,
    pub hamiltonian: Vec<Coefficient>,
    pub vertex_condition: Coefficient,
    pub initial: Vec<Coefficient>,
    pub outer_boundary: Vec<Coefficient>,
    pub forcing: Option<Vec<Coefficient>>,
    pub horizon: T,
    pub envelope: GrowthEnvelope<T>,
}

fn check_slot(
    slot: &'static str,
    coefficients: &[Coefficient],
    edges: usize,
    kind: CoefficientKind,
) -> Result<(), ModelError> {
    if coefficients.len() != edges {
        return Err(ModelError::Arity {
            slot,
            expected: edges,
            got: coefficients.len(),
        });
    }
    for c in coefficients {
        if c.kind() != kind {
            return Err(ModelError::WrongKind {
                slot,
                expected: kind.name(),
                got: c.kind().name(),
            });
        }
    }
    Ok(())
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(parts: ProblemParts<T>) -> Result<Self, ModelError> {
        let edges = parts.junction.num_edges();
        check_slot("sigma", &parts.sigma, edges, CoefficientKind::Sigma)?;
        check_slot("hamiltonian", &parts.hamiltonian, edges, CoefficientKind::Hamiltonian)?;
        check_slot("initial", &parts.initial, edges, CoefficientKind::Initial)?;
        check_slot("outer_boundary", &parts.outer_boundary, edges, CoefficientKind::OuterBoundary)?;
        if let Some(f) = &parts.forcing {
            check_slot("forcing", f, edges, CoefficientKind::Forcing)?;
        }
        let vertex_kind = CoefficientKind::VertexCondition { edges };
        if parts.vertex_condition.kind() != vertex_kind {
            return Err(ModelError::WrongKind {
                slot: "vertex_condition",
                expected: vertex_kind.name(),
                got: parts.vertex_condition.kind().name(),
            });
        }
        if !(parts.horizon > T::zero()) || !parts.horizon.is_finite() {
            return Err(ModelError::Horizon(parts.horizon.as_f64()));
        }
        parts.envelope.check()?;
        if let Some((_, big_b)) = &parts.envelope.root_pair {
            if big_b.len() != edges {
                return Err(ModelError::Arity {
                    slot: "root_B",
                    expected: edges,
                    got: big_b.len(),
                });
            }
        }
        Ok(Self {
            junction: parts.junction,
            sigma: parts.sigma,
            hamiltonian: parts.hamiltonian,
            vertex_condition: parts.vertex_condition,
            initial: parts.initial,
            outer_boundary: parts.outer_boundary,
            forcing: parts.forcing,
            horizon: parts.horizon,
            envelope: parts.envelope,
        })
    }

    pub fn junction(&self) -> &Junction<T> {
        &self.junction
    }

    pub fn num_edges(&self) -> usize {
        self.junction.num_edges()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn envelope(&self) -> &GrowthEnvelope<T> {
        &self.envelope
    }

    pub fn sigma_coefficient(&self, edge: usize) -> &Coefficient {
        &self.sigma[edge]
    }

    pub fn hamiltonian_coefficient(&self, edge: usize) -> &Coefficient {
        &self.hamiltonian[edge]
    }

    pub fn vertex_coefficient(&self) -> &Coefficient {
        &self.vertex_condition
    }

    pub fn initial_coefficient(&self, edge: usize) -> &Coefficient {
        &self.initial[edge]
    }

    pub fn outer_coefficient(&self, edge: usize) -> &Coefficient {
        &self.outer_boundary[edge]
    }

    pub fn forcing_coefficient(&self, edge: usize) -> Option<&Coefficient> {
        self.forcing.as_ref().map(|f| &f[edge])
    }

    /// Every coefficient with a label, in file order.
    pub fn coefficients(&self) -> Vec<(String, &Coefficient)> {
        let mut out = Vec::new();
        for (i, c) in self.sigma.iter().enumerate() {
            out.push((format!("sigma[{i}]"), c));
        }
        for (i, c) in self.hamiltonian.iter().enumerate() {
            out.push((format!("hamiltonian[{i}]"), c));
        }
        out.push(("vertex_condition".to_string(), &self.vertex_condition));
        for (i, c) in self.initial.iter().enumerate() {
            out.push((format!("initial[{i}]"), c));
        }
        for (i, c) in self.outer_boundary.iter().enumerate() {
            out.push((format!("outer_boundary[{i}]"), c));
        }
        if let Some(f) = &self.forcing {
            for (i, c) in f.iter().enumerate() {
                out.push((format!("forcing[{i}]"), c));
            }
        }
        out
    }

    /// Same data on a junction with other edge lengths.
    pub fn with_junction(&self, junction: Junction<T>) -> Result<Self, ModelError> {
        if junction.num_edges() != self.num_edges() {
            return Err(ModelError::Arity {
                slot: "junction",
                expected: self.num_edges(),
                got: junction.num_edges(),
            });
        }
        let mut out = self.clone();
        out.junction = junction;
        Ok(out)
    }

    /// Same data with replaced outer boundary functions.
    pub fn with_outer_boundary(&self, outer: Vec<Coefficient>) -> Result<Self, ModelError> {
        check_slot("outer_boundary", &outer, self.num_edges(), CoefficientKind::OuterBoundary)?;
        let mut out = self.clone();
        out.outer_boundary = outer;
        Ok(out)
    }

    pub fn with_envelope(&self, envelope: GrowthEnvelope<T>) -> Result<Self, ModelError> {
        envelope.check()?;
        let mut out = self.clone();
        out.envelope = envelope;
        Ok(out)
    }

    pub fn sigma(&self, edge: usize, x: T, p: T) -> Result<T, ModelError> {
        self.sigma[edge]
            .eval(&Vars {
                x,
                p,
                ..Vars::default()
            })
            .map_err(|source| eval_error(format!("sigma[{edge}]"), format!("x={x}, p={p}"), source))
    }

    /// `H_i(x, u, p) - f_i(t, x)`: the Hamiltonian with the forcing folded in.
    pub fn hamiltonian(&self, edge: usize, t: T, x: T, u: T, p: T) -> Result<T, ModelError> {
        let h = self.hamiltonian[edge]
            .eval(&Vars {
                x,
                u,
                p,
                ..Vars::default()
            })
            .map_err(|source| {
                eval_error(format!("hamiltonian[{edge}]"), format!("x={x}, u={u}, p={p}"), source)
            })?;
        Ok(h - self.forcing(edge, t, x)?)
    }

    pub fn forcing(&self, edge: usize, t: T, x: T) -> Result<T, ModelError> {
        match &self.forcing {
            None => Ok(T::zero()),
            Some(f) => f[edge]
                .eval(&Vars {
                    t,
                    x,
                    ..Vars::default()
                })
                .map_err(|source| eval_error(format!("forcing[{edge}]"), format!("t={t}, x={x}"), source)),
        }
    }

    pub fn vertex(&self, u: T, flux: &[T]) -> Result<T, ModelError> {
        self.vertex_condition
            .eval(&Vars {
                u,
                components: flux,
                ..Vars::default()
            })
            .map_err(|source| eval_error("vertex_condition".into(), format!("u={u}, p={flux:?}"), source))
    }

    pub fn initial(&self, edge: usize, x: T) -> Result<T, ModelError> {
        self.initial[edge]
            .eval(&Vars {
                x,
                ..Vars::default()
            })
            .map_err(|source| eval_error(format!("initial[{edge}]"), format!("x={x}"), source))
    }

    pub fn outer(&self, edge: usize, t: T) -> Result<T, ModelError> {
        self.outer_boundary[edge]
            .eval(&Vars {
                t,
                ..Vars::default()
            })
            .map_err(|source| eval_error(format!("outer_boundary[{edge}]"), format!("t={t}"), source))
    }
}

fn eval_error(coefficient: String, point: String, source: EvalError) -> ModelError {
    ModelError::Eval {
        coefficient,
        point,
        source,
    }
}

/// Residuals of the compatibility conditions between initial, vertex and
/// outer data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub vertex_residual: f64,
    /// `max_i |g_i(0) - g_1(0)|`
    pub vertex_mismatch: f64,
    pub outer_residuals: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `F(g(0), g'(0)) = 0`, `g_i(a_i) = phi_i(0)` and agreement of the
/// `g_i(0)`. `g'(0)` uses the one-sided three-point stencil with step `a_i / 1024`.
pub fn compatibility_check<T: Real>(p: &ProblemSpec<T>, tol: T) -> Result<CompatibilityReport, ModelError> {
    let edges = p.num_edges();
    let g0 = p.initial(0, T::zero())?;
    let mut mismatch = T::zero();
    let mut flux = Vec::with_capacity(edges);
    let mut outer = Vec::with_capacity(edges);
    for i in 0..edges {
        let a = p.junction.length(i);
        let h = a / T::lit(1024.0);
        let gi0 = p.initial(i, T::zero())?;
        mismatch = mismatch.max((gi0 - g0).abs());
        let d = (-T::lit(3.0) * gi0 + T::lit(4.0) * p.initial(i, h)? - p.initial(i, h + h)?) / (h + h);
        flux.push(d);
        outer.push((p.initial(i, a)? - p.outer(i, T::zero())?).abs());
    }
    let vertex_residual = p.vertex(g0, &flux)?.abs();
    let passed = vertex_residual <= tol && mismatch <= tol && outer.iter().all(|&r| r <= tol);
    Ok(CompatibilityReport {
        vertex_residual: vertex_residual.as_f64(),
        vertex_mismatch: mismatch.as_f64(),
        outer_residuals: outer.iter().map(|r| r.as_f64()).collect(),
        tolerance: tol.as_f64(),
        passed,
    })
}

/// Which assumption set to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionFamily {
    /// Conditions for the time-dependent problem.
    Parabolic,
    /// Conditions for a stationary junction problem.
    Elliptic,
}

/// Sampling box and counts for [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingPlan {
    pub u_bound: f64,
    pub p_bound: f64,
    pub x_samples: usize,
    pub u_samples: usize,
    pub p_samples: usize,
    /// Ordered pairs drawn for the vertex-condition monotonicity checks.
    pub pairs: usize,
    pub seed: u64,
    pub compatibility_tol: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            u_bound: 4.0,
            p_bound: 4.0,
            x_samples: 12,
            u_samples: 12,
            p_samples: 16,
            pairs: 2000,
            seed: 0x5eed,
            compatibility_tol: 1e-4,
        }
    }
}

/// A concrete point where an inequality fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<(String, f64)>,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let point: Vec<String> = self.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(
            f,
            "{} violated at ({}): lhs={} rhs={}",
            self.inequality,
            point.join(", "),
            self.lhs,
            self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    /// Held on every sample, but the condition is asymptotic or global in
    /// `p` and cannot be certified by sampling.
    SpotChecked,
    Unchecked { reason: String },
    Fail { witness: Witness },
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::SpotChecked => "SPOT-CHECKED",
            Verdict::Unchecked { .. } => "UNCHECKED",
            Verdict::Fail { .. } => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub description: &'static str,
    pub verdict: Verdict,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub family: AssumptionFamily,
    pub plan: SamplingPlan,
    pub lengths: Vec<f64>,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn has_failure(&self) -> bool {
        self.checks.iter().any(|c| c.verdict.is_fail())
    }

    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "assumption check ({:?}), box x in [0, a_i], |u| <= {}, |p| <= {}, seed {}\n",
            self.family, self.plan.u_bound, self.plan.p_bound, self.plan.seed
        );
        for c in &self.checks {
            out.push_str(&format!("  {:<14} {:<32} {} samples", c.verdict.label(), c.id, c.samples));
            match &c.verdict {
                Verdict::Fail { witness } => out.push_str(&format!("\n      {witness}")),
                Verdict::Unchecked { reason } => out.push_str(&format!("\n      {reason}")),
                _ => {}
            }
            if let Some(note) = &c.note {
                out.push_str(&format!("\n      {note}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `lhs <= rhs` up to a relative round-off allowance.
fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * (1.0 + rhs.abs().max(lhs.abs()))
}

fn fail(inequality: &str, point: Vec<(String, f64)>, lhs: f64, rhs: f64) -> Verdict {
    Verdict::Fail {
        witness: Witness {
            point,
            inequality: inequality.to_string(),
            lhs,
            rhs,
        },
    }
}

fn eval_fail(what: &str, point: Vec<(String, f64)>, err: &ModelError) -> Verdict {
    fail(&format!("{what} evaluable ({err})"), point, f64::NAN, f64::NAN)
}

struct Sample {
    edge: usize,
    x: f64,
    u: f64,
    p: f64,
}

fn point(edge: usize, x: f64, u: f64, p: f64) -> Vec<(String, f64)> {
    vec![
        ("edge".into(), edge as f64),
        ("x".into(), x),
        ("u".into(), u),
        ("p".into(), p),
    ]
}

/// Finite-difference step relative to the magnitude of the probed variable.
fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

fn eval_bound(c: &Coefficient, u: f64, p: f64) -> Result<f64, ModelError> {
    c.eval(&Vars {
        u,
        p,
        ..Vars::default()
    })
    .map_err(|source| eval_error(c.kind().name().into(), format!("u={u}, p={p}"), source))
}

/// Samples the structural assumptions on a finite box.
///
/// Global-in-`p` growth conditions are reported as SPOT-CHECKED at best.
/// Bound functions that the envelope does not declare make the matching
/// checks UNCHECKED.
pub fn validate_assumptions<T: Real>(
    p: &ProblemSpec<T>,
    plan: &SamplingPlan,
    family: AssumptionFamily,
) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let edges = p.num_edges();
    let lengths: Vec<f64> = p.junction.lengths().iter().map(|a| a.as_f64()).collect();
    let env = p.envelope();
    let m = env.m.as_f64();
    let nu_lo = env.nu_lower.as_f64();
    let nu_hi = env.nu_upper.as_f64();
    let c_h = env.c_h.as_f64();
    let times: Vec<f64> = match family {
        AssumptionFamily::Parabolic => vec![0.0, 0.5 * p.horizon.as_f64(), p.horizon.as_f64()],
        AssumptionFamily::Elliptic => vec![0.0],
    };

    // Stratified x, uniform u and p; the tensor product per edge.
    let mut samples = Vec::new();
    for (edge, &a) in lengths.iter().enumerate() {
        let xs: Vec<f64> = (0..plan.x_samples)
            .map(|k| a * (k as f64 + rng.gen::<f64>()) / plan.x_samples as f64)
            .collect();
        let us: Vec<f64> = (0..plan.u_samples)
            .map(|_| rng.gen_range(-plan.u_bound..=plan.u_bound))
            .collect();
        let ps: Vec<f64> = (0..plan.p_samples)
            .map(|_| rng.gen_range(-plan.p_bound..=plan.p_bound))
            .collect();
        for &x in &xs {
            for &u in &us {
                for &pp in &ps {
                    samples.push(Sample { edge, x, u, p: pp });
                }
            }
        }
    }

    let sigma = |s: &Sample| p.sigma(s.edge, T::lit(s.x), T::lit(s.p)).map(|v| v.as_f64());
    let ham = |s: &Sample, t: f64, u: f64, pp: f64, x: f64| {
        p.hamiltonian(s.edge, T::lit(t), T::lit(x), T::lit(u), T::lit(pp))
            .map(|v| v.as_f64())
    };

    let mut checks = Vec::new();
    checks.extend(vertex_checks(p, plan, &mut rng, edges));

    match family {
        AssumptionFamily::Parabolic => {
            checks.push(ellipticity(&samples, &sigma, m, nu_lo, nu_hi));
            checks.push(hamiltonian_growth(p, &samples, &times, &ham, m));
            checks.push(p_derivative_growth(p, &samples, &times, &sigma, &ham, m));
            checks.push(x_derivative_growth(p, &samples, &times, &sigma, &ham, m));
            let (lower, upper) = u_slope(p, &samples, &times, &ham, m, c_h);
            checks.push(lower);
            checks.push(upper);
            checks.push(compatibility(p, plan));
        }
        AssumptionFamily::Elliptic => {
            checks.push(sigma_lower_bound(&samples, &sigma, nu_lo));
            checks.push(strong_monotonicity(&samples, &mut rng, &ham, c_h, plan.u_bound));
            checks.push(asymptotic_ratios(&samples, &sigma, &ham));
        }
    }

    ValidationReport {
        family,
        plan: plan.clone(),
        lengths,
        checks,
    }
}

fn vertex_checks<T: Real>(
    p: &ProblemSpec<T>,
    plan: &SamplingPlan,
    rng: &mut ChaCha8Rng,
    edges: usize,
) -> Vec<AssumptionCheck> {
    let f = |u: f64, pv: &[f64]| {
        let pv: Vec<T> = pv.iter().map(|&v| T::lit(v)).collect();
        p.vertex(T::lit(u), &pv).map(|v| v.as_f64())
    };
    let vertex_point = |u: f64, pv: &[f64]| {
        let mut pt = vec![("u".to_string(), u)];
        pt.extend(pv.iter().enumerate().map(|(i, &v)| (format!("p{}", i + 1), v)));
        pt
    };

    let mut u_verdict = Verdict::Pass;
    let mut p_verdict = Verdict::Pass;
    let mut strict_u = true;
    let mut strict_p = true;
    let mut strict_witness = None;
    let mut u_pairs = 0;
    let mut p_pairs = 0;

    // The first u-pair is the deterministic probe (0, 1) at p = 0.
    for k in 0..plan.pairs {
        let (u0, u1, pv) = if k == 0 {
            (0.0, 1.0, vec![0.0; edges])
        } else {
            let a = rng.gen_range(-plan.u_bound..=plan.u_bound);
            let b = rng.gen_range(-plan.u_bound..=plan.u_bound);
            let pv: Vec<f64> = (0..edges)
                .map(|_| rng.gen_range(-plan.p_bound..=plan.p_bound))
                .collect();
            (a.min(b), a.max(b), pv)
        };
        if u0 < u1 && !u_verdict.is_fail() {
            u_pairs += 1;
            match (f(u0, &pv), f(u1, &pv)) {
                (Ok(lo), Ok(hi)) => {
                    if !holds(hi, lo) {
                        let mut pt = vertex_point(u1, &pv);
                        pt.insert(0, ("u_lower".into(), u0));
                        u_verdict = fail("F(u', p) <= F(u, p) for u < u'", pt, hi, lo);
                    } else if !(hi < lo) && strict_u {
                        strict_u = false;
                        strict_witness.get_or_insert((u0, u1, pv.clone(), hi, lo));
                    }
                }
                (Err(e), _) | (_, Err(e)) => u_verdict = eval_fail("F", vertex_point(u0, &pv), &e),
            }
        }

        // Ordered derivative vectors q <= q' with at least one strict component.
        let u = rng.gen_range(-plan.u_bound..=plan.u_bound);
        let q: Vec<f64> = (0..edges)
            .map(|_| rng.gen_range(-plan.p_bound..=plan.p_bound))
            .collect();
        let bump = rng.gen_range(0..edges);
        let q2: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let d: f64 = if i == bump {
                    rng.gen_range(0.01..=0.25)
                } else if rng.gen_bool(0.5) {
                    rng.gen_range(0.0..=0.25)
                } else {
                    0.0
                };
                v + d * plan.p_bound
            })
            .collect();
        if !p_verdict.is_fail() {
            p_pairs += 1;
            match (f(u, &q), f(u, &q2)) {
                (Ok(lo), Ok(hi)) => {
                    if !holds(lo, hi) {
                        let mut pt = vertex_point(u, &q2);
                        pt.extend(q.iter().enumerate().map(|(i, &v)| (format!("p{}_lower", i + 1), v)));
                        p_verdict = fail("F(u, q) <= F(u, q') for q <= q'", pt, lo, hi);
                    } else if !(hi > lo) {
                        strict_p = false;
                    }
                }
                (Err(e), _) | (_, Err(e)) => p_verdict = eval_fail("F", vertex_point(u, &q), &e),
            }
        }
    }

    let strict_verdict = if strict_u || strict_p {
        Verdict::Pass
    } else {
        let (u0, u1, pv, hi, lo) = strict_witness.unwrap_or((0.0, 1.0, vec![0.0; edges], 0.0, 0.0));
        let mut pt = vertex_point(u1, &pv);
        pt.insert(0, ("u_lower".into(), u0));
        fail(
            "F strictly decreasing in u or strictly increasing in p",
            pt,
            hi,
            lo,
        )
    };
    let root = match &p.envelope.root_pair {
        None => Verdict::Unchecked {
            reason: "envelope declares no root pair (b, B)".into(),
        },
        Some((b, big_b)) => {
            let pv: Vec<f64> = big_b.iter().map(|v| v.as_f64()).collect();
            match f(b.as_f64(), &pv) {
                Ok(v) if v.abs() <= 1e-9 => Verdict::Pass,
                Ok(v) => fail("|F(b, B)| <= 1e-9", vertex_point(b.as_f64(), &pv), v.abs(), 1e-9),
                Err(e) => eval_fail("F", vertex_point(b.as_f64(), &pv), &e),
            }
        }
    };

    vec![
        AssumptionCheck {
            id: "vertex.u_monotone",
            description: "F nonincreasing in u",
            verdict: u_verdict,
            samples: u_pairs,
            note: None,
        },
        AssumptionCheck {
            id: "vertex.p_monotone",
            description: "F nondecreasing in the derivative vector",
            verdict: p_verdict,
            samples: p_pairs,
            note: None,
        },
        AssumptionCheck {
            id: "vertex.strict",
            description: "F strictly decreasing in u or strictly increasing in p",
            verdict: strict_verdict,
            samples: u_pairs + p_pairs,
            note: Some(match (strict_u, strict_p) {
                (true, true) => "both strict".into(),
                (true, false) => "strictly decreasing in u".into(),
                (false, true) => "strictly increasing in p (Kirchhoff type)".into(),
                (false, false) => "neither strict".into(),
            }),
        },
        AssumptionCheck {
            id: "vertex.root_pair",
            description: "F(b, B) = 0",
            verdict: root,
            samples: 1,
            note: None,
        },
    ]
}

fn ellipticity(
    samples: &[Sample],
    sigma: &dyn Fn(&Sample) -> Result<f64, ModelError>,
    m: f64,
    nu_lo: f64,
    nu_hi: f64,
) -> AssumptionCheck {
    let mut verdict = Verdict::Pass;
    for s in samples {
        let weight = (1.0 + s.p.abs()).powf(m - 2.0);
        match sigma(s) {
            Ok(v) => {
                if !holds(nu_lo * weight, v) {
                    verdict = fail("nu_lower (1+|p|)^(m-2) <= sigma", point(s.edge, s.x, s.u, s.p), nu_lo * weight, v);
                } else if !holds(v, nu_hi * weight) {
                    verdict = fail("sigma <= nu_upper (1+|p|)^(m-2)", point(s.edge, s.x, s.u, s.p), v, nu_hi * weight);
                }
            }
            Err(e) => verdict = eval_fail("sigma", point(s.edge, s.x, s.u, s.p), &e),
        }
        if verdict.is_fail() {
            break;
        }
    }
    AssumptionCheck {
        id: "sigma.ellipticity",
        description: "nu_lower (1+|p|)^(m-2) <= sigma <= nu_upper (1+|p|)^(m-2)",
        verdict,
        samples: samples.len(),
        note: None,
    }
}

type HamFn<'a> = dyn Fn(&Sample, f64, f64, f64, f64) -> Result<f64, ModelError> + 'a;

fn hamiltonian_growth<T: Real>(
    p: &ProblemSpec<T>,
    samples: &[Sample],
    times: &[f64],
    ham: &HamFn<'_>,
    m: f64,
) -> AssumptionCheck {
    let id = "hamiltonian.growth";
    let description = "|H| <= mu(|u|) (1+|p|)^m";
    let Some(mu) = &p.envelope.mu else {
        return unchecked(id, description, "envelope declares no mu bound");
    };
    let mut verdict = Verdict::SpotChecked;
    let mut count = 0;
    'outer: for s in samples {
        for &t in times {
            count += 1;
            let lhs = ham(s, t, s.u, s.p, s.x);
            let rhs = eval_bound(mu, s.u.abs(), 0.0).map(|v| v * (1.0 + s.p.abs()).powf(m));
            match (lhs, rhs) {
                (Ok(l), Ok(r)) => {
                    if !holds(l.abs(), r) {
                        let mut pt = point(s.edge, s.x, s.u, s.p);
                        pt.push(("t".into(), t));
                        verdict = fail(description, pt, l.abs(), r);
                        break 'outer;
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    verdict = eval_fail("H or mu", point(s.edge, s.x, s.u, s.p), &e);
                    break 'outer;
                }
            }
        }
    }
    AssumptionCheck {
        id,
        description,
        verdict,
        samples: count,
        note: None,
    }
}

fn unchecked(id: &'static str, description: &'static str, reason: &str) -> AssumptionCheck {
    AssumptionCheck {
        id,
        description,
        verdict: Verdict::Unchecked {
            reason: reason.to_string(),
        },
        samples: 0,
        note: None,
    }
}

fn p_derivative_growth<T: Real>(
    p: &ProblemSpec<T>,
    samples: &[Sample],
    times: &[f64],
    sigma: &dyn Fn(&Sample) -> Result<f64, ModelError>,
    ham: &HamFn<'_>,
    m: f64,
) -> AssumptionCheck {
    let id = "coefficients.p_derivatives";
    let description = "|d_p sigma| (1+|p|)^2 + |d_p H| <= gamma(|u|) (1+|p|)^(m-1)";
    let Some(gamma) = &p.envelope.gamma else {
        return unchecked(id, description, "envelope declares no gamma bound");
    };
    let mut verdict = Verdict::SpotChecked;
    let mut count = 0;
    'outer: for s in samples {
        let h = fd_step(s.p);
        let shifted = |dp: f64| Sample {
            edge: s.edge,
            x: s.x,
            u: s.u,
            p: s.p + dp,
        };
        let ds = match (sigma(&shifted(h)), sigma(&shifted(-h))) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Err(e), _) | (_, Err(e)) => {
                verdict = eval_fail("sigma", point(s.edge, s.x, s.u, s.p), &e);
                break;
            }
        };
        for &t in times {
            count += 1;
            let dh = match (ham(s, t, s.u, s.p + h, s.x), ham(s, t, s.u, s.p - h, s.x)) {
                (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
                (Err(e), _) | (_, Err(e)) => {
                    verdict = eval_fail("H", point(s.edge, s.x, s.u, s.p), &e);
                    break 'outer;
                }
            };
            let lhs = ds.abs() * (1.0 + s.p.abs()).powi(2) + dh.abs();
            match eval_bound(gamma, s.u.abs(), 0.0) {
                Ok(g) => {
                    let rhs = g * (1.0 + s.p.abs()).powf(m - 1.0);
                    if !holds(lhs, rhs * (1.0 + 1e-6)) {
                        verdict = fail(description, point(s.edge, s.x, s.u, s.p), lhs, rhs);
                        break 'outer;
                    }
                }
                Err(e) => {
                    verdict = eval_fail("gamma", point(s.edge, s.x, s.u, s.p), &e);
                    break 'outer;
                }
            }
        }
    }
    AssumptionCheck {
        id,
        description,
        verdict,
        samples: count,
        note: None,
    }
}

fn epsilon_plus_p<T: Real>(p: &ProblemSpec<T>, u: f64, pp: f64) -> Option<Result<f64, ModelError>> {
    let eps = p.envelope.epsilon.as_ref()?;
    Some((|| {
        let e = eval_bound(eps, u.abs(), 0.0)?;
        let d = match &p.envelope.p_decay {
            Some(c) => eval_bound(c, u.abs(), pp.abs())?,
            None => 0.0,
        };
        Ok(e + d)
    })())
}

fn x_derivative_growth<T: Real>(
    p: &ProblemSpec<T>,
    samples: &[Sample],
    times: &[f64],
    sigma: &dyn Fn(&Sample) -> Result<f64, ModelError>,
    ham: &HamFn<'_>,
    m: f64,
) -> AssumptionCheck {
    let id = "coefficients.x_derivatives";
    let description = "|d_x sigma| (1+|p|)^2 + |d_x H| <= (epsilon(|u|) + P(|u|,|p|)) (1+|p|)^(m+1)";
    if p.envelope.epsilon.is_none() {
        return unchecked(id, description, "envelope declares no epsilon bound");
    }
    let mut verdict = Verdict::SpotChecked;
    let mut count = 0;
    'outer: for s in samples {
        // One-sided at the edge ends so the probe stays inside [0, a_i].
        let a = p.junction.length(s.edge).as_f64();
        let h = 1e-6 * a.max(1.0);
        let (xl, xr) = if s.x - h < 0.0 {
            (s.x, s.x + h)
        } else if s.x + h > a {
            (s.x - h, s.x)
        } else {
            (s.x - h, s.x + h)
        };
        let at = |x: f64| Sample {
            edge: s.edge,
            x,
            u: s.u,
            p: s.p,
        };
        let dsx = match (sigma(&at(xr)), sigma(&at(xl))) {
            (Ok(r), Ok(l)) => (r - l) / (xr - xl),
            (Err(e), _) | (_, Err(e)) => {
                verdict = eval_fail("sigma", point(s.edge, s.x, s.u, s.p), &e);
                break;
            }
        };
        for &t in times {
            count += 1;
            let dhx = match (ham(s, t, s.u, s.p, xr), ham(s, t, s.u, s.p, xl)) {
                (Ok(r), Ok(l)) => (r - l) / (xr - xl),
                (Err(e), _) | (_, Err(e)) => {
                    verdict = eval_fail("H", point(s.edge, s.x, s.u, s.p), &e);
                    break 'outer;
                }
            };
            let lhs = dsx.abs() * (1.0 + s.p.abs()).powi(2) + dhx.abs();
            match epsilon_plus_p(p, s.u, s.p).expect("epsilon declared") {
                Ok(bound) => {
                    let rhs = bound * (1.0 + s.p.abs()).powf(m + 1.0);
                    if !holds(lhs, rhs * (1.0 + 1e-6)) {
                        verdict = fail(description, point(s.edge, s.x, s.u, s.p), lhs, rhs);
                        break 'outer;
                    }
                }
                Err(e) => {
                    verdict = eval_fail("epsilon/P", point(s.edge, s.x, s.u, s.p), &e);
                    break 'outer;
                }
            }
        }
    }
    AssumptionCheck {
        id,
        description,
        verdict,
        samples: count,
        note: None,
    }
}

fn u_slope<T: Real>(
    p: &ProblemSpec<T>,
    samples: &[Sample],
    times: &[f64],
    ham: &HamFn<'_>,
    m: f64,
    c_h: f64,
) -> (AssumptionCheck, AssumptionCheck) {
    let lower_desc = "-C_H <= d_u H";
    let upper_desc = "d_u H <= (epsilon(|u|) + P(|u|,|p|)) (1+|p|)^m";
    let mut lower = Verdict::Pass;
    let mut upper = if p.envelope.epsilon.is_some() {
        Verdict::SpotChecked
    } else {
        Verdict::Unchecked {
            reason: "envelope declares no epsilon bound".into(),
        }
    };
    let mut count = 0;
    for s in samples {
        let h = fd_step(s.u);
        // The forcing does not depend on u, so one time level suffices.
        let t = times[0];
        count += 1;
        let du = match (ham(s, t, s.u + h, s.p, s.x), ham(s, t, s.u - h, s.p, s.x)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Err(e), _) | (_, Err(e)) => {
                lower = eval_fail("H", point(s.edge, s.x, s.u, s.p), &e);
                break;
            }
        };
        // Finite differences carry O(h^2) error; allow for it.
        let slack = 1e-6 * (1.0 + du.abs());
        if !lower.is_fail() && !holds(-c_h, du + slack) {
            lower = fail(lower_desc, point(s.edge, s.x, s.u, s.p), -c_h, du);
        }
        if matches!(upper, Verdict::SpotChecked) {
            match epsilon_plus_p(p, s.u, s.p).expect("epsilon declared") {
                Ok(bound) => {
                    let rhs = bound * (1.0 + s.p.abs()).powf(m);
                    if !holds(du - slack, rhs) {
                        upper = fail(upper_desc, point(s.edge, s.x, s.u, s.p), du, rhs);
                    }
                }
                Err(e) => upper = eval_fail("epsilon/P", point(s.edge, s.x, s.u, s.p), &e),
            }
        }
        if lower.is_fail() {
            break;
        }
    }
    (
        AssumptionCheck {
            id: "hamiltonian.u_slope_lower",
            description: lower_desc,
            verdict: lower,
            samples: count,
            note: None,
        },
        AssumptionCheck {
            id: "hamiltonian.u_slope_upper",
            description: upper_desc,
            verdict: upper,
            samples: count,
            note: None,
        },
    )
}

fn compatibility<T: Real>(p: &ProblemSpec<T>, plan: &SamplingPlan) -> AssumptionCheck {
    let description = "F(g(0), g'(0)) = 0 and g_i(a_i) = phi_i(0)";
    let verdict = match compatibility_check(p, T::lit(plan.compatibility_tol)) {
        Ok(r) if r.passed => Verdict::Pass,
        Ok(r) => {
            let worst_outer = r.outer_residuals.iter().copied().fold(0.0, f64::max);
            let lhs = r.vertex_residual.max(r.vertex_mismatch).max(worst_outer);
            fail(
                "compatibility residual <= tol",
                vec![
                    ("vertex_residual".into(), r.vertex_residual),
                    ("vertex_mismatch".into(), r.vertex_mismatch),
                    ("outer_residual".into(), worst_outer),
                ],
                lhs,
                r.tolerance,
            )
        }
        Err(e) => eval_fail("initial/outer data", vec![], &e),
    };
    AssumptionCheck {
        id: "data.compatibility",
        description,
        verdict,
        samples: p.num_edges(),
        note: None,
    }
}

fn sigma_lower_bound(
    samples: &[Sample],
    sigma: &dyn Fn(&Sample) -> Result<f64, ModelError>,
    nu_lo: f64,
) -> AssumptionCheck {
    let mut verdict = Verdict::Pass;
    for s in samples {
        match sigma(s) {
            Ok(v) if holds(nu_lo, v) => {}
            Ok(v) => {
                verdict = fail("sigma >= nu_lower", point(s.edge, s.x, s.u, s.p), nu_lo, v);
                break;
            }
            Err(e) => {
                verdict = eval_fail("sigma", point(s.edge, s.x, s.u, s.p), &e);
                break;
            }
        }
    }
    AssumptionCheck {
        id: "sigma.lower_bound",
        description: "sigma >= nu_lower > 0",
        verdict,
        samples: samples.len(),
        note: None,
    }
}

fn strong_monotonicity(
    samples: &[Sample],
    rng: &mut ChaCha8Rng,
    ham: &HamFn<'_>,
    c_h: f64,
    u_bound: f64,
) -> AssumptionCheck {
    let description = "H(x, v, p) - H(x, u, p) >= C_H (v - u) for u <= v";
    let mut verdict = Verdict::Pass;
    for s in samples {
        let v = rng.gen_range(-u_bound..=u_bound);
        let (lo, hi) = (s.u.min(v), s.u.max(v));
        match (ham(s, 0.0, hi, s.p, s.x), ham(s, 0.0, lo, s.p, s.x)) {
            (Ok(a), Ok(b)) => {
                if !holds(c_h * (hi - lo), a - b) {
                    let mut pt = point(s.edge, s.x, hi, s.p);
                    pt.push(("u_lower".into(), lo));
                    verdict = fail(description, pt, c_h * (hi - lo), a - b);
                    break;
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                verdict = eval_fail("H", point(s.edge, s.x, s.u, s.p), &e);
                break;
            }
        }
    }
    AssumptionCheck {
        id: "hamiltonian.strong_monotone",
        description,
        verdict,
        samples: samples.len(),
        note: None,
    }
}

/// Observed ratios for the large-`p` growth conditions. Samples with
/// `|p| < 1e-3` are excluded because the `1/p` weighted operator is singular there.
fn asymptotic_ratios(
    samples: &[Sample],
    sigma: &dyn Fn(&Sample) -> Result<f64, ModelError>,
    ham: &HamFn<'_>,
) -> AssumptionCheck {
    let mut ratios = [0.0f64; 5];
    let mut count = 0;
    let mut excluded = 0;
    let mut verdict = Verdict::SpotChecked;
    for s in samples {
        if s.p.abs() < 1e-3 {
            excluded += 1;
            continue;
        }
        count += 1;
        let hx = 1e-6 * s.x.abs().max(1.0);
        let hp = fd_step(s.p);
        let hu = fd_step(s.u);
        let with = |x: f64, p: f64| Sample {
            edge: s.edge,
            x,
            u: s.u,
            p,
        };
        let res: Result<[f64; 5], ModelError> = (|| {
            let sg = sigma(s)?;
            let h = ham(s, 0.0, s.u, s.p, s.x)?;
            let dsx = (sigma(&with(s.x + hx, s.p))? - sigma(&with(s.x - hx, s.p))?) / (2.0 * hx);
            let dsp = (sigma(&with(s.x, s.p + hp))? - sigma(&with(s.x, s.p - hp))?) / (2.0 * hp);
            let dhu = (ham(s, 0.0, s.u + hu, s.p, s.x)? - ham(s, 0.0, s.u - hu, s.p, s.x)?) / (2.0 * hu);
            let dhx = (ham(s, 0.0, s.u, s.p, s.x + hx)? - ham(s, 0.0, s.u, s.p, s.x - hx)?) / (2.0 * hx);
            let dhp = (ham(s, 0.0, s.u, s.p + hp, s.x)? - ham(s, 0.0, s.u, s.p - hp, s.x)?) / (2.0 * hp);
            let sp2 = sg * s.p * s.p;
            Ok([
                (dsx / s.p).abs() / sg,
                (s.p * dsp).abs() / sg,
                h.abs() / sp2,
                (dhu + dhx / s.p) / sp2,
                s.p * dhp / sp2,
            ])
        })();
        match res {
            Ok(r) => {
                for (acc, v) in ratios.iter_mut().zip(r) {
                    if !v.is_finite() {
                        verdict = fail("finite growth ratio", point(s.edge, s.x, s.u, s.p), v, f64::INFINITY);
                    }
                    *acc = acc.max(v);
                }
            }
            Err(e) => verdict = eval_fail("sigma or H", point(s.edge, s.x, s.u, s.p), &e),
        }
        if verdict.is_fail() {
            break;
        }
    }
    AssumptionCheck {
        id: "coefficients.large_p_growth",
        description: "large-|p| growth of sigma and H relative to sigma p^2",
        verdict,
        samples: count,
        note: Some(format!(
            "max observed: |delta sigma|/sigma={:.3e}, |p d_p sigma|/sigma={:.3e}, |H|/(sigma p^2)={:.3e}, \
             delta H/(sigma p^2)={:.3e}, p d_p H/(sigma p^2)={:.3e}; {excluded} samples with |p| < 1e-3 excluded",
            ratios[0], ratios[1], ratios[2], ratios[3], ratios[4]
        )),
    }
}
