//! Pointwise evaluation of the exact factor
//! `psi(x) = lim e^{-tA} P(Phi^t(x))`.

use rayon::prelude::*;

use crate::factor::{FactorError, FactorMode, PolynomialFactor};
use crate::flow::{FlowError, FlowHandle, SystemKind};
use crate::linalg::{self, CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    /// Sampling step in time (must be a positive integer for maps).
    pub step: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub divergence_threshold: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Self {
            step: 1.0,
            tol: 1e-10,
            max_steps: 200,
            divergence_threshold: 1e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluateError {
    #[error("divergence detected after {steps} steps (gap {gap:.3e}, |psi| {norm:.3e})")]
    DivergenceDetected {
        steps: usize,
        gap: f64,
        norm: f64,
        /// The last few iterates, oldest first.
        tail: Vec<Vec<C64>>,
    },
    #[error("model mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: Vec<C64>,
    pub steps_used: usize,
    pub converged: bool,
    pub cauchy_gap: f64,
    pub flagged_divergent: bool,
}

/// A polynomial factor attached to the dynamics that it approximately
/// linearizes.
#[derive(Debug, Clone)]
pub struct EigenfunctionModel {
    factor: PolynomialFactor,
    flow: FlowHandle,
    convergence: Convergence,
    /// Most negative real part among the eigenvalues of `A`.
    min_rate: f64,
}

impl EigenfunctionModel {
    pub fn new(factor: PolynomialFactor, flow: FlowHandle, convergence: Convergence) -> Result<Self, EvaluateError> {
        if factor.n() != flow.dim() {
            return Err(EvaluateError::Mismatch(format!(
                "factor acts on R^{} but the system lives in R^{}",
                factor.n(),
                flow.dim()
            )));
        }
        match (factor.mode(), flow.kind()) {
            (FactorMode::Map, SystemKind::Map) | (FactorMode::Flow, SystemKind::Flow) => {}
            _ => return Err(EvaluateError::Mismatch("factor mode does not match the system kind".into())),
        }
        if !(convergence.step > 0.0) || (flow.is_map() && convergence.step.fract() != 0.0) {
            return Err(EvaluateError::Mismatch(format!("invalid sampling step {}", convergence.step)));
        }
        let rates = linalg::eigenvalues(factor.a_matrix()).map_err(FactorError::from)?;
        let min_rate = match factor.mode() {
            FactorMode::Flow => rates.iter().map(|v| v.re).fold(0.0, f64::min),
            FactorMode::Map => rates.iter().map(|v| v.norm().ln()).fold(0.0, f64::min),
        };
        Ok(Self {
            factor,
            flow,
            convergence,
            min_rate,
        })
    }

    pub fn factor(&self) -> &PolynomialFactor {
        &self.factor
    }

    pub fn flow(&self) -> &FlowHandle {
        &self.flow
    }

    pub fn convergence(&self) -> &Convergence {
        &self.convergence
    }

    pub fn m(&self) -> usize {
        self.factor.m()
    }

    /// `e^{tA}` applied to `v`.
    pub fn apply_exp(&self, t: f64, v: &[C64]) -> Result<Vec<C64>, EvaluateError> {
        Ok(mat_vec(&self.factor.exp_ta(t)?, v))
    }

    /// Same model with `B` and `P` scaled by `s` (used for equivariance checks).
    pub fn scaled(&self, s: C64) -> Result<Self, EvaluateError> {
        let poly = crate::vfield::MapJet::new(self.factor.jet().components.iter().map(|c| c.scale(s)).collect());
        let factor = PolynomialFactor::from_parts(
            self.factor.base().to_vec(),
            self.factor.mode(),
            self.factor.a_matrix().clone(),
            poly,
        )?;
        Self::new(factor, self.flow.clone(), self.convergence.clone())
    }

    /// Advance `x` by one sampling step starting at time `t`.
    fn advance(&self, x: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
        if self.flow.is_map() {
            return self.flow.flow_to(x, self.convergence.step);
        }
        // The factor amplifies state errors by roughly e^{-t min Re(A)}, so
        // the absolute tolerance shrinks along the trajectory.
        let base = self.flow.tolerances().atol;
        let atol = (base * (t * self.min_rate).exp().min(1.0)).max(1e-300);
        self.flow.with_atol(atol).flow_to(x, self.convergence.step)
    }
}

pub(crate) fn mat_vec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

pub(crate) fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Cauchy-gap bookkeeping shared by the fixed-point and cycle evaluators.
#[derive(Debug, Clone)]
pub(crate) struct StopRule {
    tol: f64,
    threshold: f64,
    min_gap: f64,
    last_gap: f64,
    increases: usize,
    tail: Vec<Vec<C64>>,
}

pub(crate) enum StopState {
    Continue,
    Converged,
    Diverged,
}

impl StopRule {
    pub(crate) fn new(conv: &Convergence) -> Self {
        Self {
            tol: conv.tol,
            threshold: conv.divergence_threshold,
            min_gap: f64::INFINITY,
            last_gap: f64::INFINITY,
            increases: 0,
            tail: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, prev: &[C64], cur: &[C64]) -> (StopState, f64) {
        let gap = cdist(prev, cur);
        let norm = cnorm(cur);
        self.tail.push(cur.to_vec());
        if self.tail.len() > 5 {
            self.tail.remove(0);
        }
        if !norm.is_finite() || norm > self.threshold {
            return (StopState::Diverged, gap);
        }
        if gap <= self.tol * (1.0 + norm) {
            return (StopState::Converged, gap);
        }
        if gap > self.last_gap {
            self.increases += 1;
        } else {
            self.increases = 0;
        }
        self.min_gap = self.min_gap.min(gap);
        self.last_gap = gap;
        if self.increases >= 3 && gap > 10.0 * self.min_gap {
            return (StopState::Diverged, gap);
        }
        (StopState::Continue, gap)
    }

    pub(crate) fn tail(&self) -> Vec<Vec<C64>> {
        self.tail.clone()
    }
}

/// Iterate `psi_j = e^{-t_j A} P(Phi^{t_j}(x))` without turning divergence
/// into an error.
pub fn refine_raw(model: &EigenfunctionModel, x: &[f64]) -> Result<(EvalResult, Vec<Vec<C64>>), EvaluateError> {
    let conv = &model.convergence;
    let mut rule = StopRule::new(conv);
    let mut point = x.to_vec();
    let mut psi = model.factor.eval(&point);
    let mut gap = f64::INFINITY;
    for j in 1..=conv.max_steps {
        let t_prev = (j - 1) as f64 * conv.step;
        let t = j as f64 * conv.step;
        point = match model.advance(&point, t_prev) {
            Ok(p) => p,
            Err(FlowError::NonFinite(_)) => {
                return Ok((
                    EvalResult {
                        value: psi,
                        steps_used: j,
                        converged: false,
                        cauchy_gap: gap,
                        flagged_divergent: true,
                    },
                    rule.tail(),
                ))
            }
            Err(e) => return Err(e.into()),
        };
        let next = model.apply_exp(-t, &model.factor.eval(&point))?;
        let (state, g) = rule.push(&psi, &next);
        gap = g;
        psi = next;
        let done = |converged, flagged_divergent| EvalResult {
            value: psi.clone(),
            steps_used: j,
            converged,
            cauchy_gap: gap,
            flagged_divergent,
        };
        match state {
            StopState::Converged => return Ok((done(true, false), rule.tail())),
            StopState::Diverged => return Ok((done(false, true), rule.tail())),
            StopState::Continue => {}
        }
    }
    Ok((
        EvalResult {
            value: psi,
            steps_used: conv.max_steps,
            converged: false,
            cauchy_gap: gap,
            flagged_divergent: false,
        },
        rule.tail(),
    ))
}

/// Exact factor at `x`. Divergence is an error; running out of steps is
/// reported through `converged = false`.
pub fn refine_at(model: &EigenfunctionModel, x: &[f64]) -> Result<EvalResult, EvaluateError> {
    let (res, tail) = refine_raw(model, x)?;
    if res.flagged_divergent {
        return Err(EvaluateError::DivergenceDetected {
            steps: res.steps_used,
            gap: res.cauchy_gap,
            norm: cnorm(&res.value),
            tail,
        });
    }
    Ok(res)
}

/// Two Laplace-average estimates at the same point.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceEstimate {
    /// `(1/T) int_0^T e^{-mu t} P(Phi^t x) dt`.
    pub raw: Vec<C64>,
    /// Richardson combination `2 L(T) - L(T/2)`, which cancels the `1/T`
    /// bias left by the transient.
    pub extrapolated: Vec<C64>,
}

/// Laplace average of `P` along the orbit of `x` (flows only), composite
/// Simpson on dense output with the given step.
pub fn laplace_average_at(
    model: &EigenfunctionModel,
    x: &[f64],
    mu: C64,
    horizon: f64,
    step: f64,
) -> Result<LaplaceEstimate, EvaluateError> {
    if model.flow.is_map() {
        return Err(EvaluateError::Mismatch("Laplace averages need a continuous-time system".into()));
    }
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(EvaluateError::Mismatch("horizon and step must be positive".into()));
    }
    // An even number of panels on [0, T] that also splits at T/2.
    let mut panels = (horizon / step).ceil() as usize;
    panels += (4 - panels % 4) % 4;
    let h = horizon / panels as f64;
    let times: Vec<f64> = (0..=panels).map(|i| i as f64 * h).collect();
    // e^{-mu t} amplifies state errors; tighten the absolute tolerance to
    // the size of the trajectory at the horizon.
    let rate = mu.re.min(model.min_rate).min(0.0);
    let atol = (model.flow.tolerances().atol * (rate * horizon).exp()).max(1e-300);
    let path = model.flow.with_atol(atol).sample(x, &times)?;
    let m = model.m();
    let mut values = Vec::with_capacity(times.len());
    for (t, p) in times.iter().zip(&path) {
        let w = (-mu * t).exp();
        let v: Vec<C64> = model.factor.eval(p).into_iter().map(|z| z * w).collect();
        let norm = cnorm(&v);
        if !norm.is_finite() || norm > model.convergence.divergence_threshold {
            return Err(EvaluateError::DivergenceDetected {
                steps: values.len(),
                gap: f64::NAN,
                norm,
                tail: vec![v],
            });
        }
        values.push(v);
    }
    let simpson = |upto: usize| -> Vec<C64> {
        (0..m)
            .map(|q| {
                let mut acc = values[0][q] + values[upto][q];
                for (i, v) in values.iter().enumerate().take(upto).skip(1) {
                    acc += v[q] * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc * (h / 3.0) / (upto as f64 * h)
            })
            .collect()
    };
    let full = simpson(panels);
    let half = simpson(panels / 2);
    let extrapolated = full.iter().zip(&half).map(|(a, b)| 2.0 * a - b).collect();
    Ok(LaplaceEstimate { raw: full, extrapolated })
}

/// `max_x |psi(Phi^t x) - e^{tA} psi(x)|` with `psi` from [`refine_at`].
pub fn semiconjugacy_residual(model: &EigenfunctionModel, samples: &[Vec<f64>], t: f64) -> Result<f64, EvaluateError> {
    let e_ta = model.factor.exp_ta(t)?;
    let worst = samples
        .par_iter()
        .map(|x| -> Result<f64, EvaluateError> {
            let psi = refine_at(model, x)?.value;
            let y = model.flow.flow_to(x, t)?;
            let psi_y = refine_at(model, &y)?.value;
            Ok(cdist(&psi_y, &mat_vec(&e_ta, &psi)))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Axis-aligned box sampled on a tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis (at least 1; a single node sits at `lower`).
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Grid indices in graded-lexicographic order (total index, then lex).
    pub fn indices(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![vec![]];
        for &r in &self.resolution {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..r.max(1)).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        out.sort_by(|a, b| a.iter().sum::<usize>().cmp(&b.iter().sum::<usize>()).then_with(|| a.cmp(b)));
        out
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| {
                let r = self.resolution[d];
                if r <= 1 {
                    self.lower[d]
                } else {
                    self.lower[d] + (self.upper[d] - self.lower[d]) * i as f64 / (r - 1) as f64
                }
            })
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.indices().iter().map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRecord {
    pub x: Vec<f64>,
    pub values: Vec<C64>,
    /// Asymptotic phase, for cycle tables.
    pub phase: Option<C64>,
    pub converged: bool,
    pub steps: usize,
    pub error: Option<String>,
    /// The failure was a detected divergence rather than a numerical error.
    pub diverged: bool,
}

impl GridRecord {
    pub fn failed(x: Vec<f64>, m: usize, with_phase: bool, error: String) -> Self {
        let nan = C64::new(f64::NAN, f64::NAN);
        Self {
            x,
            values: vec![nan; m],
            phase: with_phase.then_some(nan),
            converged: false,
            steps: 0,
            error: Some(error),
            diverged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub n: usize,
    pub m: usize,
    pub with_phase: bool,
    pub records: Vec<GridRecord>,
}

impl GridTable {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        for prefix in ["re", "im", "abs"] {
            h.extend((1..=self.m).map(|i| format!("{prefix}_{i}")));
        }
        if self.with_phase {
            h.push("phase_re".into());
            h.push("phase_im".into());
        }
        h.push("converged".into());
        h.push("steps".into());
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.records {
            let mut cols: Vec<String> = r.x.iter().map(|v| format!("{v:.16e}")).collect();
            cols.extend(r.values.iter().map(|z| format!("{:.16e}", z.re)));
            cols.extend(r.values.iter().map(|z| format!("{:.16e}", z.im)));
            cols.extend(r.values.iter().map(|z| format!("{:.16e}", z.norm())));
            if self.with_phase {
                let p = r.phase.unwrap_or(C64::new(f64::NAN, f64::NAN));
                cols.push(format!("{:.16e}", p.re));
                cols.push(format!("{:.16e}", p.im));
            }
            cols.push(if r.converged { "1" } else { "0" }.into());
            cols.push(r.steps.to_string());
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn divergences(&self) -> usize {
        self.records.iter().filter(|r| r.diverged).count()
    }
}

/// Evaluate `f` on every node in parallel; row order follows
/// [`GridSpec::indices`].
pub fn tabulate<F>(spec: &GridSpec, m: usize, with_phase: bool, f: F) -> GridTable
where
    F: Fn(&[f64]) -> GridRecord + Sync,
{
    let nodes = spec.nodes();
    let records = nodes.par_iter().map(|x| f(x)).collect();
    GridTable {
        n: spec.dim(),
        m,
        with_phase,
        records,
    }
}

/// [`refine_at`] on every grid node; failures are recorded, not fatal.
pub fn grid_eval(model: &EigenfunctionModel, spec: &GridSpec) -> Result<GridTable, EvaluateError> {
    if spec.dim() != model.flow.dim() || spec.upper.len() != spec.dim() || spec.resolution.len() != spec.dim() {
        return Err(EvaluateError::Mismatch("grid dimension does not match the system".into()));
    }
    let m = model.m();
    Ok(tabulate(spec, m, false, |x| match refine_at(model, x) {
        Ok(r) => GridRecord {
            x: x.to_vec(),
            values: r.value,
            phase: None,
            converged: r.converged,
            steps: r.steps_used,
            error: None,
            diverged: false,
        },
        Err(e) => GridRecord {
            diverged: matches!(e, EvaluateError::DivergenceDetected { .. }),
            ..GridRecord::failed(x.to_vec(), m, false, e.to_string())
        },
    }))
}
