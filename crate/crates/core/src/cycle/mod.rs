//! Asymptotic phase, isostable coordinates and the Floquet normal form of
//! an attracting limit cycle.
//!
//! Everything is built from polynomial data on a handful of transversal
//! sections `Sigma_j` through `gamma(j tau / L)`:
//!
//! * the return map `Pi` and return time `T` on `Sigma_0`,
//! * a section factor `P_s` with `P_s(Pi(u)) = e^{T(u) A} P_s(u)`,
//! * a section phase `phi` with `phi(Pi(u)) - phi(u) = T(u) - tau`,
//! * for every `j`, the transit to `Sigma_0`, which pulls `P_s` and `phi`
//!   back to local polynomials on `Sigma_j`.
//!
//! A point is evaluated by flowing it to successive sections and reading
//! off `e^{-tA} Q_j(u)` and `e^{2 pi i (Theta_j(u) - t) / tau}` until the
//! values settle.

mod transit;

pub use transit::{section_transit, Section, SectionTransit};

use std::f64::consts::PI;
use std::sync::Arc;

use crate::evaluate::{cnorm, mat_vec, Convergence, EvalResult, StopRule, StopState};
use crate::factor::{solve_homological, FactorError, FactorMode, HomologicalProblem, PolynomialFactor};
use crate::flow::{FlowError, FlowHandle, LimitCycle, Tolerances};
use crate::linalg::{self, CMatrix, LinalgError, C64};
use crate::spectral::{seed_covector, SpectralError};
use crate::vfield::{monomial_values, Jet, MapJet, MultiIndex};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CycleError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("degenerate cycle geometry: {0}")]
    Degenerate(String),
    #[error("orbit did not approach the cycle within {0} steps")]
    NotApproaching(usize),
    #[error("divergence detected after {steps} section hits (gap {gap:.3e}, |psi| {norm:.3e})")]
    DivergenceDetected { steps: usize, gap: f64, norm: f64 },
}

impl From<crate::vfield::EvalError> for CycleError {
    fn from(e: crate::vfield::EvalError) -> Self {
        CycleError::Flow(e.into())
    }
}

/// Which isostable coordinates to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsostableMode {
    /// One coordinate for the largest-modulus multiplier.
    Slowest,
    /// All `n - 1` coordinates: `B = I` on the section, `A = log(DPi)/tau`.
    Floquet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    pub order: usize,
    /// Number of local sections around the orbit.
    pub sections: usize,
    /// Reference samples used to find the nearest phase.
    pub reference_samples: usize,
    /// Radius (relative to the orbit size) inside which local polynomials
    /// are evaluated.
    pub tube: f64,
    pub convergence: Convergence,
    pub tolerances: Tolerances,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            order: 6,
            sections: 16,
            reference_samples: 256,
            tube: 0.25,
            convergence: Convergence {
                step: 1.0,
                tol: 1e-9,
                max_steps: 400,
                divergence_threshold: 1e8,
            },
            tolerances: Tolerances {
                rtol: 1e-12,
                atol: 1e-14,
                ..Tolerances::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
struct Chart {
    section: Section,
    phase: f64,
    transit: SectionTransit,
}

/// Sections, transits and reference orbit shared by the phase and
/// isostable models.
#[derive(Debug, Clone)]
pub struct CycleGeometry {
    handle: FlowHandle,
    cycle: LimitCycle,
    config: CycleConfig,
    charts: Vec<Chart>,
    samples: Vec<Vec<f64>>,
    tube: f64,
}

impl CycleGeometry {
    pub fn new(handle: &FlowHandle, cycle: &LimitCycle, config: &CycleConfig) -> Result<Self, CycleError> {
        if handle.is_map() {
            return Err(FlowError::NotContinuous.into());
        }
        if config.sections == 0 || config.reference_samples < 2 || config.order < 1 {
            return Err(CycleError::Degenerate("sections, samples and order must be positive".into()));
        }
        let handle = handle.with_tolerances(config.tolerances);
        let tau = cycle.tau;
        let l = config.sections;
        let times: Vec<f64> = (0..l).map(|j| j as f64 * tau / l as f64).collect();
        let points = handle.sample(&cycle.x0, &times)?;
        let sections: Vec<Section> = points
            .iter()
            .map(|p| Section::through(&handle, p))
            .collect::<Result<_, _>>()?;
        let mut charts = Vec::with_capacity(l);
        for (j, s) in sections.iter().enumerate() {
            let nominal = tau - times[j];
            let transit = section_transit(&handle, s, &sections[0], nominal, config.order)?;
            charts.push(Chart {
                section: s.clone(),
                phase: times[j],
                transit,
            });
        }
        let rt: Vec<f64> = (0..config.reference_samples)
            .map(|i| i as f64 * tau / config.reference_samples as f64)
            .collect();
        let samples = handle.sample(&cycle.x0, &rt)?;
        let n = cycle.dim();
        let centre: Vec<f64> = (0..n).map(|i| samples.iter().map(|p| p[i]).sum::<f64>() / samples.len() as f64).collect();
        let radius = samples.iter().map(|p| dist(p, &centre)).fold(0.0, f64::max);
        Ok(Self {
            handle,
            cycle: cycle.clone(),
            config: config.clone(),
            charts,
            samples,
            tube: config.tube * radius.max(1e-12),
        })
    }

    pub fn cycle(&self) -> &LimitCycle {
        &self.cycle
    }

    pub fn handle(&self) -> &FlowHandle {
        &self.handle
    }

    pub fn tau(&self) -> f64 {
        self.cycle.tau
    }

    /// Return map on `Sigma_0` and its time.
    pub fn return_map(&self) -> &SectionTransit {
        &self.charts[0].transit
    }

    pub fn section(&self, j: usize) -> &Section {
        &self.charts[j].section
    }

    /// Linear part of the return map.
    pub fn return_linear(&self) -> CMatrix {
        let lin = self.charts[0].transit.map.linear_part();
        let d = lin.len();
        CMatrix::from_fn(d, d, |i, j| C64::new(lin[i][j], 0.0))
    }

    fn nearest_sample(&self, y: &[f64]) -> (usize, f64) {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist(p, y)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    fn flow(&self, y: &[f64], dt: f64, t: f64, rate: f64) -> Result<Vec<f64>, CycleError> {
        let atol = (self.config.tolerances.atol * (t * rate).exp().min(1.0)).max(1e-300);
        Ok(self.handle.with_atol(atol).flow_to(y, dt)?)
    }

    /// Newton on the flight time to section `j`.
    fn hit(&self, y: &[f64], j: usize, guess: f64, t: f64, rate: f64) -> Result<(Vec<f64>, f64), CycleError> {
        let s = &self.charts[j].section;
        let mut sigma = guess;
        let mut z = self.flow(y, sigma, t, rate)?;
        for _ in 0..12 {
            let g = s.height(&z);
            let f = self.handle.rhs(&z)?;
            let gp: f64 = f.iter().zip(&s.normal).map(|(a, b)| a * b).sum();
            if gp.abs() < 1e-14 {
                return Err(CycleError::Degenerate("flow tangent to the section".into()));
            }
            let dsig = -g / gp;
            if dsig.abs() <= 1e-15 * (1.0 + sigma.abs()) {
                break;
            }
            z = self.flow(&z, dsig, t + sigma, rate)?;
            sigma += dsig;
        }
        Ok((z, sigma))
    }

    /// Follow `x` through successive section hits, feeding `(j, u, t)` to
    /// `value` and stopping on the Cauchy rule.
    fn march<F>(&self, x: &[f64], rate: f64, mut value: F) -> Result<EvalResult, CycleError>
    where
        F: FnMut(usize, &[f64], f64) -> Vec<C64>,
    {
        let conv = &self.config.convergence;
        let tau = self.tau();
        let l = self.charts.len();
        let step = tau / l as f64;
        let mut rule = StopRule::new(conv);
        let mut y = x.to_vec();
        let mut t = 0.0;
        let mut target: Option<(usize, f64)> = None;
        let mut prev: Option<Vec<C64>> = None;
        let mut hits = 0;
        let mut gap = f64::INFINITY;
        for _ in 0..conv.max_steps {
            let (j, guess) = match target {
                Some(v) => v,
                None => {
                    let (i, d) = self.nearest_sample(&y);
                    if d > self.tube {
                        y = self.flow(&y, step, t, rate)?;
                        t += step;
                        continue;
                    }
                    let ph = i as f64 * tau / self.samples.len() as f64;
                    let jj = (ph / step).ceil() as usize;
                    (jj % l, jj as f64 * step - ph)
                }
            };
            let (z, sigma) = self.hit(&y, j, guess, t, rate)?;
            t += sigma;
            y = z;
            let section = &self.charts[j].section;
            if dist(&y, &section.origin) > self.tube {
                target = None;
                continue;
            }
            let u = section.coords(&y);
            let v = value(j, &u, t);
            hits += 1;
            if let Some(p) = &prev {
                let (state, g) = rule.push(p, &v);
                gap = g;
                match state {
                    StopState::Converged => {
                        return Ok(EvalResult {
                            value: v,
                            steps_used: hits,
                            converged: true,
                            cauchy_gap: gap,
                            flagged_divergent: false,
                        })
                    }
                    StopState::Diverged => {
                        return Err(CycleError::DivergenceDetected {
                            steps: hits,
                            gap,
                            norm: cnorm(&v),
                        })
                    }
                    StopState::Continue => {}
                }
            }
            prev = Some(v);
            target = Some(((j + 1) % l, step));
        }
        match prev {
            Some(v) => Ok(EvalResult {
                value: v,
                steps_used: hits,
                converged: false,
                cauchy_gap: gap,
                flagged_divergent: false,
            }),
            None => Err(CycleError::NotApproaching(conv.max_steps)),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn eval_jet(j: &Jet<f64>, u: &[f64]) -> f64 {
    j.eval(u)
}

fn eval_cjet(j: &MapJet<C64>, u: &[f64]) -> Vec<C64> {
    let layout = j.components[0].layout();
    let uc: Vec<C64> = u.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mono = monomial_values(layout, &uc);
    j.components
        .iter()
        .map(|c| c.coeffs().iter().zip(&mono).map(|(a, b)| a * b).sum())
        .collect()
}

/// `sum_i (delta A)^i / i!` as a matrix of jets (`delta` has no constant term).
fn exp_jet_matrix(delta: &Jet<C64>, a: &CMatrix) -> Vec<Vec<Jet<C64>>> {
    let m = a.nrows();
    let layout = delta.layout().clone();
    let mut out: Vec<Vec<Jet<C64>>> = (0..m)
        .map(|p| {
            (0..m)
                .map(|q| Jet::constant_like(&layout, C64::new(if p == q { 1.0 } else { 0.0 }, 0.0)))
                .collect()
        })
        .collect();
    let mut power = Jet::constant_like(&layout, C64::new(1.0, 0.0));
    let mut apow = CMatrix::identity(m, m);
    let mut fact = 1.0;
    for i in 1..=delta.order() {
        power = &power * delta;
        apow = &apow * a;
        fact *= i as f64;
        for p in 0..m {
            for q in 0..m {
                out[p][q] += &power.scale(apow[(p, q)] / fact);
            }
        }
    }
    out
}

fn const_times(c: &CMatrix, s: &[Vec<Jet<C64>>]) -> Vec<Vec<Jet<C64>>> {
    let m = c.nrows();
    (0..m)
        .map(|p| {
            (0..m)
                .map(|q| {
                    let mut acc = Jet::zero_like(s[0][0].layout());
                    for (r, row) in s.iter().enumerate() {
                        acc += &row[q].scale(c[(p, r)]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn mat_jet_apply(s: &[Vec<Jet<C64>>], v: &MapJet<C64>) -> MapJet<C64> {
    MapJet::new(
        s.iter()
            .map(|row| {
                let mut acc = Jet::zero_like(row[0].layout());
                for (q, e) in row.iter().enumerate() {
                    acc += &(e * &v.components[q]);
                }
                acc
            })
            .collect(),
    )
}

/// Asymptotic phase `psi_theta`, normalised by `psi_theta(x0) = 1`.
#[derive(Debug, Clone)]
pub struct PhaseModel {
    geometry: Arc<CycleGeometry>,
    /// Section phase on `Sigma_0`.
    section_phase: Jet<f64>,
    /// `Theta_j(u)` on each local section.
    charts: Vec<Jet<f64>>,
}

impl PhaseModel {
    pub fn new(geometry: Arc<CycleGeometry>) -> Result<Self, CycleError> {
        let ret = geometry.return_map();
        let pi = ret.map.to_complex();
        let delta = ret.delta().to_complex();
        let forcing = MapJet::new(vec![delta]);
        let layout = pi.components[0].layout().clone();
        let problem = HomologicalProblem {
            map: &pi,
            multiplier: vec![vec![Jet::constant_like(&layout, C64::new(1.0, 0.0))]],
            forcing: Some(&forcing),
            linear: None,
        };
        let (phi, _) = solve_homological(&problem)?;
        let phi = phi.components[0].map_coeffs(|z| z.re);
        let charts = geometry
            .charts
            .iter()
            .map(|c| {
                let mut theta = &phi.compose(&c.transit.map.components) - &c.transit.delta();
                theta.coeffs_mut()[0] += c.phase;
                theta
            })
            .collect();
        Ok(Self {
            geometry,
            section_phase: phi,
            charts,
        })
    }

    pub fn geometry(&self) -> &Arc<CycleGeometry> {
        &self.geometry
    }

    pub fn section_phase(&self) -> &Jet<f64> {
        &self.section_phase
    }

    fn value(&self, j: usize, u: &[f64], t: f64) -> C64 {
        let tau = self.geometry.tau();
        let th = (eval_jet(&self.charts[j], u) - t).rem_euclid(tau);
        C64::from_polar(1.0, 2.0 * PI * th / tau)
    }
}

/// `psi_theta(x)`.
pub fn asymptotic_phase_at(model: &PhaseModel, x: &[f64]) -> Result<EvalResult, CycleError> {
    model.geometry.march(x, 0.0, |j, u, t| vec![model.value(j, u, t)])
}

/// Isostable coordinates `psi_z`.
#[derive(Debug, Clone)]
pub struct IsostableModel {
    geometry: Arc<CycleGeometry>,
    mode: IsostableMode,
    /// Section factor in flow mode (matrix `A`).
    factor: PolynomialFactor,
    exponents: Vec<C64>,
    charts: Vec<MapJet<C64>>,
    min_rate: f64,
}

impl IsostableModel {
    pub fn new(geometry: Arc<CycleGeometry>, mode: IsostableMode) -> Result<Self, CycleError> {
        let tau = geometry.tau();
        let pi1 = geometry.return_linear();
        let d = pi1.nrows();
        let (b, a) = match mode {
            IsostableMode::Floquet => {
                let a = linalg::logm(&pi1)? / C64::new(tau, 0.0);
                (CMatrix::identity(d, d), a)
            }
            IsostableMode::Slowest => {
                let mut ev = linalg::eigenvalues(&pi1)?;
                ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.im.total_cmp(&x.im)));
                let lambda = ev[0];
                let w = seed_covector(&pi1, lambda, 1e-6)?.w;
                let b = CMatrix::from_fn(1, d, |_, j| w[j]);
                let (l, _) = linalg::principal_log(lambda);
                (b, CMatrix::from_element(1, 1, l / tau))
            }
        };
        let e_ta = linalg::expm(&a, tau)?;
        let ret = geometry.return_map();
        let pi = ret.map.to_complex();
        let delta = ret.delta().to_complex();
        let multiplier = const_times(&e_ta, &exp_jet_matrix(&delta, &a));
        let problem = HomologicalProblem {
            map: &pi,
            multiplier,
            forcing: None,
            linear: Some(&b),
        };
        let (poly, _) = solve_homological(&problem)?;
        let factor = PolynomialFactor::from_parts(vec![0.0; d], FactorMode::Flow, a.clone(), poly)?;
        let exponents = linalg::eigenvalues(&a)?;
        let min_rate = exponents.iter().map(|v| v.re).fold(0.0, f64::min);
        let mut charts = Vec::with_capacity(geometry.charts.len());
        for c in &geometry.charts {
            let back = factor.jet().compose(&c.transit.map.to_complex().components);
            let nominal = c.transit.time.value();
            let s = const_times(&linalg::expm(&a, -nominal)?, &exp_jet_matrix(&(-&c.transit.delta().to_complex()), &a));
            charts.push(mat_jet_apply(&s, &back));
        }
        Ok(Self {
            geometry,
            mode,
            factor,
            exponents,
            charts,
            min_rate,
        })
    }

    pub fn geometry(&self) -> &Arc<CycleGeometry> {
        &self.geometry
    }

    pub fn mode(&self) -> IsostableMode {
        self.mode
    }

    pub fn section_factor(&self) -> &PolynomialFactor {
        &self.factor
    }

    /// Eigenvalues of `A` (Floquet exponents in use).
    pub fn exponents(&self) -> &[C64] {
        &self.exponents
    }

    pub fn m(&self) -> usize {
        self.factor.m()
    }

    /// `e^{tA} v`.
    pub fn apply_exp(&self, t: f64, v: &[C64]) -> Result<Vec<C64>, CycleError> {
        Ok(mat_vec(&self.factor.exp_ta(t)?, v))
    }

    fn value(&self, j: usize, u: &[f64], t: f64) -> Vec<C64> {
        let q = eval_cjet(&self.charts[j], u);
        let e = self.factor.exp_ta(-t).expect("flow-mode factor");
        mat_vec(&e, &q)
    }
}

/// `psi_z(x)`.
pub fn isostable_at(model: &IsostableModel, x: &[f64]) -> Result<EvalResult, CycleError> {
    model.geometry.march(x, model.min_rate, |j, u, t| model.value(j, u, t))
}

/// The embedding `(psi_theta, psi_z)`.
#[derive(Debug, Clone)]
pub struct FloquetNormalForm {
    pub phase: PhaseModel,
    pub isostable: IsostableModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormValue {
    pub phase: C64,
    pub isostable: Vec<C64>,
    pub converged: bool,
    pub steps_used: usize,
}

pub fn floquet_normal_form(
    handle: &FlowHandle,
    cycle: &LimitCycle,
    config: &CycleConfig,
    mode: IsostableMode,
) -> Result<FloquetNormalForm, CycleError> {
    let geometry = Arc::new(CycleGeometry::new(handle, cycle, config)?);
    Ok(FloquetNormalForm {
        phase: PhaseModel::new(geometry.clone())?,
        isostable: IsostableModel::new(geometry, mode)?,
    })
}

impl FloquetNormalForm {
    /// Joint evaluation along one orbit; convergence is judged on both parts.
    pub fn eval(&self, x: &[f64]) -> Result<NormalFormValue, CycleError> {
        let iso = &self.isostable;
        let r = iso.geometry.march(x, iso.min_rate, |j, u, t| {
            let mut v = vec![self.phase.value(j, u, t)];
            v.extend(iso.value(j, u, t));
            v
        })?;
        Ok(NormalFormValue {
            phase: r.value[0],
            isostable: r.value[1..].to_vec(),
            converged: r.converged,
            steps_used: r.steps_used,
        })
    }

    /// Smallest output separation over distinct pairs of `samples`; a
    /// positive value means the embedding separated the cloud.
    pub fn injectivity_margin(&self, samples: &[Vec<f64>]) -> Result<f64, CycleError> {
        let vals: Vec<Vec<C64>> = samples
            .iter()
            .map(|x| {
                self.eval(x).map(|v| {
                    let mut o = vec![v.phase];
                    o.extend(v.isostable);
                    o
                })
            })
            .collect::<Result<_, _>>()?;
        let mut best = f64::INFINITY;
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                if dist(&samples[i], &samples[j]) < 1e-9 {
                    continue;
                }
                let d = vals[i].iter().zip(&vals[j]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                best = best.min(d);
            }
        }
        Ok(best)
    }
}

/// All `(m, j)` with `|m| <= k`, `|j| <= j_range` and
/// `|mu - m . lambda - 2 pi i j / tau| <= tol`, `(m, j) != 0`.
pub fn cycle_eigenvalue_lattice(cycle: &LimitCycle, mu: C64, k: usize, j_range: i64, tol: f64) -> Vec<(MultiIndex, i64)> {
    lattice_with_phase(&cycle.floquet_exponents, cycle.tau, mu, k, j_range, tol)
}

pub(crate) fn lattice_with_phase(lambda: &[C64], tau: f64, mu: C64, k: usize, j_range: i64, tol: f64) -> Vec<(MultiIndex, i64)> {
    crate::classify::cycle_monomials(lambda, tau, mu, k, j_range, tol)
        .into_iter()
        .map(|s| (s.m, s.j))
        .collect()
}

/// The same cycle data at `Phi^s(x0)`.
pub fn rebase_cycle(handle: &FlowHandle, cycle: &LimitCycle, s: f64) -> Result<LimitCycle, CycleError> {
    Ok(cycle.rebased(handle, s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::find_periodic_orbit;
    use crate::vfield::parse_field;
    use std::collections::BTreeMap;

    #[test]
    fn lattice_examples() {
        let lam = [C64::new(-2.0, 0.0)];
        let tau = 2.0 * PI;
        assert_eq!(lattice_with_phase(&lam, tau, C64::new(-4.0, 0.0), 4, 3, 1e-9), vec![(vec![2], 0)]);
        assert_eq!(lattice_with_phase(&lam, tau, C64::new(-2.0, 1.0), 4, 3, 1e-9), vec![(vec![1], 1)]);
        assert_eq!(lattice_with_phase(&lam, tau, C64::new(0.0, 1.0), 4, 3, 1e-9), vec![(vec![0], 1)]);
    }

    #[test]
    fn stuart_landau_values() {
        let h = FlowHandle::flow(
            parse_field(
                "[x1*(1 - x1^2 - x2^2) - x2, x2*(1 - x1^2 - x2^2) + x1]",
                2,
                &BTreeMap::new(),
            )
            .unwrap(),
        );
        let c = find_periodic_orbit(&h, &[1.0, 0.0], 6.0).unwrap();
        let nf = floquet_normal_form(&h, &c, &CycleConfig::default(), IsostableMode::Slowest).unwrap();
        for &(r, th) in &[(2.0f64, 0.7f64), (0.5, -2.0), (1.0, 0.0), (3.0, 2.5)] {
            let v = nf.eval(&[r * th.cos(), r * th.sin()]).unwrap();
            assert!(v.converged, "r={r}");
            let want = (1.0 - r.powi(-2)) / 2.0;
            assert!((v.isostable[0] - C64::new(want, 0.0)).norm() < 1e-6, "r={r}: {} vs {want}", v.isostable[0]);
            assert!((v.phase - C64::from_polar(1.0, th)).norm() < 1e-6, "phase at r={r}: {}", v.phase);
        }
    }
}
