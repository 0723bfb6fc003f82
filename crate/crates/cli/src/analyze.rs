//! Attractor location, target selection and the hypothesis report.

use kf_core::flow::{find_fixed_point, find_periodic_orbit, FixedPointData, FlowHandle, LimitCycle, SystemKind};
use kf_core::linalg::{self, CMatrix, C64};
use kf_core::spectral::{
    check_k_nonresonant, hypothesis_verdict, seed_covector, spectral_spread, HypothesisVerdict, Order,
    ResonanceReport, Spectrum, SpreadResult, SpreadZone,
};
use kf_core::vfield::parse_field;

use crate::config::{AttractorKind, JobConfig, Target};
use crate::format::{self, line};
use crate::{numerical, CliError};

/// Relative tolerance for matching a requested exponent to the spectrum.
const MATCH_TOL: f64 = 1e-6;

pub fn build_handle(cfg: &JobConfig) -> Result<FlowHandle, CliError> {
    let prog = parse_field(&cfg.system.field, cfg.system.dim, &cfg.system.params).map_err(|e| {
        CliError::Config(crate::ConfigError {
            line: 0,
            message: format!("field: {e}"),
        })
    })?;
    Ok(match cfg.system.kind {
        SystemKind::Flow => FlowHandle::flow(prog),
        SystemKind::Map => FlowHandle::map(prog),
    })
}

#[derive(Debug, Clone)]
pub struct PointAttractor {
    pub fixed: FixedPointData,
    /// Linearization of the time-one map.
    pub f1: CMatrix,
    /// Eigenvalues of `f1`, largest modulus first.
    pub multipliers: Vec<C64>,
    /// Matching exponents: field Jacobian eigenvalues for flows, principal
    /// logarithms for maps.
    pub exponents: Vec<C64>,
    /// Field Jacobian (flows only).
    pub generator: Option<CMatrix>,
}

#[derive(Debug, Clone)]
pub enum Attractor {
    Point(PointAttractor),
    Cycle(LimitCycle),
}

/// Linear data `(e^A, A, B)` of the requested factor at a fixed point.
#[derive(Debug, Clone)]
pub struct Principal {
    pub e_a: CMatrix,
    /// Generator for flows.
    pub a: Option<CMatrix>,
    pub b: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    /// k-nonresonance (the polynomial factor is unique).
    Nonresonance,
    /// Nonresonance and spread strictly below `k + alpha` (the limit exists).
    Existence,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub handle: FlowHandle,
    pub attractor: Attractor,
    pub principal: Option<Principal>,
    /// Spectrum of `e^A` (target multipliers).
    pub target: Spectrum,
    /// Spectrum of the linearization (per unit time for points, per period
    /// for cycles).
    pub spectrum: Spectrum,
    pub report: ResonanceReport,
    pub spread: SpreadResult,
    pub verdict: HypothesisVerdict,
    pub text: String,
}

fn sort_spectrum(v: &mut [C64]) {
    v.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.im.total_cmp(&x.im)));
}

fn locate(cfg: &JobConfig, handle: &FlowHandle) -> Result<Attractor, CliError> {
    let guess = &cfg.attractor.guess;
    match cfg.attractor.kind {
        AttractorKind::Point => {
            let fixed = find_fixed_point(handle, guess).map_err(|e| CliError::Attractor(format!("fixed point: {e}")))?;
            let f1 = linalg::complexify(&fixed.jacobian);
            let mut multipliers = linalg::eigenvalues(&f1).map_err(numerical)?;
            sort_spectrum(&mut multipliers);
            let (exponents, generator) = match handle.kind() {
                SystemKind::Flow => {
                    let df = linalg::complexify(&handle.rhs_jacobian(&fixed.x0).map_err(numerical)?);
                    let mut pool = linalg::eigenvalues(&df).map_err(numerical)?;
                    let mut ex = Vec::with_capacity(pool.len());
                    for lam in &multipliers {
                        let (i, _) = pool
                            .iter()
                            .enumerate()
                            .map(|(i, nu)| (i, (nu.exp() - lam).norm()))
                            .min_by(|a, b| a.1.total_cmp(&b.1))
                            .expect("same dimension");
                        ex.push(pool.remove(i));
                    }
                    (ex, Some(df))
                }
                SystemKind::Map => (multipliers.iter().map(|&l| linalg::principal_log(l).0).collect(), None),
            };
            Ok(Attractor::Point(PointAttractor {
                fixed,
                f1,
                multipliers,
                exponents,
                generator,
            }))
        }
        AttractorKind::Cycle => {
            let period = cfg.attractor.period.expect("validated");
            let c = find_periodic_orbit(handle, guess, period).map_err(|e| CliError::Attractor(format!("limit cycle: {e}")))?;
            Ok(Attractor::Cycle(c))
        }
    }
}

fn seed_row(f1: &CMatrix, lambda: C64) -> Result<Vec<C64>, CliError> {
    Ok(seed_covector(f1, lambda, MATCH_TOL).map_err(numerical)?.w)
}

fn principal(p: &PointAttractor, target: Target) -> Result<Principal, CliError> {
    let n = p.f1.nrows();
    let pick = |idx: &[usize]| -> Result<Principal, CliError> {
        let rows: Vec<Vec<C64>> = idx.iter().map(|&i| seed_row(&p.f1, p.multipliers[i])).collect::<Result<_, _>>()?;
        let m = idx.len();
        Ok(Principal {
            e_a: CMatrix::from_fn(m, m, |r, c| if r == c { p.multipliers[idx[r]] } else { C64::new(0.0, 0.0) }),
            a: p.generator
                .as_ref()
                .map(|_| CMatrix::from_fn(m, m, |r, c| if r == c { p.exponents[idx[r]] } else { C64::new(0.0, 0.0) })),
            b: CMatrix::from_fn(m, n, |r, c| rows[r][c]),
        })
    };
    match target {
        Target::Slowest => pick(&[0]),
        Target::AllPrincipal => {
            let scale = p.multipliers[0].norm().max(1e-300);
            for i in 0..n {
                for j in i + 1..n {
                    if (p.multipliers[i] - p.multipliers[j]).norm() <= MATCH_TOL * scale {
                        return Err(CliError::Numerical(
                            "repeated multipliers have no unique principal eigenfunctions; use target = sternberg".into(),
                        ));
                    }
                }
            }
            pick(&(0..n).collect::<Vec<_>>())
        }
        Target::Sternberg => Ok(Principal {
            e_a: p.f1.clone(),
            a: p.generator.clone(),
            b: CMatrix::identity(n, n),
        }),
        Target::Value(mu) => {
            let i = p
                .exponents
                .iter()
                .position(|e| (e - mu).norm() <= MATCH_TOL * mu.norm().max(1.0))
                .ok_or_else(|| {
                    CliError::Numerical(format!(
                        "target {} is not an exponent of the linearization {}",
                        format::c(mu),
                        format::complexes(&p.exponents)
                    ))
                })?;
            let lambda = p.multipliers[i];
            let w = seed_row(&p.f1, lambda)?;
            Ok(Principal {
                e_a: CMatrix::from_element(1, 1, lambda),
                a: p.generator.as_ref().map(|_| CMatrix::from_element(1, 1, mu)),
                b: CMatrix::from_fn(1, n, |_, c| w[c]),
            })
        }
        Target::Floquet => Err(CliError::Config(crate::ConfigError {
            line: 0,
            message: "target 'floquet' needs a cycle attractor".into(),
        })),
    }
}

pub fn analyze(cfg: &JobConfig) -> Result<Analysis, CliError> {
    let handle = build_handle(cfg)?;
    let attractor = locate(cfg, &handle)?;
    let a = &cfg.analysis;
    let (principal, target, spectrum) = match &attractor {
        Attractor::Point(p) => {
            let pr = principal(p, a.target)?;
            let mut x = linalg::eigenvalues(&pr.e_a).map_err(numerical)?;
            sort_spectrum(&mut x);
            (Some(pr), Spectrum::from_values(x), Spectrum::from_values(p.multipliers.clone()))
        }
        Attractor::Cycle(c) => {
            let y = c.floquet_multipliers.clone();
            let x = match a.target {
                Target::Slowest => vec![y[0]],
                Target::Floquet | Target::AllPrincipal | Target::Sternberg => y.clone(),
                Target::Value(mu) => vec![(mu * c.tau).exp()],
            };
            (None, Spectrum::from_values(x), Spectrum::from_values(y))
        }
    };
    let report = check_k_nonresonant(&target, &spectrum, Order::Finite(a.k), a.resonance_tol).map_err(numerical)?;
    let spread = spectral_spread(&target, &spectrum).map_err(numerical)?;
    let verdict = hypothesis_verdict(&report, spread.value, a.k, a.alpha);
    let mut an = Analysis {
        handle,
        attractor,
        principal,
        target,
        spectrum,
        report,
        spread,
        verdict,
        text: String::new(),
    };
    an.text = render(cfg, &an);
    Ok(an)
}

fn zone_name(z: SpreadZone) -> &'static str {
    match z {
        SpreadZone::Strict => "strict (spread < k + alpha)",
        SpreadZone::Boundary => "boundary (spread = k + alpha)",
        SpreadZone::Violated => "violated (spread > k + alpha)",
    }
}

fn holds(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

fn render(cfg: &JobConfig, an: &Analysis) -> String {
    let a = &cfg.analysis;
    let mut s = String::new();
    let kind = match cfg.system.kind {
        SystemKind::Flow => "flow",
        SystemKind::Map => "map",
    };
    line(&mut s, "system", format!("{kind}, dimension {}", cfg.system.dim));
    match &an.attractor {
        Attractor::Point(p) => {
            line(&mut s, "attractor", "fixed point");
            line(&mut s, "x0", format::reals(&p.fixed.x0));
            line(&mut s, "residual", format::f(p.fixed.newton_residual));
            line(&mut s, "multipliers", format::complexes(&p.multipliers));
            line(&mut s, "exponents", format::complexes(&p.exponents));
        }
        Attractor::Cycle(c) => {
            line(&mut s, "attractor", "limit cycle");
            line(&mut s, "x0", format::reals(&c.x0));
            line(&mut s, "period", format::f(c.tau));
            line(&mut s, "residual", format::f(c.shooting_residual));
            line(&mut s, "trivial", format::c(c.trivial_multiplier));
            line(&mut s, "multipliers", format::complexes(&c.floquet_multipliers));
            line(&mut s, "exponents", format::complexes(&c.floquet_exponents));
        }
    }
    line(&mut s, "target", a.target);
    line(&mut s, "target mult.", format::complexes(&an.target.values));
    line(&mut s, "k", a.k);
    line(&mut s, "alpha", format::f(a.alpha));
    let (i, j) = an.spread.attained_by;
    line(
        &mut s,
        "spread",
        format!("{} (target {}, eigenvalue {})", format::f(an.spread.value), i + 1, j + 1),
    );
    line(&mut s, "budget", format::f(a.k as f64 + a.alpha));
    line(&mut s, "zone", zone_name(an.verdict.zone));
    let r = &an.report;
    if r.is_nonresonant() {
        line(&mut s, "resonance", format!("{}-nonresonant (tolerance {:e})", r.requested, r.tolerance));
    } else {
        line(
            &mut s,
            "resonance",
            format!("resonant at order <= {} (tolerance {:e})", r.requested, r.tolerance),
        );
        for w in &r.witnesses {
            line(
                &mut s,
                "witness",
                format!("target {}  m = {}  defect {}", w.target + 1, format::index(&w.m), format::f(w.defect)),
            );
        }
    }
    line(&mut s, "uniqueness", holds(an.verdict.uniqueness));
    line(&mut s, "existence", holds(an.verdict.existence));
    s
}

impl Analysis {
    /// Stable exponents (per unit time).
    pub fn exponents(&self) -> Vec<C64> {
        match &self.attractor {
            Attractor::Point(p) => p.exponents.clone(),
            Attractor::Cycle(c) => c.floquet_exponents.clone(),
        }
    }

    /// Why the hypotheses needed by `req` fail, if they do.
    pub fn violations(&self, cfg: &JobConfig, req: Requirement) -> Vec<String> {
        let mut out = Vec::new();
        if !self.verdict.nonresonant {
            let w: Vec<String> = self
                .report
                .witnesses
                .iter()
                .map(|w| format!("target {} m = {}", w.target + 1, format::index(&w.m)))
                .collect();
            out.push(format!("resonant at order <= {} ({})", cfg.analysis.k, w.join(", ")));
        }
        if req == Requirement::Existence && self.verdict.zone != SpreadZone::Strict {
            out.push(spread_message(cfg, self));
        }
        out
    }

    /// `Ok(Some(warning))` when `--force` overrides a failure.
    pub fn gate(&self, cfg: &JobConfig, req: Requirement, force: bool) -> Result<Option<String>, CliError> {
        let v = self.violations(cfg, req);
        if v.is_empty() {
            return Ok(None);
        }
        let msg = format!("hypotheses fail: {}", v.join("; "));
        if force {
            log::warn!("{msg}; continuing because of --force");
            Ok(Some(msg))
        } else {
            Err(CliError::Hypothesis(format!("{msg}; rerun with --force to continue anyway")))
        }
    }
}

/// "spectral spread X exceeds k + alpha = Y" style sentence.
pub fn spread_message(cfg: &JobConfig, an: &Analysis) -> String {
    let budget = cfg.analysis.k as f64 + cfg.analysis.alpha;
    let rel = match an.verdict.zone {
        SpreadZone::Strict => "is below",
        SpreadZone::Boundary => "equals",
        SpreadZone::Violated => "exceeds",
    };
    format!("spectral spread {} {rel} k + alpha = {}", format::f(an.spread.value), format::f(budget))
}
