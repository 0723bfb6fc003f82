//! The five subcommands. Each writes its files under the output directory
//! and returns a human-readable summary.

use std::fs;
use std::path::PathBuf;

use kf_core::classify::{
    check_semisimple, cycle_monomials, format_report, monomial_basis_for_mu, trivial_target_note, LatticeSolution,
};
use kf_core::cycle::{floquet_normal_form, CycleConfig, CycleError, FloquetNormalForm, IsostableMode};
use kf_core::evaluate::{
    grid_eval, refine_at, semiconjugacy_residual, tabulate, Convergence, EigenfunctionModel, EvaluateError, GridRecord,
    GridSpec, GridTable,
};
use kf_core::factor::{approximate_factor, residual_order_check, FactorError, PolynomialFactor};
use kf_core::flow::{FlowHandle, LimitCycle};
use kf_core::linalg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analyze::{self, spread_message, Analysis, Attractor, PointAttractor, Requirement};
use crate::config::{JobConfig, Target};
use crate::format::{self, line};
use crate::{numerical, CliError, ConfigError, Outcome, RunOptions};

/// Radii for the residual slope estimate.
const SLOPE_RADII: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
/// Coefficients below this magnitude are left out of the summary listing.
const LISTING_FLOOR: f64 = 1e-12;

struct Writer {
    dir: PathBuf,
    prefix: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(cfg: &JobConfig, opts: &RunOptions) -> Result<Self, CliError> {
        let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            prefix: cfg.output.prefix.clone(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, suffix: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}-{suffix}", self.prefix));
        fs::write(&path, content).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.files.push(path);
        Ok(())
    }

    fn finish(self, summary: String) -> Outcome {
        Outcome {
            summary,
            files: self.files,
        }
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError {
        line: 0,
        message: message.into(),
    })
}

fn factor_error(e: FactorError) -> CliError {
    match e {
        FactorError::ResonantObstruction { .. } => CliError::Hypothesis(e.to_string()),
        other => numerical(other),
    }
}

fn cycle_error(e: CycleError) -> CliError {
    match e {
        CycleError::DivergenceDetected { .. } => CliError::Divergence(e.to_string()),
        other => numerical(other),
    }
}

fn header(an: &Analysis, warning: &Option<String>) -> String {
    let mut s = an.text.clone();
    if let Some(w) = warning {
        line(&mut s, "WARNING", format!("{w} (forced)"));
    }
    s
}

fn convergence(cfg: &JobConfig, base: Convergence) -> Convergence {
    let a = &cfg.analysis;
    Convergence {
        step: a.step,
        tol: a.tol.unwrap_or(base.tol),
        max_steps: a.max_steps.unwrap_or(base.max_steps),
        divergence_threshold: a.divergence_threshold,
    }
}

pub fn analyze(cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let an = analyze::analyze(cfg)?;
    let mut w = Writer::new(cfg, opts)?;
    w.write("analysis.txt", &an.text)?;
    Ok(w.finish(an.text))
}

/// Map-mode factor of order `order` at the fixed point (base attached).
fn point_factor(an: &Analysis, p: &PointAttractor, order: usize) -> Result<PolynomialFactor, CliError> {
    let pr = an.principal.as_ref().expect("point analysis carries the principal data");
    let f = an.handle.time_one_map_jet(&p.fixed.x0, order).map_err(numerical)?;
    approximate_factor(&f, &pr.e_a, &pr.b)
        .map_err(factor_error)?
        .with_base(p.fixed.x0.clone())
        .map_err(numerical)
}

fn with_generator(an: &Analysis, factor: PolynomialFactor) -> Result<PolynomialFactor, CliError> {
    match an.principal.as_ref().and_then(|p| p.a.clone()) {
        Some(a) => factor.with_generator(a).map_err(numerical),
        None => Ok(factor),
    }
}

fn describe_factor(s: &mut String, p: &PolynomialFactor) {
    let d = p.diagnostics();
    line(s, "order", p.order());
    line(s, "outputs", p.m());
    if !d.orders.is_empty() {
        line(s, "max residual", format::f(d.max_residual()));
        line(s, "min |eig T_i|", format::f(d.min_eigen_modulus()));
        line(s, "realness", format::f(d.realness_defect));
        let nu = d.non_unique_degrees();
        if nu.is_empty() {
            line(s, "unique", "yes");
        } else {
            line(s, "unique", format!("no: degenerate solvable at degrees {nu:?}"));
        }
    }
    for deg in 2..=p.order() {
        let part = p.part(deg);
        for (q, mi) in (0..part.m).flat_map(|q| part.indices().into_iter().map(move |mi| (q, mi))) {
            let v = part.get(q, &mi);
            if v.norm() > LISTING_FLOOR {
                line(
                    s,
                    "coefficient",
                    format!("degree {deg}  output {}  monomial {}  {}", q + 1, format::index(&mi), format::c(v)),
                );
            }
        }
    }
}

fn cycle_config(cfg: &JobConfig) -> CycleConfig {
    let base = CycleConfig::default();
    CycleConfig {
        order: cfg.analysis.order.unwrap_or(cfg.analysis.k),
        convergence: convergence(cfg, base.convergence.clone()),
        ..base
    }
}

fn cycle_mode(target: Target) -> Result<IsostableMode, CliError> {
    match target {
        Target::Slowest => Ok(IsostableMode::Slowest),
        Target::Floquet | Target::AllPrincipal | Target::Sternberg => Ok(IsostableMode::Floquet),
        Target::Value(_) => Err(config_error(
            "cycle jobs take target = slowest or floquet; a numeric target is only used by classify",
        )),
    }
}

pub fn linearize(cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let an = analyze::analyze(cfg)?;
    let warning = an.gate(cfg, Requirement::Nonresonance, opts.force)?;
    let mut w = Writer::new(cfg, opts)?;
    let mut s = header(&an, &warning);
    s.push('\n');
    let k = cfg.analysis.k;
    match &an.attractor {
        Attractor::Point(p) => {
            let factor = point_factor(&an, p, k)?;
            let h = an.handle.clone();
            let n = h.dim();
            let slope = residual_order_check(
                &factor,
                |x| h.flow_to(x, 1.0).unwrap_or_else(|_| vec![f64::NAN; n]),
                &SLOPE_RADII,
            )
            .map_err(numerical)?;
            let factor = with_generator(&an, factor)?;
            describe_factor(&mut s, &factor);
            for (r, res) in &slope.residuals {
                line(&mut s, "residual at", format!("radius {}  {}", format::f(*r), format::f(*res)));
            }
            match (slope.exact, slope.slope) {
                (true, _) => line(&mut s, "slope", "exact (residual at round-off)"),
                (false, Some(v)) => line(&mut s, "slope", format!("{} (expected about {})", format::f(v), k + 1)),
                (false, None) => line(&mut s, "slope", "unavailable"),
            }
            w.write("factor.txt", &factor.to_text())?;
        }
        Attractor::Cycle(c) => {
            let nf = floquet_normal_form(&an.handle, c, &cycle_config(cfg), cycle_mode(cfg.analysis.target)?)
                .map_err(cycle_error)?;
            let factor = nf.isostable.section_factor();
            line(&mut s, "section", "factor of the first-return map in section coordinates");
            line(&mut s, "exponents", format::complexes(nf.isostable.exponents()));
            describe_factor(&mut s, factor);
            w.write("factor.txt", &factor.to_text())?;
        }
    }
    w.write("summary.txt", &s)?;
    Ok(w.finish(s))
}

/// `count` points uniform in `[lower, upper]`.
fn box_cloud(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(&a, &b)| if b > a { rng.gen_range(a..=b) } else { a })
                .collect()
        })
        .collect()
}

fn grid_stats(s: &mut String, t: &GridTable) {
    let conv = t.records.iter().filter(|r| r.converged).count();
    let max_steps = t.records.iter().map(|r| r.steps).max().unwrap_or(0);
    let max_abs = t
        .records
        .iter()
        .filter(|r| r.error.is_none())
        .flat_map(|r| r.values.iter().map(|v| v.norm()))
        .fold(0.0, f64::max);
    line(s, "grid nodes", t.records.len());
    line(s, "converged", conv);
    line(s, "failures", t.failures());
    line(s, "divergences", t.divergences());
    line(s, "max steps", max_steps);
    line(s, "max |value|", format::f(max_abs));
    if let Some(r) = t.records.iter().find(|r| r.error.is_some()) {
        line(s, "first error", format!("at {}: {}", format::reals(&r.x), r.error.as_deref().unwrap_or("")));
    }
}

fn divergence_error(cfg: &JobConfig, an: &Analysis, diverged: usize, total: usize, detail: &str) -> CliError {
    CliError::Divergence(format!(
        "limit diverged at {diverged} of {total} points ({detail}); {}",
        spread_message(cfg, an)
    ))
}

pub fn eigenfunction(cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let an = analyze::analyze(cfg)?;
    let Attractor::Point(p) = &an.attractor else {
        return Err(config_error("eigenfunction jobs need a point attractor; use the cycle command for cycles"));
    };
    let warning = an.gate(cfg, Requirement::Existence, opts.force)?;
    let mut w = Writer::new(cfg, opts)?;
    let mut s = header(&an, &warning);
    s.push('\n');

    let order = cfg.analysis.limit_order();
    let factor = with_generator(&an, point_factor(&an, p, order)?)?;
    describe_factor(&mut s, &factor);
    w.write("factor.txt", &factor.to_text())?;
    let conv = convergence(cfg, Convergence::default());
    let model = EigenfunctionModel::new(factor, an.handle.clone(), conv).map_err(numerical)?;

    let mut diverged = 0;
    let mut total = 0;
    let mut detail = String::new();
    if let Some(spec) = &cfg.analysis.grid {
        let table = grid_eval(&model, spec).map_err(numerical)?;
        grid_stats(&mut s, &table);
        w.write("grid.csv", &table.to_csv())?;
        diverged += table.divergences();
        total += table.records.len();
        if let Some(r) = table.records.iter().find(|r| r.diverged) {
            detail = format!("first at {}: {}", format::reals(&r.x), r.error.as_deref().unwrap_or(""));
        }
    }

    let (lower, upper) = match &cfg.analysis.grid {
        Some(g) => (g.lower.clone(), g.upper.clone()),
        None => (
            p.fixed.x0.iter().map(|v| v - 0.25).collect(),
            p.fixed.x0.iter().map(|v| v + 0.25).collect(),
        ),
    };
    let cloud = box_cloud(&lower, &upper, cfg.analysis.samples, opts.seed);
    let evals: Vec<Result<_, EvaluateError>> = cloud.par_iter().map(|x| refine_at(&model, x)).collect();
    let cloud_div = evals
        .iter()
        .filter(|r| matches!(r, Err(EvaluateError::DivergenceDetected { .. })))
        .count();
    total += cloud.len();
    diverged += cloud_div;
    if detail.is_empty() {
        if let Some((x, Err(e))) = cloud.iter().zip(&evals).find(|(_, r)| r.is_err()) {
            detail = format!("first at {}: {e}", format::reals(x));
        }
    }
    line(&mut s, "samples", format!("{} (seed {})", cloud.len(), opts.seed));
    if diverged == 0 {
        let t = cfg.analysis.step;
        match semiconjugacy_residual(&model, &cloud, t) {
            Ok(r) => line(&mut s, "semiconj.", format!("{} at t = {}", format::f(r), t)),
            Err(e) => line(&mut s, "semiconj.", format!("unavailable: {e}")),
        }
    }
    if diverged > 0 {
        line(&mut s, "DIVERGENCE", format!("{diverged} of {total} points; {}", spread_message(cfg, &an)));
    }
    w.write("summary.txt", &s)?;
    if diverged > 0 {
        return Err(divergence_error(cfg, &an, diverged, total, &detail));
    }
    Ok(w.finish(s))
}

fn cycle_record(nf: &FloquetNormalForm, x: &[f64], m: usize) -> GridRecord {
    match nf.eval(x) {
        Ok(v) => GridRecord {
            x: x.to_vec(),
            values: v.isostable,
            phase: Some(v.phase),
            converged: v.converged,
            steps: v.steps_used,
            error: None,
            diverged: false,
        },
        Err(e) => GridRecord {
            diverged: matches!(e, CycleError::DivergenceDetected { .. }),
            ..GridRecord::failed(x.to_vec(), m, true, e.to_string())
        },
    }
}

/// Points scattered around the orbit.
fn tube_cloud(h: &FlowHandle, c: &LimitCycle, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 0.05 * (1.0 + c.x0.iter().map(|v| v * v).sum::<f64>().sqrt());
    (0..count)
        .map(|_| {
            let t = rng.gen_range(0.0..c.tau);
            let p = h.flow_to(&c.x0, t).map_err(numerical)?;
            Ok(p.iter().map(|v| v + rng.gen_range(-radius..=radius)).collect())
        })
        .collect()
}

pub fn cycle(cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let an = analyze::analyze(cfg)?;
    let Attractor::Cycle(c) = &an.attractor else {
        return Err(config_error("cycle jobs need a cycle attractor"));
    };
    let mode = cycle_mode(cfg.analysis.target)?;
    let warning = an.gate(cfg, Requirement::Existence, opts.force)?;
    let mut w = Writer::new(cfg, opts)?;
    let mut s = header(&an, &warning);
    s.push('\n');

    let cc = cycle_config(cfg);
    let nf = floquet_normal_form(&an.handle, c, &cc, mode).map_err(cycle_error)?;
    let m = nf.isostable.m();
    line(&mut s, "order", cc.order);
    line(&mut s, "coordinates", m);
    line(&mut s, "exponents", format::complexes(nf.isostable.exponents()));
    let on = nf.eval(&c.x0).map_err(cycle_error)?;
    line(&mut s, "phase(x0)", format::c(on.phase));
    line(&mut s, "psi_z(x0)", format::complexes(&on.isostable));
    w.write("factor.txt", &nf.isostable.section_factor().to_text())?;

    let mut diverged = 0;
    let mut total = 0;
    let mut detail = String::new();
    if let Some(spec) = &cfg.analysis.grid {
        check_grid(spec, c.dim())?;
        let table = tabulate(spec, m, true, |x| cycle_record(&nf, x, m));
        grid_stats(&mut s, &table);
        w.write("grid.csv", &table.to_csv())?;
        diverged += table.divergences();
        total += table.records.len();
        if let Some(r) = table.records.iter().find(|r| r.diverged) {
            detail = format!("first at {}: {}", format::reals(&r.x), r.error.as_deref().unwrap_or(""));
        }
    }
    let cloud = tube_cloud(&an.handle, c, cfg.analysis.samples, opts.seed)?;
    match nf.injectivity_margin(&cloud) {
        Ok(v) => line(&mut s, "injectivity", format!("{} over {} samples (seed {})", format::f(v), cloud.len(), opts.seed)),
        Err(CycleError::DivergenceDetected { .. }) => {
            diverged += 1;
            total += cloud.len();
            line(&mut s, "injectivity", "unavailable: divergence in the sample cloud");
        }
        Err(e) => line(&mut s, "injectivity", format!("unavailable: {e}")),
    }
    if diverged > 0 {
        line(&mut s, "DIVERGENCE", format!("{diverged} of {total} points; {}", spread_message(cfg, &an)));
    }
    w.write("summary.txt", &s)?;
    if diverged > 0 {
        return Err(divergence_error(cfg, &an, diverged, total, &detail));
    }
    Ok(w.finish(s))
}

fn check_grid(spec: &GridSpec, n: usize) -> Result<(), CliError> {
    if spec.dim() != n {
        return Err(config_error(format!("grid has dimension {} but the system has {n}", spec.dim())));
    }
    Ok(())
}

/// `psi_1^2 * conj(psi_2) * theta^-1` style name.
fn monomial_name(sol: &LatticeSolution) -> String {
    let pow = |base: String, e: i64| if e == 1 { base } else { format!("{base}^{e}") };
    let mut parts: Vec<String> = Vec::new();
    for (i, &e) in sol.m.iter().enumerate() {
        if e > 0 {
            parts.push(pow(format!("psi_{}", i + 1), e as i64));
        }
    }
    for (i, &e) in sol.ell.iter().enumerate() {
        if e > 0 {
            parts.push(pow(format!("conj(psi_{})", i + 1), e as i64));
        }
    }
    if sol.j != 0 {
        parts.push(pow("theta".into(), sol.j));
    }
    parts.join(" * ")
}

pub fn classify(cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let Target::Value(mu) = cfg.analysis.target else {
        return Err(config_error("classify needs a numeric target exponent, e.g. target = -2"));
    };
    let an = analyze::analyze(cfg)?;
    let a = &cfg.analysis;
    let (linear, sols) = match &an.attractor {
        Attractor::Point(p) => (p.f1.clone(), monomial_basis_for_mu(&p.exponents, mu, a.k, a.lattice_tol)),
        Attractor::Cycle(c) => (
            linalg::complexify(&c.restricted_monodromy()),
            cycle_monomials(&c.floquet_exponents, c.tau, mu, a.k, a.j_range, a.lattice_tol),
        ),
    };
    check_semisimple(&linear).map_err(|e| CliError::Hypothesis(format!("classification refused: {e}")))?;

    let mut w = Writer::new(cfg, opts)?;
    let mut s = an.text.clone();
    s.push('\n');
    line(&mut s, "lattice tol", format!("{:e}", a.lattice_tol));
    if matches!(an.attractor, Attractor::Cycle(_)) {
        line(&mut s, "phase range", format!("|j| <= {}", a.j_range));
    }
    line(&mut s, "monomials", sols.len());
    for sol in &sols {
        line(&mut s, "monomial", format!("{}  (defect {})", monomial_name(sol), format::f(sol.defect)));
    }
    if sols.is_empty() {
        if let Some(note) = trivial_target_note(mu, a.lattice_tol) {
            line(&mut s, "note", note);
        } else {
            line(&mut s, "note", "no product of principal eigenfunctions carries this exponent");
        }
    }
    let n = an.exponents().len();
    let cols: Vec<String> = (1..=n)
        .map(|i| format!("m{i}"))
        .chain((1..=n).map(|i| format!("l{i}")))
        .chain(["j".to_string(), "defect".to_string()])
        .collect();
    let mut table = format!("# {}\n", cols.join("\t"));
    table.push_str(&format_report(&sols));
    w.write("monomials.tsv", &table)?;
    w.write("summary.txt", &s)?;
    Ok(w.finish(s))
}
