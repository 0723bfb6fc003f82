//! Order-by-order construction of approximate linearizing factors.
//!
//! Given the Taylor jet of a map `F` at its fixed point, find the unique
//! polynomial `P` of degree `k` with `D0 P = B` and
//! `P o F = e^A P + O(|x|^{k+1})`.

mod homological;
mod serialize;

pub use homological::{
    homological_matrix, homological_spectrum, induced_action, solve_order, OrderSolution, Solvability, RANGE_ABS,
    RANGE_REL, SINGULAR_TOL,
};
pub use serialize::ParseFactorError;

use crate::linalg::{self, CMatrix, LinalgError, C64};
use crate::spectral::Spectrum;
use crate::vfield::{homogeneous_indices, monomial_values, Jet, MapJet, MultiIndex};

/// Tolerance of the `B F1 = e^A B` gate, relative to `max(1, |B|)`.
pub const INTERTWINING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error(
        "resonant obstruction at degree {degree}: output {output}, monomial {multi_index:?} (|lambda^m - mu| = {defect:.3e}, residual {residual:.3e})"
    )]
    ResonantObstruction {
        degree: usize,
        output: usize,
        multi_index: MultiIndex,
        defect: f64,
        residual: f64,
    },
    #[error("B does not intertwine the linear parts: |B F1 - e^A B| = {0:.3e}")]
    IntertwiningGate(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Degree-`i` homogeneous polynomial map `C^n -> C^m` in the monomial basis.
/// Coefficients are stored output-major, monomials in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousPolyMap {
    pub degree: usize,
    pub n: usize,
    pub m: usize,
    pub coeffs: Vec<C64>,
}

impl HomogeneousPolyMap {
    pub fn zero(degree: usize, n: usize, m: usize) -> Self {
        let c = homogeneous_indices(n, degree).len();
        Self {
            degree,
            n,
            m,
            coeffs: vec![C64::new(0.0, 0.0); m * c],
        }
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        homogeneous_indices(self.n, self.degree)
    }

    pub fn get(&self, p: usize, mi: &[u32]) -> C64 {
        let idx = self.indices();
        let r = idx.iter().position(|m| m == mi).expect("multi-index of the wrong degree");
        self.coeffs[p * idx.len() + r]
    }

    /// Degree-`i` part of a map jet.
    pub fn from_jet(jet: &MapJet<C64>, degree: usize) -> Self {
        let layout = jet.components[0].layout();
        let range = layout.degree_range(degree);
        let mut coeffs = Vec::with_capacity(jet.outputs() * range.len());
        for c in &jet.components {
            coeffs.extend_from_slice(&c.coeffs()[range.clone()]);
        }
        Self {
            degree,
            n: jet.dim(),
            m: jet.outputs(),
            coeffs,
        }
    }

    fn write_into(&self, jet: &mut MapJet<C64>) {
        let range = jet.components[0].layout().degree_range(self.degree);
        let c = range.len();
        for (p, comp) in jet.components.iter_mut().enumerate() {
            comp.coeffs_mut()[range.clone()].copy_from_slice(&self.coeffs[p * c..(p + 1) * c]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMode {
    Map,
    Flow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderDiagnostics {
    pub degree: usize,
    /// Max-abs coefficient of `[P o F - M P - G]_i` after solving degree `i`.
    pub residual: f64,
    pub relative_sigma_min: f64,
    pub min_eigen_modulus: f64,
    pub solvability: Solvability,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactorDiagnostics {
    pub orders: Vec<OrderDiagnostics>,
    /// Imaginary mass removed by the realness projection.
    pub realness_defect: f64,
}

impl FactorDiagnostics {
    pub fn min_eigen_modulus(&self) -> f64 {
        self.orders.iter().fold(f64::INFINITY, |a, o| a.min(o.min_eigen_modulus))
    }

    pub fn non_unique_degrees(&self) -> Vec<usize> {
        self.orders
            .iter()
            .filter(|o| o.solvability == Solvability::DegenerateSolvable)
            .map(|o| o.degree)
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.orders.iter().fold(0.0, |a, o| a.max(o.residual))
    }
}

/// Polynomial `P(x) = B (x - x0) + P_2(x - x0) + ... + P_k(x - x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFactor {
    base: Vec<f64>,
    mode: FactorMode,
    /// `e^A` for maps, `A` for flows.
    a_matrix: CMatrix,
    poly: MapJet<C64>,
    diagnostics: FactorDiagnostics,
}

impl PolynomialFactor {
    /// Assemble a factor from its parts (no checks beyond shapes).
    pub fn from_parts(base: Vec<f64>, mode: FactorMode, a_matrix: CMatrix, poly: MapJet<C64>) -> Result<Self, FactorError> {
        if poly.dim() != base.len() || a_matrix.nrows() != poly.outputs() || a_matrix.ncols() != poly.outputs() {
            return Err(FactorError::Shape(format!(
                "polynomial {} -> {}, base of length {}, matrix {}x{}",
                poly.dim(),
                poly.outputs(),
                base.len(),
                a_matrix.nrows(),
                a_matrix.ncols()
            )));
        }
        Ok(Self {
            base,
            mode,
            a_matrix,
            poly,
            diagnostics: FactorDiagnostics::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.poly.dim()
    }

    pub fn m(&self) -> usize {
        self.poly.outputs()
    }

    pub fn order(&self) -> usize {
        self.poly.order()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn mode(&self) -> FactorMode {
        self.mode
    }

    /// `e^A` (map mode) or `A` (flow mode), as stored.
    pub fn a_matrix(&self) -> &CMatrix {
        &self.a_matrix
    }

    /// `e^{tA}`; map mode requires integer `t` (negative allowed).
    pub fn exp_ta(&self, t: f64) -> Result<CMatrix, FactorError> {
        match self.mode {
            FactorMode::Flow => Ok(linalg::expm(&self.a_matrix, t)?),
            FactorMode::Map => {
                if t.fract() != 0.0 {
                    return Err(FactorError::Shape(format!("map-mode factor needs integer time, got {t}")));
                }
                let base = if t < 0.0 {
                    self.a_matrix.clone().try_inverse().ok_or(LinalgError::Singular)?
                } else {
                    self.a_matrix.clone()
                };
                let mut out = CMatrix::identity(self.m(), self.m());
                for _ in 0..(t.abs() as u64) {
                    out = &out * &base;
                }
                Ok(out)
            }
        }
    }

    /// `e^A`.
    pub fn e_a(&self) -> Result<CMatrix, FactorError> {
        self.exp_ta(1.0)
    }

    pub fn linear(&self) -> CMatrix {
        let lin = self.poly.linear_part();
        CMatrix::from_fn(self.m(), self.n(), |i, j| lin[i][j])
    }

    pub fn part(&self, degree: usize) -> HomogeneousPolyMap {
        HomogeneousPolyMap::from_jet(&self.poly, degree)
    }

    /// The polynomial as a jet in the displacement `x - base`.
    pub fn jet(&self) -> &MapJet<C64> {
        &self.poly
    }

    pub fn diagnostics(&self) -> &FactorDiagnostics {
        &self.diagnostics
    }

    /// Switch to flow mode with generator `a`; `e^a` must match the stored
    /// map-mode matrix.
    pub fn with_generator(mut self, a: CMatrix) -> Result<Self, FactorError> {
        if self.mode == FactorMode::Map {
            let ea = linalg::expm(&a, 1.0)?;
            let d = linalg::max_abs(&(&ea - &self.a_matrix));
            if d > 1e-8 * linalg::max_abs(&self.a_matrix).max(1.0) {
                return Err(FactorError::Shape(format!("exp(A) differs from the stored e^A by {d:.3e}")));
            }
        }
        self.mode = FactorMode::Flow;
        self.a_matrix = a;
        Ok(self)
    }

    pub fn with_base(mut self, base: Vec<f64>) -> Result<Self, FactorError> {
        if base.len() != self.n() {
            return Err(FactorError::Shape("base point dimension".into()));
        }
        self.base = base;
        Ok(self)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<C64> {
        let u: Vec<C64> = x.iter().zip(&self.base).map(|(a, b)| C64::new(a - b, 0.0)).collect();
        self.eval_displacement(&u)
    }

    pub fn eval_displacement(&self, u: &[C64]) -> Vec<C64> {
        let layout = self.poly.components[0].layout();
        let mono = monomial_values(layout, u);
        self.poly
            .components
            .iter()
            .map(|c| c.coeffs().iter().zip(&mono).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `P` composed with a state jet (absolute coordinates).
    pub fn compose_jet(&self, state: &MapJet<f64>) -> MapJet<C64> {
        let args: Vec<Jet<C64>> = state
            .components
            .iter()
            .zip(&self.base)
            .map(|(c, &b)| {
                let mut c = c.to_complex();
                c.coeffs_mut()[0] -= C64::new(b, 0.0);
                c
            })
            .collect();
        self.poly.compose(&args)
    }
}

/// Generalized homological problem `P o F = M P + G` for a map jet `F` with
/// `F(0) = 0`, an `m x m` multiplier jet `M` and forcing `G`.
///
/// If `linear` is given it fixes `D0 P`; otherwise degree 1 is solved too.
pub struct HomologicalProblem<'a> {
    pub map: &'a MapJet<C64>,
    pub multiplier: Vec<Vec<Jet<C64>>>,
    pub forcing: Option<&'a MapJet<C64>>,
    pub linear: Option<&'a CMatrix>,
}

impl<'a> HomologicalProblem<'a> {
    /// Constant multiplier `e^A`.
    pub fn constant(map: &'a MapJet<C64>, e_a: &CMatrix, linear: &'a CMatrix) -> Self {
        let layout = map.components[0].layout().clone();
        let multiplier = (0..e_a.nrows())
            .map(|i| (0..e_a.ncols()).map(|j| Jet::constant_like(&layout, e_a[(i, j)])).collect())
            .collect();
        Self {
            map,
            multiplier,
            forcing: None,
            linear: Some(linear),
        }
    }
}

fn check_map(f: &MapJet<C64>) -> Result<(), FactorError> {
    if f.outputs() != f.dim() {
        return Err(FactorError::Shape(format!("map jet has {} inputs and {} outputs", f.dim(), f.outputs())));
    }
    let c = linalg::max_abs_slice(&f.value());
    if c > 1e-10 {
        return Err(FactorError::Shape(format!("map jet must fix the origin (|F(0)| = {c:.3e})")));
    }
    Ok(())
}

/// Solve a [`HomologicalProblem`] degree by degree. Returns the polynomial
/// jet (zero constant term) and per-degree diagnostics.
pub fn solve_homological(problem: &HomologicalProblem<'_>) -> Result<(MapJet<C64>, FactorDiagnostics), FactorError> {
    let f = problem.map;
    check_map(f)?;
    let (n, k) = (f.dim(), f.order());
    let m = problem.multiplier.len();
    if m == 0 || problem.multiplier.iter().any(|r| r.len() != m) {
        return Err(FactorError::Shape("multiplier must be a nonempty square matrix of jets".into()));
    }
    let layout = f.components[0].layout().clone();
    let e_a = CMatrix::from_fn(m, m, |i, j| problem.multiplier[i][j].value());
    let f1 = CMatrix::from_fn(n, n, |i, j| f.components[i].linear_coeff(j));
    let zero = Jet::zero_like(&layout);
    let mut p = MapJet::new(vec![zero.clone(); m]);
    let mut diagnostics = FactorDiagnostics::default();
    let first = match problem.linear {
        Some(b) => {
            if b.nrows() != m || b.ncols() != n {
                return Err(FactorError::Shape(format!("B is {}x{}, expected {m}x{n}", b.nrows(), b.ncols())));
            }
            let gate = linalg::max_abs(&(b * &f1 - &e_a * b));
            if gate > INTERTWINING_TOL * linalg::max_abs(b).max(1.0) {
                return Err(FactorError::IntertwiningGate(gate));
            }
            for (i, comp) in p.components.iter_mut().enumerate() {
                for j in 0..n {
                    comp.coeffs_mut()[layout.linear_rank(j)] = b[(i, j)];
                }
            }
            2
        }
        None => 1,
    };
    // M - e^A has no constant term.
    let m_shift: Vec<Vec<Jet<C64>>> = problem
        .multiplier
        .iter()
        .map(|row| {
            row.iter()
                .map(|j| {
                    let mut j = j.clone();
                    j.coeffs_mut()[0] = C64::new(0.0, 0.0);
                    j
                })
                .collect()
        })
        .collect();

    for i in first..=k {
        let lhs = residual_jet(&p, f, &m_shift, &e_a, problem.forcing);
        let rhs = HomogeneousPolyMap::from_jet(&lhs, i);
        let sol = solve_order(i, &rhs, &e_a, &f1)?;
        sol.poly.write_into(&mut p);
        let check = residual_jet(&p, f, &m_shift, &e_a, problem.forcing);
        let r = linalg::max_abs_slice(&HomogeneousPolyMap::from_jet(&check, i).coeffs);
        if sol.solvability == Solvability::DegenerateSolvable {
            log::warn!("degree {i}: homological operator is singular, minimal-norm solution used");
        }
        diagnostics.orders.push(OrderDiagnostics {
            degree: i,
            residual: r,
            relative_sigma_min: sol.relative_sigma_min,
            min_eigen_modulus: sol.min_eigen_modulus,
            solvability: sol.solvability,
        });
    }
    Ok((p, diagnostics))
}

/// `P o F - M P - G` as a jet.
fn residual_jet(
    p: &MapJet<C64>,
    f: &MapJet<C64>,
    m_shift: &[Vec<Jet<C64>>],
    e_a: &CMatrix,
    forcing: Option<&MapJet<C64>>,
) -> MapJet<C64> {
    let comp = p.compose(&f.components);
    MapJet::new(
        (0..p.outputs())
            .map(|q| {
                let mut r = comp.components[q].clone();
                for (pp, pc) in p.components.iter().enumerate() {
                    r = &r - &pc.scale(e_a[(q, pp)]);
                    r = &r - &(&m_shift[q][pp] * pc);
                }
                if let Some(g) = forcing {
                    r = &r - &g.components[q];
                }
                r
            })
            .collect(),
    )
}

fn is_real(m: &CMatrix) -> bool {
    linalg::max_imag(m) == 0.0
}

/// Approximate linearizing factor of order `F.order()` (map mode, base at
/// the origin of the displacement coordinates).
pub fn approximate_factor(f: &MapJet<f64>, e_a: &CMatrix, b: &CMatrix) -> Result<PolynomialFactor, FactorError> {
    approximate_factor_complex(&f.to_complex(), e_a, b, true)
}

/// As [`approximate_factor`] for a complex map jet; `f_real` enables the
/// realness projection when `e_a` and `b` are real as well.
pub fn approximate_factor_complex(
    f: &MapJet<C64>,
    e_a: &CMatrix,
    b: &CMatrix,
    f_real: bool,
) -> Result<PolynomialFactor, FactorError> {
    let problem = HomologicalProblem::constant(f, e_a, b);
    let (mut poly, mut diagnostics) = solve_homological(&problem)?;
    if f_real && is_real(e_a) && is_real(b) {
        // The unique solution is real; averaging with the conjugate problem's
        // solution (its conjugate) removes round-off imaginary parts.
        let mut defect: f64 = 0.0;
        for c in poly.components.iter_mut() {
            for v in c.coeffs_mut() {
                defect = defect.max(v.im.abs());
                v.im = 0.0;
            }
        }
        if defect > 1e-8 * poly.components.iter().fold(1.0f64, |a, c| a.max(c.max_abs())) {
            log::warn!("real factor carried imaginary parts up to {defect:.3e} before projection");
        }
        diagnostics.realness_defect = defect;
    }
    let n = f.dim();
    Ok(PolynomialFactor {
        base: vec![0.0; n],
        mode: FactorMode::Map,
        a_matrix: e_a.clone(),
        poly,
        diagnostics,
    })
}

/// `approximate_factor` with `e^A = F1` and `B = I`.
pub fn sternberg_factor(f: &MapJet<f64>, k: usize) -> Result<PolynomialFactor, FactorError> {
    let f = if f.order() > k { f.truncate(k) } else { f.clone() };
    if f.order() < k {
        return Err(FactorError::Shape(format!("map jet has order {} < {k}", f.order())));
    }
    let n = f.dim();
    let lin = f.linear_part();
    let f1 = CMatrix::from_fn(n, n, |i, j| C64::new(lin[i][j], 0.0));
    approximate_factor(&f, &f1, &CMatrix::identity(n, n))
}

/// Result of [`residual_order_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    /// `(radius, max residual)` per radius.
    pub residuals: Vec<(f64, f64)>,
    /// Least-squares log-log slope; `None` when flagged exact.
    pub slope: Option<f64>,
    /// All residuals at round-off level: the factor is exact.
    pub exact: bool,
}

/// Sample `|P(F(x)) - e^A P(x)|` on spheres of the given radii around the
/// base point and fit the log-log slope.
pub fn residual_order_check<E>(p: &PolynomialFactor, mut f_eval: E, radii: &[f64]) -> Result<SlopeEstimate, FactorError>
where
    E: FnMut(&[f64]) -> Vec<f64>,
{
    let e_a = p.e_a()?;
    let n = p.n();
    let dirs = sphere_directions(n, 64);
    let mut residuals = Vec::with_capacity(radii.len());
    let mut scale: f64 = 0.0;
    for &h in radii {
        let mut worst: f64 = 0.0;
        for d in &dirs {
            let x: Vec<f64> = p.base.iter().zip(d).map(|(b, di)| b + h * di).collect();
            let px = p.eval(&x);
            let pfx = p.eval(&f_eval(&x));
            scale = scale.max(linalg::max_abs_slice(&px));
            let r = (0..p.m())
                .map(|q| {
                    let lin: C64 = (0..p.m()).map(|j| e_a[(q, j)] * px[j]).sum();
                    (pfx[q] - lin).norm()
                })
                .fold(0.0, f64::max);
            worst = worst.max(r);
        }
        residuals.push((h, worst));
    }
    let exact = residuals.iter().all(|&(_, r)| r <= 1e-13 * scale.max(1.0));
    let slope = if exact || residuals.len() < 2 {
        None
    } else {
        let pts: Vec<(f64, f64)> = residuals
            .iter()
            .filter(|(_, r)| *r > 0.0)
            .map(|&(h, r)| (h.ln(), r.ln()))
            .collect();
        fit_slope(&pts)
    };
    Ok(SlopeEstimate { residuals, slope, exact })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Deterministic unit vectors: `{+-1}` in 1-D, equally spaced angles in 2-D,
/// a Fibonacci-style lattice projected to the sphere otherwise.
fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(count + 2 * n);
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[i] = s;
                    out.push(v);
                }
            }
            // Weyl sequence on the cube, pushed through the inverse normal
            // approximation tanh^-1-ish map and normalized.
            let alphas: Vec<f64> = (0..n).map(|i| ((i + 2) as f64).sqrt().fract()).collect();
            for j in 1..=count {
                let v: Vec<f64> = alphas.iter().map(|a| 2.0 * (j as f64 * a).fract() - 1.0).collect();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nv > 1e-3 {
                    out.push(v.iter().map(|x| x / nv).collect());
                }
            }
            out
        }
    }
}

/// Eigenvalues of `e^A` and `F1` as used by the solver (for reporting).
pub fn factor_spectra(e_a: &CMatrix, f1: &CMatrix) -> Result<(Spectrum, Spectrum), FactorError> {
    Ok((
        Spectrum::from_values(linalg::eigenvalues(e_a)?),
        Spectrum::from_values(linalg::eigenvalues(f1)?),
    ))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::Jet;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn poly_map(n: usize, k: usize, comps: &[&[(&[u32], f64)]]) -> MapJet<f64> {
        let layout = crate::vfield::JetLayout::get(n, k);
        MapJet::new(
            comps
                .iter()
                .map(|terms| {
                    let mut j = Jet::zero_like(&layout);
                    for (mi, v) in terms.iter() {
                        j.set_coeff(mi, *v);
                    }
                    j
                })
                .collect(),
        )
    }

    #[test]
    fn linear_map_gives_linear_factor() {
        let f = poly_map(2, 4, &[&[(&[1, 0], 0.5)], &[(&[0, 1], 0.3), (&[1, 0], 0.1)]]);
        let p = sternberg_factor(&f, 4).unwrap();
        for d in 2..=4 {
            assert!(p.part(d).coeffs.iter().all(|v| v.norm() < 1e-15));
        }
        assert_eq!(p.linear(), CMatrix::identity(2, 2));
    }

    #[test]
    fn scalar_bernoulli_degree_two() {
        let e1 = (-1.0f64).exp();
        let f2 = e1 - e1 * e1;
        let f = poly_map(1, 3, &[&[(&[1], e1), (&[2], f2)]]);
        let p = approximate_factor(&f, &CMatrix::from_element(1, 1, c(e1)), &CMatrix::from_element(1, 1, c(1.0))).unwrap();
        assert!((p.part(2).coeffs[0] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn resonant_example_is_flagged() {
        let e = std::f64::consts::E;
        let f = poly_map(2, 2, &[&[(&[1, 0], 1.0 / e)], &[(&[0, 1], e.powi(-2))]]);
        let b = CMatrix::from_row_slice(1, 2, &[c(0.0), c(1.0)]);
        let p = approximate_factor(&f, &CMatrix::from_element(1, 1, c(e.powi(-2))), &b).unwrap();
        assert_eq!(p.diagnostics().non_unique_degrees(), vec![2]);
        assert!(p.part(2).coeffs.iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn sternberg_resonance_obstructs() {
        // F = (0.5 x, 0.25 y + x^2) has the resonance 0.25 = 0.5^2 with a
        // nonzero forcing term.
        let f = poly_map(2, 3, &[&[(&[1, 0], 0.5)], &[(&[0, 1], 0.25), (&[2, 0], 1.0)]]);
        match sternberg_factor(&f, 3) {
            Err(FactorError::ResonantObstruction { degree, output, multi_index, .. }) => {
                assert_eq!((degree, output), (2, 1));
                assert_eq!(multi_index, vec![2, 0]);
            }
            other => panic!("expected obstruction, got {other:?}"),
        }
    }

    #[test]
    fn gate_rejects_bad_b() {
        let f = poly_map(1, 2, &[&[(&[1], 0.5)]]);
        let err = approximate_factor(&f, &CMatrix::from_element(1, 1, c(0.4)), &CMatrix::from_element(1, 1, c(1.0)));
        assert!(matches!(err, Err(FactorError::IntertwiningGate(_))));
    }

    #[test]
    fn map_mode_powers() {
        let f = poly_map(1, 2, &[&[(&[1], 0.5)]]);
        let p = sternberg_factor(&f, 2).unwrap();
        assert!((p.exp_ta(3.0).unwrap()[(0, 0)] - c(0.125)).norm() < 1e-16);
        assert!((p.exp_ta(-2.0).unwrap()[(0, 0)] - c(4.0)).norm() < 1e-14);
        assert!(p.exp_ta(0.5).is_err());
    }

    #[test]
    fn free_linear_part_solves_degree_one() {
        // phi o F = phi + g with F = 0.5 x, g = x: phi_1 = g_1 / (0.5 - 1) = -2.
        let f = poly_map(1, 2, &[&[(&[1], 0.5)]]).to_complex();
        let g = poly_map(1, 2, &[&[(&[1], 1.0)]]).to_complex();
        let layout = f.components[0].layout().clone();
        let problem = HomologicalProblem {
            map: &f,
            multiplier: vec![vec![Jet::constant_like(&layout, c(1.0))]],
            forcing: Some(&g),
            linear: None,
        };
        let (p, _) = solve_homological(&problem).unwrap();
        assert!((p.components[0].coeff(&[1]) - c(-2.0)).norm() < 1e-14);
    }
}
