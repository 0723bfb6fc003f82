//! The homological operator `T_i : P -> P o Y - X P` on homogeneous
//! polynomial maps of degree `i`, and its rank-revealing solve.

use nalgebra::{DVector, SVD};

use super::{FactorError, HomogeneousPolyMap};
use crate::linalg::{self, CMatrix, C64};
use crate::spectral::Spectrum;
use crate::vfield::{homogeneous_indices, Jet, JetLayout, MultiIndex};

/// Relative singular-value threshold below which `T_i` counts as singular.
pub const SINGULAR_TOL: f64 = 1e-10;
/// A singular system is still accepted when `|T x - b| <= RANGE_REL |b| + RANGE_ABS`.
pub const RANGE_REL: f64 = 1e-8;
pub const RANGE_ABS: f64 = 1e-14;

/// All `lambda^m - mu_p` with `|m| = i`: the spectrum of `T_i`.
pub fn homological_spectrum(i: usize, x: &Spectrum, y: &Spectrum) -> Vec<C64> {
    let mut out = Vec::new();
    for mu in &x.values {
        for m in homogeneous_indices(y.len(), i) {
            out.push(power(&y.values, &m) - mu);
        }
    }
    out
}

pub(crate) fn power(lambda: &[C64], m: &[u32]) -> C64 {
    m.iter()
        .zip(lambda)
        .fold(C64::new(1.0, 0.0), |acc, (&e, &l)| acc * l.powu(e))
}

/// Matrix of `u -> u^{m_r}` composed with the linear map `y`, restricted to
/// degree `i`: column `r` holds the coefficients of `(y u)^{m_r}`.
pub fn induced_action(i: usize, y: &CMatrix) -> CMatrix {
    let n = y.nrows();
    let idx = homogeneous_indices(n, i);
    let c = idx.len();
    let layout = JetLayout::get(n, i);
    let lin: Vec<Jet<C64>> = (0..n)
        .map(|row| {
            let mut j = Jet::zero_like(&layout);
            for col in 0..n {
                j.coeffs_mut()[layout.linear_rank(col)] = y[(row, col)];
            }
            j
        })
        .collect();
    let range = layout.degree_range(i);
    let mut s = CMatrix::zeros(c, c);
    for (r, m) in idx.iter().enumerate() {
        let mut prod = Jet::constant_like(&layout, C64::new(1.0, 0.0));
        for (var, &e) in m.iter().enumerate() {
            for _ in 0..e {
                prod = &prod * &lin[var];
            }
        }
        for (row, rank) in range.clone().enumerate() {
            s[(row, r)] = prod.coeffs()[rank];
        }
    }
    s
}

/// Dense `T_i` in the monomial basis; unknowns are ordered output-major
/// (`p * count + r`).
pub fn homological_matrix(i: usize, x: &CMatrix, y: &CMatrix) -> CMatrix {
    let s = induced_action(i, y);
    let c = s.nrows();
    let m = x.nrows();
    let mut t = CMatrix::zeros(m * c, m * c);
    for q in 0..m {
        t.view_mut((q * c, q * c), (c, c)).copy_from(&s);
        for p in 0..m {
            for r in 0..c {
                t[(q * c + r, p * c + r)] -= x[(q, p)];
            }
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solvability {
    Unique,
    /// `T_i` is singular but the right-hand side lies in its range; the
    /// minimal-norm solution is returned.
    DegenerateSolvable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSolution {
    pub poly: HomogeneousPolyMap,
    pub solvability: Solvability,
    /// `sigma_min / sigma_max` of `T_i`.
    pub relative_sigma_min: f64,
    /// Smallest `|lambda^m - mu_p|` over the spectrum of `T_i`.
    pub min_eigen_modulus: f64,
}

/// Solve `eA P_i - P_i o F1 = rhs` for the degree-`i` part.
pub fn solve_order(i: usize, rhs: &HomogeneousPolyMap, e_a: &CMatrix, f1: &CMatrix) -> Result<OrderSolution, FactorError> {
    let (m, n) = (e_a.nrows(), f1.nrows());
    if rhs.degree != i || rhs.n != n || rhs.m != m || e_a.ncols() != m || f1.ncols() != n {
        return Err(FactorError::Shape(format!(
            "degree-{} rhs ({} -> {}) against e^A {}x{} and F1 {}x{}",
            rhs.degree,
            rhs.n,
            rhs.m,
            e_a.nrows(),
            e_a.ncols(),
            f1.nrows(),
            f1.ncols()
        )));
    }
    let t = homological_matrix(i, e_a, f1);
    // eA P - P o F1 = -T P
    let b = -DVector::from_vec(rhs.coeffs.clone());
    let svd = SVD::new(t.clone(), true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let rel = if smax > 0.0 { smin / smax } else { 0.0 };
    let spectrum_x = Spectrum::from_values(linalg::eigenvalues(e_a)?);
    let spectrum_y = Spectrum::from_values(linalg::eigenvalues(f1)?);
    let min_eig = homological_spectrum(i, &spectrum_x, &spectrum_y)
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(v.norm()));

    let singular = smax == 0.0 || smin < SINGULAR_TOL * smax;
    let x = if singular {
        let cut = SINGULAR_TOL * smax;
        svd.solve(&b, cut.max(f64::MIN_POSITIVE)).map_err(|e| FactorError::Shape(e.to_string()))?
    } else {
        svd.solve(&b, 0.0).map_err(|e| FactorError::Shape(e.to_string()))?
    };
    let residual = (&t * &x - &b).norm();
    if singular && residual > RANGE_REL * b.norm() + RANGE_ABS {
        let (output, multi_index, defect) = witness(i, &spectrum_x, &spectrum_y);
        return Err(FactorError::ResonantObstruction {
            degree: i,
            output,
            multi_index,
            defect,
            residual,
        });
    }
    Ok(OrderSolution {
        poly: HomogeneousPolyMap {
            degree: i,
            n,
            m,
            coeffs: x.iter().copied().collect(),
        },
        solvability: if singular {
            Solvability::DegenerateSolvable
        } else {
            Solvability::Unique
        },
        relative_sigma_min: rel,
        min_eigen_modulus: min_eig,
    })
}

/// `(p, m)` minimising `|lambda^m - mu_p|` over `|m| = i`.
pub(crate) fn witness(i: usize, x: &Spectrum, y: &Spectrum) -> (usize, MultiIndex, f64) {
    let mut best = (0, vec![0; y.len()], f64::INFINITY);
    for (p, mu) in x.values.iter().enumerate() {
        for m in homogeneous_indices(y.len(), i) {
            let d = (power(&y.values, &m) - mu).norm();
            if d < best.2 {
                best = (p, m, d);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn scalar_spectrum() {
        let s = homological_spectrum(2, &Spectrum::from_real(&[0.2]), &Spectrum::from_real(&[0.5]));
        assert_eq!(s.len(), 1);
        assert!((s[0] - c(0.05)).norm() < 1e-16);
    }

    #[test]
    fn resonant_spectrum_contains_zero() {
        let e = std::f64::consts::E;
        let s = homological_spectrum(
            2,
            &Spectrum::from_real(&[e.powi(-2)]),
            &Spectrum::from_real(&[e.powi(-1), e.powi(-2)]),
        );
        assert!(s.iter().any(|v| v.norm() < 1e-16));
        let lam = [0.3, 0.7];
        let s = homological_spectrum(
            3,
            &Spectrum::from_real(&[0.3f64.powi(3)]),
            &Spectrum::from_real(&lam),
        );
        assert!(s.iter().any(|v| v.norm() < 1e-16));
    }

    #[test]
    fn scalar_order_two_solve() {
        let rhs = HomogeneousPolyMap {
            degree: 2,
            n: 1,
            m: 1,
            coeffs: vec![c(1.0)],
        };
        let ea = CMatrix::from_element(1, 1, c(0.5));
        let sol = solve_order(2, &rhs, &ea, &ea).unwrap();
        assert!((sol.poly.coeffs[0] - c(4.0)).norm() < 1e-14);
        assert_eq!(sol.solvability, Solvability::Unique);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let rhs = HomogeneousPolyMap::zero(3, 2, 1);
        let f1 = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.1), c(0.0), c(0.3)]);
        let ea = CMatrix::from_element(1, 1, c(0.5));
        let sol = solve_order(3, &rhs, &ea, &f1).unwrap();
        assert!(sol.poly.coeffs.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn resonant_zero_rhs_is_degenerate() {
        let e = std::f64::consts::E;
        let f1 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(e.powi(-1)), c(e.powi(-2))]));
        let ea = CMatrix::from_element(1, 1, c(e.powi(-2)));
        let sol = solve_order(2, &HomogeneousPolyMap::zero(2, 2, 1), &ea, &f1).unwrap();
        assert_eq!(sol.solvability, Solvability::DegenerateSolvable);
        assert!(sol.poly.coeffs.iter().all(|v| v.norm() == 0.0));
        // A component along the resonant monomial x^2 cannot be matched.
        let mut rhs = HomogeneousPolyMap::zero(2, 2, 1);
        rhs.coeffs[0] = c(1.0);
        match solve_order(2, &rhs, &ea, &f1) {
            Err(FactorError::ResonantObstruction { degree, multi_index, .. }) => {
                assert_eq!(degree, 2);
                assert_eq!(multi_index, vec![2, 0]);
            }
            other => panic!("expected obstruction, got {other:?}"),
        }
    }

    #[test]
    fn matrix_spectrum_matches_formula() {
        let x = CMatrix::from_row_slice(2, 2, &[c(0.3), c(0.2), c(-0.1), c(0.25)]);
        let y = CMatrix::from_row_slice(2, 2, &[c(0.6), c(0.1), c(0.05), c(0.4)]);
        let t = homological_matrix(3, &x, &y);
        let mut dense = linalg::eigenvalues(&t).unwrap();
        let mut formula = homological_spectrum(
            3,
            &Spectrum::from_values(linalg::eigenvalues(&x).unwrap()),
            &Spectrum::from_values(linalg::eigenvalues(&y).unwrap()),
        );
        let key = |a: &C64, b: &C64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        dense.sort_by(key);
        formula.sort_by(key);
        for (a, b) in dense.iter().zip(&formula) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }
}
