//! Eigenvalue lattices and the monomial structure of smooth eigenfunctions.
//!
//! Every smooth eigenfunction of a semisimple, nonresonant attractor is a
//! finite sum of products of principal eigenfunctions (and their conjugates,
//! and on a cycle, integer powers of the asymptotic phase). The functions
//! here enumerate which products can carry a given eigenvalue.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::linalg::{CMatrix, C64};
use crate::vfield::{homogeneous_indices, MultiIndex};

/// Default matching tolerance.
pub const LATTICE_TOL: f64 = 1e-9;
/// Relative distance under which two eigenvalues are treated as one when
/// checking semisimplicity.
const MERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("linearization is not semisimple: eigenvalue {value} has algebraic multiplicity {algebraic} but geometric multiplicity {geometric}")]
    Defective { value: C64, algebraic: usize, geometric: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// One product `psi^[m] * conj(psi)^[ell] * psi_theta^j` with the eigenvalue
/// mismatch `defect`. Fixed points have `j = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSolution {
    pub m: MultiIndex,
    pub ell: MultiIndex,
    pub j: i64,
    pub defect: f64,
}

impl LatticeSolution {
    pub fn degree(&self) -> usize {
        self.m.iter().chain(&self.ell).map(|&e| e as usize).sum()
    }
}

/// Relative mismatch `|e^mu - e^s| / |e^mu|`; scale-free so deep products
/// of fast exponents are not matched merely because both sides are tiny.
fn multiplier_defect(mu: C64, s: C64) -> f64 {
    (C64::new(1.0, 0.0) - (s - mu).exp()).norm()
}

fn dot(m: &[u32], lambda: &[C64]) -> C64 {
    m.iter().zip(lambda).map(|(&e, l)| l * e as f64).sum()
}

/// All `m` with `1 <= |m| <= k` and `e^{m.lambda}` within relative `tol` of
/// `e^mu`.
pub fn point_lattice(lambda: &[C64], mu: C64, k: usize, tol: f64) -> Vec<LatticeSolution> {
    let n = lambda.len();
    let mut out = Vec::new();
    for d in 1..=k {
        for m in homogeneous_indices(n, d) {
            let defect = multiplier_defect(mu, dot(&m, lambda));
            if defect <= tol {
                out.push(LatticeSolution { m, ell: vec![0; n], j: 0, defect });
            }
        }
    }
    out
}

/// Indices whose conjugate eigenfunction is a new function. Real exponents
/// and members of a conjugate pair inside `lambda` are collapsed: for a real
/// system `conj(psi_i)` is then `psi_i` itself or its partner.
pub fn conjugate_slots(lambda: &[C64], tol: f64) -> Vec<bool> {
    lambda
        .iter()
        .map(|l| {
            let scale = tol * l.norm().max(1.0);
            if l.im.abs() <= scale {
                return false;
            }
            !lambda.iter().any(|o| (o - l.conj()).norm() <= scale)
        })
        .collect()
}

fn split(v: &[u32], n: usize, slots: &[usize]) -> (MultiIndex, MultiIndex) {
    let mut ell = vec![0; n];
    for (s, &r) in slots.iter().enumerate() {
        ell[r] = v[n + s];
    }
    (v[..n].to_vec(), ell)
}

/// Pairs `(i, ell)` with `1 <= |i| + |ell| <= k` whose product
/// `psi^[i] conj(psi)^[ell]` has multiplier `e^mu` (relative `tol`).
/// `ell` is identically zero when the spectrum is closed under conjugation.
/// Constants (`e^mu = 1`, empty monomial) are excluded by convention; see
/// [`trivial_target_note`].
pub fn monomial_basis_for_mu(lambda: &[C64], mu: C64, k: usize, tol: f64) -> Vec<LatticeSolution> {
    let n = lambda.len();
    let slots: Vec<usize> = conjugate_slots(lambda, tol).iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect();
    let ext: Vec<C64> = lambda.iter().copied().chain(slots.iter().map(|&r| lambda[r].conj())).collect();
    let mut out = Vec::new();
    for d in 1..=k {
        for v in homogeneous_indices(ext.len(), d) {
            let defect = multiplier_defect(mu, dot(&v, &ext));
            if defect <= tol {
                let (m, ell) = split(&v, n, &slots);
                out.push(LatticeSolution { m, ell, j: 0, defect });
            }
        }
    }
    out
}

/// Triples `(m, ell, j)` with `|mu - m.lambda - ell.conj(lambda) - 2 pi i j / tau| <= tol`
/// over `1 <= |m| + |ell| + |j|`, `|m| + |ell| <= k`, `|j| <= j_range`:
/// the products `psi^[m] conj(psi)^[ell] psi_theta^j` on a limit cycle.
///
/// Exponents are compared directly rather than through `e^mu`: the phase
/// factors `e^{2 pi i j / tau}` would otherwise alias for commensurate `tau`.
pub fn cycle_monomials(lambda: &[C64], tau: f64, mu: C64, k: usize, j_range: i64, tol: f64) -> Vec<LatticeSolution> {
    let n = lambda.len();
    let slots: Vec<usize> = conjugate_slots(lambda, tol).iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect();
    let ext: Vec<C64> = lambda.iter().copied().chain(slots.iter().map(|&r| lambda[r].conj())).collect();
    let mut out = Vec::new();
    for d in 0..=k {
        for v in homogeneous_indices(ext.len(), d) {
            let base = dot(&v, &ext);
            for j in -j_range..=j_range {
                if d == 0 && j == 0 {
                    continue;
                }
                let defect = (mu - base - C64::new(0.0, 2.0 * PI * j as f64 / tau)).norm();
                if defect <= tol {
                    let (m, ell) = split(&v, n, &slots);
                    out.push(LatticeSolution { m, ell, j, defect });
                }
            }
        }
    }
    out
}

/// Explanation for an empty result caused by the constant eigenfunction.
pub fn trivial_target_note(mu: C64, tol: f64) -> Option<&'static str> {
    (multiplier_defect(mu, C64::new(0.0, 0.0)) <= tol)
        .then_some("e^mu = 1: only constants carry this eigenvalue; the trivial eigenfunction is excluded")
}

/// Refuses defective linearizations, for which the monomial classification
/// does not apply.
pub fn check_semisimple(matrix: &CMatrix) -> Result<(), ClassifyError> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(ClassifyError::Shape(format!("{}x{} matrix", n, matrix.ncols())));
    }
    let values = crate::linalg::eigenvalues(matrix).map_err(|e| ClassifyError::Shape(e.to_string()))?;
    let scale = matrix.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1e-300);
    let mut seen: Vec<C64> = Vec::new();
    for &v in &values {
        if seen.iter().any(|s| (s - v).norm() <= MERGE_TOL * scale) {
            continue;
        }
        seen.push(v);
        let cluster: Vec<C64> = values.iter().copied().filter(|w| (w - v).norm() <= MERGE_TOL * scale).collect();
        if cluster.len() < 2 {
            continue;
        }
        let centre = cluster.iter().sum::<C64>() / cluster.len() as f64;
        let shifted = matrix - CMatrix::identity(n, n) * centre;
        let sv = shifted.singular_values();
        let geometric = sv.iter().filter(|&&s| s <= MERGE_TOL * scale).count();
        if geometric < cluster.len() {
            return Err(ClassifyError::Defective { value: centre, algebraic: cluster.len(), geometric });
        }
    }
    Ok(())
}

/// One line per solution: exponents of `m`, then of `ell`, then `j` and the
/// defect, tab-separated.
pub fn format_report(solutions: &[LatticeSolution]) -> String {
    let mut s = String::new();
    for sol in solutions {
        let cols: Vec<String> = sol
            .m
            .iter()
            .chain(&sol.ell)
            .map(|e| e.to_string())
            .chain([sol.j.to_string(), format!("{:.16e}", sol.defect)])
            .collect();
        let _ = writeln!(s, "{}", cols.join("\t"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    fn ms(sols: &[LatticeSolution]) -> Vec<MultiIndex> {
        sols.iter().map(|s| s.m.clone()).collect()
    }

    #[test]
    fn point_examples() {
        let lam = re(&[-1.0, -2.5]);
        assert_eq!(ms(&point_lattice(&lam, C64::new(-4.5, 0.0), 4, 1e-9)), vec![vec![2, 1]]);
        assert_eq!(ms(&point_lattice(&lam, lam[0], 4, 1e-9)), vec![vec![1, 0]]);
        assert!(point_lattice(&lam, C64::new(-0.5, 0.0), 6, 1e-9).is_empty());
    }

    #[test]
    fn real_collapse() {
        let sols = monomial_basis_for_mu(&re(&[-1.0, -2.0]), C64::new(-2.0, 0.0), 4, 1e-9);
        assert_eq!(ms(&sols), vec![vec![0, 1], vec![2, 0]]);
        assert!(sols.iter().all(|s| s.ell == vec![0, 0]));
        assert!(monomial_basis_for_mu(&re(&[-1.0, -2.0]), C64::new(0.0, 0.0), 4, 1e-9).is_empty());
        assert!(trivial_target_note(C64::new(0.0, 0.0), 1e-9).is_some());
    }

    #[test]
    fn conjugate_pair_collapses() {
        let lam = vec![C64::new(-1.0, 2.0), C64::new(-1.0, -2.0)];
        let sols = monomial_basis_for_mu(&lam, C64::new(-2.0, 0.0), 2, 1e-9);
        assert_eq!(ms(&sols), vec![vec![1, 1]]);
    }

    #[test]
    fn unpaired_complex_keeps_conjugates() {
        let lam = vec![C64::new(-1.0, 2.0)];
        let sols = monomial_basis_for_mu(&lam, C64::new(-2.0, 0.0), 2, 1e-9);
        assert_eq!(sols.len(), 1);
        assert_eq!((sols[0].m.clone(), sols[0].ell.clone()), (vec![1], vec![1]));
    }

    #[test]
    fn cycle_examples() {
        let lam = re(&[-2.0]);
        let tau = 2.0 * PI;
        let one = |mu: C64| {
            let s = cycle_monomials(&lam, tau, mu, 4, 3, 1e-9);
            assert_eq!(s.len(), 1, "{mu}");
            (s[0].m.clone(), s[0].j)
        };
        assert_eq!(one(C64::new(-2.0, 1.0)), (vec![1], 1));
        assert_eq!(one(C64::new(0.0, 1.0)), (vec![0], 1));
        assert_eq!(one(C64::new(-4.0, 0.0)), (vec![2], 0));
    }

    #[test]
    fn defective_refused() {
        let mut j = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(check_semisimple(&j).is_ok());
        j[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(check_semisimple(&j), Err(ClassifyError::Defective { algebraic: 2, geometric: 1, .. })));
    }

    #[test]
    fn report_lines() {
        let sols = point_lattice(&re(&[-1.0, -2.0]), C64::new(-2.0, 0.0), 2, 1e-9);
        let r = format_report(&sols);
        assert_eq!(r.lines().count(), 2);
        assert!(r.starts_with("0\t1\t0\t0\t0\t"));
    }
}
