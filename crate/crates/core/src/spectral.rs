//! Eigenstructure, nonresonance certificates and the spectral spread.

use nalgebra::DVector;

use crate::linalg::{self, CMatrix, LinalgError, C64};
use crate::vfield::{homogeneous_indices, MultiIndex};

/// Default base tolerance for resonance detection (scaled by `max(1, |mu|)`).
pub const RESONANCE_TOL: f64 = 1e-9;
/// Relative distance under which eigenvalues are reported as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Largest number of multi-indices an `Order::Infinite` check may enumerate.
const MAX_ENUMERATION: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("spectral radius {0} is not below 1")]
    NotContracting(f64),
    #[error("eigenvalue {index} is zero; its logarithm is undefined")]
    ZeroEigenvalue { index: usize },
    #[error("{0} is not an eigenvalue within tolerance (closest distance {1:.3e})")]
    NotAnEigenvalue(C64, f64),
    #[error("left eigenvector residual {0:.3e} exceeds tolerance")]
    ResidualTooLarge(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("enumeration up to order {0} is too large")]
    EnumerationTooLarge(usize),
}

/// Eigenvalues repeated with algebraic multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<C64>,
    pub source_dim: usize,
}

impl Spectrum {
    pub fn from_values(values: Vec<C64>) -> Self {
        let source_dim = values.len();
        Self { values, source_dim }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::from_values(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    /// Distinct eigenvalues with their multiplicities, merging values within
    /// relative distance [`CLUSTER_TOL`].
    pub fn clusters(&self) -> Vec<(C64, usize)> {
        let mut out: Vec<(C64, usize)> = Vec::new();
        for &v in &self.values {
            let hit = out
                .iter_mut()
                .find(|(c, _)| (*c - v).norm() <= CLUSTER_TOL * c.norm().max(v.norm()).max(1e-300));
            match hit {
                Some((_, count)) => *count += 1,
                None => out.push((v, 1)),
            }
        }
        out
    }
}

pub fn compute_spectrum(matrix: &CMatrix) -> Result<Spectrum, SpectralError> {
    let values = linalg::eigenvalues(matrix)?;
    Ok(Spectrum {
        source_dim: matrix.nrows(),
        values,
    })
}

pub fn compute_spectrum_real(matrix: &linalg::RMatrix) -> Result<Spectrum, SpectralError> {
    compute_spectrum(&linalg::complexify(matrix))
}

/// Requested order of a nonresonance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(usize),
    Infinite,
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Finite(k) => write!(f, "{k}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    /// Index into the target spectrum.
    pub target: usize,
    pub m: MultiIndex,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceReport {
    pub requested: Order,
    /// Largest `|m|` actually enumerated.
    pub searched_up_to: usize,
    pub nonresonant_up_to: Order,
    pub witnesses: Vec<Witness>,
    pub tolerance: f64,
}

impl ResonanceReport {
    pub fn is_nonresonant(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Resonance threshold for target `mu`.
pub fn resonance_threshold(tol: f64, mu: C64) -> f64 {
    tol * mu.norm().max(1.0)
}

/// Order beyond which `|lambda^m| < min |mu|` for every `m`, so no
/// resonance can occur: `ceil(max_i ln|mu_i| / ln rho) + 1`.
pub fn infinite_order_bound(x: &Spectrum, y: &Spectrum) -> Result<usize, SpectralError> {
    let rho = y.spectral_radius();
    if rho >= 1.0 {
        return Err(SpectralError::NotContracting(rho));
    }
    let mut worst: f64 = 0.0;
    for (i, mu) in x.values.iter().enumerate() {
        if mu.norm() == 0.0 {
            return Err(SpectralError::ZeroEigenvalue { index: i });
        }
        worst = worst.max(mu.norm().ln() / rho.ln());
    }
    Ok(worst.ceil() as usize + 1)
}

/// `lambda^m` for every multi-index of exactly degree `d`.
fn powers_of_degree(lambda: &[C64], d: usize) -> Vec<(MultiIndex, C64)> {
    homogeneous_indices(lambda.len(), d)
        .into_iter()
        .map(|m| {
            let v = m
                .iter()
                .zip(lambda)
                .fold(C64::new(1.0, 0.0), |acc, (&e, &l)| acc * l.powu(e));
            (m, v)
        })
        .collect()
}

/// Enumerate every `(i, m)` with `2 <= |m| <= k` and report the pairs with
/// `|mu_i - lambda^m| <= tol * max(1, |mu_i|)`.
pub fn check_k_nonresonant(x: &Spectrum, y: &Spectrum, k: Order, tol: f64) -> Result<ResonanceReport, SpectralError> {
    let bound = match k {
        Order::Finite(k) => k,
        Order::Infinite => infinite_order_bound(x, y)?,
    };
    let n = y.len();
    let total: usize = (2..=bound).map(|d| crate::vfield::binomial(n + d - 1, d)).sum();
    if total.saturating_mul(x.len().max(1)) > MAX_ENUMERATION {
        return Err(SpectralError::EnumerationTooLarge(bound));
    }
    let mut witnesses = Vec::new();
    for d in 2..=bound {
        for (m, p) in powers_of_degree(&y.values, d) {
            for (i, &mu) in x.values.iter().enumerate() {
                let defect = (mu - p).norm();
                if defect <= resonance_threshold(tol, mu) {
                    witnesses.push(Witness {
                        target: i,
                        m: m.clone(),
                        defect,
                    });
                }
            }
        }
    }
    let nonresonant_up_to = match witnesses.iter().map(|w| w.m.iter().sum::<u32>() as usize).min() {
        Some(d) => Order::Finite(d - 1),
        None => k,
    };
    Ok(ResonanceReport {
        requested: k,
        searched_up_to: bound,
        nonresonant_up_to,
        witnesses,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadResult {
    pub value: f64,
    /// `(mu index, lambda index)` attaining the maximum.
    pub attained_by: (usize, usize),
}

/// `max ln|mu| / ln|lambda|` over all eigenvalue pairs.
pub fn spectral_spread(x: &Spectrum, y: &Spectrum) -> Result<SpreadResult, SpectralError> {
    let rho = y.spectral_radius();
    if rho >= 1.0 {
        return Err(SpectralError::NotContracting(rho));
    }
    let mut best = SpreadResult {
        value: f64::NEG_INFINITY,
        attained_by: (0, 0),
    };
    for (i, mu) in x.values.iter().enumerate() {
        if mu.norm() == 0.0 {
            return Err(SpectralError::ZeroEigenvalue { index: i });
        }
        for (j, lam) in y.values.iter().enumerate() {
            // ln|lambda| = -inf for a zero eigenvalue gives ratio 0.
            let r = mu.norm().ln() / lam.norm().ln();
            let r = if r == 0.0 { 0.0 } else { r };
            if r > best.value {
                best = SpreadResult {
                    value: r,
                    attained_by: (i, j),
                };
            }
        }
    }
    if !best.value.is_finite() {
        best.value = 0.0;
    }
    Ok(best)
}

/// Position of the spread relative to the regularity budget `k + alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadZone {
    /// `nu < k + alpha`: existence and uniqueness hypotheses hold.
    Strict,
    /// `nu == k + alpha` within tolerance; existence is not guaranteed.
    Boundary,
    Violated,
}

pub fn spread_zone(spread: f64, k: usize, alpha: f64) -> SpreadZone {
    let budget = k as f64 + alpha;
    let tol = 1e-9 * budget.max(1.0);
    if (spread - budget).abs() <= tol {
        SpreadZone::Boundary
    } else if spread < budget {
        SpreadZone::Strict
    } else {
        SpreadZone::Violated
    }
}

/// Which of the main hypotheses hold for `(k, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypothesisVerdict {
    pub nonresonant: bool,
    pub zone: SpreadZone,
    /// Nonresonant and `nu < k + alpha`.
    pub existence: bool,
    /// Nonresonant and (`nu < k + alpha` or `nu <= k`).
    pub uniqueness: bool,
}

pub fn hypothesis_verdict(report: &ResonanceReport, spread: f64, k: usize, alpha: f64) -> HypothesisVerdict {
    let zone = spread_zone(spread, k, alpha);
    let nonresonant = report.is_nonresonant();
    let within_k = spread <= k as f64 + 1e-9 * (k as f64).max(1.0);
    HypothesisVerdict {
        nonresonant,
        zone,
        existence: nonresonant && zone == SpreadZone::Strict,
        uniqueness: nonresonant && (zone == SpreadZone::Strict || within_k),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedCovector {
    pub w: Vec<C64>,
    pub eigenvalue: C64,
    pub residual: f64,
}

/// Unit left eigenvector `w Y = target w`, normalised so that its
/// largest-modulus entry is real and positive.
pub fn seed_covector(y: &CMatrix, target: C64, tol: f64) -> Result<SeedCovector, SpectralError> {
    let n = y.nrows();
    if y.ncols() != n {
        return Err(SpectralError::Shape(format!("{}x{} matrix is not square", n, y.ncols())));
    }
    let ev = linalg::eigenvalues(y)?;
    let dist = ev.iter().map(|v| (v - target).norm()).fold(f64::INFINITY, f64::min);
    if dist > tol * target.norm().max(1.0) {
        return Err(SpectralError::NotAnEigenvalue(target, dist));
    }
    // Left eigenvectors of Y are right null vectors of (Y - target I)^T.
    let shifted = (y - CMatrix::identity(n, n) * target).transpose();
    let (v, _) = linalg::null_vector(&shifted)?;
    let mut w: Vec<C64> = v.iter().copied().collect();
    normalise_phase(&mut w);
    let wv = DVector::from_vec(w.clone()).transpose();
    let r = &wv * y - &wv * target;
    let residual = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if residual > tol * y.iter().fold(1.0f64, |a, z| a.max(z.norm())) {
        return Err(SpectralError::ResidualTooLarge(residual));
    }
    Ok(SeedCovector {
        w,
        eigenvalue: target,
        residual,
    })
}

/// Scale to unit 2-norm with the largest-modulus entry real positive.
pub fn normalise_phase(w: &mut [C64]) {
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    // Ties are broken towards the first index to stay deterministic.
    let mut pivot = 0;
    for (i, z) in w.iter().enumerate() {
        if z.norm() > w[pivot].norm() * (1.0 + 1e-12) {
            pivot = i;
        }
    }
    let phase = w[pivot] / w[pivot].norm();
    for z in w.iter_mut() {
        *z = *z / phase / norm;
    }
    w[pivot].im = 0.0;
}

/// `max |B Y - eA B|` (entrywise).
pub fn intertwining_residual(b: &CMatrix, y: &CMatrix, e_a: &CMatrix) -> Result<f64, SpectralError> {
    let (m, n) = (b.nrows(), b.ncols());
    if y.nrows() != n || y.ncols() != n || e_a.nrows() != m || e_a.ncols() != m {
        return Err(SpectralError::Shape(format!(
            "B is {m}x{n}, Y is {}x{}, e^A is {}x{}",
            y.nrows(),
            y.ncols(),
            e_a.nrows(),
            e_a.ncols()
        )));
    }
    Ok(linalg::max_abs(&(b * y - e_a * b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| c(x))))
    }

    #[test]
    fn spectrum_of_identity_and_diagonal() {
        let s = compute_spectrum(&diag(&[1.0, 1.0])).unwrap();
        assert_eq!(s.clusters(), vec![(c(1.0), 2)]);
        let s = compute_spectrum(&diag(&[(-1.0f64).exp(), (-2.0f64).exp()])).unwrap();
        assert!((s.values[0].re - 0.36787944117144233).abs() < 1e-15);
        assert!((s.values[1].re - 0.1353352832366127).abs() < 1e-15);
    }

    #[test]
    fn sharp_example_resonance() {
        let x = Spectrum::from_real(&[E.powi(-2)]);
        let y = Spectrum::from_real(&[E.powi(-1), E.powi(-2)]);
        let r = check_k_nonresonant(&x, &y, Order::Finite(2), RESONANCE_TOL).unwrap();
        assert_eq!(r.witnesses.len(), 1);
        assert_eq!(r.witnesses[0].m, vec![2, 0]);
        assert_eq!(r.nonresonant_up_to, Order::Finite(1));
    }

    #[test]
    fn irrational_offset_is_nonresonant() {
        let a = 2f64.sqrt() - 1.0;
        let x = Spectrum::from_real(&[(-(2.0 + a)).exp()]);
        let y = Spectrum::from_real(&[E.powi(-1), (-(2.0 + a)).exp()]);
        let r = check_k_nonresonant(&x, &y, Order::Finite(10), RESONANCE_TOL).unwrap();
        assert!(r.is_nonresonant());
        assert_eq!(r.nonresonant_up_to, Order::Finite(10));
        let r = check_k_nonresonant(&x, &y, Order::Infinite, RESONANCE_TOL).unwrap();
        assert!(r.is_nonresonant());
        assert_eq!(r.searched_up_to, 4);
    }

    #[test]
    fn order_one_is_vacuous() {
        let x = Spectrum::from_real(&[0.25]);
        let y = Spectrum::from_real(&[0.5]);
        let r = check_k_nonresonant(&x, &y, Order::Finite(1), RESONANCE_TOL).unwrap();
        assert!(r.is_nonresonant());
    }

    #[test]
    fn infinite_order_needs_contraction() {
        let x = Spectrum::from_real(&[0.5]);
        let y = Spectrum::from_real(&[1.0]);
        assert!(check_k_nonresonant(&x, &y, Order::Infinite, RESONANCE_TOL).is_err());
    }

    #[test]
    fn spread_examples() {
        let x = Spectrum::from_real(&[E.powi(-2)]);
        let y = Spectrum::from_real(&[E.powi(-1), E.powi(-2)]);
        let s = spectral_spread(&x, &y).unwrap();
        assert!((s.value - 2.0).abs() < 1e-15);
        assert_eq!(s.attained_by, (0, 0));
        let h = Spectrum::from_real(&[0.5]);
        assert_eq!(spectral_spread(&h, &h).unwrap().value, 1.0);
        let s = spectral_spread(&Spectrum::from_real(&[0.25]), &Spectrum::from_real(&[0.5, 0.1])).unwrap();
        assert!((s.value - 2.0).abs() < 1e-15);
        assert_eq!(s.attained_by, (0, 0));
        assert!(spectral_spread(&Spectrum::from_real(&[0.0]), &h).is_err());
        assert!(spectral_spread(&h, &Spectrum::from_real(&[1.5])).is_err());
    }

    #[test]
    fn zones() {
        assert_eq!(spread_zone(2.0, 2, 0.0), SpreadZone::Boundary);
        assert_eq!(spread_zone(1.5, 2, 0.0), SpreadZone::Strict);
        assert_eq!(spread_zone(3.5, 3, 0.0), SpreadZone::Violated);
    }

    #[test]
    fn seed_covectors() {
        let y = diag(&[E.powi(-1), E.powi(-2)]);
        let w = seed_covector(&y, c(E.powi(-2)), 1e-9).unwrap();
        assert!((w.w[0].norm()) < 1e-15 && (w.w[1] - c(1.0)).norm() < 1e-15);
        let w = seed_covector(&y, c(E.powi(-1)), 1e-9).unwrap();
        assert!((w.w[0] - c(1.0)).norm() < 1e-15 && w.w[1].norm() < 1e-15);
        let y = CMatrix::from_row_slice(2, 2, &[c(0.5), c(1.0), c(0.0), c(0.4)]);
        // w Y = 0.4 w forces 0.5 w1 = 0.4 w1, so w = (0, 1).
        let w = seed_covector(&y, c(0.4), 1e-9).unwrap();
        assert!(w.w[0].norm() < 1e-14 && (w.w[1] - c(1.0)).norm() < 1e-14);
        assert!(w.residual < 1e-14);
        // w Y = 0.5 w gives w2 = 10 w1.
        let w = seed_covector(&y, c(0.5), 1e-9).unwrap();
        let s = 101f64.sqrt();
        assert!((w.w[0] - c(1.0 / s)).norm() < 1e-14);
        assert!((w.w[1] - c(10.0 / s)).norm() < 1e-14);
        assert!(w.residual < 1e-14);
        assert!(seed_covector(&y, c(0.3), 1e-9).is_err());
    }

    #[test]
    fn intertwining_examples() {
        let y = diag(&[E.powi(-1), E.powi(-2)]);
        let ea = diag(&[E.powi(-2)]);
        let b = CMatrix::from_row_slice(1, 2, &[c(0.0), c(1.0)]);
        assert_eq!(intertwining_residual(&b, &y, &ea).unwrap(), 0.0);
        let b = CMatrix::from_row_slice(1, 2, &[c(1.0), c(0.0)]);
        let r = intertwining_residual(&b, &y, &ea).unwrap();
        assert!((r - (E.powi(-1) - E.powi(-2))).abs() < 1e-15);
        assert!(intertwining_residual(&b, &ea, &ea).is_err());
    }
}
