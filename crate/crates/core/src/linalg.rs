//! Small dense complex linear algebra helpers on top of nalgebra.
//!
//! Everything here is desk scale (matrices of a few dozen rows at most), so
//! the routines favour robustness over speed.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("matrix is singular to working precision")]
    Singular,
}

pub fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

pub fn real_part(m: &CMatrix) -> RMatrix {
    m.map(|v| v.re)
}

/// Largest absolute imaginary part among the entries.
pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.im.abs()))
}

/// Max-abs entry norm.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_slice(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn check_square(m: &CMatrix) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

/// All eigenvalues, repeated with algebraic multiplicity, via complex Schur.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>, LinalgError> {
    check_square(m)?;
    let n = m.nrows();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![m[(0, 0)]]),
        _ => {}
    }
    // Balance the scale so that the Schur tolerance is relative.
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); n]);
    }
    let scaled = m.map(|v| v / scale);
    let schur = Schur::try_new(scaled, SCHUR_EPS, SCHUR_MAX_ITER).ok_or(LinalgError::NoConvergence)?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)] * scale).collect())
}

/// Right null vector of `m` (unit 2-norm) together with the smallest
/// singular value, which measures how far `m` is from singular.
pub fn null_vector(m: &CMatrix) -> Result<(DVector<C64>, f64), LinalgError> {
    check_square(m)?;
    let n = m.ncols();
    let svd = SVD::try_new(m.clone(), false, true, 1e-15, 10_000).ok_or(LinalgError::NoConvergence)?;
    let v_t = svd.v_t.as_ref().ok_or(LinalgError::NoConvergence)?;
    let (idx, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    // Rows of V^H are conjugated right singular vectors.
    let v = DVector::from_iterator(n, (0..n).map(|j| v_t[(idx, j)].conj()));
    Ok((v, smin))
}

/// Eigen decomposition `m = V diag(d) V^{-1}` for diagonalizable matrices.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
}

impl EigenDecomposition {
    /// Returns `None` when the eigenvector matrix is too ill conditioned
    /// (condition estimate above `max_condition`), i.e. when the matrix is
    /// numerically defective.
    pub fn new(m: &CMatrix, max_condition: f64) -> Result<Option<Self>, LinalgError> {
        let values = eigenvalues(m)?;
        let n = m.nrows();
        let scale = max_abs(m).max(1e-300);
        let mut vectors = CMatrix::zeros(n, n);
        for (j, &lam) in values.iter().enumerate() {
            let shifted = m - CMatrix::identity(n, n) * lam;
            let (v, _) = null_vector(&shifted)?;
            vectors.set_column(j, &v);
        }
        let svd = SVD::new(vectors.clone(), false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= smax / max_condition || smin == 0.0 {
            return Ok(None);
        }
        let Some(inverse) = vectors.clone().try_inverse() else {
            return Ok(None);
        };
        // Repeated eigenvalues can yield the same null vector twice; the
        // reconstruction check catches any such failure.
        let recon = &vectors * CMatrix::from_diagonal(&DVector::from_vec(values.clone())) * &inverse;
        if max_abs(&(recon - m)) > 1e-9 * scale.max(1.0) {
            return Ok(None);
        }
        Ok(Some(Self {
            values,
            vectors,
            inverse,
        }))
    }

    pub fn apply_diagonal(&self, f: impl Fn(C64) -> C64) -> CMatrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&v| f(v)));
        &self.vectors * CMatrix::from_diagonal(&d) * &self.inverse
    }
}

/// `exp(t * m)`; eigen decomposition when well conditioned, otherwise
/// scaling and squaring.
pub fn expm(m: &CMatrix, t: f64) -> Result<CMatrix, LinalgError> {
    check_square(m)?;
    if let Some(eig) = EigenDecomposition::new(m, 1e8)? {
        return Ok(eig.apply_diagonal(|v| (v * t).exp()));
    }
    Ok((m * C64::new(t, 0.0)).exp())
}

/// Principal matrix logarithm for diagonalizable matrices without
/// eigenvalues on the closed negative real axis branch cut issues left to
/// the caller.
pub fn logm(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    check_square(m)?;
    let eig = EigenDecomposition::new(m, 1e10)?.ok_or(LinalgError::Singular)?;
    if eig.values.iter().any(|v| v.norm() == 0.0) {
        return Err(LinalgError::Singular);
    }
    Ok(eig.apply_diagonal(|v| v.ln()))
}

pub fn solve(m: &CMatrix, rhs: &DVector<C64>) -> Result<DVector<C64>, LinalgError> {
    check_square(m)?;
    m.clone().lu().solve(rhs).ok_or(LinalgError::Singular)
}

/// Spectral radius of a real matrix.
pub fn spectral_radius(m: &RMatrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(&complexify(m))?
        .iter()
        .fold(0.0, |acc, v| acc.max(v.norm())))
}

/// Scalar principal log with a note when the value sits on the negative
/// real axis.
pub fn principal_log(z: C64) -> (C64, bool) {
    let on_cut = z.im == 0.0 && z.re < 0.0;
    let mut l = z.ln();
    if on_cut {
        l.im = std::f64::consts::PI;
    }
    (l, on_cut)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenvalues_of_rotation_like_matrix() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-0.25, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - c(0.0, -0.5)).norm() < 1e-14);
        assert!((ev[1] - c(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn expm_matches_scalar_exponential_on_diagonal() {
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![c(-1.0, 0.0), c(-2.0, 1.0)]));
        let e = expm(&m, 0.5).unwrap();
        assert!((e[(0, 0)] - c(-0.5, 0.0).exp()).norm() < 1e-15);
        assert!((e[(1, 1)] - c(-1.0, 0.5).exp()).norm() < 1e-15);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_handles_jordan_block() {
        let m = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let e = expm(&m, 2.0).unwrap();
        let ex = (-2.0f64).exp();
        assert!((e[(0, 0)].re - ex).abs() < 1e-13);
        assert!((e[(0, 1)].re - 2.0 * ex).abs() < 1e-13);
    }

    #[test]
    fn null_vector_of_singular_matrix() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        let (v, s) = null_vector(&m).unwrap();
        assert!(s < 1e-14);
        assert!(max_abs_slice((&m * &v).as_slice()) < 1e-14);
    }
}
