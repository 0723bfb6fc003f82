use nalgebra::{DMatrix, DVector};

use super::{norm, FlowError, FlowHandle, SystemKind};
use crate::linalg::{self, RMatrix};

const MAX_NEWTON: usize = 60;
const MAX_RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointData {
    pub x0: Vec<f64>,
    /// `D_{x0} Phi^1`.
    pub jacobian: RMatrix,
    pub newton_residual: f64,
}

/// Locate an attracting fixed point near `guess`.
///
/// Damped Newton on `f` (or `F - id`) is followed by a sink filter: a root
/// whose time-one Jacobian has spectral radius `>= 1` is discarded, the
/// guess is pushed forward along the dynamics and Newton restarts.
pub fn find_fixed_point(handle: &FlowHandle, guess: &[f64]) -> Result<FixedPointData, FlowError> {
    let mut start = guess.to_vec();
    let mut last_err = FlowError::NotAttracting(f64::NAN);
    for attempt in 0..=MAX_RESTARTS {
        match newton(handle, &start) {
            Ok((x0, residual)) => {
                let jacobian = time_one_jacobian(handle, &x0)?;
                let rho = linalg::spectral_radius(&jacobian)?;
                if rho < 1.0 {
                    return Ok(FixedPointData {
                        x0,
                        jacobian,
                        newton_residual: residual,
                    });
                }
                log::debug!("root {x0:?} rejected: spectral radius {rho}");
                last_err = FlowError::NotAttracting(rho);
            }
            Err(e) => {
                log::debug!("Newton from {start:?} failed: {e}");
                last_err = e;
            }
        }
        if attempt == MAX_RESTARTS {
            break;
        }
        // Follow the dynamics for a while and try again from there.
        let horizon = 10.0 * (1u32 << attempt) as f64;
        start = handle.flow_to(&start, horizon)?;
    }
    Err(last_err)
}

fn time_one_jacobian(handle: &FlowHandle, x0: &[f64]) -> Result<RMatrix, FlowError> {
    match handle.kind() {
        SystemKind::Map => handle.rhs_jacobian(x0),
        SystemKind::Flow => Ok(handle.flow_with_jacobian(x0, 1.0)?.1),
    }
}

fn residual(handle: &FlowHandle, x: &[f64]) -> Result<Vec<f64>, FlowError> {
    let mut g = handle.rhs(x)?;
    if handle.is_map() {
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi -= xi;
        }
    }
    Ok(g)
}

fn newton(handle: &FlowHandle, start: &[f64]) -> Result<(Vec<f64>, f64), FlowError> {
    let n = handle.dim();
    let mut x = start.to_vec();
    let mut g = residual(handle, &x)?;
    let mut gn = norm(&g);
    for _ in 0..MAX_NEWTON {
        if gn <= 1e-13 * (1.0 + norm(&x)) {
            return Ok((x, gn));
        }
        let mut jac = handle.rhs_jacobian(&x)?;
        if handle.is_map() {
            jac -= DMatrix::<f64>::identity(n, n);
        }
        let rhs = -DVector::from_vec(g.clone());
        let step = jac.lu().solve(&rhs).ok_or(FlowError::SingularJacobian)?;
        if !step.iter().all(|v| v.is_finite()) {
            return Err(FlowError::SingularJacobian);
        }
        // Backtrack on |g| (Armijo with a weak constant).
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            let gt = residual(handle, &trial).ok();
            if let Some(gt) = gt {
                let gtn = norm(&gt);
                if gtn.is_finite() && (gtn <= (1.0 - 1e-4 * lambda) * gn || lambda < 1e-3) {
                    let small = lambda * step.norm() <= 1e-15 * (1.0 + norm(&x));
                    x = trial;
                    g = gt;
                    gn = gtn;
                    if small && gn <= 1e-10 * (1.0 + norm(&x)) {
                        return Ok((x, gn));
                    }
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-3 {
                return Err(FlowError::NewtonFailed {
                    iterations: 0,
                    residual: gn,
                });
            }
        }
    }
    if gn <= 1e-10 * (1.0 + norm(&x)) {
        return Ok((x, gn));
    }
    Err(FlowError::NewtonFailed {
        iterations: MAX_NEWTON,
        residual: gn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::parse_field;
    use std::collections::BTreeMap;

    fn handle(src: &str, n: usize) -> FlowHandle {
        FlowHandle::flow(parse_field(src, n, &BTreeMap::new()).unwrap())
    }

    #[test]
    fn bernoulli_sink() {
        let h = handle("[-x1 + x1^2]", 1);
        let fp = find_fixed_point(&h, &[0.1]).unwrap();
        assert!(fp.x0[0].abs() < 1e-13);
        assert!((fp.jacobian[(0, 0)] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn repeller_is_filtered_out() {
        // Newton from 0.9 lands on the repeller x = 1 first.
        let h = handle("[-x1 + x1^2]", 1);
        let fp = find_fixed_point(&h, &[0.9]).unwrap();
        assert!(fp.x0[0].abs() < 1e-12, "{:?}", fp.x0);
    }

    #[test]
    fn planar_linear_sink() {
        let h = handle("[-x1, -2*x2]", 2);
        let fp = find_fixed_point(&h, &[1.0, 1.0]).unwrap();
        assert!(norm(&fp.x0) < 1e-13);
    }

    #[test]
    fn map_fixed_point() {
        let h = FlowHandle::map(parse_field("[0.5*x1 + 1, 0.25*x2]", 2, &BTreeMap::new()).unwrap());
        let fp = find_fixed_point(&h, &[0.0, 1.0]).unwrap();
        assert!((fp.x0[0] - 2.0).abs() < 1e-12 && fp.x0[1].abs() < 1e-12);
        assert_eq!(fp.jacobian[(0, 0)], 0.5);
    }
}
