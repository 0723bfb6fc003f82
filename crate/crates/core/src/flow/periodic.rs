use nalgebra::{DMatrix, DVector, SVD};

use super::{norm, FlowError, FlowHandle};
use crate::linalg::{self, RMatrix, C64};

const MAX_SHOOTING: usize = 60;
/// Distance from 1 tolerated for the trivial (flow-direction) multiplier.
const UNIT_MULTIPLIER_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    pub x0: Vec<f64>,
    pub tau: f64,
    /// `D_{x0} Phi^tau`.
    pub monodromy: RMatrix,
    /// Orthonormal `n x (n-1)` basis of the invariant complement of `f(x0)`.
    pub stable_basis: RMatrix,
    /// The multiplier nearest to 1.
    pub trivial_multiplier: C64,
    /// Nontrivial multipliers, slowest (largest modulus) first; conjugate
    /// pairs are adjacent with the upper half-plane member first.
    pub floquet_multipliers: Vec<C64>,
    /// `ln(multiplier) / tau` on the principal branch.
    pub floquet_exponents: Vec<C64>,
    pub shooting_residual: f64,
}

impl LimitCycle {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Monodromy restricted to the stable subspace, in the coordinates of
    /// `stable_basis`.
    /// The same cycle seen from `Phi^s(x0)`.
    pub fn rebased(&self, handle: &FlowHandle, s: f64) -> Result<LimitCycle, FlowError> {
        let x = handle.flow_to(&self.x0, s.rem_euclid(self.tau))?;
        cycle_data(handle, x, self.tau, self.shooting_residual)
    }

    pub fn restricted_monodromy(&self) -> RMatrix {
        self.stable_basis.transpose() * &self.monodromy * &self.stable_basis
    }
}

/// Newton shooting on `(x, tau)`.
///
/// The phase condition `<f(x), x - guess> = 0` selects the point of the
/// cycle closest to `guess`, so the result does not depend on the Newton
/// path.
pub fn find_periodic_orbit(handle: &FlowHandle, guess: &[f64], period_guess: f64) -> Result<LimitCycle, FlowError> {
    if handle.is_map() {
        return Err(FlowError::NotContinuous);
    }
    let first = shoot(handle, guess, guess, period_guess);
    let (x0, tau, residual) = match first {
        Ok(v) => v,
        Err(e) => {
            log::debug!("shooting from the guess failed ({e}); retrying after two periods");
            let start = handle.flow_to(guess, 2.0 * period_guess)?;
            shoot(handle, guess, &start, period_guess)?
        }
    };
    cycle_data(handle, x0, tau, residual)
}

struct Residual {
    r: Vec<f64>,
    norm: f64,
}

fn evaluate(handle: &FlowHandle, anchor: &[f64], x: &[f64], tau: f64) -> Result<(Residual, RMatrix, Vec<f64>), FlowError> {
    let (xe, m) = handle.flow_with_jacobian(x, tau)?;
    let fx = handle.rhs(x)?;
    let mut r: Vec<f64> = xe.iter().zip(x).map(|(a, b)| a - b).collect();
    let g: f64 = fx.iter().zip(x.iter().zip(anchor)).map(|(f, (a, b))| f * (a - b)).sum();
    r.push(g);
    let nr = norm(&r);
    Ok((Residual { r, norm: nr }, m, xe))
}

fn shoot(handle: &FlowHandle, anchor: &[f64], start: &[f64], period_guess: f64) -> Result<(Vec<f64>, f64, f64), FlowError> {
    let n = handle.dim();
    let mut x = start.to_vec();
    let mut tau = period_guess;
    let (mut res, mut m, mut xe) = evaluate(handle, anchor, &x, tau)?;
    for it in 0..MAX_SHOOTING {
        let scale = 1.0 + norm(&x);
        if res.norm <= 1e-11 * scale {
            return Ok((x, tau, res.norm));
        }
        let fx = handle.rhs(&x)?;
        let fe = handle.rhs(&xe)?;
        let df = handle.rhs_jacobian(&x)?;
        let d: Vec<f64> = x.iter().zip(anchor).map(|(a, b)| a - b).collect();
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = m[(i, j)] - if i == j { 1.0 } else { 0.0 };
            }
            jac[(i, n)] = fe[i];
        }
        // d/dx <f(x), x - anchor> = f(x)^T + (x - anchor)^T Df(x)
        for j in 0..n {
            let mut v = fx[j];
            for i in 0..n {
                v += d[i] * df[(i, j)];
            }
            jac[(n, j)] = v;
        }
        let rhs = -DVector::from_vec(res.r.clone());
        let step = jac.lu().solve(&rhs).ok_or(FlowError::SingularJacobian)?;
        let max_dtau = 0.5 * tau.abs();
        let shrink = if step[n].abs() > max_dtau { max_dtau / step[n].abs() } else { 1.0 };
        let mut lambda = shrink;
        loop {
            let xt: Vec<f64> = (0..n).map(|i| x[i] + lambda * step[i]).collect();
            let tt = tau + lambda * step[n];
            if let Ok((rt, mt, xet)) = evaluate(handle, anchor, &xt, tt) {
                if rt.norm < res.norm || lambda < 1e-3 {
                    x = xt;
                    tau = tt;
                    res = rt;
                    m = mt;
                    xe = xet;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-3 {
                return Err(FlowError::NewtonFailed {
                    iterations: it,
                    residual: res.norm,
                });
            }
        }
    }
    if res.norm <= 1e-9 * (1.0 + norm(&x)) {
        return Ok((x, tau, res.norm));
    }
    Err(FlowError::NewtonFailed {
        iterations: MAX_SHOOTING,
        residual: res.norm,
    })
}

fn cycle_data(handle: &FlowHandle, x0: Vec<f64>, tau: f64, residual: f64) -> Result<LimitCycle, FlowError> {
    let n = x0.len();
    let (_, monodromy) = handle.flow_with_jacobian(&x0, tau)?;
    let ev = linalg::eigenvalues(&linalg::complexify(&monodromy))?;
    let one = C64::new(1.0, 0.0);
    let (ti, dist) = ev
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - one).norm()))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if dist > UNIT_MULTIPLIER_TOL {
        return Err(FlowError::NoUnitMultiplier(dist));
    }
    let mut mult: Vec<C64> = ev.iter().enumerate().filter(|&(i, _)| i != ti).map(|(_, &v)| v).collect();
    for v in mult.iter_mut() {
        if v.im.abs() <= 1e-12 * v.norm().max(1e-300) {
            v.im = 0.0;
        }
    }
    mult.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    if let Some(bad) = mult.iter().find(|v| v.norm() >= 1.0) {
        return Err(FlowError::UnstableMultiplier(bad.norm()));
    }
    let exponents: Vec<C64> = mult
        .iter()
        .map(|&v| {
            let (l, on_cut) = linalg::principal_log(v);
            if on_cut {
                log::warn!("negative real Floquet multiplier {}: exponent imaginary part set to pi/tau", v.re);
            }
            l / tau
        })
        .collect();

    // The range of (M - I) is the invariant complement of the flow direction.
    let shifted = &monodromy - DMatrix::<f64>::identity(n, n);
    let svd = SVD::new(shifted, true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut stable_basis = DMatrix::<f64>::zeros(n, n - 1);
    for (c, &idx) in order.iter().take(n - 1).enumerate() {
        stable_basis.set_column(c, &u.column(idx));
    }
    Ok(LimitCycle {
        x0,
        tau,
        monodromy,
        stable_basis,
        trivial_multiplier: ev[ti],
        floquet_multipliers: mult,
        floquet_exponents: exponents,
        shooting_residual: residual,
    })
}
