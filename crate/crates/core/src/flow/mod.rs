//! Time-t maps, jet transport and attractor location.
//!
//! A [`FlowHandle`] wraps either a vector field (`x' = f(x)`, continuous
//! time) or a map (`x -> F(x)`, integer time). Everything downstream only
//! talks to the handle.

pub mod dop853;
mod fixed_point;
mod periodic;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use dop853::{integrate, DenseSegment, IntegrationError, Stats, Tolerances};
pub use fixed_point::{find_fixed_point, FixedPointData};
pub use periodic::{find_periodic_orbit, LimitCycle};

use crate::linalg::{LinalgError, RMatrix};
use crate::vfield::{field_jet, EvalError, FieldProgram, JetLayout, MapJet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("discrete-time systems only accept non-negative integer times, got {0}")]
    NonIntegerTime(f64),
    #[error("iterate became non-finite after {0} map steps")]
    NonFinite(usize),
    #[error("point is not fixed: residual {0:.3e}")]
    NotFixed(f64),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("Jacobian is singular at the current iterate")]
    SingularJacobian,
    #[error("no attracting fixed point found near the guess (last spectral radius {0:.6})")]
    NotAttracting(f64),
    #[error("periodic orbits need a continuous-time system")]
    NotContinuous,
    #[error("monodromy has no unit multiplier (closest {0:.3e} away)")]
    NoUnitMultiplier(f64),
    #[error("stable multiplier with modulus {0} >= 1")]
    UnstableMultiplier(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Flow,
    Map,
}

#[derive(Debug, Clone)]
pub struct FlowHandle {
    program: Arc<FieldProgram>,
    kind: SystemKind,
    tol: Tolerances,
}

impl FlowHandle {
    pub fn flow(program: FieldProgram) -> Self {
        Self {
            program: Arc::new(program),
            kind: SystemKind::Flow,
            tol: Tolerances::default(),
        }
    }

    pub fn map(program: FieldProgram) -> Self {
        Self {
            program: Arc::new(program),
            kind: SystemKind::Map,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(&self, tol: Tolerances) -> Self {
        Self {
            program: self.program.clone(),
            kind: self.kind,
            tol,
        }
    }

    /// Same handle with a different absolute tolerance.
    pub fn with_atol(&self, atol: f64) -> Self {
        self.with_tolerances(Tolerances { atol, ..self.tol })
    }

    pub fn program(&self) -> &FieldProgram {
        &self.program
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn is_map(&self) -> bool {
        self.kind == SystemKind::Map
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn dim(&self) -> usize {
        self.program.dim()
    }

    /// Right-hand side `f(x)` (or `F(x)` for maps).
    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>, FlowError> {
        Ok(self.program.eval(x)?)
    }

    /// `Df(x)` (or `DF(x)`).
    pub fn rhs_jacobian(&self, x: &[f64]) -> Result<RMatrix, FlowError> {
        let jet = field_jet(&self.program, x, 1)?;
        let lin = jet.linear_part();
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| lin[i][j]))
    }

    fn map_steps(&self, t: f64) -> Result<usize, FlowError> {
        let r = t.round();
        if t < 0.0 || (t - r).abs() > 1e-12 {
            return Err(FlowError::NonIntegerTime(t));
        }
        Ok(r as usize)
    }

    /// `Phi^t(x)`.
    pub fn flow_to(&self, x: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
        match self.kind {
            SystemKind::Map => {
                let mut y = x.to_vec();
                for step in 0..self.map_steps(t)? {
                    y = self.program.eval(&y)?;
                    if !y.iter().all(|v| v.is_finite()) {
                        return Err(FlowError::NonFinite(step + 1));
                    }
                }
                Ok(y)
            }
            SystemKind::Flow => {
                if t < 0.0 {
                    log::debug!("backward integration to t = {t}");
                }
                let prog = &self.program;
                let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
                    let v = prog.eval(y).map_err(|e| e.to_string())?;
                    dy.copy_from_slice(&v);
                    Ok(())
                };
                Ok(integrate(rhs, 0.0, x, t, &self.tol, None)?.0)
            }
        }
    }

    /// States at the increasing, non-negative `times` along one trajectory
    /// (dense output for flows, iteration for maps).
    pub fn sample(&self, x: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, FlowError> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let Some(&t_end) = times.last() else {
            return Ok(Vec::new());
        };
        if self.is_map() {
            let mut out = Vec::with_capacity(times.len());
            let mut y = x.to_vec();
            let mut now = 0;
            for &t in times {
                let target = self.map_steps(t)?;
                y = self.flow_to(&y, (target - now) as f64)?;
                now = target;
                out.push(y.clone());
            }
            return Ok(out);
        }
        let n = self.dim();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(times.len());
        let mut next = 0;
        while next < times.len() && times[next] <= 0.0 {
            out.push(x.to_vec());
            next += 1;
        }
        let mut buf = vec![0.0; n];
        let mut obs = |seg: &DenseSegment| {
            while next < times.len() && times[next] <= seg.t_new() {
                seg.eval_into(times[next], &mut buf);
                out.push(buf.clone());
                next += 1;
            }
        };
        let prog = &self.program;
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
            let v = prog.eval(y).map_err(|e| e.to_string())?;
            dy.copy_from_slice(&v);
            Ok(())
        };
        let (y_end, _) = integrate(rhs, 0.0, x, t_end, &self.tol, Some(&mut obs))?;
        // Guard against round-off at the very end.
        while out.len() < times.len() {
            out.push(y_end.clone());
        }
        Ok(out)
    }

    /// Transport an arbitrary state jet through `Phi^t`: the result is the
    /// Taylor expansion of `Phi^t` composed with the seed jet.
    pub fn transport(&self, state: &MapJet<f64>, t: f64) -> Result<MapJet<f64>, FlowError> {
        match self.kind {
            SystemKind::Map => {
                let mut s = state.clone();
                for step in 0..self.map_steps(t)? {
                    s = MapJet::new(self.program.eval(&s.components)?);
                    if !s.components.iter().all(|c| c.is_finite()) {
                        return Err(FlowError::NonFinite(step + 1));
                    }
                }
                Ok(s)
            }
            SystemKind::Flow => {
                let layout = state.components[0].layout().clone();
                let outputs = state.outputs();
                let mut flat = Vec::new();
                state.flatten_into(&mut flat);
                let prog = &self.program;
                let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
                    let jets = MapJet::from_flat(&layout, outputs, y);
                    let v = prog.eval(&jets.components).map_err(|e| e.to_string())?;
                    let mut off = 0;
                    for c in &v {
                        let cs = c.coeffs();
                        dy[off..off + cs.len()].copy_from_slice(cs);
                        off += cs.len();
                    }
                    Ok(())
                };
                let (end, _) = integrate(rhs, 0.0, &flat, t, &self.tol, None)?;
                Ok(MapJet::from_flat(&layout, outputs, &end))
            }
        }
    }

    /// Order-`k` Taylor expansion of `Phi^t` about `x`.
    pub fn flow_jet(&self, x: &[f64], t: f64, k: usize) -> Result<MapJet<f64>, FlowError> {
        self.transport(&MapJet::identity(x, k), t)
    }

    /// `(Phi^t(x), D Phi^t(x))`.
    pub fn flow_with_jacobian(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, RMatrix), FlowError> {
        let j = self.flow_jet(x, t, 1)?;
        let n = self.dim();
        let lin = j.linear_part();
        Ok((j.value(), DMatrix::from_fn(n, n, |i, c| lin[i][c])))
    }

    /// Residual `|f(x0)|` (flows) or `|F(x0) - x0|` (maps).
    pub fn fixed_point_residual(&self, x0: &[f64]) -> Result<f64, FlowError> {
        let v = self.rhs(x0)?;
        Ok(match self.kind {
            SystemKind::Flow => norm(&v),
            SystemKind::Map => norm(&v.iter().zip(x0).map(|(a, b)| a - b).collect::<Vec<_>>()),
        })
    }

    /// Order-`k` Taylor expansion of the time-one map about the fixed point
    /// `x0`; coefficients are in the displacement `x - x0`.
    pub fn time_one_map_jet(&self, x0: &[f64], k: usize) -> Result<MapJet<f64>, FlowError> {
        let r = self.fixed_point_residual(x0)?;
        if r > 1e-8 * (1.0 + norm(x0)) {
            return Err(FlowError::NotFixed(r));
        }
        let mut jet = self.flow_jet(x0, 1.0, k)?;
        // Express the result as a displacement from x0 as well.
        for (c, &x) in jet.components.iter_mut().zip(x0) {
            c.coeffs_mut()[0] -= x;
        }
        Ok(jet)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Layout helper for callers that build their own seed jets.
pub fn layout(n: usize, k: usize) -> Arc<JetLayout> {
    JetLayout::get(n, k)
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
    fn linear_decay() {
        let h = handle("[-x1]", 1);
        let y = h.flow_to(&[1.0], 1.0).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_field_is_identity() {
        let h = handle("[0, 0]", 2);
        assert_eq!(h.flow_to(&[0.3, -2.0], 5.0).unwrap(), vec![0.3, -2.0]);
    }

    #[test]
    fn bernoulli_closed_form() {
        let h = handle("[-x1 + x1^2]", 1);
        let y = h.flow_to(&[0.5], 1.0).unwrap();
        let e = 1f64.exp();
        assert!((y[0] - 0.5 / (0.5 + 0.5 * e)).abs() < 1e-10);
    }

    #[test]
    fn time_one_jets() {
        let e = 1f64.exp();
        let j = handle("[-x1]", 1).time_one_map_jet(&[0.0], 3).unwrap();
        let c = j.components[0].coeffs();
        assert!((c[1] - 1.0 / e).abs() < 1e-9);
        assert!(c[2].abs() < 1e-9 && c[3].abs() < 1e-9);
        let j = handle("[-x1 + x1^2]", 1).time_one_map_jet(&[0.0], 3).unwrap();
        let c = j.components[0].coeffs();
        assert!((c[1] - 1.0 / e).abs() < 1e-9);
        assert!((c[2] - (e - 1.0) / (e * e)).abs() < 1e-9);
        let j = handle("[-x1, -2.5*x2]", 2).time_one_map_jet(&[0.0, 0.0], 2).unwrap();
        let lin = j.linear_part();
        assert!((lin[0][0] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((lin[1][1] - (-2.5f64).exp()).abs() < 1e-9);
        assert!(lin[0][1].abs() < 1e-12 && lin[1][0].abs() < 1e-12);
        assert!(j.components.iter().all(|c| c.coeffs()[3..].iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn time_one_jet_rejects_non_fixed_points() {
        assert!(matches!(
            handle("[-x1]", 1).time_one_map_jet(&[0.5], 2),
            Err(FlowError::NotFixed(_))
        ));
    }

    #[test]
    fn map_iteration() {
        let h = FlowHandle::map(parse_field("[0.5*x1]", 1, &BTreeMap::new()).unwrap());
        assert_eq!(h.flow_to(&[1.0], 3.0).unwrap(), vec![0.125]);
        assert!(h.flow_to(&[1.0], 0.5).is_err());
    }

    #[test]
    fn dense_samples_agree_with_direct_integration() {
        let h = handle("[x2, -x1]", 2);
        let times = [0.0, 0.3, 1.7, 2.0, 5.5];
        let s = h.sample(&[1.0, 0.0], &times).unwrap();
        for (t, y) in times.iter().zip(&s) {
            assert!((y[0] - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }
}
