//! Small catalogue of systems with known answers, used by the examples,
//! the CLI presets and the test-suite.

use std::collections::BTreeMap;

use crate::flow::{FlowHandle, SystemKind};
use crate::vfield::{parse_field, FieldProgram, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub struct BundledSystem {
    pub name: &'static str,
    pub kind: SystemKind,
    pub field: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    /// Point on (fixed point) or near (cycle) the attractor.
    pub attractor_guess: Vec<f64>,
    /// Period guess for limit cycles.
    pub period_guess: Option<f64>,
}

impl BundledSystem {
    pub fn program(&self) -> Result<FieldProgram, ParseError> {
        parse_field(&self.field, self.dim, &self.params)
    }

    pub fn handle(&self) -> FlowHandle {
        let prog = self.program().expect("bundled systems parse");
        match self.kind {
            SystemKind::Flow => FlowHandle::flow(prog),
            SystemKind::Map => FlowHandle::map(prog),
        }
    }
}

fn system(name: &'static str, kind: SystemKind, field: &str, dim: usize, guess: &[f64]) -> BundledSystem {
    BundledSystem {
        name,
        kind,
        field: field.to_string(),
        dim,
        params: BTreeMap::new(),
        attractor_guess: guess.to_vec(),
        period_guess: None,
    }
}

/// `x' = -x + x^2`; the principal eigenfunction is `x / (1 - x)`.
pub fn bernoulli() -> BundledSystem {
    system("bernoulli", SystemKind::Flow, "[-x1 + x1^2]", 1, &[0.0])
}

/// Diagonal map `(e^-1 x, e^-2 y)`: both `y` and `y + x^2` are
/// eigenfunctions for `e^-2`, because `e^-2 = (e^-1)^2` is resonant.
pub fn resonant_diagonal_map() -> BundledSystem {
    system("resonant-diagonal", SystemKind::Map, "[x1*exp(-1), x2*exp(-2)]", 2, &[0.0, 0.0])
}

/// `x' = -x, y' = -r y + (r - 3) eps x^3`. Along orbits
/// `e^{rt} y(t) = (y - eps x^3) + eps x^3 e^{(r-3)t}`, so the limit defining
/// the eigenfunction for `-r` exists iff `r < 3`.
pub fn cubic_boundary(r: f64, eps: f64) -> BundledSystem {
    let mut s = system(
        "cubic-boundary",
        SystemKind::Flow,
        "[-x1, -r*x2 + (r - 3)*eps*x1^3]",
        2,
        &[0.0, 0.0],
    );
    s.params.insert("r".into(), r);
    s.params.insert("eps".into(), eps);
    s
}

/// `H o diag(0.5, 0.4) o H^-1` with `H(x, y) = (x, y + x^2)`; its Sternberg
/// linearization is `H^-1(x, y) = (x, y - x^2)`.
pub fn sternberg_map() -> BundledSystem {
    system("sternberg", SystemKind::Map, "[0.5*x1, 0.4*x2 - 0.15*x1^2]", 2, &[0.0, 0.0])
}

/// `x' = -x, y' = -2y + x^3`: principal eigenfunctions `x` and `y + x^3`.
pub fn triangular_flow() -> BundledSystem {
    system("triangular", SystemKind::Flow, "[-x1, -2*x2 + x1^3]", 2, &[0.0, 0.0])
}

/// Stuart–Landau oscillator with unit radius cycle, period `2 pi` and
/// Floquet exponent `-2`. Isostable `(1 - r^-2) / 2`, phase `e^{i theta}`.
pub fn stuart_landau() -> BundledSystem {
    let mut s = system(
        "stuart-landau",
        SystemKind::Flow,
        "[x1*(1 - x1^2 - x2^2) - x2, x2*(1 - x1^2 - x2^2) + x1]",
        2,
        &[1.0, 0.0],
    );
    s.period_guess = Some(6.0);
    s
}

pub fn van_der_pol(mu: f64) -> BundledSystem {
    let mut s = system("van-der-pol", SystemKind::Flow, "[x2, mu*(1 - x1^2)*x2 - x1]", 2, &[2.0, 0.0]);
    s.params.insert("mu".into(), mu);
    s.period_guess = Some(6.66);
    s
}

pub fn all() -> Vec<BundledSystem> {
    vec![
        bernoulli(),
        resonant_diagonal_map(),
        cubic_boundary(2.0, 0.1),
        sternberg_map(),
        triangular_flow(),
        stuart_landau(),
        van_der_pol(1.0),
    ]
}

pub fn by_name(name: &str) -> Option<BundledSystem> {
    all().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_parse() {
        for s in all() {
            let p = s.program().unwrap();
            assert_eq!(p.dim(), s.dim, "{}", s.name);
        }
    }

    #[test]
    fn boundary_parameters() {
        let h = cubic_boundary(2.0, 0.1).handle();
        let v = h.rhs(&[1.0, 1.0]).unwrap();
        assert!((v[1] - (-2.0 - 0.1)).abs() < 1e-15);
    }
}
