//! Line-oriented text format for [`PolynomialFactor`].
//!
//! ```text
//! kf-factor 1
//! n 2
//! m 1
//! k 3
//! mode map
//! base <x1> <x2>
//! matrix <re> <im> ...          (m x m, row-major)
//! coeff <p> <e1> <e2> <re> <im> (one line per coefficient, degrees 1..k)
//! ```
//!
//! Floats are written with 17 significant digits, so parsing the output
//! reproduces every bit.

use std::fmt::Write as _;

use super::{FactorMode, PolynomialFactor};
use crate::linalg::{CMatrix, C64};
use crate::vfield::{Jet, JetLayout, MapJet};

const MAGIC: &str = "kf-factor 1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("factor file line {line}: {message}")]
pub struct ParseFactorError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseFactorError {
    ParseFactorError {
        line,
        message: message.into(),
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl PolynomialFactor {
    pub fn to_text(&self) -> String {
        let (n, m) = (self.n(), self.m());
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "n {n}").unwrap();
        writeln!(s, "m {m}").unwrap();
        writeln!(s, "k {}", self.order()).unwrap();
        let mode = match self.mode {
            FactorMode::Map => "map",
            FactorMode::Flow => "flow",
        };
        writeln!(s, "mode {mode}").unwrap();
        let base: Vec<String> = self.base.iter().map(|&v| num(v)).collect();
        writeln!(s, "base {}", base.join(" ")).unwrap();
        let mut mat = Vec::with_capacity(2 * m * m);
        for i in 0..m {
            for j in 0..m {
                let z = self.a_matrix[(i, j)];
                mat.push(num(z.re));
                mat.push(num(z.im));
            }
        }
        writeln!(s, "matrix {}", mat.join(" ")).unwrap();
        let layout = self.poly.components[0].layout();
        for (p, comp) in self.poly.components.iter().enumerate() {
            for (r, mi) in layout.indices().iter().enumerate().skip(1) {
                let z = comp.coeffs()[r];
                let exps: Vec<String> = mi.iter().map(|e| e.to_string()).collect();
                writeln!(s, "coeff {p} {} {} {}", exps.join(" "), num(z.re), num(z.im)).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ParseFactorError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (ln, first) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        if first != MAGIC {
            return Err(err(ln, format!("expected '{MAGIC}'")));
        }
        let mut header = |key: &str| -> Result<(usize, Vec<String>), ParseFactorError> {
            let (ln, l) = lines.next().ok_or_else(|| err(0, format!("missing '{key}' line")))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(err(ln, format!("expected '{key}'")));
            }
            Ok((ln, parts.map(str::to_owned).collect()))
        };
        let single = |(ln, v): (usize, Vec<String>)| -> Result<usize, ParseFactorError> {
            match v.as_slice() {
                [x] => x.parse().map_err(|_| err(ln, format!("bad integer '{x}'"))),
                _ => Err(err(ln, "expected one integer")),
            }
        };
        let n = single(header("n")?)?;
        let m = single(header("m")?)?;
        let k = single(header("k")?)?;
        if n == 0 || m == 0 {
            return Err(err(0, "dimensions must be positive"));
        }
        let (ln, mode) = header("mode")?;
        let mode = match mode.as_slice() {
            [s] if s == "map" => FactorMode::Map,
            [s] if s == "flow" => FactorMode::Flow,
            _ => return Err(err(ln, "mode must be 'map' or 'flow'")),
        };
        let floats = |(ln, v): (usize, Vec<String>), want: usize| -> Result<Vec<f64>, ParseFactorError> {
            if v.len() != want {
                return Err(err(ln, format!("expected {want} numbers, found {}", v.len())));
            }
            v.iter()
                .map(|s| s.parse::<f64>().map_err(|_| err(ln, format!("bad number '{s}'"))))
                .collect()
        };
        let base = floats(header("base")?, n)?;
        let mat = floats(header("matrix")?, 2 * m * m)?;
        let a_matrix = CMatrix::from_fn(m, m, |i, j| C64::new(mat[2 * (i * m + j)], mat[2 * (i * m + j) + 1]));

        let layout = JetLayout::get(n, k);
        let mut comps = vec![Jet::<C64>::zero_like(&layout); m];
        let mut seen = vec![false; m * layout.len()];
        for (ln, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.first() != Some(&"coeff") || parts.len() != n + 4 {
                return Err(err(ln, format!("expected 'coeff p e1..e{n} re im'")));
            }
            let p: usize = parts[1].parse().map_err(|_| err(ln, "bad output index"))?;
            if p >= m {
                return Err(err(ln, format!("output index {p} out of range")));
            }
            let mi = parts[2..2 + n]
                .iter()
                .map(|s| s.parse::<u32>())
                .collect::<Result<Vec<u32>, _>>()
                .map_err(|_| err(ln, "bad exponent"))?;
            let r = layout.rank(&mi).ok_or_else(|| err(ln, format!("monomial {mi:?} exceeds order {k}")))?;
            if r == 0 {
                return Err(err(ln, "constant terms are always zero"));
            }
            let re: f64 = parts[n + 2].parse().map_err(|_| err(ln, "bad real part"))?;
            let im: f64 = parts[n + 3].parse().map_err(|_| err(ln, "bad imaginary part"))?;
            if std::mem::replace(&mut seen[p * layout.len() + r], true) {
                return Err(err(ln, format!("duplicate coefficient for output {p}, monomial {mi:?}")));
            }
            comps[p].coeffs_mut()[r] = C64::new(re, im);
        }
        PolynomialFactor::from_parts(base, mode, a_matrix, MapJet::new(comps)).map_err(|e| err(0, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::sternberg_factor;

    fn sample() -> PolynomialFactor {
        let layout = JetLayout::get(2, 3);
        let mut a = Jet::<f64>::zero_like(&layout);
        a.set_coeff(&[1, 0], 0.5);
        a.set_coeff(&[0, 2], 0.1 / 3.0);
        let mut b = Jet::<f64>::zero_like(&layout);
        b.set_coeff(&[0, 1], 0.4);
        b.set_coeff(&[2, 0], -0.15);
        b.set_coeff(&[1, 2], std::f64::consts::PI * 1e-7);
        sternberg_factor(&MapJet::new(vec![a, b]), 3).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample().with_base(vec![0.1, -1.0 / 3.0]).unwrap();
        let text = p.to_text();
        let q = PolynomialFactor::from_text(&text).unwrap();
        assert_eq!(q.to_text(), text);
        for (a, b) in p.jet().components.iter().zip(&q.jet().components) {
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        assert_eq!(p.base(), q.base());
        assert_eq!(p.a_matrix(), q.a_matrix());
    }

    #[test]
    fn rejects_garbage() {
        assert!(PolynomialFactor::from_text("").is_err());
        let text = sample().to_text().replace("mode map", "mode torus");
        let e = PolynomialFactor::from_text(&text).unwrap_err();
        assert_eq!(e.line, 5);
        let text = sample().to_text() + "coeff 0 4 0 1.0 0.0\n";
        assert!(PolynomialFactor::from_text(&text).is_err());
    }
}
