use kf_core::linalg::C64;

/// Round-trip (17 significant digit) float.
pub fn f(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn c(z: C64) -> String {
    if z.im == 0.0 {
        f(z.re)
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{}{}{}i", f(z.re), sign, f(z.im.abs()))
    }
}

pub fn reals(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", "))
}

pub fn complexes(v: &[C64]) -> String {
    format!("[{}]", v.iter().map(|z| c(*z)).collect::<Vec<_>>().join(", "))
}

pub fn index(m: &[u32]) -> String {
    format!("({})", m.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", "))
}

/// `key<pad>value` report line.
pub fn line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{key:<14}{value}\n"));
}
