//! Job configuration: `key = value` lines inside `[system]`, `[attractor]`,
//! `[analysis]` and `[output]` blocks. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use kf_core::evaluate::GridSpec;
use kf_core::flow::SystemKind;
use kf_core::linalg::C64;

/// `line` is 1-based; 0 means the problem is not tied to one line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorKind {
    Point,
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Slowest,
    AllPrincipal,
    Sternberg,
    Floquet,
    /// A specific exponent `mu` (multiplier `e^mu`).
    Value(C64),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Slowest => write!(f, "slowest"),
            Target::AllPrincipal => write!(f, "all-principal"),
            Target::Sternberg => write!(f, "sternberg"),
            Target::Floquet => write!(f, "floquet"),
            Target::Value(z) => write!(f, "{}", format_complex(*z)),
        }
    }
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemBlock {
    pub kind: SystemKind,
    pub dim: usize,
    pub field: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorBlock {
    pub kind: AttractorKind,
    pub guess: Vec<f64>,
    pub period: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBlock {
    pub k: usize,
    pub alpha: f64,
    pub target: Target,
    /// Polynomial order used for the limit; defaults to the smallest order
    /// whose residual is flat below `k + alpha`.
    pub order: Option<usize>,
    pub grid: Option<GridSpec>,
    /// Cauchy tolerance; `None` keeps the evaluator's default.
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub step: f64,
    pub divergence_threshold: f64,
    pub resonance_tol: f64,
    pub lattice_tol: f64,
    pub j_range: i64,
    pub samples: usize,
}

impl AnalysisBlock {
    pub fn limit_order(&self) -> usize {
        self.order.unwrap_or_else(|| ((self.k as f64 + self.alpha).ceil() as usize).saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub system: SystemBlock,
    pub attractor: AttractorBlock,
    pub analysis: AnalysisBlock,
    pub output: OutputBlock,
}

fn number(line: usize, v: &str) -> Result<f64, ConfigError> {
    match v.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(line, format!("expected a finite decimal number, got '{}'", v.trim())),
    }
}

fn integer(line: usize, v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse::<usize>()
        .or_else(|_| err(line, format!("expected a non-negative integer, got '{}'", v.trim())))
}

fn list(line: usize, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',').map(|s| number(line, s)).collect()
}

/// `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(body) = s.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(i) => (body[..i].parse::<f64>().ok()?, &body[i..]),
            None => (0.0, body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            v => v.parse::<f64>().ok()?,
        };
        Some(C64::new(re, im))
    } else {
        s.parse::<f64>().ok().map(|v| C64::new(v, 0.0))
    }
}

#[derive(Default)]
struct Raw {
    blocks: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl Raw {
    fn take(&mut self, block: &str, key: &str) -> Option<(usize, String)> {
        self.blocks.get_mut(block).and_then(|b| b.remove(key))
    }
}

const BLOCKS: [&str; 4] = ["system", "attractor", "analysis", "output"];

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Raw::default();
        let mut current: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !BLOCKS.contains(&name.as_str()) {
                    return err(no, format!("unknown block [{name}]"));
                }
                if raw.blocks.contains_key(&name) {
                    return err(no, format!("block [{name}] appears twice"));
                }
                raw.blocks.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let Some(block) = current.as_ref() else {
                return err(no, "key outside of any block");
            };
            let Some((k, v)) = line.split_once('=') else {
                return err(no, "expected 'key = value'");
            };
            let key = k.trim().to_string();
            let entries = raw.blocks.get_mut(block).expect("block exists");
            if entries.insert(key.clone(), (no, v.trim().to_string())).is_some() {
                return err(no, format!("duplicate key '{key}'"));
            }
        }
        let cfg = Self::from_raw(&mut raw)?;
        for (block, entries) in &raw.blocks {
            if let Some((key, (line, _))) = entries.iter().next() {
                return err(*line, format!("unknown key '{key}' in [{block}]"));
            }
        }
        Ok(cfg)
    }

    fn from_raw(raw: &mut Raw) -> Result<Self, ConfigError> {
        let end = 0;
        for b in ["system", "attractor", "analysis"] {
            if !raw.blocks.contains_key(b) {
                return err(end, format!("missing block [{b}]"));
            }
        }

        let kind = match raw.take("system", "kind") {
            None => SystemKind::Flow,
            Some((_, v)) if v == "flow" => SystemKind::Flow,
            Some((_, v)) if v == "map" => SystemKind::Map,
            Some((l, v)) => return err(l, format!("kind must be 'flow' or 'map', got '{v}'")),
        };
        let (dl, dim) = match raw.take("system", "dim") {
            Some((l, v)) => (l, integer(l, &v)?),
            None => return err(end, "[system] needs 'dim'"),
        };
        if dim == 0 {
            return err(dl, "dim must be at least 1");
        }
        let field = match raw.take("system", "field") {
            Some((_, v)) => v,
            None => return err(end, "[system] needs 'field'"),
        };
        let mut params = BTreeMap::new();
        let keys: Vec<String> = raw.blocks["system"].keys().filter(|k| k.starts_with("param.")).cloned().collect();
        for key in keys {
            let (l, v) = raw.take("system", &key).expect("listed key");
            params.insert(key["param.".len()..].to_string(), number(l, &v)?);
        }

        let akind = match raw.take("attractor", "type") {
            Some((_, v)) if v == "point" => AttractorKind::Point,
            Some((_, v)) if v == "cycle" => AttractorKind::Cycle,
            Some((l, v)) => return err(l, format!("attractor type must be 'point' or 'cycle', got '{v}'")),
            None => return err(end, "[attractor] needs exactly one 'type'"),
        };
        let guess = match raw.take("attractor", "guess") {
            Some((l, v)) => {
                let g = list(l, &v)?;
                if g.len() != dim {
                    return err(l, format!("guess has {} entries, expected {dim}", g.len()));
                }
                g
            }
            None => vec![0.0; dim],
        };
        let period = match raw.take("attractor", "period") {
            Some((l, v)) => {
                let p = number(l, &v)?;
                if p <= 0.0 {
                    return err(l, "period must be positive");
                }
                Some(p)
            }
            None => None,
        };
        if akind == AttractorKind::Cycle {
            if period.is_none() {
                return err(end, "a cycle attractor needs a 'period' guess");
            }
            if kind == SystemKind::Map {
                return err(end, "cycle attractors need a continuous-time system");
            }
        }

        let k = match raw.take("analysis", "k") {
            Some((l, v)) => {
                let k = integer(l, &v)?;
                if k < 1 {
                    return err(l, "k must be at least 1");
                }
                k
            }
            None => return err(end, "[analysis] needs 'k'"),
        };
        let alpha = match raw.take("analysis", "alpha") {
            Some((l, v)) => {
                let a = number(l, &v)?;
                if !(0.0..=1.0).contains(&a) {
                    return err(l, "alpha must lie in [0, 1]");
                }
                a
            }
            None => 0.0,
        };
        let target = match raw.take("analysis", "target") {
            None => Target::Slowest,
            Some((l, v)) => match v.as_str() {
                "slowest" => Target::Slowest,
                "all-principal" => Target::AllPrincipal,
                "sternberg" => Target::Sternberg,
                "floquet" => Target::Floquet,
                other => match parse_complex(other) {
                    Some(z) => Target::Value(z),
                    None => return err(l, format!("unknown target '{other}'")),
                },
            },
        };
        let order = match raw.take("analysis", "order") {
            Some((l, v)) => {
                let o = integer(l, &v)?;
                if o < 1 {
                    return err(l, "order must be at least 1");
                }
                Some(o)
            }
            None => None,
        };
        let lower = raw.take("analysis", "grid.lower");
        let upper = raw.take("analysis", "grid.upper");
        let resolution = raw.take("analysis", "grid.resolution");
        let grid = match (lower, upper, resolution) {
            (None, None, None) => None,
            (Some((ll, lv)), Some((ul, uv)), Some((rl, rv))) => {
                let lower = list(ll, &lv)?;
                let upper = list(ul, &uv)?;
                let res: Vec<usize> = rv.split(',').map(|s| integer(rl, s)).collect::<Result<_, _>>()?;
                if lower.len() != dim || upper.len() != dim || res.len() != dim {
                    return err(ll, format!("grid bounds and resolution need {dim} entries each"));
                }
                if lower.iter().zip(&upper).any(|(a, b)| a > b) {
                    return err(ll, "grid.lower must not exceed grid.upper");
                }
                if res.contains(&0) {
                    return err(rl, "grid resolution must be at least 1");
                }
                Some(GridSpec {
                    lower,
                    upper,
                    resolution: res,
                })
            }
            _ => return err(end, "grid needs grid.lower, grid.upper and grid.resolution together"),
        };
        let mut positive = |key: &str| -> Result<Option<f64>, ConfigError> {
            match raw.take("analysis", key) {
                Some((l, v)) => {
                    let x = number(l, &v)?;
                    if x <= 0.0 {
                        return err(l, format!("{key} must be positive"));
                    }
                    Ok(Some(x))
                }
                None => Ok(None),
            }
        };
        let tol = positive("tol")?;
        let step = positive("step")?.unwrap_or(1.0);
        let divergence_threshold = positive("divergence_threshold")?.unwrap_or(1e8);
        let resonance_tol = positive("resonance_tol")?.unwrap_or(1e-9);
        let lattice_tol = positive("lattice_tol")?.unwrap_or(1e-9);
        let mut int = |key: &str| -> Result<Option<usize>, ConfigError> {
            match raw.take("analysis", key) {
                Some((l, v)) => integer(l, &v).map(Some),
                None => Ok(None),
            }
        };
        let max_steps = int("max_steps")?;
        let j_range = int("j_range")?.unwrap_or(3) as i64;
        let samples = int("samples")?.unwrap_or(16);
        if kind == SystemKind::Map && step.fract() != 0.0 {
            return err(end, "maps need an integer 'step'");
        }

        let dir = raw.take("output", "dir").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from("."));
        let prefix = raw.take("output", "prefix").map(|(_, v)| v).unwrap_or_else(|| "kf".to_string());

        Ok(Self {
            system: SystemBlock {
                kind,
                dim,
                field,
                params,
            },
            attractor: AttractorBlock {
                kind: akind,
                guess,
                period,
            },
            analysis: AnalysisBlock {
                k,
                alpha,
                target,
                order,
                grid,
                tol,
                max_steps,
                step,
                divergence_threshold,
                resonance_tol,
                lattice_tol,
                j_range,
                samples,
            },
            output: OutputBlock { dir, prefix },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
[system]
kind = flow
dim = 2
field = [-x1, -r*x2]   # linear
param.r = 2.5

[attractor]
type = point
guess = 0, 0

[analysis]
k = 3
target = -2.5
grid.lower = -0.5, -0.5
grid.upper = 0.5, 0.5
grid.resolution = 3, 3
";

    #[test]
    fn parses_blocks() {
        let c = JobConfig::parse(BASIC).unwrap();
        assert_eq!(c.system.dim, 2);
        assert_eq!(c.system.params["r"], 2.5);
        assert_eq!(c.analysis.target, Target::Value(C64::new(-2.5, 0.0)));
        assert_eq!(c.analysis.grid.as_ref().unwrap().resolution, vec![3, 3]);
        assert_eq!(c.analysis.limit_order(), 2);
        assert_eq!(c.output.prefix, "kf");
    }

    #[test]
    fn limit_order_follows_flatness() {
        let mut c = JobConfig::parse(BASIC).unwrap();
        c.analysis.alpha = 0.5;
        assert_eq!(c.analysis.limit_order(), 3);
        c.analysis.k = 1;
        c.analysis.alpha = 0.0;
        assert_eq!(c.analysis.limit_order(), 1);
    }

    #[test]
    fn complex_targets() {
        assert_eq!(parse_complex("-2+1i"), Some(C64::new(-2.0, 1.0)));
        assert_eq!(parse_complex("-2 - 0.5i"), Some(C64::new(-2.0, -0.5)));
        assert_eq!(parse_complex("i"), Some(C64::new(0.0, 1.0)));
        assert_eq!(parse_complex("1e-3-2e+1i"), Some(C64::new(1e-3, -20.0)));
        assert_eq!(parse_complex("abc"), None);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_alpha = BASIC.replace("k = 3", "k = 3\nalpha = 1.5");
        assert!(JobConfig::parse(&bad_alpha).unwrap_err().message.contains("alpha"));
        let bad_key = BASIC.replace("k = 3", "k = 3\nfoo = 1");
        let e = JobConfig::parse(&bad_key).unwrap_err();
        assert!(e.message.contains("foo"));
        assert_eq!(e.line, 14);
        assert!(JobConfig::parse(&BASIC.replace("k = 3", "k = 0")).is_err());
        assert!(JobConfig::parse(&BASIC.replace("type = point", "type = torus")).is_err());
        assert!(JobConfig::parse(&BASIC.replace("guess = 0, 0", "guess = 0")).is_err());
        assert!(JobConfig::parse(&BASIC.replace("[output]", "")).is_ok());
        assert!(JobConfig::parse(&BASIC.replace("grid.resolution = 3, 3", "")).is_err());
    }
}
