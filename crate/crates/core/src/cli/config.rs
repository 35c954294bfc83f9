//! Plain-text experiment configs: `[experiment]` and `[instance NAME]` sections holding
//! `key = value` lines. `#` starts a comment.

use std::path::PathBuf;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::numeric::{parse_rational, Rational};
use crate::operators::{compute_instance_bound, InstanceBound, NonexpansiveOp, OpKind};
use crate::rates::{tokenize, Budget, Counterfunction, Token};
use crate::schedules::{parse_schedule, Schedule};
use crate::spaces::{Space, Vector};

const EXPERIMENT_KEYS: &[&str] =
    &["output", "seed", "epsilons", "counterfunctions", "budget", "path_length", "tol", "window"];
const INSTANCE_KEYS: &[&str] = &["space", "operator", "schedule", "u", "x0", "fixed_point", "M", "steps"];

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub space: Space,
    pub op: NonexpansiveOp,
    pub schedule: Schedule,
    pub u: Vector,
    pub x0: Vector,
    /// As written in the config, if given; checked against the instance by the verifier.
    pub m_declared: Option<Rational>,
    pub steps: Option<u64>,
}

impl Instance {
    /// The declared `M` if present, otherwise one computed from the known fixed point.
    pub fn bound(&self) -> Result<Rational> {
        match &self.m_declared {
            Some(m) => Ok(m.clone()),
            None => Ok(compute_instance_bound(&self.op, &self.space, &self.u, &self.x0)?.value().clone()),
        }
    }

    /// Checks the declared or computed `M` against the instance.
    pub fn checked_bound(&self) -> Result<InstanceBound> {
        InstanceBound::new(self.bound()?, &self.op, &self.space, &self.u, &self.x0)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    pub seed: u64,
    pub epsilons: Vec<Rational>,
    pub counterfunctions: Vec<Counterfunction>,
    pub budget: Budget,
    pub path_length: u64,
    pub tol: f64,
    pub window: u64,
    pub instances: Vec<Instance>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

pub fn parse_coords(s: &str) -> Result<Vector> {
    let coords = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad coordinate '{}'", c.trim()))))
        .collect::<Result<Vec<_>>>()?;
    Vector::new(coords)
}

/// `hilbert D` or `lp D P` with rational `P > 1`.
pub fn parse_space(s: &str) -> Result<Space> {
    let words: Vec<&str> = s.split_whitespace().collect();
    let dim = |w: &str| w.parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension '{w}'")));
    match words.as_slice() {
        ["hilbert", d] => Space::hilbert(dim(d)?),
        ["lp", d, p] => {
            let p: Rational64 = p.parse().map_err(|_| Error::Parse(format!("bad exponent '{p}'")))?;
            Space::lp(dim(d)?, p)
        }
        _ => Err(Error::Parse(format!("unknown space '{s}'"))),
    }
}

/// Angles in radians: a float, or a multiple of `pi` such as `pi/3`, `2pi/3`, `-pi`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let err = || Error::Parse(format!("bad angle '{s}'"));
    let s = s.trim();
    if !s.contains("pi") {
        return s.parse().map_err(|_| err());
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| err())?),
        None => (s, 1.0),
    };
    let coef = num.strip_suffix("pi").ok_or_else(err)?.trim_end_matches('*');
    let coef = match coef {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| err())?,
    };
    Ok(coef * std::f64::consts::PI / den)
}

struct OpParser {
    tokens: Vec<Token>,
    pos: usize,
}

impl OpParser {
    fn word(&mut self) -> Result<String> {
        match self.tokens.get(self.pos) {
            Some(Token::Word(w)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            other => Err(Error::Parse(format!("expected a word in operator, found {other:?}"))),
        }
    }

    fn nested(&mut self) -> Result<NonexpansiveOp> {
        match self.tokens.get(self.pos) {
            Some(Token::Open) => {
                self.pos += 1;
                let op = self.op()?;
                match self.tokens.get(self.pos) {
                    Some(Token::Close) => {
                        self.pos += 1;
                        Ok(op)
                    }
                    _ => Err(Error::Parse("missing ')' in operator".into())),
                }
            }
            _ => Err(Error::Parse("expected '(' before a nested operator".into())),
        }
    }

    fn op(&mut self) -> Result<NonexpansiveOp> {
        if matches!(self.tokens.get(self.pos), Some(Token::Open)) {
            return self.nested();
        }
        let head = self.word()?;
        let float = |w: String| w.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{w}'")));
        match head.as_str() {
            "identity" => {
                let d = self.word()?;
                NonexpansiveOp::identity(d.parse().map_err(|_| Error::Parse(format!("bad dimension '{d}'")))?)
            }
            "rotation" => NonexpansiveOp::rotation(parse_angle(&self.word()?)?),
            "reflection" => NonexpansiveOp::reflection(parse_coords(&self.word()?)?),
            "ball" => {
                let c = parse_coords(&self.word()?)?;
                NonexpansiveOp::projection_ball(c, float(self.word()?)?)
            }
            "box" => {
                let lo = parse_coords(&self.word()?)?;
                NonexpansiveOp::projection_box(lo, parse_coords(&self.word()?)?)
            }
            "affine" => {
                let rows = self.word()?;
                let matrix = rows
                    .split(';')
                    .map(|r| parse_coords(r).map(|v| v.coords().to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                NonexpansiveOp::affine(matrix, parse_coords(&self.word()?)?)
            }
            "averaged" => {
                let w = float(self.word()?)?;
                NonexpansiveOp::averaged(self.nested()?, w)
            }
            "compose" => {
                let mut ops = Vec::new();
                while matches!(self.tokens.get(self.pos), Some(Token::Open)) {
                    ops.push(self.nested()?);
                }
                NonexpansiveOp::composition(ops)
            }
            other => Err(Error::Parse(format!("unknown operator '{other}'"))),
        }
    }
}

/// Operator syntax: `identity D`, `rotation A`, `reflection N`, `ball C R`, `box LO HI`,
/// `affine ROW;ROW OFFSET`, `averaged W (OP)`, `compose (OP) (OP) ...`.
/// Vectors are comma-separated with no spaces.
pub fn parse_operator(s: &str) -> Result<NonexpansiveOp> {
    let mut p = OpParser { tokens: tokenize(s), pos: 0 };
    let op = p.op()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Parse(format!("trailing input in operator '{s}'")));
    }
    Ok(op)
}

fn operator_dim(op: &NonexpansiveOp) -> Option<usize> {
    match op.kind() {
        OpKind::Rotation { .. } => None,
        OpKind::Reflection { normal } => Some(normal.dim()),
        OpKind::ProjectionBall { center, .. } => Some(center.dim()),
        OpKind::ProjectionBox { lows, .. } => Some(lows.dim()),
        OpKind::AffineContractive { offset, .. } => Some(offset.dim()),
        OpKind::Composition(ops) => ops.iter().find_map(operator_dim),
        OpKind::Averaged { op, .. } => operator_dim(op),
    }
}

fn experiment_defaults() -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        output: PathBuf::from("out"),
        seed: 0,
        epsilons: vec![parse_rational("1/2")?, parse_rational("1/4")?, parse_rational("1/8")?],
        counterfunctions: vec!["affine 1 1".parse()?],
        budget: Budget::from_env()?,
        path_length: 100,
        tol: crate::iteration::DEFAULT_TOL,
        window: 1000,
        instances: Vec::new(),
    })
}

/// A `key = value` line with its line number.
type Entry = (usize, String, String);

fn build_instance(name: &str, kv: &[Entry], header_line: usize) -> Result<Instance> {
    let get = |k: &str| kv.iter().find(|(_, key, _)| key == k);
    let need = |k: &str| get(k).ok_or_else(|| bad(header_line, format!("instance '{name}' is missing key '{k}'")));
    let at = |(line, _, _): &Entry, e: Error| bad(*line, e);

    let e = need("space")?;
    let space = parse_space(&e.2).map_err(|x| at(e, x))?;
    let e = need("operator")?;
    let mut op = parse_operator(&e.2).map_err(|x| at(e, x))?;
    if let Some(d) = operator_dim(&op) {
        if d != space.dim() {
            return Err(at(e, Error::DimensionMismatch { expected: space.dim(), got: d }));
        }
    }
    let e = need("schedule")?;
    let schedule = parse_schedule(&e.2).map_err(|x| at(e, x))?;
    let e = need("u")?;
    let u = parse_coords(&e.2).and_then(|v| space.check(&v).map(|_| v)).map_err(|x| at(e, x))?;
    let e = need("x0")?;
    let x0 = parse_coords(&e.2).and_then(|v| space.check(&v).map(|_| v)).map_err(|x| at(e, x))?;
    if let Some(e) = get("fixed_point") {
        let p = parse_coords(&e.2).and_then(|v| space.check(&v).map(|_| v)).map_err(|x| at(e, x))?;
        op = op.with_fixed_point(p).map_err(|x| at(e, x))?;
    } else if let Ok(with_origin) = op.clone().with_fixed_point(Vector::zeros(space.dim())) {
        // Without an explicit fixed point, the origin is used when it is one.
        op = with_origin;
    }
    let m_declared = match get("M") {
        Some(e) => {
            let m = parse_rational(&e.2).map_err(|x| at(e, x))?;
            crate::numeric::require_positive(&m, "M").map_err(|x| at(e, x))?;
            Some(m)
        }
        None => None,
    };
    let steps = match get("steps") {
        Some(e) => Some(e.2.parse::<u64>().map_err(|_| bad(e.0, format!("bad step count '{}'", e.2)))?),
        None => None,
    };
    Ok(Instance { name: name.to_string(), space, op, schedule, u, x0, m_declared, steps })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = experiment_defaults()?;
    enum Section {
        None,
        Experiment,
        Instance(String, usize, Vec<Entry>),
    }
    let mut section = Section::None;
    let mut finished: Vec<(String, usize, Vec<Entry>)> = Vec::new();
    let mut seen_experiment = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(head) = line.strip_prefix('[') {
            let head = head.strip_suffix(']').ok_or_else(|| bad(line_no, "unterminated section header"))?.trim();
            if let Section::Instance(n, l, kv) = std::mem::replace(&mut section, Section::None) {
                finished.push((n, l, kv));
            }
            section = if head == "experiment" {
                if seen_experiment {
                    return Err(bad(line_no, "duplicate [experiment] section"));
                }
                seen_experiment = true;
                Section::Experiment
            } else if let Some(name) = head.strip_prefix("instance") {
                let name = name.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(bad(line_no, "instance sections need a one-word name"));
                }
                if finished.iter().any(|(n, _, _)| n == name) {
                    return Err(bad(line_no, format!("duplicate instance '{name}'")));
                }
                Section::Instance(name.to_string(), line_no, Vec::new())
            } else {
                return Err(bad(line_no, format!("unknown section '{head}'")));
            };
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| bad(line_no, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        match &mut section {
            Section::None => return Err(bad(line_no, "assignment outside any section")),
            Section::Experiment => {
                if !EXPERIMENT_KEYS.contains(&key) {
                    return Err(bad(line_no, format!("unknown experiment key '{key}'")));
                }
                let wrap = |e: Error| bad(line_no, e);
                match key {
                    "output" => cfg.output = PathBuf::from(value),
                    "seed" => cfg.seed = value.parse().map_err(|_| bad(line_no, format!("bad seed '{value}'")))?,
                    "epsilons" => {
                        cfg.epsilons = value.split(',').map(parse_rational).collect::<Result<_>>().map_err(wrap)?;
                        for e in &cfg.epsilons {
                            crate::numeric::require_positive(e, "ε").map_err(|e| bad(line_no, e))?;
                        }
                    }
                    "counterfunctions" => {
                        cfg.counterfunctions = value
                            .split(';')
                            .filter(|s| !s.trim().is_empty())
                            .map(str::parse)
                            .collect::<Result<_>>()
                            .map_err(wrap)?;
                    }
                    "budget" => cfg.budget = Budget::parse(value).map_err(wrap)?,
                    "path_length" => {
                        cfg.path_length =
                            value.parse().map_err(|_| bad(line_no, format!("bad path length '{value}'")))?;
                        if cfg.path_length == 0 {
                            return Err(bad(line_no, "path_length must be positive"));
                        }
                    }
                    "tol" => {
                        cfg.tol = value.parse().map_err(|_| bad(line_no, format!("bad tolerance '{value}'")))?;
                        if cfg.tol.is_nan() || cfg.tol <= 0.0 {
                            return Err(bad(line_no, "tol must be positive"));
                        }
                    }
                    "window" => {
                        cfg.window = value.parse().map_err(|_| bad(line_no, format!("bad window '{value}'")))?
                    }
                    _ => unreachable!("key list checked above"),
                }
            }
            Section::Instance(name, _, kv) => {
                if !INSTANCE_KEYS.contains(&key) {
                    return Err(bad(line_no, format!("unknown key '{key}' in instance '{name}'")));
                }
                if kv.iter().any(|(_, k, _)| k == key) {
                    return Err(bad(line_no, format!("duplicate key '{key}' in instance '{name}'")));
                }
                kv.push((line_no, key.to_string(), value.to_string()));
            }
        }
    }
    if let Section::Instance(n, l, kv) = section {
        finished.push((n, l, kv));
    }
    for (name, line, kv) in &finished {
        cfg.instances.push(build_instance(name, kv, *line)?);
    }
    Ok(cfg)
}

pub fn read_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    const SAMPLE: &str = "
# sample
[experiment]
output = results   # trailing comment
seed = 7
epsilons = 1/2, 1/4
counterfunctions = affine 1 1; const 3
budget = 5000:64

[instance rot]
space = hilbert 2
operator = rotation pi/3
fixed_point = 0,0
schedule = natural-shifted
u = 1,0
x0 = 1,0
steps = 100
";

    #[test]
    fn parses_sample() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.output, PathBuf::from("results"));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.epsilons, vec![rat(1, 2), rat(1, 4)]);
        assert_eq!(cfg.counterfunctions.len(), 2);
        assert_eq!(cfg.budget, Budget { max_steps: 5000, max_bits: 64 });
        let inst = &cfg.instances[0];
        assert_eq!(inst.name, "rot");
        assert_eq!(inst.steps, Some(100));
        assert_eq!(inst.bound().unwrap(), rat(2, 1));
    }

    #[test]
    fn missing_key_is_named() {
        let text = SAMPLE.replace("schedule = natural-shifted\n", "");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("missing key 'schedule'"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(parse_config(&SAMPLE.replace("seed = 7", "sead = 7")).is_err());
        assert!(parse_config(&SAMPLE.replace("steps = 100", "step = 100")).is_err());
        assert!(parse_config("[nonsense]\n").is_err());
        assert!(parse_config("seed = 1\n").is_err());
        assert!(parse_config(&format!("{SAMPLE}\n[instance rot]\n")).is_err());
    }

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = parse_config("").unwrap();
        assert!(cfg.instances.is_empty());
        assert_eq!(cfg.epsilons.len(), 3);
    }

    #[test]
    fn operator_syntax_round_trips() {
        for src in [
            "rotation pi/2",
            "reflection 1,0",
            "ball 0.5,0 1",
            "box -1,-1 1,1",
            "affine 0.5,0;0,0.5 1,2",
            "compose (rotation 1) (ball 0,0 1)",
            "averaged 0.5 (reflection 0,1)",
            "identity 3",
        ] {
            let op = parse_operator(src).unwrap();
            let again = parse_operator(&op.to_string()).unwrap();
            assert_eq!(op, again, "{src}");
        }
        assert!(parse_operator("affine 2,0;0,2 0,0").is_err());
        assert!(parse_operator("spin 3").is_err());
        assert!(parse_operator("compose (rotation 1").is_err());
    }

    #[test]
    fn angles() {
        use std::f64::consts::PI;
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("pi/3").unwrap(), PI / 3.0);
        assert_eq!(parse_angle("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("pie").is_err());
    }

    #[test]
    fn spaces() {
        assert!(parse_space("hilbert 3").unwrap().is_hilbert());
        assert_eq!(parse_space("lp 2 3").unwrap().p(), 3.0);
        assert!(parse_space("lp 2 1").is_err());
        assert!(parse_space("banach 2").is_err());
    }
}
