//! Counterfunctions `g: ℕ → ℕ` over arbitrary-precision naturals, with metered evaluation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{nat, parse_natural, Natural};

/// Evaluation limits: a step count and a cap on the bit length of any intermediate value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_steps: u64,
    pub max_bits: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_steps: 1_000_000, max_bits: 10_000 }
    }
}

impl Budget {
    /// Parses `STEPS` or `STEPS:BITS`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad budget '{s}', expected STEPS or STEPS:BITS"));
        let mut b = Budget::default();
        let (steps, bits) = match s.split_once(':') {
            Some((a, c)) => (a, Some(c)),
            None => (s, None),
        };
        b.max_steps = steps.trim().parse().map_err(|_| bad())?;
        if let Some(bits) = bits {
            b.max_bits = bits.trim().parse().map_err(|_| bad())?;
        }
        Ok(b)
    }

    /// Default budget, overridden by `HALPERN_BUDGET` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var("HALPERN_BUDGET") {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn meter(&self) -> Meter {
        Meter { budget: *self, used: 0 }
    }
}

/// Signals that an evaluation ran out of budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exhausted;

/// Running step count against a [`Budget`].
#[derive(Debug, Clone)]
pub struct Meter {
    budget: Budget,
    used: u64,
}

impl Meter {
    pub fn charge(&mut self, steps: u64) -> std::result::Result<(), Exhausted> {
        self.used = self.used.saturating_add(steps);
        if self.used > self.budget.max_steps {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    pub fn check_bits(&self, v: &Natural) -> std::result::Result<(), Exhausted> {
        if v.bits() > self.budget.max_bits {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }
}

pub type NativeEval = dyn Fn(&Natural, &mut Meter) -> std::result::Result<Natural, Exhausted> + Send + Sync;

/// A counterfunction implemented by Rust code rather than an expression tree.
#[derive(Clone)]
pub struct NativeFn {
    name: String,
    monotone: bool,
    f: Arc<NativeEval>,
}

impl NativeFn {
    pub fn new(
        name: impl Into<String>,
        monotone: bool,
        f: impl Fn(&Natural, &mut Meter) -> std::result::Result<Natural, Exhausted> + Send + Sync + 'static,
    ) -> Self {
        NativeFn { name: name.into(), monotone, f: Arc::new(f) }
    }
}

impl fmt::Debug for NativeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NativeFn({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Counterfunction {
    Const(Natural),
    Identity,
    /// `n ↦ a·n + b`
    Affine(Natural, Natural),
    /// Tabulated values for `n < entries.len()`, `default(n)` beyond.
    Table {
        entries: Vec<Natural>,
        default: Box<Counterfunction>,
    },
    /// Pointwise maximum; the maximum of an empty list is 0.
    MaxOf(Vec<Counterfunction>),
    /// `n ↦ outer(inner(n))`
    Compose(Box<Counterfunction>, Box<Counterfunction>),
    Plus(Box<Counterfunction>, Box<Counterfunction>),
    /// `n ↦ max{g(i) : i ≤ n}`
    PrefixMax(Box<Counterfunction>),
    Native(NativeFn),
}

use Counterfunction as Cf;

impl Counterfunction {
    pub fn constant(c: u64) -> Self {
        Cf::Const(nat(c))
    }

    pub fn affine(a: u64, b: u64) -> Self {
        Cf::Affine(nat(a), nat(b))
    }

    pub fn table(entries: &[u64], default: Counterfunction) -> Self {
        Cf::Table { entries: entries.iter().map(|e| nat(*e)).collect(), default: Box::new(default) }
    }

    /// Syntactic monotonicity (nondecreasing in `n`), used to skip prefix-max scans.
    pub fn is_monotone(&self) -> bool {
        match self {
            Cf::Const(_) | Cf::Identity | Cf::Affine(..) | Cf::PrefixMax(_) => true,
            Cf::Table { entries, default } => {
                entries.windows(2).all(|w| w[0] <= w[1])
                    && default.is_monotone()
                    && match entries.last() {
                        // The default branch must not drop below the last tabulated value.
                        Some(last) => matches!(**default, Cf::Const(ref c) if c >= last),
                        None => true,
                    }
            }
            Cf::MaxOf(fs) => fs.iter().all(Cf::is_monotone),
            Cf::Compose(f, g) | Cf::Plus(f, g) => f.is_monotone() && g.is_monotone(),
            Cf::Native(n) => n.monotone,
        }
    }

    pub fn eval(&self, n: &Natural, meter: &mut Meter) -> std::result::Result<Natural, Exhausted> {
        meter.charge(1)?;
        let v = match self {
            Cf::Const(c) => c.clone(),
            Cf::Identity => n.clone(),
            Cf::Affine(a, b) => a * n + b,
            Cf::Table { entries, default } => match n.to_usize().and_then(|i| entries.get(i)) {
                Some(v) => v.clone(),
                None => default.eval(n, meter)?,
            },
            Cf::MaxOf(fs) => {
                let mut best = Natural::zero();
                for f in fs {
                    best = best.max(f.eval(n, meter)?);
                }
                best
            }
            Cf::Compose(outer, inner) => {
                let mid = inner.eval(n, meter)?;
                meter.check_bits(&mid)?;
                outer.eval(&mid, meter)?
            }
            Cf::Plus(f, g) => f.eval(n, meter)? + g.eval(n, meter)?,
            Cf::PrefixMax(g) => {
                if g.is_monotone() {
                    g.eval(n, meter)?
                } else {
                    let end = n.to_u64().ok_or(Exhausted)?;
                    meter.charge(end)?;
                    let mut best = Natural::zero();
                    for i in 0..=end {
                        best = best.max(g.eval(&nat(i), meter)?);
                    }
                    best
                }
            }
            Cf::Native(f) => (f.f)(n, meter)?,
        };
        meter.check_bits(&v)?;
        Ok(v)
    }

    /// Evaluation under the default budget.
    pub fn apply(&self, n: &Natural) -> Result<Natural> {
        self.eval(n, &mut Budget::default().meter()).map_err(|_| Error::Budget(format!("evaluating {self} at {n}")))
    }

    pub fn apply_u64(&self, n: u64) -> Result<Natural> {
        self.apply(&nat(n))
    }
}

/// `g̃(n) = max{g(i) : i ≤ n} + n`
pub fn cf_tilde_strong(g: &Counterfunction) -> Counterfunction {
    Cf::Plus(Box::new(Cf::PrefixMax(Box::new(g.clone()))), Box::new(Cf::Identity))
}

/// `g̃(n) = max{n, g(n)}`
pub fn cf_tilde_max(g: &Counterfunction) -> Counterfunction {
    Cf::MaxOf(vec![Cf::Identity, g.clone()])
}

/// `g*(k) = k + g(k)`
pub fn cf_star(g: &Counterfunction) -> Counterfunction {
    Cf::Plus(Box::new(Cf::Identity), Box::new(g.clone()))
}

impl fmt::Display for Counterfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn arg(c: &Counterfunction) -> String {
            match c {
                Cf::Identity => "id".into(),
                other => format!("({other})"),
            }
        }
        match self {
            Cf::Const(c) => write!(f, "const {c}"),
            Cf::Identity => f.write_str("id"),
            Cf::Affine(a, b) => write!(f, "affine {a} {b}"),
            Cf::Table { entries, default } => {
                f.write_str("table")?;
                for e in entries {
                    write!(f, " {e}")?;
                }
                write!(f, " default {}", arg(default))
            }
            Cf::MaxOf(fs) => {
                f.write_str("max")?;
                for g in fs {
                    write!(f, " {}", arg(g))?;
                }
                Ok(())
            }
            Cf::Compose(a, b) => write!(f, "compose {} {}", arg(a), arg(b)),
            Cf::Plus(a, b) => write!(f, "plus {} {}", arg(a), arg(b)),
            Cf::PrefixMax(g) => write!(f, "prefix-max {}", arg(g)),
            Cf::Native(n) => write!(f, "<{}>", n.name),
        }
    }
}

/// Token stream for the small prefix-expression syntaxes used in config files.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Open,
    Close,
    Word(String),
}

pub(crate) fn tokenize(s: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Token>| {
        if !word.is_empty() {
            out.push(Token::Word(std::mem::take(word)));
        }
    };
    for ch in s.chars() {
        match ch {
            '(' => {
                flush(&mut word, &mut out);
                out.push(Token::Open);
            }
            ')' => {
                flush(&mut word, &mut out);
                out.push(Token::Close);
            }
            c if c.is_whitespace() => flush(&mut word, &mut out),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut out);
    out
}

struct CfParser {
    tokens: Vec<Token>,
    pos: usize,
}

impl CfParser {
    fn next_word(&mut self) -> Result<String> {
        match self.tokens.get(self.pos) {
            Some(Token::Word(w)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            other => Err(Error::Parse(format!("expected a word, found {other:?}"))),
        }
    }

    fn peek_word(&self) -> Option<&str> {
        match self.tokens.get(self.pos) {
            Some(Token::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn number(&mut self) -> Result<Natural> {
        parse_natural(&self.next_word()?)
    }

    /// An operand: either a parenthesized expression or a bare `id`/number keyword form.
    fn operand(&mut self) -> Result<Counterfunction> {
        match self.tokens.get(self.pos) {
            Some(Token::Open) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.tokens.get(self.pos) {
                    Some(Token::Close) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(Error::Parse("missing ')'".into())),
                }
            }
            Some(Token::Word(w)) if w == "id" => {
                self.pos += 1;
                Ok(Cf::Identity)
            }
            other => Err(Error::Parse(format!("expected an operand, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Counterfunction> {
        if matches!(self.tokens.get(self.pos), Some(Token::Open)) {
            return self.operand();
        }
        let head = self.next_word()?;
        match head.as_str() {
            "id" => Ok(Cf::Identity),
            "const" => Ok(Cf::Const(self.number()?)),
            "affine" => Ok(Cf::Affine(self.number()?, self.number()?)),
            "plus" => Ok(Cf::Plus(Box::new(self.operand()?), Box::new(self.operand()?))),
            "compose" => Ok(Cf::Compose(Box::new(self.operand()?), Box::new(self.operand()?))),
            "prefix-max" => Ok(Cf::PrefixMax(Box::new(self.operand()?))),
            "max" => {
                let mut fs = Vec::new();
                while matches!(self.tokens.get(self.pos), Some(Token::Open)) || self.peek_word() == Some("id") {
                    fs.push(self.operand()?);
                }
                Ok(Cf::MaxOf(fs))
            }
            "table" => {
                let mut entries = Vec::new();
                while let Some(w) = self.peek_word() {
                    if w == "default" {
                        break;
                    }
                    entries.push(self.number()?);
                }
                if self.next_word()? != "default" {
                    return Err(Error::Parse("table needs a 'default' branch".into()));
                }
                let default = match self.tokens.get(self.pos) {
                    Some(Token::Open) => self.operand()?,
                    _ => self.expr()?,
                };
                Ok(Cf::Table { entries, default: Box::new(default) })
            }
            other => Err(Error::Parse(format!("unknown counterfunction '{other}'"))),
        }
    }
}

impl FromStr for Counterfunction {
    type Err = Error;

    /// Prefix syntax: `const 3`, `id`, `affine 2 1`, `plus id (const 3)`,
    /// `compose (affine 2 0) id`, `max id (const 4)`, `table 5 2 7 default id`.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = CfParser { tokens: tokenize(s), pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("trailing input in counterfunction '{s}'")));
        }
        Ok(e)
    }
}

/// Outcome of a budgeted rate computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RateResult {
    Exact(Natural),
    /// The true value is at least `lower_bound`.
    BudgetExceeded {
        lower_bound: Natural,
        steps_done: u64,
    },
}

impl RateResult {
    pub fn exact(&self) -> Option<&Natural> {
        match self {
            RateResult::Exact(v) => Some(v),
            RateResult::BudgetExceeded { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, RateResult::Exact(_))
    }

    /// The exact value, or the certified lower bound.
    pub fn lower_bound(&self) -> &Natural {
        match self {
            RateResult::Exact(v) => v,
            RateResult::BudgetExceeded { lower_bound, .. } => lower_bound,
        }
    }
}

impl fmt::Display for RateResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateResult::Exact(v) => write!(f, "Exact {v}"),
            RateResult::BudgetExceeded { lower_bound, steps_done } => {
                write!(f, "BudgetExceeded lower={lower_bound} steps={steps_done}")
            }
        }
    }
}

/// `g^{(n)}(0)`, stopping early at a fixed point of `g`.
///
/// Exceeding the step budget or the bit cap returns the last computed iterate; for
/// inflationary `g` (such as [`cf_tilde_max`] of anything) iterates are nondecreasing, so
/// that value is a lower bound on the full iterate.
pub fn cf_iterate(g: &Counterfunction, n: &Natural, budget: &Budget) -> RateResult {
    let mut meter = budget.meter();
    let mut x = BigUint::zero();
    let mut i: u64 = 0;
    while nat(i) < *n {
        if i >= budget.max_steps {
            return RateResult::BudgetExceeded { lower_bound: x, steps_done: i };
        }
        let y = match g.eval(&x, &mut meter) {
            Ok(y) => y,
            Err(Exhausted) => return RateResult::BudgetExceeded { lower_bound: x, steps_done: i },
        };
        i += 1;
        if y == x {
            return RateResult::Exact(x);
        }
        x = y;
    }
    RateResult::Exact(x)
}
