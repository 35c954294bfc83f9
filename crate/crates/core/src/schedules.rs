//! Step-size sequences `α_n` with exact moduli for the control conditions:
//!
//! * `R1(ε)`: `α_n ≤ ε` for all `n ≥ R1(ε)`;
//! * `R2(ε)`: the partial product of `(1−α_k)` from the start index through `R2(ε)` is `≤ ε`;
//! * `R3(ε)`: `|α_n − α_{n−1}| ≤ ε·α_n` for all `n ≥ R3(ε)`;
//! * `E(k)`: a positive lower bound on the product of `(1−α_n)` through `k`;
//! * `D(ε, M) = E(R3(ε/3M))`.
//!
//! Products are taken from the schedule's start index. `Classic` (`α_n = 1/(n+1)`) starts at
//! 1 because `α_0 = 1` would zero every product from 0; `NaturalShifted` (`α_n = 1/(n+2)`)
//! satisfies every condition from index 0.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{ceil_recip, ceil_root, nat, parse_natural, parse_rational, rat, rat_from_nat, Natural, Rational};

/// Largest number of factors multiplied out exactly when a product has no closed form.
pub const PRODUCT_LIMIT: u64 = 200_000;

pub type RateFn = Arc<dyn Fn(&Rational) -> Result<Natural> + Send + Sync>;
pub type LowerBoundFn = Arc<dyn Fn(&Natural) -> Result<Rational> + Send + Sync>;

/// Moduli supplied alongside a custom table; validated on a grid, never derived.
#[derive(Clone)]
pub struct UserModuli {
    pub r1: RateFn,
    pub r2: RateFn,
    pub r3: RateFn,
    pub e: LowerBoundFn,
}

impl fmt::Debug for UserModuli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("UserModuli { .. }")
    }
}

#[derive(Debug, Clone)]
pub struct CustomSchedule {
    values: Vec<Rational>,
    moduli: Option<UserModuli>,
}

#[derive(Debug, Clone)]
pub enum ScheduleKind {
    /// `α_n = 1/(n+2)`, start 0.
    NaturalShifted,
    /// `α_n = 1/(n+1)`, start 1.
    Classic,
    /// `α_n = a / ⌈(n+2)^γ⌉` with `a ∈ (0,1]`, `γ ∈ (0,1]`, start 0.
    PowerLaw {
        a: Rational,
        gamma: Ratio<u32>,
    },
    Custom(CustomSchedule),
}

#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    start_index: u64,
}

fn to_u64(n: &Natural) -> Result<u64> {
    n.to_u64().ok_or_else(|| Error::Budget(format!("index {n} too large for tabulation")))
}

impl Schedule {
    pub fn natural_shifted() -> Self {
        Schedule { kind: ScheduleKind::NaturalShifted, start_index: 0 }
    }

    pub fn classic() -> Self {
        Schedule { kind: ScheduleKind::Classic, start_index: 1 }
    }

    pub fn power_law(a: Rational, gamma: Ratio<u32>) -> Result<Self> {
        if !(a.is_positive() && a <= Rational::one()) {
            return Err(Error::InvalidParameter(format!("power-law scale {a} outside (0, 1]")));
        }
        if gamma.is_zero() || gamma > Ratio::one() {
            return Err(Error::InvalidParameter(format!("power-law exponent {gamma} outside (0, 1]")));
        }
        Ok(Schedule { kind: ScheduleKind::PowerLaw { a, gamma }, start_index: 0 })
    }

    /// Table of values `α_{start}, α_{start+1}, …`. Entries may lie anywhere in `[0, 1]`.
    ///
    /// Without user moduli, the moduli are computed by scanning the table and are only
    /// meaningful within it.
    pub fn custom(start_index: u64, values: Vec<Rational>, moduli: Option<UserModuli>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("custom schedule table is empty".into()));
        }
        if let Some(bad) = values.iter().find(|a| a.is_negative() || **a > Rational::one()) {
            return Err(Error::InvalidParameter(format!("α = {bad} outside [0, 1]")));
        }
        Ok(Schedule { kind: ScheduleKind::Custom(CustomSchedule { values, moduli }), start_index })
    }

    /// Reads a table file with one `n p/q` pair per line; `#` starts a comment.
    /// Indices must be consecutive.
    pub fn read_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse_table(&text)
    }

    pub fn parse_table(text: &str) -> Result<Self> {
        let mut start = None;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(n), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {}: expected 'n p/q'", lineno + 1)));
            };
            let n = to_u64(&parse_natural(n)?)?;
            let expected = start.map(|s: u64| s + values.len() as u64).unwrap_or(n);
            if n != expected {
                return Err(Error::Parse(format!("line {}: index {n}, expected {expected}", lineno + 1)));
            }
            start.get_or_insert(n);
            values.push(parse_rational(v)?);
        }
        Self::custom(start.unwrap_or(0), values, None)
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn start_index(&self) -> u64 {
        self.start_index
    }

    pub fn is_natural(&self) -> bool {
        matches!(self.kind, ScheduleKind::NaturalShifted | ScheduleKind::Classic)
    }

    /// Exact `α_n`.
    pub fn alpha(&self, n: &Natural) -> Result<Rational> {
        if *n < nat(self.start_index) {
            return Err(Error::BelowStartIndex { index: n.to_string(), start: self.start_index });
        }
        match &self.kind {
            ScheduleKind::NaturalShifted => Ok(rat_from_nat(&(n + 2u32)).recip()),
            ScheduleKind::Classic => Ok(rat_from_nat(&(n + 1u32)).recip()),
            ScheduleKind::PowerLaw { a, gamma } => Ok(a / rat_from_nat(&power_denominator(n, *gamma))),
            ScheduleKind::Custom(c) => {
                let i = to_u64(&(n - nat(self.start_index)))? as usize;
                c.values.get(i).cloned().ok_or_else(|| Error::BeyondTable(n.to_string()))
            }
        }
    }

    pub fn alpha_at(&self, n: u64) -> Result<Rational> {
        self.alpha(&nat(n))
    }

    /// Exact product of `(1−α_k)` for `k` from `from` through `to` inclusive (1 when empty).
    pub fn product(&self, from: u64, to: u64) -> Result<Rational> {
        let mut p = Rational::one();
        if to < from {
            return Ok(p);
        }
        if to - from > PRODUCT_LIMIT {
            return Err(Error::Budget(format!("product over {} factors", to - from + 1)));
        }
        for k in from..=to {
            p *= Rational::one() - self.alpha_at(k)?;
        }
        Ok(p)
    }

    pub fn r1(&self, eps: &Rational) -> Result<Natural> {
        let inv = ceil_recip(eps)?;
        let start = nat(self.start_index);
        match &self.kind {
            ScheduleKind::NaturalShifted => Ok(sat_max(&inv, 2, &start)),
            ScheduleKind::Classic => Ok(sat_max(&inv, 1, &start)),
            ScheduleKind::PowerLaw { a, gamma } => {
                // α_n ≤ ε ⟺ ⌈(n+2)^γ⌉ ≥ ⌈a/ε⌉, and α is nonincreasing.
                let target = crate::numeric::ceil_nat(&(a / eps));
                Ok(first_power_index_reaching(&target, *gamma).max(start))
            }
            ScheduleKind::Custom(c) => match &c.moduli {
                Some(m) => (m.r1)(eps),
                None => self.scan_tail(|s, n| Ok(s.alpha_at(n)? <= *eps)),
            },
        }
    }

    pub fn r2(&self, eps: &Rational) -> Result<Natural> {
        let inv = ceil_recip(eps)?;
        let start = nat(self.start_index);
        match &self.kind {
            // ∏_{k=0}^{n} (k+1)/(k+2) = 1/(n+2)
            ScheduleKind::NaturalShifted => Ok(sat_max(&inv, 2, &start)),
            // ∏_{k=1}^{n} k/(k+1) = 1/(n+1)
            ScheduleKind::Classic => Ok(sat_max(&inv, 1, &start)),
            ScheduleKind::PowerLaw { .. } => self.first_product_below(eps, PRODUCT_LIMIT),
            ScheduleKind::Custom(c) => match &c.moduli {
                Some(m) => (m.r2)(eps),
                None => {
                    let len = c.values.len() as u64;
                    match self.first_product_below(eps, len.saturating_sub(1)) {
                        Ok(n) => Ok(n),
                        Err(_) => Ok(nat(self.start_index + len)),
                    }
                }
            },
        }
    }

    pub fn r3(&self, eps: &Rational) -> Result<Natural> {
        let inv = ceil_recip(eps)?;
        let first = nat(self.start_index + 1);
        match &self.kind {
            // |α_n − α_{n−1}| = α_n/(n+1)
            ScheduleKind::NaturalShifted => Ok(sat_max(&inv, 1, &first)),
            // |α_n − α_{n−1}| = α_n/n
            ScheduleKind::Classic => Ok(sat_max(&inv, 0, &first)),
            ScheduleKind::PowerLaw { gamma, .. } => {
                // The condition reads c_n − c_{n−1} ≤ ε·c_{n−1} for c_n = ⌈(n+2)^γ⌉, whose jumps
                // are 0 or 1. The last violation is the jump onto the value ⌈1/ε⌉.
                let reach = first_power_index_reaching(&inv, *gamma);
                Ok((reach + 1u32).max(first))
            }
            ScheduleKind::Custom(c) => match &c.moduli {
                Some(m) => (m.r3)(eps),
                None => self.scan_tail(|s, n| {
                    if n == s.start_index {
                        return Ok(false);
                    }
                    let a = s.alpha_at(n)?;
                    let b = s.alpha_at(n - 1)?;
                    Ok((a.clone() - b).abs() <= eps * a)
                }),
            },
        }
    }

    /// Positive lower bound on `∏(1−α_n)` from the start index through `k`.
    pub fn e(&self, k: &Natural) -> Result<Rational> {
        let start = nat(self.start_index);
        if *k < start {
            return Ok(Rational::one());
        }
        let value = match &self.kind {
            ScheduleKind::NaturalShifted => rat_from_nat(&(k + 2u32)).recip(),
            ScheduleKind::Classic => rat_from_nat(&(k + 1u32)).recip(),
            ScheduleKind::PowerLaw { .. } => self.product(self.start_index, to_u64(k)?)?,
            ScheduleKind::Custom(c) => match &c.moduli {
                Some(m) => (m.e)(k)?,
                None => self.product(self.start_index, to_u64(k)?)?,
            },
        };
        if !value.is_positive() {
            return Err(Error::InvalidParameter(format!("E({k}) = {value} is not positive")));
        }
        Ok(value)
    }

    /// `D(ε) = E(R3(ε/3M))`.
    pub fn d(&self, eps: &Rational, m: &Rational) -> Result<Rational> {
        crate::numeric::require_positive(m, "M")?;
        let arg = eps / (m * rat(3, 1));
        self.e(&self.r3(&arg)?)
    }

    /// Least index `n ≥ start` (up to `start + limit`) with product through `n` `≤ ε`.
    fn first_product_below(&self, eps: &Rational, limit: u64) -> Result<Natural> {
        let mut p = Rational::one();
        for n in self.start_index..=self.start_index + limit {
            p *= Rational::one() - self.alpha_at(n)?;
            if p <= *eps {
                return Ok(nat(n));
            }
        }
        Err(Error::Budget(format!("product not below {eps} within {limit} factors")))
    }

    /// Least table index from which `holds` is true through the end of the table.
    fn scan_tail(&self, holds: impl Fn(&Self, u64) -> Result<bool>) -> Result<Natural> {
        let ScheduleKind::Custom(c) = &self.kind else { unreachable!("table scan on a closed-form schedule") };
        let end = self.start_index + c.values.len() as u64;
        let mut least = end;
        for n in (self.start_index..end).rev() {
            if holds(self, n)? {
                least = n;
            } else {
                break;
            }
        }
        Ok(nat(least))
    }

    /// Checks the defining conditions of R1, R2, R3, E on a grid of ε and a window of
    /// `horizon` indices past each modulus value. Returns the first violation found.
    pub fn validate_moduli(&self, eps_grid: &[Rational], horizon: u64) -> Result<Option<String>> {
        let start = self.start_index;
        let end = |from: u64| -> u64 {
            match &self.kind {
                ScheduleKind::Custom(c) => (from + horizon).min(start + c.values.len() as u64 - 1),
                _ => from + horizon,
            }
        };
        for eps in eps_grid {
            let r1 = to_u64(&self.r1(eps)?)?;
            for n in r1..=end(r1) {
                if self.alpha_at(n)? > *eps {
                    return Ok(Some(format!("R1({eps}) = {r1} but α_{n} > ε")));
                }
            }
            let r2 = to_u64(&self.r2(eps)?)?;
            match self.product(start, r2) {
                Ok(p) if p > *eps => return Ok(Some(format!("R2({eps}) = {r2} but the product exceeds ε"))),
                Ok(_) => {}
                Err(Error::BeyondTable(_)) => return Ok(Some(format!("R2({eps}) not witnessed within the table"))),
                Err(e) => return Err(e),
            }
            let r3 = to_u64(&self.r3(eps)?)?;
            if r3 < start + 1 {
                return Ok(Some(format!("R3({eps}) = {r3} below start + 1")));
            }
            for n in r3..=end(r3) {
                let a = self.alpha_at(n)?;
                let b = self.alpha_at(n - 1)?;
                if (a.clone() - b).abs() > eps * a {
                    return Ok(Some(format!("R3({eps}) = {r3} fails at n = {n}")));
                }
            }
        }
        let mut p = Rational::one();
        for k in start..=end(start) {
            p *= Rational::one() - self.alpha_at(k)?;
            let e = self.e(&nat(k))?;
            if e > p {
                return Ok(Some(format!("E({k}) = {e} exceeds the product {p}")));
            }
        }
        Ok(None)
    }
}

/// `max(first, ⌈1/ε⌉ − shift)`.
fn sat_max(inv: &Natural, shift: u32, first: &Natural) -> Natural {
    let v = crate::numeric::sat_sub(inv, &nat(shift as u64));
    v.max(first.clone())
}

/// `⌈(n+2)^γ⌉` for rational `γ = r/s`: the least `c` with `c^s ≥ (n+2)^r`.
fn power_denominator(n: &Natural, gamma: Ratio<u32>) -> Natural {
    let base = n + 2u32;
    ceil_root(&num_traits::pow(base, *gamma.numer() as usize), *gamma.denom())
}

/// Least `n` with `⌈(n+2)^γ⌉ ≥ target`.
fn first_power_index_reaching(target: &Natural, gamma: Ratio<u32>) -> Natural {
    if *target <= Natural::one() {
        return Natural::zero();
    }
    // ⌈x⌉ ≥ T ⟺ x > T−1 ⟺ N^r > (T−1)^s with N = n+2.
    let bound = num_traits::pow(target - 1u32, *gamma.denom() as usize);
    let big_n = bound.nth_root(*gamma.numer()) + 1u32;
    crate::numeric::sat_sub(&big_n, &nat(2))
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ScheduleKind::NaturalShifted => f.write_str("natural-shifted"),
            ScheduleKind::Classic => f.write_str("classic"),
            ScheduleKind::PowerLaw { a, gamma } => write!(f, "power-law {a} {gamma}"),
            ScheduleKind::Custom(c) => write!(f, "custom[{} entries from {}]", c.values.len(), self.start_index),
        }
    }
}

/// Parses `natural-shifted`, `classic`, `power-law <a> <γ>`, or `table <path>`.
pub fn parse_schedule(spec: &str) -> Result<Schedule> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    match words.as_slice() {
        ["natural-shifted"] => Ok(Schedule::natural_shifted()),
        ["classic"] => Ok(Schedule::classic()),
        ["power-law", a, g] => {
            let a = parse_rational(a)?;
            let g = parse_rational(g)?;
            let (Some(n), Some(d)) = (g.numer().to_u32(), g.denom().to_u32()) else {
                return Err(Error::Parse(format!("power-law exponent {g} out of range")));
            };
            Schedule::power_law(a, Ratio::new(n, d))
        }
        ["table", path] => Schedule::read_table(Path::new(path)),
        _ => Err(Error::Parse(format!("unknown schedule '{spec}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        rat(n, d)
    }

    #[test]
    fn alpha_values() {
        assert_eq!(Schedule::natural_shifted().alpha_at(0).unwrap(), q(1, 2));
        assert_eq!(Schedule::classic().alpha_at(1).unwrap(), q(1, 2));
        assert_eq!(Schedule::natural_shifted().alpha_at(10).unwrap(), q(1, 12));
        assert!(matches!(Schedule::classic().alpha_at(0), Err(Error::BelowStartIndex { .. })));
    }

    #[test]
    fn r1_values() {
        assert_eq!(Schedule::natural_shifted().r1(&q(1, 10)).unwrap(), nat(8));
        assert_eq!(Schedule::natural_shifted().r1(&q(1, 1)).unwrap(), nat(0));
        assert_eq!(Schedule::classic().r1(&q(1, 10)).unwrap(), nat(9));
    }

    #[test]
    fn r2_values() {
        assert_eq!(Schedule::natural_shifted().r2(&q(1, 10)).unwrap(), nat(8));
        assert_eq!(Schedule::classic().r2(&q(1, 10)).unwrap(), nat(9));
        assert_eq!(Schedule::natural_shifted().r2(&q(1, 2)).unwrap(), nat(0));
        assert_eq!(Schedule::classic().r2(&q(1, 2)).unwrap(), nat(1));
        assert_eq!(Schedule::classic().r2(&q(3, 4)).unwrap(), nat(1));
    }

    #[test]
    fn r3_values() {
        // 1/(n+1) ≤ 1/5 first holds at n = 4 (equality).
        assert_eq!(Schedule::natural_shifted().r3(&q(1, 5)).unwrap(), nat(4));
        assert_eq!(Schedule::natural_shifted().r3(&q(2, 1)).unwrap(), nat(1));
        assert_eq!(Schedule::classic().r3(&q(1, 5)).unwrap(), nat(5));
    }

    #[test]
    fn e_and_d_values() {
        assert_eq!(Schedule::natural_shifted().e(&nat(0)).unwrap(), q(1, 2));
        assert_eq!(Schedule::natural_shifted().e(&nat(10)).unwrap(), q(1, 12));
        assert_eq!(Schedule::classic().e(&nat(3)).unwrap(), q(1, 4));
        // R3(1) = 1 for the shifted schedule, so D = E(1) = 1/3.
        assert_eq!(Schedule::natural_shifted().d(&q(3, 1), &q(1, 1)).unwrap(), q(1, 3));
        // R3(1) = 2 for the classic schedule (first admissible index), so D = E(2) = 1/3.
        assert_eq!(Schedule::classic().d(&q(3, 1), &q(1, 1)).unwrap(), q(1, 3));
    }

    #[test]
    fn power_law_with_unit_parameters_matches_shifted() {
        let p = Schedule::power_law(q(1, 1), Ratio::new(1, 1)).unwrap();
        let s = Schedule::natural_shifted();
        for n in 0..50 {
            assert_eq!(p.alpha_at(n).unwrap(), s.alpha_at(n).unwrap());
        }
        for d in 1..40 {
            let e = q(1, d);
            assert_eq!(p.r1(&e).unwrap(), s.r1(&e).unwrap(), "R1({e})");
            assert_eq!(p.r2(&e).unwrap(), s.r2(&e).unwrap(), "R2({e})");
            assert_eq!(p.r3(&e).unwrap(), s.r3(&e).unwrap(), "R3({e})");
        }
    }

    #[test]
    fn power_law_moduli_validate() {
        let p = Schedule::power_law(q(1, 2), Ratio::new(1, 2)).unwrap();
        let grid: Vec<Rational> = [2, 3, 5, 10, 20].iter().map(|d| q(1, *d)).collect();
        assert_eq!(p.validate_moduli(&grid, 300).unwrap(), None);
        // ⌈(n+2)^{1/2}⌉ at n = 7 is 3.
        assert_eq!(p.alpha_at(7).unwrap(), q(1, 6));
    }

    #[test]
    fn custom_table_parsing() {
        let s = Schedule::parse_table("# alphas\n0 1/2\n1 1/3\n2 1/4\n").unwrap();
        assert_eq!(s.alpha_at(2).unwrap(), q(1, 4));
        assert!(matches!(s.alpha_at(3), Err(Error::BeyondTable(_))));
        assert!(Schedule::parse_table("0 1/2\n2 1/3\n").is_err());
        assert!(Schedule::parse_table("0 3/2\n").is_err());
    }

    #[test]
    fn custom_table_moduli_scan() {
        let values: Vec<Rational> = (0..20).map(|n| q(1, n + 2)).collect();
        let s = Schedule::custom(0, values, None).unwrap();
        assert_eq!(s.r1(&q(1, 10)).unwrap(), nat(8));
        assert_eq!(s.r2(&q(1, 10)).unwrap(), nat(8));
        assert_eq!(s.r3(&q(1, 5)).unwrap(), nat(4));
        assert_eq!(s.e(&nat(3)).unwrap(), q(1, 5));
        // Not reached within the table: one past the end.
        assert_eq!(s.r2(&q(1, 100)).unwrap(), nat(20));
    }

    #[test]
    fn user_moduli_are_used_and_validated() {
        let values: Vec<Rational> = (0..200).map(|n| q(1, n + 2)).collect();
        let bad = UserModuli {
            r1: Arc::new(|_| Ok(nat(0))),
            r2: Arc::new(|e| Schedule::natural_shifted().r2(e)),
            r3: Arc::new(|e| Schedule::natural_shifted().r3(e)),
            e: Arc::new(|k| Schedule::natural_shifted().e(k)),
        };
        let s = Schedule::custom(0, values, Some(bad)).unwrap();
        assert_eq!(s.r1(&q(1, 10)).unwrap(), nat(0));
        let v = s.validate_moduli(&[q(1, 10)], 50).unwrap();
        assert!(v.unwrap().starts_with("R1"));
    }

    #[test]
    fn parse_schedule_specs() {
        assert!(parse_schedule("classic").unwrap().is_natural());
        assert!(matches!(parse_schedule("power-law 1/2 1/3").unwrap().kind(), ScheduleKind::PowerLaw { .. }));
        assert!(parse_schedule("power-law 3/2 1").is_err());
        assert!(parse_schedule("fancy").is_err());
    }
}
