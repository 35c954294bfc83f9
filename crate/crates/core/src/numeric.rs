//! Small helpers over arbitrary-precision naturals and rationals.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Natural = BigUint;
pub type Rational = BigRational;

pub fn nat(v: u64) -> Natural {
    BigUint::from(v)
}

pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_from_nat(n: &Natural) -> Rational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

/// Ceiling of a non-negative rational as a natural. Negative inputs map to 0.
pub fn ceil_nat(q: &Rational) -> Natural {
    if !q.is_positive() {
        return Natural::zero();
    }
    let c = q.ceil().to_integer();
    c.to_biguint().unwrap_or_default()
}

/// Floor of a rational, clamped at 0.
pub fn floor_nat(q: &Rational) -> Natural {
    if !q.is_positive() {
        return Natural::zero();
    }
    q.floor().to_integer().to_biguint().unwrap_or_default()
}

/// `a - b` on naturals, saturating at zero.
pub fn sat_sub(a: &Natural, b: &Natural) -> Natural {
    if a > b {
        a - b
    } else {
        Natural::zero()
    }
}

/// `⌈1/ε⌉` for a positive rational ε.
pub fn ceil_recip(eps: &Rational) -> Result<Natural> {
    require_positive(eps, "epsilon")?;
    Ok(ceil_nat(&eps.recip()))
}

pub fn require_positive(q: &Rational, what: &str) -> Result<()> {
    if q.is_positive() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {q}")))
    }
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite float.
pub fn rat_from_f64(x: f64) -> Result<Rational> {
    BigRational::from_float(x).ok_or_else(|| Error::NonFinite(format!("{x}")))
}

/// Parses `p/q`, an integer, or a decimal literal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in '{s}'")));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Ok(i) = s.parse::<BigInt>() {
        return Ok(BigRational::from_integer(i));
    }
    // Decimal literal: split into integer and fractional digits so the value stays exact.
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if let Some((int, frac)) = body.split_once('.') {
        let ok =
            !frac.is_empty() && int.chars().all(|c| c.is_ascii_digit()) && frac.chars().all(|c| c.is_ascii_digit());
        if ok {
            let digits: BigInt =
                format!("{int}{frac}").parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
            let den = num_traits::pow(BigInt::from(10u32), frac.len());
            let q = BigRational::new(digits, den);
            return Ok(if neg { -q } else { q });
        }
    }
    Err(Error::Parse(format!("bad rational '{s}'")))
}

pub fn parse_natural(s: &str) -> Result<Natural> {
    s.trim().parse::<BigUint>().map_err(|_| Error::Parse(format!("bad natural '{s}'")))
}

/// Least integer `c` with `c^k >= v`.
pub fn ceil_root(v: &Natural, k: u32) -> Natural {
    let r = v.nth_root(k);
    if num_traits::pow(r.clone(), k as usize) == *v {
        r
    } else {
        r + 1u32
    }
}

/// Rounds a rational down onto the dyadic grid `2^-bits`.
pub fn floor_dyadic(q: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = (q * BigRational::from_integer(scale.clone())).floor().to_integer();
    BigRational::new(scaled, scale)
}

pub fn rational_to_natural(q: &Rational) -> Option<Natural> {
    if q.is_integer() && !q.is_negative() {
        q.to_integer().to_biguint()
    } else {
        None
    }
}

pub fn max_nat<'a>(items: impl IntoIterator<Item = &'a Natural>) -> Natural {
    items.into_iter().max().cloned().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(ceil_nat(&rat(7, 2)), nat(4));
        assert_eq!(ceil_nat(&rat(4, 1)), nat(4));
        assert_eq!(ceil_nat(&rat(-3, 2)), nat(0));
        assert_eq!(floor_nat(&rat(7, 2)), nat(3));
        assert_eq!(floor_nat(&rat(-7, 2)), nat(0));
        assert_eq!(ceil_recip(&rat(2, 7)).unwrap(), nat(4));
        assert!(ceil_recip(&rat(0, 1)).is_err());
        assert_eq!(sat_sub(&nat(3), &nat(5)), nat(0));
        assert_eq!(sat_sub(&nat(5), &nat(3)), nat(2));
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational(" -4 ").unwrap(), rat(-4, 1));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
        for bad in ["1/0", "a/2", "1.", ".", "1e3", ""] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
        let big = "123456789012345678901234567890";
        assert_eq!(parse_natural(big).unwrap().to_string(), big);
        assert!(parse_natural("-1").is_err());
    }

    #[test]
    fn roots_and_dyadics() {
        assert_eq!(ceil_root(&nat(27), 3), nat(3));
        assert_eq!(ceil_root(&nat(28), 3), nat(4));
        assert_eq!(ceil_root(&nat(0), 2), nat(0));
        assert_eq!(floor_dyadic(&rat(1, 3), 2), rat(1, 4));
        assert_eq!(floor_dyadic(&rat(-1, 3), 2), rat(-1, 2));
        assert_eq!(rational_to_natural(&rat(6, 3)), Some(nat(2)));
        assert_eq!(rational_to_natural(&rat(1, 2)), None);
        assert_eq!(max_nat(&[nat(3), nat(9), nat(1)]), nat(9));
        assert_eq!(max_nat(&[]), nat(0));
        assert!(rat_from_f64(f64::NAN).is_err());
        assert_eq!(rat_from_f64(0.75).unwrap(), rat(3, 4));
    }
}
