//! Extended-precision real scalar.
//!
//! `BigReal` wraps an [`astro_float::BigFloat`] together with the working
//! precision it was created at. Every binary operation requires both
//! operands to carry the same precision; mixing precisions panics, since it
//! can only come from a programming error upstream (all values of one
//! computation are created from a single [`Precision`]).

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};

use crate::error::{AtemError, Result};

const RM: RoundingMode = RoundingMode::ToEven;
const WORD_BITS: usize = 64;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Working precision in bits, rounded up to a whole number of 64-bit words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(usize);

impl Precision {
    pub const DEFAULT: Precision = Precision(192);

    pub fn new(bits: usize) -> Result<Self> {
        if !(64..=65536).contains(&bits) {
            return Err(AtemError::InvalidPrecision(bits));
        }
        Ok(Precision(bits.div_ceil(WORD_BITS) * WORD_BITS))
    }

    pub fn bits(self) -> usize {
        self.0
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone)]
pub struct BigReal {
    v: BigFloat,
    prec: Precision,
}

impl BigReal {
    fn wrap(v: BigFloat, prec: Precision) -> Self {
        BigReal { v, prec }
    }

    pub fn zero(prec: Precision) -> Self {
        Self::from_i64(0, prec)
    }

    pub fn one(prec: Precision) -> Self {
        Self::from_i64(1, prec)
    }

    pub fn from_i64(value: i64, prec: Precision) -> Self {
        Self::wrap(BigFloat::from_i64(value, prec.bits()), prec)
    }

    /// Exact conversion: every finite `f64` is representable at >= 64 bits.
    pub fn from_f64(value: f64, prec: Precision) -> Self {
        if value != 0.0 && !value.is_normal() && value.is_finite() {
            // astro-float misplaces the exponent of subnormals; go through
            // an exactly scaled normal value instead
            let scaled = Self::from_f64(value * 2f64.powi(64), prec);
            let two64 = Self::wrap(BigFloat::from_f64(2f64.powi(64), prec.bits()), prec);
            return scaled / &two64;
        }
        Self::wrap(BigFloat::from_f64(value, prec.bits()), prec)
    }

    /// `num / den` rounded once.
    pub fn from_ratio(num: i64, den: i64, prec: Precision) -> Self {
        Self::from_i64(num, prec) / &Self::from_i64(den, prec)
    }

    /// Parses a plain decimal literal such as `-0.1`, `3`, `2.5e-3`.
    pub fn parse(input: &str, prec: Precision) -> Result<Self> {
        let s = input.trim();
        if !is_decimal_literal(s) {
            return Err(AtemError::ParseNumber {
                input: input.to_string(),
            });
        }
        // parse with guard bits, then round once to the target precision
        let mut v = with_consts(|cc| {
            BigFloat::parse(s, Radix::Dec, prec.bits() + 2 * WORD_BITS, RM, cc)
        });
        if v.is_nan() || v.is_inf() {
            return Err(AtemError::ParseNumber {
                input: input.to_string(),
            });
        }
        v.set_precision(prec.bits(), RM)
            .expect("precision already validated");
        Ok(Self::wrap(v, prec))
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Re-rounds to another precision. The only sanctioned way to move a
    /// value between precision contexts.
    pub fn with_precision(&self, prec: Precision) -> Self {
        let mut v = self.v.clone();
        v.set_precision(prec.bits(), RM)
            .expect("precision already validated");
        Self::wrap(v, prec)
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.v.is_nan() || self.v.is_inf())
    }

    /// -1, 0 or +1.
    pub fn signum(&self) -> i32 {
        if self.v.is_zero() {
            0
        } else if self.v.is_negative() {
            -1
        } else {
            1
        }
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.v.abs(), self.prec)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.v.sqrt(self.prec.bits(), RM), self.prec)
    }

    pub fn exp(&self) -> Self {
        let v = with_consts(|cc| self.v.exp(self.prec.bits(), RM, cc));
        Self::wrap(v, self.prec)
    }

    pub fn ln(&self) -> Self {
        let v = with_consts(|cc| self.v.ln(self.prec.bits(), RM, cc));
        Self::wrap(v, self.prec)
    }

    pub fn powi(&self, n: usize) -> Self {
        Self::wrap(self.v.powi(n, self.prec.bits(), RM), self.prec)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self * &Self::from_i64(k, self.prec)
    }

    pub fn div_i64(&self, k: i64) -> Self {
        self / &Self::from_i64(k, self.prec)
    }

    /// Larger of two magnitudes.
    pub fn max_abs(&self, other: &Self) -> Self {
        if self.abs_cmp(other) == Ordering::Less {
            other.abs()
        } else {
            self.abs()
        }
    }

    pub fn abs_cmp(&self, other: &Self) -> Ordering {
        self.abs()
            .partial_cmp(&other.abs())
            .unwrap_or(Ordering::Equal)
    }

    /// Nearest `f64`; saturates to ±inf / 0 outside the double range.
    pub fn to_f64(&self) -> f64 {
        if self.v.is_nan() {
            return f64::NAN;
        }
        if self.v.is_inf() {
            return if self.v.is_inf_pos() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        if self.v.is_zero() {
            return 0.0;
        }
        let (words, _, sign, exp, _) = self.v.as_raw_parts().expect("finite value");
        let top = *words.last().expect("non-empty mantissa");
        let next = if words.len() > 1 {
            words[words.len() - 2]
        } else {
            0
        };
        // value = 0.mantissa * 2^exp, with the top word holding the leading bits
        let hi = top as f64 + next as f64 / 18446744073709551616.0;
        let mag = scale_pow2(hi, exp as i64 - 64);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// log10 |x| evaluated from the exponent and leading word, so it is
    /// meaningful far outside the `f64` range. Returns -inf for zero.
    pub fn log10_abs(&self) -> f64 {
        if self.v.is_zero() {
            return f64::NEG_INFINITY;
        }
        if !self.is_finite() {
            return f64::INFINITY;
        }
        let (words, _, _, exp, _) = self.v.as_raw_parts().expect("finite value");
        let top = *words.last().expect("non-empty mantissa") as f64;
        (top / 18446744073709551616.0).log10() + exp as f64 * std::f64::consts::LOG10_2
    }

    /// Fixed-point decimal rendering with `decimals` digits after the point,
    /// rounded once from the extended value.
    pub fn to_fixed(&self, decimals: usize) -> String {
        let scale = BigReal::from_i64(10, self.prec).powi(decimals);
        let scaled = self * &scale;
        let rounded = match scaled.v.round(0, RM) {
            v if v.is_nan() => return format!("{:.*}", decimals, self.to_f64()),
            v => BigReal::wrap(v, self.prec),
        };
        let r = rounded.to_f64();
        if r.abs() >= 9.0e15 {
            return format!("{:.*}", decimals, self.to_f64());
        }
        let int = r as i64;
        let neg = int < 0;
        let digits = int.unsigned_abs().to_string();
        let digits = if digits.len() <= decimals {
            format!("{}{}", "0".repeat(decimals + 1 - digits.len()), digits)
        } else {
            digits
        };
        let (whole, frac) = digits.split_at(digits.len() - decimals);
        let sign = if neg { "-" } else { "" };
        if decimals == 0 {
            format!("{sign}{whole}")
        } else {
            format!("{sign}{whole}.{frac}")
        }
    }

    /// Decimal scientific string with enough digits to round-trip at the
    /// value's own precision.
    pub fn to_decimal_string(&self) -> String {
        if self.v.is_zero() {
            return "0".to_string();
        }
        // widen first so the printed digits carry guard digits
        let mut wide = self.v.clone();
        wide.set_precision(self.prec.bits() + WORD_BITS, RM)
            .expect("precision already validated");
        with_consts(|cc| wide.format(Radix::Dec, RM, cc)).expect("finite value formats")
    }

    fn check(&self, other: &Self) {
        assert_eq!(
            self.prec.bits(),
            other.prec.bits(),
            "BigReal precision mismatch"
        );
    }
}

fn scale_pow2(x: f64, e: i64) -> f64 {
    if e > 2000 {
        return f64::INFINITY;
    }
    if e < -2200 {
        return 0.0;
    }
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

fn is_decimal_literal(s: &str) -> bool {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mut parts = mantissa.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next().unwrap_or("");
    let digits_ok = |t: &str| t.chars().all(|c| c.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits_ok(int) || !digits_ok(frac) {
        return false;
    }
    match exponent {
        None => true,
        Some(e) => {
            let e = e.strip_prefix(['-', '+']).unwrap_or(e);
            !e.is_empty() && digits_ok(e)
        }
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.prec == other.prec && self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.check(other);
        // astro-float mis-orders zero against nonzero values
        if self.is_zero() || other.is_zero() {
            return Some(self.signum().cmp(&other.signum()));
        }
        self.v.cmp(&other.v).map(|c| c.cmp(&0))
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigReal({}, {}b)", self.to_decimal_string(), self.prec.0)
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(d) => f.write_str(&self.to_fixed(d)),
            None => f.write_str(&self.to_decimal_string()),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl $trait<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                self.check(rhs);
                BigReal::wrap(self.v.$inner(&rhs.v, self.prec.bits(), RM), self.prec)
            }
        }
        impl $trait<BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: BigReal) -> BigReal {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl AddAssign<&BigReal> for BigReal {
    fn add_assign(&mut self, rhs: &BigReal) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&BigReal> for BigReal {
    fn sub_assign(&mut self, rhs: &BigReal) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&BigReal> for BigReal {
    fn mul_assign(&mut self, rhs: &BigReal) {
        *self = &*self * rhs;
    }
}

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::wrap(self.v.clone().neg(), self.prec)
    }
}

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::DEFAULT
    }

    #[test]
    fn precision_rounds_to_words() {
        assert_eq!(Precision::new(100).unwrap().bits(), 128);
        assert_eq!(Precision::new(192).unwrap().bits(), 192);
        assert!(Precision::new(10).is_err());
    }

    #[test]
    fn to_f64_matches_exact_doubles() {
        for x in [1.0, -2.5, 0.1, 1e300, -3.7e-200, 13.969926, 2f64.powi(-1074)] {
            assert_eq!(BigReal::from_f64(x, p()).to_f64(), x, "{x}");
        }
    }

    #[test]
    fn parse_decimal_and_reject_garbage() {
        let x = BigReal::parse("0.1", p()).unwrap();
        assert!((x.to_f64() - 0.1).abs() < 1e-17);
        assert!(BigReal::parse("-2.5e-3", p()).is_ok());
        assert!(BigReal::parse("g", p()).is_err());
        assert!(BigReal::parse("1.2.3", p()).is_err());
        assert!(BigReal::parse("", p()).is_err());
    }

    #[test]
    fn wide_exponent_range() {
        let big = BigReal::from_i64(10, p()).powi(12000);
        assert!(big.is_finite());
        assert!((big.log10_abs() - 12000.0).abs() < 1e-9);
        let tiny = BigReal::one(p()) / &big;
        assert!((tiny.log10_abs() + 12000.0).abs() < 1e-9);
        assert!(!tiny.is_zero());
    }

    #[test]
    fn fixed_rendering() {
        let x = BigReal::parse("1.065285509", p()).unwrap();
        assert_eq!(x.to_fixed(8), "1.06528551");
        assert_eq!((-&x).to_fixed(3), "-1.065");
        assert_eq!(BigReal::parse("0.00012", p()).unwrap().to_fixed(4), "0.0001");
        assert_eq!(BigReal::from_i64(3, p()).to_fixed(0), "3");
    }

    #[test]
    fn decimal_string_round_trips() {
        let third = BigReal::from_ratio(1, 3, p());
        let back = BigReal::parse(&third.to_decimal_string(), p()).unwrap();
        assert_eq!(back, third);
        let tenth = BigReal::parse("0.1", p()).unwrap();
        assert_eq!(BigReal::parse(&tenth.to_decimal_string(), p()).unwrap(), tenth);
    }

    #[test]
    #[should_panic(expected = "precision mismatch")]
    fn mixing_precisions_panics() {
        let a = BigReal::one(p());
        let b = BigReal::one(Precision::new(256).unwrap());
        let _ = &a + &b;
    }
}
