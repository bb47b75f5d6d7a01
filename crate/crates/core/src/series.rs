//! Dense truncated power series `c_0 + c_1 x + ... + c_D x^D` over [`BigReal`].
//!
//! Terms above the truncation degree are semantically zero. The same type
//! doubles as the polynomial representation of problem coefficients.

use std::fmt;

use crate::bigreal::{BigReal, Precision};
use crate::error::{AtemError, Result};

#[derive(Clone, PartialEq)]
pub struct TruncSeries {
    coeffs: Vec<BigReal>,
}

impl TruncSeries {
    /// Builds a series from ascending coefficients. An empty list is the
    /// zero constant, which needs a precision and so is rejected here; use
    /// [`TruncSeries::zero`] instead.
    pub fn from_coeffs(coeffs: Vec<BigReal>) -> Self {
        assert!(!coeffs.is_empty(), "a series holds at least c_0");
        let prec = coeffs[0].precision();
        assert!(
            coeffs.iter().all(|c| c.precision() == prec),
            "BigReal precision mismatch"
        );
        TruncSeries { coeffs }
    }

    pub fn from_i64s(coeffs: &[i64], prec: Precision) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| BigReal::from_i64(c, prec)).collect())
    }

    pub fn zero(degree: usize, prec: Precision) -> Self {
        TruncSeries {
            coeffs: vec![BigReal::zero(prec); degree + 1],
        }
    }

    pub fn constant(c: BigReal, degree: usize) -> Self {
        let prec = c.precision();
        let mut s = Self::zero(degree, prec);
        s.coeffs[0] = c;
        s
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn precision(&self) -> Precision {
        self.coeffs[0].precision()
    }

    pub fn coeffs(&self) -> &[BigReal] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<BigReal> {
        self.coeffs
    }

    /// Coefficient of `x^i`; zero above the truncation degree.
    pub fn coeff(&self, i: usize) -> BigReal {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| BigReal::zero(self.precision()))
    }

    /// Index of the highest nonzero coefficient, `None` for the zero series.
    pub fn effective_degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.effective_degree().is_none()
    }

    /// Truncates or zero-pads to exactly `degree`.
    pub fn resized(&self, degree: usize) -> Self {
        let prec = self.precision();
        let mut coeffs: Vec<BigReal> = self.coeffs.iter().take(degree + 1).cloned().collect();
        coeffs.resize(degree + 1, BigReal::zero(prec));
        TruncSeries { coeffs }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(TruncSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(TruncSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, k: &BigReal) -> Self {
        TruncSeries {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Cauchy product truncated at `degree`. Zero coefficients of either
    /// factor are skipped, which keeps products with the sparse problem
    /// polynomials linear in `degree`.
    pub fn mul_trunc(&self, other: &Self, degree: usize) -> Self {
        let prec = self.precision();
        assert_eq!(prec, other.precision(), "BigReal precision mismatch");
        let mut out = vec![BigReal::zero(prec); degree + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(degree + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(degree + 1 - i) {
                if b.is_zero() {
                    continue;
                }
                out[i + j] += &(a * b);
            }
        }
        TruncSeries { coeffs: out }
    }

    /// Term-wise derivative; degree drops by one (a constant maps to the
    /// degree-0 zero series).
    pub fn diff(&self) -> Self {
        if self.degree() == 0 {
            return Self::zero(0, self.precision());
        }
        TruncSeries {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.mul_i64(k as i64))
                .collect(),
        }
    }

    pub fn eval_origin(&self) -> BigReal {
        self.coeffs[0].clone()
    }

    /// Horner evaluation.
    pub fn eval(&self, x: &BigReal) -> BigReal {
        let mut acc = BigReal::zero(self.precision());
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + c;
        }
        acc
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.degree() != other.degree() {
            return Err(AtemError::DegreeMismatch {
                left: self.degree(),
                right: other.degree(),
            });
        }
        if self.precision() != other.precision() {
            return Err(AtemError::PrecisionMismatch {
                left: self.precision().bits(),
                right: other.precision().bits(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.coeffs.iter().map(|c| c.to_f64()))
            .finish()
    }
}
