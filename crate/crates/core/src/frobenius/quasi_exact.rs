//! Quasi-exactly solvable points of the quantum-dot equation.
//!
//! At `E = j omega` the dot recurrence terminates after `t_j` exactly when
//! `t_{j+1}`, viewed as a polynomial in `lambda`, vanishes. Termination is
//! checked symbolically: the coefficients are carried as polynomials in
//! `lambda` over the rationals and reduced modulo the closed-form factor
//! that the returned `lambda` values are roots of. A zero remainder is a
//! structural zero, independent of how `lambda` rounds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::bigreal::{BigReal, Precision};
use crate::error::{AtemError, Result};

/// Polynomial in `lambda` with rational coefficients, ascending powers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactPoly(Vec<BigRational>);

impl ExactPoly {
    pub fn zero() -> Self {
        ExactPoly(Vec::new())
    }

    pub fn constant(c: BigRational) -> Self {
        ExactPoly(vec![c]).trimmed()
    }

    pub fn from_coeffs(c: Vec<BigRational>) -> Self {
        ExactPoly(c).trimmed()
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.0.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        ExactPoly((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect()).trimmed()
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        ExactPoly(self.0.iter().map(|c| c * k).collect()).trimmed()
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ExactPoly(out).trimmed()
    }

    /// Multiplies by `lambda`.
    pub fn shift(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = vec![BigRational::zero()];
        c.extend(self.0.iter().cloned());
        ExactPoly(c)
    }

    /// Remainder of division by a nonzero divisor.
    pub fn rem(&self, divisor: &Self) -> Self {
        let dd = divisor.degree().expect("nonzero divisor");
        let lead = divisor.0[dd].clone();
        let mut r = self.0.clone();
        while r.len() > dd {
            let k = r.len() - 1;
            let q = &r[k] / &lead;
            if !q.is_zero() {
                for (i, c) in divisor.0.iter().enumerate() {
                    r[k - dd + i] -= &q * c;
                }
            }
            r.pop();
        }
        ExactPoly(r).trimmed()
    }

    /// Numeric value at `x`.
    pub fn eval(&self, x: &BigReal) -> BigReal {
        let prec = x.precision();
        let mut acc = BigReal::zero(prec);
        for c in self.0.iter().rev() {
            acc = &(&acc * x) + &rational_to_big(c, prec);
        }
        acc
    }
}

fn rational_to_big(q: &BigRational, prec: Precision) -> BigReal {
    let parse = |n: &BigInt| BigReal::parse(&n.to_string(), prec).expect("integer literal");
    &parse(q.numer()) / &parse(q.denom())
}

fn exact(x: f64, name: &str) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| AtemError::InvalidParam {
        name: name.into(),
        reason: "must be finite".into(),
    })
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn check_params(ell: f64, omega: f64, j: usize) -> Result<()> {
    if !(1..=3).contains(&j) {
        return Err(AtemError::UnsupportedLevel(j));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(AtemError::InvalidParam {
            name: "omega".into(),
            reason: "must be positive".into(),
        });
    }
    if !(ell > -0.5 && ell.is_finite()) {
        return Err(AtemError::InvalidParam {
            name: "l".into(),
            reason: "must exceed -1/2".into(),
        });
    }
    Ok(())
}

/// Dot Taylor coefficients `t_0..=t_m` at energy `E` as polynomials in
/// `lambda`:
/// `(n+1)(n+2l+1) t_{n+1} = -lambda t_n + (omega (n-1) - E) t_{n-1}`.
pub fn exact_dot_coefficients(
    ell: &BigRational,
    omega: &BigRational,
    energy: &BigRational,
    m: usize,
) -> Vec<ExactPoly> {
    let two_l_1 = ell * int(2) + int(1);
    let mut t = vec![
        ExactPoly::constant(BigRational::one()),
        ExactPoly::from_coeffs(vec![BigRational::zero(), -two_l_1.recip()]),
    ];
    for n in 1..m {
        let nn = int(n as i64);
        let lead = (&nn + int(1)) * (&nn + &two_l_1);
        let damp = omega * (&nn - int(1)) - energy;
        let next = t[n]
            .shift()
            .scale(&-BigRational::one())
            .add(&t[n - 1].scale(&damp))
            .scale(&lead.recip());
        t.push(next);
    }
    t.truncate(m + 1);
    t
}

struct Root {
    value: BigReal,
    factor: ExactPoly,
}

fn roots(ell: f64, omega: f64, j: usize, prec: Precision) -> Result<Vec<Root>> {
    check_params(ell, omega, j)?;
    let (l, w) = (exact(ell, "l")?, exact(omega, "omega")?);
    let (lb, wb) = (BigReal::from_f64(ell, prec), BigReal::from_f64(omega, prec));
    let one = BigReal::one(prec);
    let quadratic = |c: BigRational| {
        ExactPoly::from_coeffs(vec![-c, BigRational::zero(), BigRational::one()])
    };
    let pm = |sq: BigReal, factor: ExactPoly| {
        vec![
            Root { value: -&sq, factor: factor.clone() },
            Root { value: sq, factor },
        ]
    };
    let mut out = Vec::new();
    match j {
        1 => {
            let c = &w * (&l * int(2) + int(1));
            let v = (&wb * &(&lb.mul_i64(2) + &one)).sqrt();
            out.extend(pm(v, quadratic(c)));
        }
        2 => {
            out.push(Root {
                value: BigReal::zero(prec),
                factor: ExactPoly::from_coeffs(vec![BigRational::zero(), BigRational::one()]),
            });
            let c = &w * int(2) * (&l * int(4) + int(3));
            let v = (&wb.mul_i64(2) * &(&lb.mul_i64(4) + &BigReal::from_i64(3, prec))).sqrt();
            out.extend(pm(v, quadratic(c)));
        }
        3 => {
            // lambda^4 - 20 w (l+1) lambda^2 + w^2 (36 l^2 + 72 l + 27)
            let c2 = -(&w * int(20) * (&l + int(1)));
            let c0 = &w * &w * (&l * &l * int(36) + &l * int(72) + int(27));
            let quartic = ExactPoly::from_coeffs(vec![
                c0,
                BigRational::zero(),
                c2,
                BigRational::zero(),
                BigRational::one(),
            ]);
            let l_plus_1 = &lb + &one;
            let disc = (&(&lb * &lb).mul_i64(64) + &lb.mul_i64(128)) + BigReal::from_i64(73, prec);
            let inner = &wb * &disc.sqrt();
            let base = (&wb * &l_plus_1).mul_i64(10);
            for sq in [(&base - &inner).sqrt(), (&base + &inner).sqrt()] {
                out.extend(pm(sq, quartic.clone()));
            }
        }
        _ => unreachable!("level validated"),
    }
    out.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite roots"));
    Ok(out)
}

/// Closed-form couplings `lambda` for which `E = j omega` is an exact
/// eigenvalue, in ascending order.
pub fn quasi_exact_lambdas(ell: f64, omega: f64, j: usize, prec: Precision) -> Result<Vec<BigReal>> {
    Ok(roots(ell, omega, j, prec)?.into_iter().map(|r| r.value).collect())
}

#[derive(Clone, Debug)]
pub struct TerminationReport {
    pub lambda: BigReal,
    /// `t_n` reduces to zero modulo the `lambda` factor for `j < n <= m`.
    pub structural_zero: bool,
    /// Largest `log10 |t_n|`, `j < n <= m`, from the floating recurrence.
    pub numeric_tail_log10: f64,
    /// Eigenfunction polynomial `t_0..=t_j` evaluated at `lambda`.
    pub polynomial: Vec<BigReal>,
}

#[derive(Clone, Debug)]
pub struct QuasiExactLevel {
    pub j: usize,
    pub energy: BigReal,
    pub reports: Vec<TerminationReport>,
}

impl QuasiExactLevel {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.structural_zero)
    }
}

/// Exact termination check for every closed-form `lambda` at level `j`,
/// through order `m`.
pub fn verify_termination(ell: f64, omega: f64, j: usize, m: usize) -> Result<Vec<bool>> {
    let rs = roots(ell, omega, j, Precision::DEFAULT)?;
    let (l, w) = (exact(ell, "l")?, exact(omega, "omega")?);
    let energy = &w * int(j as i64);
    let t = exact_dot_coefficients(&l, &w, &energy, m.max(j + 2));
    Ok(rs
        .iter()
        .map(|r| t[j + 1..].iter().all(|tn| tn.rem(&r.factor).is_zero()))
        .collect())
}

/// Closed-form `lambda` set for level `j`, with `E_n = j omega` and an exact
/// plus a floating termination check per `lambda` through order `m`.
pub fn quasi_exact_check(
    ell: f64,
    omega: f64,
    j: usize,
    m: usize,
    prec: Precision,
) -> Result<QuasiExactLevel> {
    let rs = roots(ell, omega, j, prec)?;
    let structural = verify_termination(ell, omega, j, m)?;
    let energy = BigReal::from_f64(omega, prec).mul_i64(j as i64);
    let (l, w) = (exact(ell, "l")?, exact(omega, "omega")?);
    let exact_t = exact_dot_coefficients(&l, &w, &(&w * int(j as i64)), j);

    let mut reports = Vec::with_capacity(rs.len());
    for (r, structural_zero) in rs.into_iter().zip(structural) {
        let pb = super::SingularProblem::quantum_dot(
            BigReal::from_f64(omega, prec),
            r.value.clone(),
            BigReal::from_f64(ell, prec),
        )?;
        let tr = super::leibniz_recurrence(&pb, &energy, m.max(j + 2))?;
        let numeric_tail_log10 = tr.t[j + 1..]
            .iter()
            .map(BigReal::log10_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        reports.push(TerminationReport {
            polynomial: exact_t.iter().map(|p| p.eval(&r.value)).collect(),
            lambda: r.value,
            structural_zero,
            numeric_tail_log10,
        });
    }
    Ok(QuasiExactLevel { j, energy, reports })
}
