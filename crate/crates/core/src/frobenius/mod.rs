//! Coefficient recurrence at a regular singular point.
//!
//! Problems of the form `A f'' + B f' + (C_base + E C_E) f = 0` with
//! `A(0) = 0` cannot be pushed through the `p0 = -B/A` route because the
//! coefficients have poles at the expansion point. Equating powers of `x`
//! in the polynomial form instead gives, for every order `n`,
//!
//! ```text
//! sum_i a_i (n-i+2)(n-i+1) t_{n-i+2} + sum_i b_i (n-i+1) t_{n-i+1} + sum_i c_i t_{n-i} = 0
//! ```
//!
//! which is solved for the highest Taylor coefficient present. For
//! `A(0) = 0` that is `t_{n+1}` with leading factor `(n+1)(n a_1 + b_0)`.

mod quasi_exact;

pub use quasi_exact::{
    exact_dot_coefficients, quasi_exact_check, quasi_exact_lambdas, verify_termination, ExactPoly,
    QuasiExactLevel,
    TerminationReport,
};

use crate::bigreal::{BigReal, Precision};
use crate::error::{AtemError, Result};
use crate::series::TruncSeries;

/// Radial prefactor `u(r) = r^(l + 1/2) exp(-omega r^2 / 4) f(r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialEnvelope {
    pub ell: BigReal,
    pub omega: BigReal,
}

/// Bookkeeping for `E_r = E_n + (|l| + 1) hbar_omega + L_r omega_c / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyOffset {
    pub hbar_omega: BigReal,
    pub omega_c: BigReal,
    pub l_r: BigReal,
}

impl EnergyOffset {
    pub fn natural(prec: Precision) -> Self {
        EnergyOffset {
            hbar_omega: BigReal::one(prec),
            omega_c: BigReal::zero(prec),
            l_r: BigReal::zero(prec),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularProblem {
    pub a: TruncSeries,
    pub b: TruncSeries,
    pub c_base: TruncSeries,
    pub c_e: TruncSeries,
    pub envelope: RadialEnvelope,
    pub offset: EnergyOffset,
}

/// Taylor coefficients `t_n = f^(n)(0) / n!` at a fixed energy.
#[derive(Clone, Debug)]
pub struct CoeffTrace {
    pub m: usize,
    pub t: Vec<BigReal>,
    pub energy: BigReal,
    /// `-C_base(0)`; the coupling `lambda` for the quantum dot.
    pub lambda: BigReal,
}

impl SingularProblem {
    pub fn new(
        a: TruncSeries,
        b: TruncSeries,
        c_base: TruncSeries,
        c_e: TruncSeries,
        envelope: RadialEnvelope,
        offset: EnergyOffset,
    ) -> Result<Self> {
        let prec = a.precision();
        if [&b, &c_base, &c_e].iter().any(|s| s.precision() != prec) {
            return Err(AtemError::Schema(
                "all polynomials must share one precision".into(),
            ));
        }
        let pb = SingularProblem {
            a,
            b,
            c_base,
            c_e,
            envelope,
            offset,
        };
        if pb.is_singular() && pb.a.coeff(1).is_zero() {
            return Err(AtemError::IrregularSingularPoint);
        }
        Ok(pb)
    }

    /// The two-electron quantum-dot relative-motion equation
    /// `-r f'' + (omega r^2 - (2l+1)) f' - (E r + lambda) f = 0`.
    pub fn quantum_dot(omega: BigReal, lambda: BigReal, ell: BigReal) -> Result<Self> {
        let prec = omega.precision();
        let half = BigReal::from_ratio(-1, 2, prec);
        if ell <= half {
            return Err(AtemError::InvalidParam {
                name: "l".into(),
                reason: "must exceed -1/2".into(),
            });
        }
        let zero = BigReal::zero(prec);
        let one = BigReal::one(prec);
        let two_l_plus_1 = &ell.mul_i64(2) + &one;
        Self::new(
            TruncSeries::from_i64s(&[0, -1], prec),
            TruncSeries::from_coeffs(vec![-two_l_plus_1, zero.clone(), omega.clone()]),
            TruncSeries::from_coeffs(vec![-lambda]),
            TruncSeries::from_i64s(&[0, -1], prec),
            RadialEnvelope { ell, omega },
            EnergyOffset::natural(prec),
        )
    }

    pub fn precision(&self) -> Precision {
        self.a.precision()
    }

    pub fn is_singular(&self) -> bool {
        self.a.coeff(0).is_zero()
    }

    /// `n a_1 + b_0` must not vanish for `0 <= n < m`.
    pub fn check_indicial(&self, m: usize) -> Result<()> {
        if !self.is_singular() {
            return Ok(());
        }
        let (a1, b0) = (self.a.coeff(1), self.b.coeff(0));
        match (0..m).find(|&n| (&a1.mul_i64(n as i64) + &b0).is_zero()) {
            Some(n) => Err(AtemError::ResonantIndicial { n }),
            None => Ok(()),
        }
    }

    /// `E_r` from the solver's `E_n`.
    pub fn radial_energy(&self, e_n: &BigReal) -> BigReal {
        let prec = self.precision();
        let o = &self.offset;
        let l_abs_plus_1 = &self.envelope.ell.abs() + &BigReal::one(prec);
        e_n + &(&l_abs_plus_1 * &o.hbar_omega) + (&o.l_r * &o.omega_c).div_i64(2)
    }
}

/// Solves the order-by-order relations for `t_0..=t_m` given the free
/// leading coefficients (`[t_0]` at a singular point, `[t_0, t_1]` at an
/// ordinary one).
pub fn taylor_coefficients(
    problem: &SingularProblem,
    energy: &BigReal,
    m: usize,
    initial: &[BigReal],
) -> Result<Vec<BigReal>> {
    let prec = problem.precision();
    let free = if problem.is_singular() { 1 } else { 2 };
    if initial.len() != free {
        return Err(AtemError::InvalidParam {
            name: "initial".into(),
            reason: format!("expected {free} free coefficient(s), got {}", initial.len()),
        });
    }
    problem.check_indicial(m)?;

    let deg_c = problem.c_base.degree().max(problem.c_e.degree());
    let c = problem
        .c_base
        .resized(deg_c)
        .add(&problem.c_e.resized(deg_c).scale(energy))?;
    let a = problem.a.coeffs();
    let b = problem.b.coeffs();

    let mut t: Vec<BigReal> = initial.to_vec();
    let mut n = 0usize;
    while t.len() <= m {
        let unknown = n + free;
        let mut lead = BigReal::zero(prec);
        let mut rest = BigReal::zero(prec);
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() || i > n + 2 {
                continue;
            }
            let idx = n + 2 - i;
            let w = ai.mul_i64((idx * idx.saturating_sub(1)) as i64);
            if idx == unknown {
                lead += &w;
            } else {
                rest += &(&w * &t[idx]);
            }
        }
        for (i, bi) in b.iter().enumerate() {
            if bi.is_zero() || i > n + 1 {
                continue;
            }
            let idx = n + 1 - i;
            let w = bi.mul_i64(idx as i64);
            if idx == unknown {
                lead += &w;
            } else {
                rest += &(&w * &t[idx]);
            }
        }
        for (i, ci) in c.coeffs().iter().enumerate() {
            if ci.is_zero() || i > n {
                continue;
            }
            rest += &(ci * &t[n - i]);
        }
        if lead.is_zero() {
            return Err(AtemError::ResonantIndicial { n });
        }
        let next = -(&rest / &lead);
        if !next.is_finite() {
            return Err(AtemError::Overflow { n: unknown });
        }
        t.push(next);
        n += 1;
    }
    t.truncate(m + 1);
    Ok(t)
}

/// Taylor coefficients of the regular solution normalized to `t_0 = 1`.
pub fn leibniz_recurrence(
    problem: &SingularProblem,
    energy: &BigReal,
    m: usize,
) -> Result<CoeffTrace> {
    if m < 2 {
        return Err(AtemError::TooFewIterations { m, min: 2 });
    }
    if !problem.is_singular() {
        return Err(AtemError::Unsupported(
            "leibniz_recurrence needs A(0) = 0; use taylor_coefficients with two free constants"
                .into(),
        ));
    }
    let prec = problem.precision();
    let t = taylor_coefficients(problem, energy, m, &[BigReal::one(prec)])?;
    Ok(CoeffTrace {
        m,
        t,
        energy: energy.clone(),
        lambda: -problem.c_base.coeff(0),
    })
}

fn tail_scale(trace: &CoeffTrace) -> BigReal {
    let prec = trace.t[0].precision();
    let floor = BigReal::from_i64(10, prec).powi(300);
    let floor = BigReal::one(prec) / &floor;
    let m = trace.m;
    trace.t[m - 1].max_abs(&trace.t[m - 2]).max_abs(&floor)
}

/// Normalized tail coefficient `t_m / max(|t_{m-1}|, |t_{m-2}|, 1e-300)`.
pub fn delta_singular(trace: &CoeffTrace) -> BigReal {
    &trace.t[trace.m] / &tail_scale(trace)
}

/// `t_m t_{m-1}` over the squared tail scale: vanishes when either of the
/// two highest retained coefficients does, the singular-point analogue of
/// the two-row termination condition.
pub fn delta_singular_pair(trace: &CoeffTrace) -> BigReal {
    let s = tail_scale(trace);
    &(&trace.t[trace.m] / &s) * &(&trace.t[trace.m - 1] / &s)
}
