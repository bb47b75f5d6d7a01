//! Eigenfunction reconstruction, sampling, normalization and CSV export.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::bigreal::{BigReal, Precision};
use crate::error::{AtemError, Result};
use crate::frobenius::{leibniz_recurrence, CoeffTrace};
use crate::problems::Problem;
use crate::regular::{boundary_from_trace, iterate_pq, ParityHint, PQTrace, RegularProblem};

/// Taylor coefficients `t_n` (factorials absorbed), ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorPolynomial {
    pub coeffs: Vec<BigReal>,
}

impl TaylorPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn precision(&self) -> Precision {
        self.coeffs[0].precision()
    }

    /// Flips the overall sign so the first nonzero coefficient is positive.
    pub fn with_positive_lead(mut self) -> Self {
        if let Some(c) = self.coeffs.iter().find(|c| !c.is_zero()) {
            if c.signum() < 0 {
                self.coeffs.iter_mut().for_each(|c| *c = -&*c);
            }
        }
        self
    }

    /// Horner evaluation in extended precision.
    pub fn eval(&self, x: &BigReal) -> BigReal {
        let mut acc = BigReal::zero(x.precision());
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + c;
        }
        acc
    }

    pub fn derivative(&self) -> TaylorPolynomial {
        let prec = self.precision();
        if self.coeffs.len() <= 1 {
            return TaylorPolynomial {
                coeffs: vec![BigReal::zero(prec)],
            };
        }
        TaylorPolynomial {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c.mul_i64(i as i64))
                .collect(),
        }
    }
}

impl From<CoeffTrace> for TaylorPolynomial {
    fn from(trace: CoeffTrace) -> Self {
        TaylorPolynomial { coeffs: trace.t }
    }
}

/// `t_0 = f0`, `t_1 = f1`, `t_n = [q_{n-2}(0) f0 + p_{n-2}(0) f1] / n!`
/// for `2 <= n <= m + 2`.
pub fn taylor_coeffs(trace: &PQTrace, f0: &BigReal, f1: &BigReal) -> TaylorPolynomial {
    let mut coeffs = vec![f0.clone(), f1.clone()];
    let mut fact = BigReal::one(f0.precision());
    for n in 2..=trace.m + 2 {
        fact = fact.mul_i64(n as i64);
        let num = &(&trace.q_at_0[n - 2] * f0) + &(&trace.p_at_0[n - 2] * f1);
        coeffs.push(&num / &fact);
    }
    TaylorPolynomial { coeffs }
}

/// Eigenfunction polynomial of degree `k` at a refined eigenvalue, with
/// the first nonzero coefficient positive.
///
/// For parity problems the start is exactly `(1, 0)` or `(0, 1)`: the
/// sector is the one whose single-row functional changes sign across
/// `E ± h`. (Near a converged root the rows `m` and `m - 2` of the right
/// sector are both nearly zero, so row magnitudes alone do not decide it.)
pub fn eigenfunction(problem: &Problem, energy: &BigReal, k: usize) -> Result<TaylorPolynomial> {
    let m = problem.recurrence_depth(k);
    let poly = match problem {
        Problem::Regular(p) => {
            let trace = iterate_pq(p, energy, m)?;
            let (f0, f1) = if p.parity_hint == ParityHint::EvenPotential {
                parity_start(p, energy, m)?
            } else {
                boundary_from_trace(&trace)?
            };
            taylor_coeffs(&trace, &f0, &f1)
        }
        Problem::Singular(p) => leibniz_recurrence(p, energy, m)?.into(),
    };
    Ok(poly.with_positive_lead())
}

fn parity_start(p: &RegularProblem, energy: &BigReal, m: usize) -> Result<(BigReal, BigReal)> {
    let prec = p.precision();
    let h = BigReal::from_f64(PARITY_PROBE * energy.to_f64().abs().max(1.0), prec);
    let lo = iterate_pq(p, &(energy - &h), m)?;
    let hi = iterate_pq(p, &(energy + &h), m)?;
    let (even_row, odd_row) = if m.is_multiple_of(2) { (m, m - 1) } else { (m - 1, m) };
    let flips = |a: &BigReal, b: &BigReal| a.signum() * b.signum() <= 0;
    let even = flips(&lo.q_at_0[even_row], &hi.q_at_0[even_row]);
    let odd = flips(&lo.p_at_0[odd_row], &hi.p_at_0[odd_row]);
    let (zero, one) = (BigReal::zero(prec), BigReal::one(prec));
    match (even, odd) {
        (true, false) => Ok((one, zero)),
        (false, true) => Ok((zero, one)),
        _ => {
            // both or neither: fall back to the dominant boundary component
            let (f0, f1) = boundary_from_trace(&iterate_pq(p, energy, m)?)?;
            Ok(if f0.abs_cmp(&f1) == Ordering::Less {
                (zero, one)
            } else {
                (one, zero)
            })
        }
    }
}

/// Relative energy offset used to probe which parity row changes sign.
const PARITY_PROBE: f64 = 1e-10;

/// `f'' - p0 f' - q0 f` at `x`, with derivatives of the polynomial taken
/// analytically.
pub fn ode_residual(
    poly: &TaylorPolynomial,
    problem: &RegularProblem,
    energy: &BigReal,
    x: &BigReal,
) -> BigReal {
    let d1 = poly.derivative();
    let d2 = d1.derivative();
    let q0 = problem.q0_at(energy, problem.q0_base.degree().max(problem.q0_e.degree()));
    &(&d2.eval(x) - &(&problem.p0.eval(x) * &d1.eval(x))) - &(&q0.eval(x) * &poly.eval(x))
}

/// `exp(-∫W)` for regular problems, `x^(l+1/2) exp(-omega x²/4)` for
/// radial ones.
pub fn envelope_eval(problem: &Problem, x: &BigReal) -> Result<BigReal> {
    match problem {
        Problem::Regular(p) => Ok((-&p.envelope_integral.eval(x)).exp()),
        Problem::Singular(p) => {
            if x.signum() < 0 {
                return Err(AtemError::Domain(x.to_f64()));
            }
            let prec = x.precision();
            let env = &p.envelope;
            let gauss = (-&(&(&env.omega * x) * x).div_i64(4)).exp();
            if x.is_zero() {
                return Ok(BigReal::zero(prec));
            }
            let power = &env.ell + &BigReal::from_ratio(1, 2, prec);
            Ok(&(&power * &x.ln()).exp() * &gauss)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveSamples {
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub normalized: bool,
    /// `∫psi²` before normalization.
    pub norm_estimate: f64,
    /// `|S_N - S_{N/2}|` relative to the normalized integral.
    pub quadrature_error: f64,
    /// Samples with `|x|` beyond this were zeroed because the truncated
    /// series can no longer be trusted there.
    pub trusted_halfwidth: f64,
}

impl WaveSamples {
    /// Sign changes, ignoring samples below `1e-8 max|psi|`.
    pub fn nodes(&self) -> usize {
        let max = self.psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut last = 0.0f64;
        let mut count = 0;
        for &v in &self.psi {
            if v.abs() <= 1e-8 * max {
                continue;
            }
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
        count
    }
}

fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len() - 1;
    let mut s = y[0] + y[n];
    for (i, v) in y.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// `∫psi²` on the sample grid and its half-resolution difference.
fn norm_with_error(x: &[f64], psi: &[f64]) -> (f64, f64) {
    let h = x[1] - x[0];
    let sq: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let full = simpson(&sq, h);
    let coarse = if (sq.len() - 1).is_multiple_of(4) {
        let half: Vec<f64> = sq.iter().step_by(2).copied().collect();
        simpson(&half, 2.0 * h)
    } else {
        full
    };
    (full, (full - coarse).abs())
}

const NORM_FLOOR: f64 = 1e-300;
/// Tail terms of the truncated series must stay below this fraction of
/// max|psi| for a sample to be kept.
const TAIL_TOLERANCE: f64 = 1e-10;
const MIN_TRUNCATED_DEGREE: usize = 8;

/// Samples `psi = f · envelope` on `[-L, L]` (or `[0, L]` for radial
/// problems) with `n` Simpson intervals and normalizes to `∫psi² = 1`.
pub fn assemble_and_normalize(
    poly: &TaylorPolynomial,
    problem: &Problem,
    half_width: f64,
    n: usize,
) -> Result<WaveSamples> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(AtemError::InvalidParam {
            name: "half_width".into(),
            reason: "must be positive".into(),
        });
    }
    if n < 64 || n % 2 == 1 {
        return Err(AtemError::InvalidParam {
            name: "n".into(),
            reason: "need an even number of intervals, at least 64".into(),
        });
    }
    let prec = poly.precision();
    let radial = matches!(problem, Problem::Singular(_));
    // x_i = L (2i - N) / N is exactly antisymmetric in i <-> N - i
    let x: Vec<f64> = (0..=n)
        .map(|i| {
            if radial {
                half_width * i as f64 / n as f64
            } else {
                half_width * (2 * i as i64 - n as i64) as f64 / n as f64
            }
        })
        .collect();

    let k = poly.degree();
    // short polynomials are terminated solutions, not truncated series
    let tail_from = if k >= MIN_TRUNCATED_DEGREE { k - 3 } else { k + 1 };
    let mut psi = Vec::with_capacity(x.len());
    let mut tail = Vec::with_capacity(x.len());
    for &xi in &x {
        let xb = BigReal::from_f64(xi, prec);
        let env = envelope_eval(problem, &xb)?;
        psi.push((&poly.eval(&xb) * &env).to_f64());
        let mut t = BigReal::zero(prec);
        for j in tail_from..=k {
            let term = (&poly.coeffs[j] * &xb.powi(j)).abs();
            t = t.max_abs(&term);
        }
        tail.push((&t * &env).to_f64());
    }

    // trusted region: the widest |x| range around the expansion point in
    // which every tail term is negligible against the core maximum
    let core_max = psi
        .iter()
        .zip(&tail)
        .filter(|(p, t)| **t <= 1e-3 * p.abs())
        .fold(0.0f64, |a, (p, _)| a.max(p.abs()));
    let bad = |i: usize| {
        !psi[i].is_finite() || (core_max > 0.0 && tail[i] > TAIL_TOLERANCE * core_max)
    };
    let mut trusted = half_width;
    for (i, xi) in x.iter().enumerate() {
        if bad(i) {
            trusted = trusted.min(xi.abs());
        }
    }
    for (xi, p) in x.iter().zip(psi.iter_mut()) {
        if xi.abs() >= trusted && trusted < half_width {
            *p = 0.0;
        }
    }

    let (norm, err) = norm_with_error(&x, &psi);
    if !(norm > NORM_FLOOR) {
        return Err(AtemError::DegenerateState(norm));
    }
    let s = norm.sqrt();
    psi.iter_mut().for_each(|p| *p /= s);
    Ok(WaveSamples {
        x,
        psi,
        normalized: true,
        norm_estimate: norm,
        quadrature_error: err / norm,
        trusted_halfwidth: trusted,
    })
}

/// Rescales samples to unit norm again, e.g. after editing them.
pub fn normalize(samples: &WaveSamples) -> Result<WaveSamples> {
    let (norm, err) = norm_with_error(&samples.x, &samples.psi);
    if !(norm > NORM_FLOOR) {
        return Err(AtemError::DegenerateState(norm));
    }
    let s = norm.sqrt();
    Ok(WaveSamples {
        psi: samples.psi.iter().map(|p| p / s).collect(),
        normalized: true,
        norm_estimate: norm,
        quadrature_error: err / norm,
        ..samples.clone()
    })
}

/// CSV text: header `x,psi`, one row per sample, 17 significant digits.
pub fn to_csv(samples: &WaveSamples) -> String {
    let mut out = String::from("x,psi\n");
    for (x, p) in samples.x.iter().zip(&samples.psi) {
        out.push_str(&format!("{x:.16e},{p:.16e}\n"));
    }
    out
}

/// Writes [`to_csv`] atomically: a temporary file next to `path` is
/// renamed into place, so a failed export leaves no partial file.
pub fn export_csv(samples: &WaveSamples, path: &Path) -> Result<()> {
    if samples.psi.iter().chain(&samples.x).any(|v| !v.is_finite()) {
        return Err(AtemError::InvalidParam {
            name: "samples".into(),
            reason: "non-finite value".into(),
        });
    }
    write_atomic(path, to_csv(samples).as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| AtemError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
