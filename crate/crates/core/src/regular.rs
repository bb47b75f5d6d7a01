//! Derivative recurrence for regular problems `f'' = p0 f' + q0 f`.
//!
//! Differentiating the ODE gives `f^(n+2) = p_n f' + q_n f` with
//!
//! ```text
//! p_n = p0 p_{n-1} + p'_{n-1} + q_{n-1}
//! q_n = q0 p_{n-1} + q'_{n-1}
//! ```
//!
//! Values at the origin feed the termination determinant
//! `q_m p_{m-1} - p_m q_{m-1}` whose roots in E approximate eigenvalues.

use crate::bigreal::{BigReal, Precision};
use crate::error::{AtemError, Result};
use crate::series::TruncSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParityHint {
    /// `p0` odd, `q0` even: solutions split into even and odd sectors.
    EvenPotential,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// `f'(0) = 0` sector.
    Even,
    /// `f(0) = 0` sector.
    Odd,
}

/// `f'' = p0(x) f' + (q0_base(x) + E q0_e(x)) f`, with the envelope
/// `psi = f exp(-∫W dx)` recorded for wavefunction assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularProblem {
    pub p0: TruncSeries,
    pub q0_base: TruncSeries,
    pub q0_e: TruncSeries,
    pub envelope_w: TruncSeries,
    pub envelope_integral: TruncSeries,
    pub parity_hint: ParityHint,
}

impl RegularProblem {
    pub fn new(
        p0: TruncSeries,
        q0_base: TruncSeries,
        q0_e: TruncSeries,
        envelope_w: TruncSeries,
        envelope_integral: TruncSeries,
        parity_hint: ParityHint,
    ) -> Result<Self> {
        let prec = p0.precision();
        for (name, s) in [
            ("q0_base", &q0_base),
            ("q0_E", &q0_e),
            ("W", &envelope_w),
            ("W integral", &envelope_integral),
        ] {
            if s.precision() != prec {
                return Err(AtemError::Schema(format!(
                    "{name} has precision {} but p0 has {}",
                    s.precision().bits(),
                    prec.bits()
                )));
            }
        }
        if parity_hint == ParityHint::EvenPotential {
            let has_power = |s: &TruncSeries, odd: bool| {
                s.coeffs()
                    .iter()
                    .enumerate()
                    .any(|(i, c)| (i % 2 == 1) == odd && !c.is_zero())
            };
            if has_power(&p0, false) || has_power(&q0_base, true) || has_power(&q0_e, true) {
                return Err(AtemError::Schema(
                    "even-potential parity needs odd p0 and even q0".into(),
                ));
            }
        }
        Ok(RegularProblem {
            p0,
            q0_base,
            q0_e,
            envelope_w,
            envelope_integral,
            parity_hint,
        })
    }

    pub fn precision(&self) -> Precision {
        self.p0.precision()
    }

    /// `q0(x; E)` as a series of the given degree.
    pub fn q0_at(&self, energy: &BigReal, degree: usize) -> TruncSeries {
        self.q0_base
            .resized(degree)
            .add(&self.q0_e.resized(degree).scale(energy))
            .expect("same degree and precision")
    }

    /// Potential recovered from `q0_base = V + W' - W^2`, valid for
    /// Schrödinger-form problems (`q0_E = -1`, `p0 = 2W`).
    pub fn potential(&self) -> Result<TruncSeries> {
        let prec = self.precision();
        let minus_one = TruncSeries::constant(BigReal::from_i64(-1, prec), 0);
        let two_w = self.envelope_w.scale(&BigReal::from_i64(2, prec));
        let deg = self.p0.degree().max(two_w.degree());
        let schroedinger = self.q0_e.effective_degree() == Some(0)
            && self.q0_e.resized(0) == minus_one
            && self.p0.resized(deg) == two_w.resized(deg);
        if !schroedinger {
            return Err(AtemError::Unsupported(
                "potential is only defined for Schrödinger-form problems (q0_E = -1, p0 = 2W)"
                    .into(),
            ));
        }
        let w = &self.envelope_w;
        let d = self
            .q0_base
            .degree()
            .max(2 * w.degree())
            .max(w.degree().saturating_sub(1));
        let w2 = w.mul_trunc(w, d);
        self.q0_base
            .resized(d)
            .sub(&w.diff().resized(d))?
            .add(&w2)
    }
}

/// Values `p_n(0)`, `q_n(0)` for `n = 0..=m` at a fixed energy.
#[derive(Clone, Debug)]
pub struct PQTrace {
    pub m: usize,
    pub p_at_0: Vec<BigReal>,
    pub q_at_0: Vec<BigReal>,
    pub energy: BigReal,
    pub parity_hint: ParityHint,
}

fn step(
    p0: &TruncSeries,
    q0: &TruncSeries,
    p: &TruncSeries,
    q: &TruncSeries,
    degree: usize,
) -> (TruncSeries, TruncSeries) {
    let p_next = p0
        .mul_trunc(p, degree)
        .add(&p.diff().resized(degree))
        .and_then(|s| s.add(&q.resized(degree)))
        .expect("operands resized to a common degree");
    let q_next = q0
        .mul_trunc(p, degree)
        .add(&q.diff().resized(degree))
        .expect("operands resized to a common degree");
    (p_next, q_next)
}

fn all_finite(s: &TruncSeries) -> bool {
    s.coeffs().iter().all(BigReal::is_finite)
}

/// Runs the recurrence to depth `m`, recording origin values.
///
/// Series start at degree `m + 2` and are re-truncated to `m + 2 - n` at
/// step `n`; the dropped terms cannot reach the constant term of step `m`.
pub fn iterate_pq(problem: &RegularProblem, energy: &BigReal, m: usize) -> Result<PQTrace> {
    if m < 2 {
        return Err(AtemError::TooFewIterations { m, min: 2 });
    }
    let top = m + 2;
    let p0 = problem.p0.resized(top);
    let q0 = problem.q0_at(energy, top);
    let mut p_at_0 = Vec::with_capacity(m + 1);
    let mut q_at_0 = Vec::with_capacity(m + 1);
    p_at_0.push(p0.eval_origin());
    q_at_0.push(q0.eval_origin());

    let mut p = p0.clone();
    let mut q = q0.clone();
    for n in 1..=m {
        let (pn, qn) = step(&p0, &q0, &p, &q, top - n);
        if !all_finite(&pn) || !all_finite(&qn) {
            return Err(AtemError::Overflow { n });
        }
        p_at_0.push(pn.eval_origin());
        q_at_0.push(qn.eval_origin());
        p = pn;
        q = qn;
    }
    Ok(PQTrace {
        m,
        p_at_0,
        q_at_0,
        energy: energy.clone(),
        parity_hint: problem.parity_hint,
    })
}

/// Full series `(p_n, q_n)` for `n = 0..=n_max`, all carried at a fixed
/// `degree`. The coefficients of step `n` are exact up to `degree - n`.
pub fn pq_series(
    problem: &RegularProblem,
    energy: &BigReal,
    n_max: usize,
    degree: usize,
) -> Vec<(TruncSeries, TruncSeries)> {
    let p0 = problem.p0.resized(degree);
    let q0 = problem.q0_at(energy, degree);
    let mut out = vec![(p0.clone(), q0.clone())];
    for _ in 1..=n_max {
        let (p, q) = out.last().expect("seeded");
        let next = step(&p0, &q0, p, q, degree);
        out.push(next);
    }
    out
}

/// Termination determinant `q_m(0) p_{m-1}(0) - p_m(0) q_{m-1}(0)`.
pub fn delta(trace: &PQTrace) -> BigReal {
    let m = trace.m;
    &trace.q_at_0[m] * &trace.p_at_0[m - 1] - &trace.p_at_0[m] * &trace.q_at_0[m - 1]
}

/// Single-row termination for parity problems: `q_m(0)` in the even
/// sector, `p_m(0)` in the odd one.
pub fn delta_parity(trace: &PQTrace, parity: Parity) -> Result<BigReal> {
    if trace.parity_hint != ParityHint::EvenPotential {
        return Err(AtemError::NotParityProblem);
    }
    Ok(match parity {
        Parity::Even => trace.q_at_0[trace.m].clone(),
        Parity::Odd => trace.p_at_0[trace.m].clone(),
    })
}

/// Non-trivial `(f(0), f'(0))` solving the termination rows at a refined
/// eigenvalue, scaled so its largest component is `+1`.
///
/// Row `m` is used unless it has collapsed relative to row `m - 1` (a
/// parity state whose own sector row is the one being driven to zero);
/// collapse is measured by each row's growth over the row two steps
/// earlier, since rows of different parity grow at different rates.
pub fn boundary_from_trace(trace: &PQTrace) -> Result<(BigReal, BigReal)> {
    let m = trace.m;
    let row_norm = |n: usize| trace.p_at_0[n].max_abs(&trace.q_at_0[n]);
    let growth = |n: usize| -> f64 {
        if n < 2 {
            return 0.0;
        }
        let num = row_norm(n).log10_abs();
        let den = row_norm(n - 2).log10_abs();
        if den == f64::NEG_INFINITY {
            if num == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            num - den
        }
    };

    let candidates = {
        let use_previous = row_norm(m).is_zero() || growth(m) < growth(m - 1) - 6.0;
        if use_previous {
            [m - 1, m]
        } else {
            [m, m - 1]
        }
    };
    for n in candidates {
        let (f0, f1) = (trace.p_at_0[n].clone(), -&trace.q_at_0[n]);
        let lead = if f0.abs_cmp(&f1) == std::cmp::Ordering::Less {
            f1.clone()
        } else {
            f0.clone()
        };
        if lead.is_zero() {
            continue;
        }
        return Ok((&f0 / &lead, &f1 / &lead));
    }
    Err(AtemError::IndeterminateBoundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: Precision = Precision::DEFAULT;

    pub fn anharmonic(g: &str) -> RegularProblem {
        let g = BigReal::parse(g, P).unwrap();
        let zero = BigReal::zero(P);
        let one = BigReal::one(P);
        RegularProblem::new(
            TruncSeries::from_i64s(&[0, 2], P),
            TruncSeries::from_coeffs(vec![one.clone(), zero.clone(), zero.clone(), zero, g]),
            TruncSeries::from_i64s(&[-1], P),
            TruncSeries::from_i64s(&[0, 1], P),
            TruncSeries::from_coeffs(vec![BigReal::zero(P), BigReal::zero(P), BigReal::from_ratio(1, 2, P)]),
            ParityHint::EvenPotential,
        )
        .unwrap()
    }

    fn e(x: f64) -> BigReal {
        BigReal::from_f64(x, P)
    }

    #[test]
    fn first_step_constants() {
        for g in ["0", "0.1", "3"] {
            let pb = anharmonic(g);
            for en in [0.25, 1.5, 7.0] {
                let t = iterate_pq(&pb, &e(en), 2).unwrap();
                assert_eq!(t.p_at_0[1], e(3.0 - en));
                assert!(t.q_at_0[1].is_zero());
                assert_eq!(t.q_at_0[2], e((1.0 - en) * (5.0 - en)));
                assert!(t.p_at_0[2].is_zero());
            }
        }
    }

    #[test]
    fn p1_series_origin_value() {
        let pb = anharmonic("0.1");
        let series = pq_series(&pb, &e(2.5), 1, 6);
        assert_eq!(series[1].0.eval_origin(), e(0.5));
    }

    #[test]
    fn delta_m2_closed_form() {
        for g in ["0", "0.1"] {
            let pb = anharmonic(g);
            for en in [0.5, 2.0, 4.5, 6.0] {
                let t = iterate_pq(&pb, &e(en), 2).unwrap();
                assert_eq!(delta(&t), e((1.0 - en) * (3.0 - en) * (5.0 - en)));
            }
        }
    }

    #[test]
    fn harmonic_exact_levels() {
        let pb = anharmonic("0");
        let t = iterate_pq(&pb, &e(1.0), 30).unwrap();
        assert!(t.q_at_0.iter().all(BigReal::is_zero));
        for m in 2..=20 {
            let t = iterate_pq(&pb, &e(3.0), m).unwrap();
            assert!(delta(&t).is_zero(), "m = {m}");
        }
    }

    #[test]
    fn parity_functionals() {
        let pb = anharmonic("0");
        let t = iterate_pq(&pb, &e(2.0), 2).unwrap();
        assert_eq!(delta_parity(&t, Parity::Even).unwrap(), e(-3.0));
        for root in [1.0, 5.0] {
            let t = iterate_pq(&pb, &e(root), 2).unwrap();
            assert!(delta_parity(&t, Parity::Even).unwrap().is_zero());
        }
        for root in [3.0, 7.0, 11.0] {
            let t = iterate_pq(&pb, &e(root), 11).unwrap();
            assert!(delta_parity(&t, Parity::Odd).unwrap().is_zero(), "E = {root}");
        }
    }

    #[test]
    fn parity_on_generic_problem_is_rejected() {
        let mut pb = anharmonic("0.1");
        pb.parity_hint = ParityHint::None;
        let t = iterate_pq(&pb, &e(1.0), 4).unwrap();
        assert!(matches!(
            delta_parity(&t, Parity::Even),
            Err(AtemError::NotParityProblem)
        ));
    }

    #[test]
    fn even_parity_constructor_check() {
        let bad = RegularProblem::new(
            TruncSeries::from_i64s(&[1, 2], P),
            TruncSeries::from_i64s(&[1], P),
            TruncSeries::from_i64s(&[-1], P),
            TruncSeries::from_i64s(&[0, 1], P),
            TruncSeries::from_i64s(&[0], P),
            ParityHint::EvenPotential,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn too_few_iterations() {
        assert!(matches!(
            iterate_pq(&anharmonic("0"), &e(1.0), 1),
            Err(AtemError::TooFewIterations { .. })
        ));
    }

    #[test]
    fn boundary_even_and_odd_harmonic_states() {
        let pb = anharmonic("0");
        // m even: E = 5 is a root of q_m, an even state
        let t = iterate_pq(&pb, &e(5.0), 10).unwrap();
        let (f0, f1) = boundary_from_trace(&t).unwrap();
        assert_eq!(f0, e(1.0));
        assert!(f1.is_zero());
        // E = 3 is a root of p_{m-1}: odd state
        let t = iterate_pq(&pb, &e(3.0), 10).unwrap();
        let (f0, f1) = boundary_from_trace(&t).unwrap();
        assert!(f0.is_zero());
        assert_eq!(f1, e(1.0));
    }

    #[test]
    fn boundary_is_scale_invariant() {
        let pb = anharmonic("0.1");
        let t = iterate_pq(&pb, &e(1.0652855095), 20).unwrap();
        let base = boundary_from_trace(&t).unwrap();
        for c in [-3.0, 0.5, 1e40] {
            let mut scaled = t.clone();
            let c = e(c);
            scaled.p_at_0.iter_mut().for_each(|v| *v *= &c);
            scaled.q_at_0.iter_mut().for_each(|v| *v *= &c);
            assert_eq!(boundary_from_trace(&scaled).unwrap(), base);
        }
    }

    #[test]
    fn indeterminate_boundary() {
        let mut t = iterate_pq(&anharmonic("0"), &e(1.0), 4).unwrap();
        for v in t.p_at_0.iter_mut().chain(t.q_at_0.iter_mut()) {
            *v = BigReal::zero(P);
        }
        assert!(matches!(
            boundary_from_trace(&t),
            Err(AtemError::IndeterminateBoundary)
        ));
    }

    #[test]
    fn potential_of_anharmonic() {
        let v = anharmonic("0.1").potential().unwrap();
        let g = BigReal::parse("0.1", P).unwrap();
        assert_eq!(v.coeff(0), BigReal::zero(P));
        assert_eq!(v.coeff(2), BigReal::one(P));
        assert_eq!(v.coeff(4), g);
    }
}
