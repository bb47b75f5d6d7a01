//! Independent oracles and property checks shared by the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use atem::bigreal::{BigReal, Precision};
use atem::frobenius::{taylor_coefficients, EnergyOffset, RadialEnvelope, SingularProblem};
use atem::problems::{builtin, Problem, ProblemDef};
use atem::regular::{delta, delta_parity, iterate_pq, Parity, RegularProblem};
use atem::series::TruncSeries;

pub const P: Precision = Precision::DEFAULT;

pub type Check = Result<String, String>;

pub fn params(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
    kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

pub fn anharmonic_def(g: &str) -> ProblemDef {
    builtin("anharmonic", &params(&[("g", g)]), P).unwrap()
}

pub fn regular(def: &ProblemDef) -> &RegularProblem {
    match &def.problem {
        Problem::Regular(p) => p,
        Problem::Singular(_) => panic!("expected a regular problem"),
    }
}

pub fn dot_def(omega: &str, lambda: &str, l: &str) -> ProblemDef {
    builtin(
        "quantum_dot",
        &params(&[("omega", omega), ("lambda", lambda), ("l", l)]),
        P,
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// exact rational arithmetic

pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn q_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_big(x: &BigRational) -> BigReal {
    let p = |n: &BigInt| BigReal::parse(&n.to_string(), P).unwrap();
    &p(x.numer()) / &p(x.denom())
}

/// `|a - b| / max(|b|, tiny)` as log10, with `b` exact.
pub fn rel_err_log10(a: &BigReal, b: &BigRational) -> f64 {
    let bb = to_big(b);
    if b.is_zero() {
        return a.log10_abs();
    }
    (a - &bb).log10_abs() - bb.log10_abs()
}

/// Polynomial in one variable with rational coefficients, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct QPoly(pub Vec<BigRational>);

impl QPoly {
    pub fn constant(c: BigRational) -> Self {
        QPoly(vec![c])
    }

    fn trim(mut self) -> Self {
        while self.0.len() > 1 && self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    pub fn add(&self, o: &QPoly) -> QPoly {
        let n = self.0.len().max(o.0.len());
        let z = BigRational::zero();
        QPoly(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&z) + o.0.get(i).unwrap_or(&z))
                .collect(),
        )
        .trim()
    }

    pub fn mul(&self, o: &QPoly) -> QPoly {
        let mut out = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        QPoly(out).trim()
    }

    pub fn scale(&self, k: &BigRational) -> QPoly {
        QPoly(self.0.iter().map(|c| c * k).collect()).trim()
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.0
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + c)
    }
}

/// Coefficients of a regular problem `f'' = p0 f' + (qb + E qe) f` with
/// exact rational data.
pub struct ExactRegular {
    pub p0: Vec<BigRational>,
    pub q0_base: Vec<BigRational>,
    pub q0_e: Vec<BigRational>,
}

impl ExactRegular {
    pub fn anharmonic(g: BigRational) -> Self {
        ExactRegular {
            p0: vec![q_int(0), q_int(2)],
            q0_base: vec![q_int(1), q_int(0), q_int(0), q_int(0), g],
            q0_e: vec![q_int(-1)],
        }
    }

    /// Taylor coefficients `t_0..=t_n_max` of the solution with
    /// `(f(0), f'(0)) = (f0, f1)`, as polynomials in `E`, from the plain
    /// power-series recurrence
    /// `(n+2)(n+1) t_{n+2} = sum_i p0_i (n-i+1) t_{n-i+1} + sum_i q0_i t_{n-i}`.
    pub fn taylor_symbolic(&self, f0: i64, f1: i64, n_max: usize) -> Vec<QPoly> {
        let mut t = vec![QPoly::constant(q_int(f0)), QPoly::constant(q_int(f1))];
        let e_poly = QPoly(vec![q_int(0), q_int(1)]);
        for n in 0..n_max.saturating_sub(1) {
            let mut acc = QPoly::constant(q_int(0));
            for (i, c) in self.p0.iter().enumerate() {
                if i <= n + 1 && !c.is_zero() {
                    let k = q_int((n + 1 - i) as i64) * c;
                    acc = acc.add(&t[n + 1 - i].scale(&k));
                }
            }
            let deg = self.q0_base.len().max(self.q0_e.len());
            for i in 0..deg.min(n + 1) {
                let zero = BigRational::zero();
                let qb = self.q0_base.get(i).unwrap_or(&zero);
                let qe = self.q0_e.get(i).unwrap_or(&zero);
                let coeff = QPoly(vec![qb.clone(), BigRational::zero()]).add(&e_poly.scale(qe));
                acc = acc.add(&t[n - i].mul(&coeff));
            }
            let denom = q_int(((n + 2) * (n + 1)) as i64);
            t.push(acc.scale(&denom.recip()));
        }
        t.truncate(n_max + 1);
        t
    }

    /// `(p_n(0), q_n(0))` for `n = 0..=m` as polynomials in `E`, read off
    /// `f^(n+2)(0) = p_n(0) f'(0) + q_n(0) f(0)`.
    pub fn pq_symbolic(&self, m: usize) -> Vec<(QPoly, QPoly)> {
        let even = self.taylor_symbolic(1, 0, m + 2);
        let odd = self.taylor_symbolic(0, 1, m + 2);
        let mut fact = q_int(1);
        let mut out = Vec::new();
        for n in 0..=m + 2 {
            if n >= 1 {
                fact *= q_int(n as i64);
            }
            if n >= 2 {
                out.push((odd[n].scale(&fact), even[n].scale(&fact)));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// property checks

pub fn check_recurrence_oracle() -> Check {
    // g = 1/10 and several rational energies, m up to 24, exact comparison
    let ex = ExactRegular::anharmonic(q(1, 10));
    let def = anharmonic_def("0.1");
    let pb = regular(&def);
    let m = 24;
    let sym = ex.pq_symbolic(m);
    let mut worst = f64::NEG_INFINITY;
    for e in [q(0, 1), q(1, 1), q(21, 20), q(133, 10), q(-7, 3)] {
        let trace = iterate_pq(pb, &to_big(&e), m).map_err(|e| e.to_string())?;
        for (n, (ps, qs)) in sym.iter().enumerate() {
            let (pv, qv) = (ps.eval(&e), qs.eval(&e));
            for (got, want) in [(&trace.p_at_0[n], &pv), (&trace.q_at_0[n], &qv)] {
                if want.is_zero() {
                    if !got.is_zero() {
                        return Err(format!("n={n}: structural zero lost"));
                    }
                    continue;
                }
                worst = worst.max(rel_err_log10(got, want));
            }
        }
    }
    if worst < -30.0 {
        Ok(format!("p_n(0), q_n(0) for n<=24 vs exact power series: max rel err 1e{worst:.0}"))
    } else {
        Err(format!("max rel err 1e{worst:.1}"))
    }
}

pub fn check_symbolic_e() -> Check {
    // delta_m(E) as an exact polynomial in E for m <= 6
    let mut worst = f64::NEG_INFINITY;
    for (gd, g) in [("0", q(0, 1)), ("0.1", q(1, 10)), ("3", q(3, 1))] {
        let ex = ExactRegular::anharmonic(g.clone());
        let def = anharmonic_def(gd);
        let pb = regular(&def);
        let sym = ex.pq_symbolic(6);
        for m in 2..=6 {
            let (pm, qm) = &sym[m];
            let (pm1, qm1) = &sym[m - 1];
            let neg = QPoly::constant(q_int(-1));
            let dm = qm.mul(pm1).add(&pm.mul(qm1).mul(&neg));
            for e in [q(1, 2), q(3, 1), q(106, 100), q(77, 7)] {
                let want = dm.eval(&e);
                let got = delta(&iterate_pq(pb, &to_big(&e), m).unwrap());
                if want.is_zero() {
                    if !got.is_zero() {
                        return Err(format!("g={g} m={m} E={e}: expected exact zero"));
                    }
                    continue;
                }
                worst = worst.max(rel_err_log10(&got, &want));
            }
        }
    }
    // and the m = 2 harmonic closed form (1-E)(3-E)(5-E)
    let h = ExactRegular::anharmonic(q_int(0)).pq_symbolic(2);
    let d2 = h[2].1.mul(&h[1].0).add(&h[2].0.mul(&h[1].1).scale(&q_int(-1)));
    let closed = QPoly(vec![q_int(15), q_int(-23), q_int(9), q_int(-1)]);
    if d2 != closed {
        return Err(format!("m=2 harmonic delta {d2:?}"));
    }
    if worst < -30.0 {
        Ok(format!("delta_m(E), m<=6, three g values: max rel err 1e{worst:.0}"))
    } else {
        Err(format!("max rel err 1e{worst:.1}"))
    }
}

pub fn check_parity_structure() -> Check {
    let def = anharmonic_def("0.1");
    let pb = regular(&def);
    for e in ["0.3", "1.0652855095", "7.25"] {
        let tr = iterate_pq(pb, &BigReal::parse(e, P).unwrap(), 40).unwrap();
        for n in 0..=40 {
            let zero = if n % 2 == 0 { &tr.p_at_0[n] } else { &tr.q_at_0[n] };
            if !zero.is_zero() {
                return Err(format!("E={e}: parity zero missing at n={n}"));
            }
        }
        for m in 3..=40 {
            let sub = iterate_pq(pb, &BigReal::parse(e, P).unwrap(), m).unwrap();
            let prev = iterate_pq(pb, &BigReal::parse(e, P).unwrap(), m - 1).unwrap();
            let (even, odd) = if m % 2 == 0 {
                (delta_parity(&sub, Parity::Even).unwrap(), delta_parity(&prev, Parity::Odd).unwrap())
            } else {
                (delta_parity(&prev, Parity::Even).unwrap(), -delta_parity(&sub, Parity::Odd).unwrap())
            };
            if delta(&sub) != &even * &odd {
                return Err(format!("E={e} m={m}: delta != even x odd sector product"));
            }
        }
    }
    Ok("structural zeros for n<=40; delta_m = (even row)(odd row) exactly for m<=40".into())
}

/// Regular-point equivalence: the same ODE through the derivative
/// recurrence and through the order-by-order Frobenius solver, once with
/// `A = 1` and once multiplied through by `1 - x`.
pub fn check_frobenius_equivalence() -> Check {
    let g = q(1, 10);
    let ex = ExactRegular::anharmonic(g);
    let def = anharmonic_def("0.1");
    let pb = regular(&def);
    let n_max = 20;
    let mut worst = f64::NEG_INFINITY;
    for e in [q(1, 1), q(53, 10)] {
        let eb = to_big(&e);
        // E is folded into C_base, so C_E = 0 below
        let q0 = pb.q0_at(&eb, 4);
        let minus = |s: &TruncSeries| s.scale(&BigReal::from_i64(-1, P));
        let one_minus_x = TruncSeries::from_i64s(&[1, -1], P);
        let forms = [
            (TruncSeries::from_i64s(&[1], P), minus(&pb.p0), minus(&q0)),
            (
                one_minus_x.clone(),
                minus(&one_minus_x.mul_trunc(&pb.p0, 2)),
                minus(&one_minus_x.mul_trunc(&q0, 5)),
            ),
        ];
        for (a, b, c) in forms {
            let sp = SingularProblem::new(
                a,
                b,
                c,
                TruncSeries::from_i64s(&[0], P),
                RadialEnvelope {
                    ell: BigReal::zero(P),
                    omega: BigReal::one(P),
                },
                EnergyOffset::natural(P),
            )
            .map_err(|e| e.to_string())?;
            for (f0, f1) in [(1, 0), (0, 1), (2, -3)] {
                let t = taylor_coefficients(
                    &sp,
                    &BigReal::zero(P),
                    n_max,
                    &[BigReal::from_i64(f0, P), BigReal::from_i64(f1, P)],
                )
                .map_err(|e| e.to_string())?;
                let sym_even = ex.taylor_symbolic(1, 0, n_max);
                let sym_odd = ex.taylor_symbolic(0, 1, n_max);
                let trace = iterate_pq(pb, &eb, n_max).unwrap();
                let via_pq = atem::wavefunction::taylor_coeffs(
                    &trace,
                    &BigReal::from_i64(f0, P),
                    &BigReal::from_i64(f1, P),
                );
                let want: Vec<BigRational> = (0..=n_max)
                    .map(|n| sym_even[n].eval(&e) * q_int(f0) + sym_odd[n].eval(&e) * q_int(f1))
                    .collect();
                // exact zeros may come back as round-off when A(x) mixes orders;
                // measure those against the largest coefficient
                let scale = want
                    .iter()
                    .map(|w| to_big(w).log10_abs())
                    .fold(f64::NEG_INFINITY, f64::max);
                for n in 0..=n_max {
                    for got in [&t[n], &via_pq.coeffs[n]] {
                        let err = if want[n].is_zero() {
                            got.log10_abs() - scale
                        } else {
                            rel_err_log10(got, &want[n])
                        };
                        worst = worst.max(err);
                    }
                }
            }
        }
    }
    if worst < -30.0 {
        Ok(format!("Frobenius (A=1, A=1-x) == derivative recurrence, n<=20: max rel err 1e{worst:.0}"))
    } else {
        Err(format!("max rel err 1e{worst:.1}"))
    }
}

/// Ring axioms, derivative Leibniz rule and truncation coherence on
/// random integer-coefficient series (exact in extended precision).
pub fn check_series_laws(cases: u32) -> Check {
    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};

    let coeffs = || proptest::collection::vec(-1000i64..1000, 1..12);
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&(coeffs(), coeffs(), coeffs(), 0usize..14), |(a, b, c, d)| {
            let s = |v: &Vec<i64>| TruncSeries::from_i64s(v, P).resized(d);
            let (a, b, c) = (s(&a), s(&b), s(&c));
            // commutativity, associativity, distributivity
            prop_assert_eq!(a.mul_trunc(&b, d), b.mul_trunc(&a, d));
            prop_assert_eq!(
                a.mul_trunc(&b, d).mul_trunc(&c, d),
                a.mul_trunc(&b.mul_trunc(&c, d), d)
            );
            prop_assert_eq!(
                a.mul_trunc(&b.add(&c).unwrap(), d),
                a.mul_trunc(&b, d).add(&a.mul_trunc(&c, d)).unwrap()
            );
            prop_assert_eq!(a.add(&b).unwrap().sub(&b).unwrap(), a.clone());
            // (ab)' = a'b + ab' up to the degree the derivative keeps
            let lhs = a.mul_trunc(&b, d).diff();
            let k = lhs.degree();
            let rhs = a
                .diff()
                .mul_trunc(&b, k)
                .add(&a.mul_trunc(&b.diff(), k))
                .unwrap();
            prop_assert_eq!(lhs, rhs);
            // truncating a product equals the product of truncations
            let lo = d / 2;
            prop_assert_eq!(
                a.mul_trunc(&b, d).resized(lo),
                a.resized(lo).mul_trunc(&b.resized(lo), lo)
            );
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} random cases: ring laws, Leibniz, truncation coherence"))
}

/// Wavefunction checks on refined states of a parity problem: ODE
/// residual on |x| <= 1, exact sample parity, node count, normalization,
/// idempotence and quadrature convergence.
pub fn check_wavefunctions(def: &ProblemDef, energies: &[BigReal], k: usize) -> Check {
    use atem::wavefunction::{assemble_and_normalize, eigenfunction, normalize, ode_residual};

    let pb = regular(def);
    let mut worst_res = f64::NEG_INFINITY;
    let mut worst_norm = 0.0f64;
    let mut worst_conv = 0.0f64;
    for (n, e) in energies.iter().enumerate() {
        let f = eigenfunction(&def.problem, e, k).map_err(|e| e.to_string())?;
        for i in -10..=10 {
            let x = BigReal::from_ratio(i, 10, P);
            let r = ode_residual(&f, pb, e, &x);
            let d1 = f.derivative();
            let d2 = d1.derivative();
            let q0 = pb.q0_at(e, 4);
            let scale = &(&d2.eval(&x).abs() + &(&pb.p0.eval(&x) * &d1.eval(&x)).abs())
                + &(&q0.eval(&x) * &f.eval(&x)).abs();
            worst_res = worst_res.max(r.log10_abs() - scale.log10_abs());
        }
        let l = def.defaults.half_width;
        let s = assemble_and_normalize(&f, &def.problem, l, 4096).map_err(|e| e.to_string())?;
        let len = s.psi.len();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..len {
            if s.psi[len - 1 - i] != sign * s.psi[i] {
                return Err(format!("state {n}: parity broken at x = {}", s.x[i]));
            }
        }
        if s.nodes() != n {
            return Err(format!("state {n}: {} nodes", s.nodes()));
        }
        let fine = assemble_and_normalize(&f, &def.problem, l, 8192).map_err(|e| e.to_string())?;
        let renorm = atem::wavefunction::normalize(&fine).map_err(|e| e.to_string())?;
        worst_norm = worst_norm.max((renorm.norm_estimate - 1.0).abs());
        worst_conv = worst_conv.max((fine.norm_estimate - s.norm_estimate).abs() / s.norm_estimate);
        let twice = normalize(&s).map_err(|e| e.to_string())?;
        for (a, b) in s.psi.iter().zip(&twice.psi) {
            if (a - b).abs() > 1e-12 * a.abs().max(1e-300) {
                return Err(format!("state {n}: renormalization moved a sample"));
            }
        }
    }
    if worst_res > -20.0 {
        return Err(format!("ODE residual 1e{worst_res:.1} > 1e-20"));
    }
    if worst_norm > 1e-8 {
        return Err(format!("norm at doubled N off by {worst_norm:e}"));
    }
    if worst_conv > 1e-8 {
        return Err(format!("norm estimate moved {worst_conv:e} when doubling N"));
    }
    Ok(format!(
        "{} states: residual <= 1e{worst_res:.0}, parity exact, nodes = n, |norm-1| = {worst_norm:.1e}, N-doubling {worst_conv:.1e}",
        energies.len()
    ))
}
