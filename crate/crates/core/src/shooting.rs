//! Independent double-precision shooting solver, used to cross-check
//! eigenvalues of Schrödinger-form problems `-psi'' + V psi = E psi`.

use crate::error::{AtemError, Result};
use crate::regular::RegularProblem;

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingOptions {
    /// Integration runs over `[-half_width, half_width]`.
    pub half_width: f64,
    /// RK4 step.
    pub step: f64,
    /// Candidate energies are searched in `guess ± radius`.
    pub radius: f64,
    pub scan_step: f64,
    pub tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            half_width: 8.0,
            step: 1e-3,
            radius: 0.5,
            scan_step: 0.01,
            tol: 1e-10,
        }
    }
}

/// Potential coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Shooter {
    potential: Vec<f64>,
    opts: ShootingOptions,
}

impl Shooter {
    pub fn new(potential: Vec<f64>, opts: ShootingOptions) -> Self {
        Shooter { potential, opts }
    }

    pub fn for_problem(problem: &RegularProblem, opts: ShootingOptions) -> Result<Self> {
        let v = problem.potential()?;
        Ok(Shooter::new(v.coeffs().iter().map(|c| c.to_f64()).collect(), opts))
    }

    fn v(&self, x: f64) -> f64 {
        self.potential.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Integrates from `from` to `to` starting at `(psi, psi') = (0, ±1e-30)`
    /// pointing into the interval.
    fn integrate(&self, energy: f64, from: f64, to: f64) -> (f64, f64) {
        let n = ((to - from).abs() / self.opts.step).ceil().max(1.0) as usize;
        let h = (to - from) / n as f64;
        let mut y = 0.0;
        let mut dy = 1e-30 * h.signum();
        let rhs = |x: f64, y: f64| (self.v(x) - energy) * y;
        for i in 0..n {
            let x = from + h * i as f64;
            let k1y = dy;
            let k1d = rhs(x, y);
            let k2y = dy + 0.5 * h * k1d;
            let k2d = rhs(x + 0.5 * h, y + 0.5 * h * k1y);
            let k3y = dy + 0.5 * h * k2d;
            let k3d = rhs(x + 0.5 * h, y + 0.5 * h * k2y);
            let k4y = dy + h * k3d;
            let k4d = rhs(x + h, y + h * k3y);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            // keep magnitudes bounded; only the direction matters
            let s = y.abs().max(dy.abs());
            if s > 1e100 {
                y /= s;
                dy /= s;
            }
        }
        (y, dy)
    }

    /// Scale-free Wronskian of the left and right solutions at a matching
    /// point just off the origin; zero exactly at eigenvalues.
    pub fn mismatch(&self, energy: f64) -> f64 {
        let xm = 0.1234;
        let l = self.opts.half_width;
        let (yl, dyl) = self.integrate(energy, -l, xm);
        let (yr, dyr) = self.integrate(energy, l, xm);
        let w = yl * dyr - dyl * yr;
        w / (yl.hypot(dyl) * yr.hypot(dyr))
    }

    /// Eigenvalue nearest to `guess` within the search radius.
    pub fn refine(&self, guess: f64) -> Result<f64> {
        let o = &self.opts;
        let n = (2.0 * o.radius / o.scan_step).round().max(1.0) as usize;
        let pts: Vec<f64> = (0..=n)
            .map(|i| guess - o.radius + 2.0 * o.radius * i as f64 / n as f64)
            .collect();
        let vals: Vec<f64> = pts.iter().map(|&e| self.mismatch(e)).collect();
        let mut best: Option<f64> = None;
        for i in 0..n {
            if vals[i] == 0.0 {
                best = closer(best, pts[i], guess);
                continue;
            }
            if vals[i].signum() != vals[i + 1].signum() {
                let (mut a, mut b, fa) = (pts[i], pts[i + 1], vals[i]);
                while b - a > o.tol {
                    let mid = 0.5 * (a + b);
                    if self.mismatch(mid).signum() == fa.signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                best = closer(best, 0.5 * (a + b), guess);
            }
        }
        best.ok_or(AtemError::OracleFailure {
            guess,
            radius: o.radius,
        })
    }
}

fn closer(best: Option<f64>, cand: f64, guess: f64) -> Option<f64> {
    match best {
        Some(b) if (b - guess).abs() <= (cand - guess).abs() => Some(b),
        _ => Some(cand),
    }
}
