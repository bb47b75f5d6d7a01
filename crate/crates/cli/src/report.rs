use std::fmt::Write as _;

use atem::bigreal::Precision;
use atem::eigensolve::{convergence_table, stable_spectrum, CellStatus, Spectrum};
use atem::frobenius::quasi_exact_check;
use atem::problems::Problem;
use atem::shooting::{Shooter, ShootingOptions};
use atem::wavefunction::{assemble_and_normalize, eigenfunction, export_csv};

use crate::format::{energy, log_residual, significant, small};
use crate::{Failure, OracleArgs, Outcome, QuasiArgs, RunConfig, WaveArgs};

fn spectrum(cfg: &RunConfig) -> Result<Spectrum, Failure> {
    Ok(stable_spectrum(&cfg.def.problem, &cfg.window, &cfg.k_list, &cfg.opts)?)
}

fn empty(cfg: &RunConfig, stdout: String) -> Outcome {
    Outcome {
        stdout,
        stderr: csv_header(cfg) + "error: no stable eigenvalue in the window\n",
        code: 3,
    }
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = spectrum(cfg)?;
    let mut out = String::new();
    if cfg.csv {
        out.push_str("kind,state,k,energy,log10_residual,stability\n");
        for r in &spec.accepted {
            let _ = writeln!(
                out,
                "accepted,{},{},{},{:e},{:e}",
                r.state_index,
                r.k_used,
                r.energy.to_fixed(12),
                r.residual,
                r.stability
            );
        }
        for c in &spec.spurious {
            let _ = writeln!(out, "spurious,,{},{},{:e},", c.k, c.energy.to_fixed(12), c.residual);
        }
    } else {
        out.push_str(&cfg.header());
        out.push_str("# n E log10|delta| stability\n");
        for r in &spec.accepted {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                r.state_index,
                energy(&r.energy),
                log_residual(r.residual),
                small(r.stability)
            );
        }
        let _ = writeln!(out, "# spurious candidates: {}", spec.spurious.len());
        for c in &spec.spurious {
            let _ = writeln!(out, "spurious k={} {} {}", c.k, energy(&c.energy), log_residual(c.residual));
        }
    }
    if spec.accepted.is_empty() {
        return Ok(empty(cfg, out));
    }
    Ok(Outcome {
        stdout: out,
        stderr: csv_header(cfg),
        code: 0,
    })
}

/// In CSV mode the header goes to stderr so stdout stays machine-readable.
fn csv_header(cfg: &RunConfig) -> String {
    if cfg.csv {
        cfg.header()
    } else {
        String::new()
    }
}

pub fn converge(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let table = convergence_table(&cfg.def.problem, &cfg.window, &cfg.k_list, &cfg.opts)?;
    let states = table.states();
    let mut out = String::new();
    if cfg.csv {
        out.push('k');
        for s in 0..states {
            let _ = write!(out, ",E{s}");
        }
        out.push('\n');
        for (row, k) in table.ks.iter().enumerate() {
            let _ = write!(out, "{k}");
            for cell in &table.cells[row] {
                out.push(',');
                if let Some(e) = &cell.energy {
                    out.push_str(&e.to_fixed(12));
                }
            }
            out.push('\n');
        }
    } else {
        out.push_str(&cfg.header());
        out.push_str("# ~ marks an entry that moves by more than tol_stab at the next k\n");
        let _ = write!(out, "{:>5}", "k");
        for s in 0..states {
            let _ = write!(out, " {:>16}", format!("E{s}"));
        }
        out.push('\n');
        for (row, k) in table.ks.iter().enumerate() {
            let _ = write!(out, "{k:>5}");
            for cell in &table.cells[row] {
                let text = match (&cell.energy, cell.status) {
                    (Some(e), CellStatus::Unstable) => format!("{}~", energy(e)),
                    (Some(e), _) => format!("{} ", energy(e)),
                    (None, _) => "- ".into(),
                };
                let _ = write!(out, " {text:>16}");
            }
            out.push('\n');
        }
        for (row, extra) in table.extras.iter().enumerate() {
            if !extra.is_empty() {
                let es: Vec<String> = extra.iter().map(|c| energy(&c.energy)).collect();
                let _ = writeln!(out, "# k={} unmatched roots: {}", table.ks[row], es.join(" "));
            }
        }
    }
    if states == 0 {
        return Ok(empty(cfg, out));
    }
    Ok(Outcome {
        stdout: out,
        stderr: csv_header(cfg),
        code: 0,
    })
}

pub fn wavefunction(cfg: &RunConfig, args: &WaveArgs) -> Result<Outcome, Failure> {
    let spec = spectrum(cfg)?;
    let state = spec.accepted.get(args.state).ok_or_else(|| {
        Failure::not_found(format!(
            "state {} not found ({} accepted states in the window)",
            args.state,
            spec.accepted.len()
        ))
    })?;
    let poly = eigenfunction(&cfg.def.problem, &state.energy, state.k_used)?;
    let half_width = args.half_width.unwrap_or(cfg.def.defaults.half_width);
    let samples = assemble_and_normalize(&poly, &cfg.def.problem, half_width, args.points)?;
    export_csv(&samples, &args.out)?;

    let mut out = cfg.header();
    let lo = if cfg.def.problem.is_singular() { 0.0 } else { -half_width };
    let _ = writeln!(out, "# grid: [{lo}, {half_width}] with {} intervals", args.points);
    let _ = writeln!(out, "# state: {}", state.state_index);
    let _ = writeln!(out, "# energy: {}", energy(&state.energy));
    let _ = writeln!(out, "# polynomial degree: {}", poly.degree());
    let coeffs: Vec<String> = poly.coeffs.iter().map(|c| significant(c, 6)).collect();
    let _ = writeln!(out, "coefficients: {}", coeffs.join(", "));
    let _ = writeln!(out, "# nodes: {}", samples.nodes());
    let _ = writeln!(out, "# norm before scaling: {:.6e}", samples.norm_estimate);
    let _ = writeln!(out, "# quadrature error: {:.2e}", samples.quadrature_error);
    let _ = writeln!(out, "# trusted half-width: {}", samples.trusted_halfwidth);
    let _ = writeln!(out, "# wrote {}", args.out.display());
    Ok(Outcome {
        stdout: out,
        stderr: String::new(),
        code: 0,
    })
}

pub fn quasi_exact(args: &QuasiArgs) -> Result<Outcome, Failure> {
    let prec = Precision::new(args.precision)?;
    let level = quasi_exact_check(args.ell, args.omega, args.j, args.order, prec)?;
    let mut out = String::new();
    let _ = writeln!(out, "# atem {} quasi-exact", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# l: {}", args.ell);
    let _ = writeln!(out, "# omega: {}", args.omega);
    let _ = writeln!(out, "# j: {}", args.j);
    let _ = writeln!(out, "# checked through order: {}", args.order.max(args.j + 2));
    let _ = writeln!(out, "# precision: {} bits", prec.bits());
    let _ = writeln!(out, "E = {}", energy(&level.energy));
    let _ = writeln!(out, "# lambda verdict max-log10|t_n|(n>j) polynomial");
    for r in &level.reports {
        let poly: Vec<String> = r.polynomial.iter().map(|c| significant(c, 6)).collect();
        let tail = if r.numeric_tail_log10 == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            format!("{:.1}", r.numeric_tail_log10)
        };
        let _ = writeln!(
            out,
            "lambda = {} {} {} {}",
            energy(&r.lambda),
            if r.structural_zero { "PASS" } else { "FAIL" },
            tail,
            poly.join(", ")
        );
    }
    let pass = level.all_pass();
    let _ = writeln!(out, "verify: {}", if pass { "PASS" } else { "FAIL" });
    Ok(Outcome {
        stdout: out,
        stderr: String::new(),
        code: if pass { 0 } else { 4 },
    })
}

pub fn oracle(cfg: &RunConfig, args: &OracleArgs) -> Result<Outcome, Failure> {
    let Problem::Regular(regular) = &cfg.def.problem else {
        return Err(Failure::usage("oracle supports regular problems only"));
    };
    let shooter = Shooter::for_problem(
        regular,
        ShootingOptions {
            half_width: args.shoot_half_width,
            ..ShootingOptions::default()
        },
    )?;
    let spec = spectrum(cfg)?;
    let mut out = cfg.header();
    let _ = writeln!(out, "# shooting: half-width {} tol {:e}", args.shoot_half_width, args.tol);
    if spec.accepted.is_empty() {
        return Ok(empty(cfg, out));
    }
    let shots = cfg
        .opts
        .execution
        .map(&spec.accepted, |r| shooter.refine(r.energy.to_f64()));
    let _ = writeln!(out, "# n E_atem E_shoot delta status");
    let mut verified = 0;
    for (r, shot) in spec.accepted.iter().zip(shots) {
        match shot {
            Ok(es) => {
                let delta = es - r.energy.to_f64();
                let ok = delta.abs() <= args.tol;
                verified += ok as usize;
                let _ = writeln!(
                    out,
                    "{} {} {:.8} {:.2e} {}",
                    r.state_index,
                    energy(&r.energy),
                    es,
                    delta,
                    if ok { "ok" } else { "MISMATCH" }
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{} {} - - FAILED: {e}", r.state_index, energy(&r.energy));
            }
        }
    }
    let n = spec.accepted.len();
    let _ = writeln!(out, "verified: {verified}/{n}");
    Ok(Outcome {
        stdout: out,
        stderr: String::new(),
        code: if 2 * verified >= n { 0 } else { 4 },
    })
}
