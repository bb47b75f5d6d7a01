use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use atem::bigreal::Precision;
use atem::eigensolve::{EnergyWindow, SolverOptions};
use atem::exec::Execution;
use atem::problems::{builtin, default_parameters, load_spec, ProblemDef};

use crate::Failure;

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Builtin problem: harmonic, anharmonic or quantum_dot.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub problem: Option<String>,
    /// JSON problem specification (schema v1).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Quartic coupling (anharmonic).
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<String>,
    /// Confinement frequency (quantum_dot).
    #[arg(long)]
    pub omega: Option<String>,
    /// Coupling (quantum_dot).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Angular momentum (quantum_dot).
    #[arg(long = "l")]
    pub ell: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Energy window `a:b`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Scan grid spacing.
    #[arg(long)]
    pub step: Option<f64>,
    /// Largest iteration count; the stability check compares k-10 and k.
    #[arg(long, conflicts_with = "k_list")]
    pub k: Option<usize>,
    /// Iteration counts, `20,30,40` or `20:80:10`.
    #[arg(long, value_parser = parse_k_list)]
    pub k_list: Option<KList>,
    /// Working precision in bits.
    #[arg(long, default_value_t = 192)]
    pub precision: usize,
    /// Bisection width.
    #[arg(long, default_value_t = 1e-12)]
    pub tol_e: f64,
    /// Largest accepted drift between consecutive iteration counts.
    #[arg(long)]
    pub tol_stab: Option<f64>,
    /// Machine-readable CSV instead of the fixed-width report.
    #[arg(long)]
    pub csv: bool,
    /// Run the energy scan on one thread.
    #[arg(long)]
    pub sequential: bool,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct KList(pub Vec<usize>);

fn parse_k_list(s: &str) -> Result<KList, String> {
    split_k_list(s).map(KList)
}

fn split_k_list(s: &str) -> Result<Vec<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || a > b {
                return Err(format!("bad range {s:?}"));
            }
            Ok((a..=b).step_by(step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("expected a,b,c or a:b:step, got {s:?}")),
    }
}

/// Fully resolved run settings; every field is printed in the header.
#[derive(Debug)]
pub struct RunConfig {
    pub command: &'static str,
    pub def: ProblemDef,
    pub source: String,
    pub window: EnergyWindow,
    pub k_list: Vec<usize>,
    pub opts: SolverOptions,
    pub csv: bool,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs, command: &'static str) -> Result<Self, Failure> {
        let prec = Precision::new(args.precision)?;
        let pa = &args.problem;
        let (def, source) = match (&pa.problem, &pa.spec) {
            (Some(name), None) => {
                let mut params = default_parameters(name)
                    .ok_or_else(|| Failure::from(atem::error::AtemError::UnknownProblem(name.clone())))?;
                params.extend(given_params(pa));
                (builtin(name, &params, prec)?, "builtin".to_string())
            }
            (None, Some(path)) => {
                if !given_params(pa).is_empty() {
                    return Err(Failure::usage(
                        "parameter flags apply to builtin problems; edit the spec file instead",
                    ));
                }
                (load_spec(path, prec)?, format!("spec {}", path.display()))
            }
            _ => return Err(Failure::usage("give exactly one of --problem or --spec")),
        };

        let d = &def.defaults;
        let (e_min, e_max) = args.window.unwrap_or((d.window.e_min, d.window.e_max));
        let window = EnergyWindow::new(e_min, e_max, args.step.unwrap_or(d.window.grid_step))?;

        let k_list = match (args.k, &args.k_list) {
            (Some(k), _) => {
                if k <= 10 {
                    return Err(Failure::usage(format!(
                        "--k {k} leaves no lower count to compare with; use --k-list"
                    )));
                }
                vec![k - 10, k]
            }
            (None, Some(list)) => list.0.clone(),
            (None, None) => d.k_list.clone(),
        };
        if command == "converge" && k_list.len() < 2 {
            return Err(Failure::usage("need ≥2 iteration counts"));
        }

        let tol_stab = args.tol_stab.unwrap_or(d.tol_stab);
        for (name, v) in [("tol-e", args.tol_e), ("tol-stab", tol_stab)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::usage(format!("--{name} must be positive")));
            }
        }
        let execution = if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok(RunConfig {
            command,
            source,
            window,
            k_list,
            opts: SolverOptions {
                precision: prec,
                tol_e: args.tol_e,
                tol_stab,
                execution,
            },
            csv: args.csv,
            def,
        })
    }

    /// Comment block listing every setting of the run.
    pub fn header(&self) -> String {
        let params: Vec<String> = self
            .def
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let params = if params.is_empty() {
            "none".to_string()
        } else {
            params.join(" ")
        };
        let ks: Vec<String> = self.k_list.iter().map(usize::to_string).collect();
        let exec = match self.opts.execution {
            Execution::Parallel if Execution::parallel_available() => "parallel",
            _ => "sequential",
        };
        let mut h = String::new();
        h.push_str(&format!("# atem {} {}\n", env!("CARGO_PKG_VERSION"), self.command));
        h.push_str(&format!("# problem: {} ({})\n", self.def.name, self.source));
        h.push_str(&format!("# parameters: {params}\n"));
        h.push_str(&format!(
            "# window: [{}, {}] step {}\n",
            self.window.e_min, self.window.e_max, self.window.grid_step
        ));
        h.push_str(&format!("# k: {}\n", ks.join(",")));
        h.push_str(&format!("# precision: {} bits\n", self.opts.precision.bits()));
        h.push_str(&format!("# tol_e: {:e}\n", self.opts.tol_e));
        h.push_str(&format!("# tol_stab: {:e}\n", self.opts.tol_stab));
        h.push_str(&format!("# execution: {exec}\n"));
        h
    }
}

/// Parameters given explicitly on the command line.
fn given_params(args: &ProblemArgs) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    for (k, v) in [("g", &args.g), ("omega", &args.omega), ("lambda", &args.lambda), ("l", &args.ell)] {
        if let Some(v) = v {
            m.insert(k.to_string(), v.clone());
        }
    }
    m
}
