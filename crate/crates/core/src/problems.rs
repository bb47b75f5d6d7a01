//! Built-in problem catalog and the JSON problem-spec format (version 1).
//!
//! A spec file lists polynomial coefficients in ascending powers as decimal
//! strings, so nothing passes through binary floating point on the way
//! into extended precision. An entry may instead name a scalar from the
//! `parameters` table, optionally negated (`"g"`, `"-lambda"`).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "anharmonic",
//!   "kind": "regular",
//!   "parameters": { "g": "0.1" },
//!   "p0": ["0", "2"],
//!   "q0_base": ["1", "0", "0", "0", "g"],
//!   "q0_E": ["-1"],
//!   "envelope": { "W": ["0", "1"], "W_integral": ["0", "0", "0.5"] },
//!   "parity_hint": "even_potential",
//!   "window": { "e_min": 0, "e_max": 16, "grid_step": 0.05 },
//!   "k_list": [70, 80]
//! }
//! ```
//!
//! Singular problems use `A`, `B`, `C_base`, `C_E` and a radial envelope
//! `{ "ell": ..., "omega": ... }` instead.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bigreal::{BigReal, Precision};
use crate::eigensolve::{EnergyWindow, FunctionalFamily};
use crate::error::{AtemError, Result};
use crate::frobenius::{
    delta_singular_pair, leibniz_recurrence, EnergyOffset, RadialEnvelope, SingularProblem,
};
use crate::regular::{delta, iterate_pq, ParityHint, RegularProblem};
use crate::series::TruncSeries;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Regular(RegularProblem),
    Singular(SingularProblem),
}

impl Problem {
    pub fn precision(&self) -> Precision {
        match self {
            Problem::Regular(p) => p.precision(),
            Problem::Singular(p) => p.precision(),
        }
    }

    /// Recurrence index used for truncation order `k`, the degree of the
    /// truncated eigenfunction polynomial: `k - 2` derivative steps for a
    /// regular problem, `k` Taylor coefficients for a singular one.
    pub fn recurrence_depth(&self, k: usize) -> usize {
        match self {
            Problem::Regular(_) => k.saturating_sub(2),
            Problem::Singular(_) => k,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Problem::Singular(_))
    }
}

impl FunctionalFamily for Problem {
    fn eval_at(&self, k: usize, energy: &BigReal) -> Result<BigReal> {
        let m = self.recurrence_depth(k);
        match self {
            Problem::Regular(p) => Ok(delta(&iterate_pq(p, energy, m)?)),
            Problem::Singular(p) => Ok(delta_singular_pair(&leibniz_recurrence(p, energy, m)?)),
        }
    }

    fn min_order(&self) -> usize {
        match self {
            Problem::Regular(_) => 4,
            Problem::Singular(_) => 2,
        }
    }
}

/// Run defaults attached to a problem definition.
#[derive(Clone, Debug, PartialEq)]
pub struct Defaults {
    pub window: EnergyWindow,
    pub k_list: Vec<usize>,
    pub tol_stab: f64,
    /// Outer half-width of the wavefunction grid.
    pub half_width: f64,
}

impl Defaults {
    fn generic() -> Self {
        Defaults {
            window: EnergyWindow {
                e_min: 0.0,
                e_max: 16.0,
                grid_step: EnergyWindow::DEFAULT_STEP,
            },
            k_list: vec![70, 80],
            tol_stab: 1e-6,
            half_width: 12.0,
        }
    }
}

/// A problem together with its name, parameters and run defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemDef {
    pub name: String,
    pub problem: Problem,
    /// Parameter values as given (decimal strings).
    pub parameters: BTreeMap<String, String>,
    pub defaults: Defaults,
}

fn param(params: &BTreeMap<String, String>, name: &str, prec: Precision) -> Result<BigReal> {
    let raw = params.get(name).ok_or_else(|| AtemError::InvalidParam {
        name: name.into(),
        reason: "required".into(),
    })?;
    BigReal::parse(raw, prec).map_err(|_| AtemError::InvalidParam {
        name: name.into(),
        reason: format!("not a decimal number: {raw:?}"),
    })
}

fn check_known(params: &BTreeMap<String, String>, known: &[&str]) -> Result<()> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(AtemError::InvalidParam {
            name: k.clone(),
            reason: format!("not a parameter of this problem (expected {})", known.join(", ")),
        }),
        None => Ok(()),
    }
}

/// `-d²/dx² + x² + g x⁴` with envelope `W = x`.
pub fn anharmonic(g: BigReal) -> Result<RegularProblem> {
    let prec = g.precision();
    let z = || BigReal::zero(prec);
    RegularProblem::new(
        TruncSeries::from_i64s(&[0, 2], prec),
        TruncSeries::from_coeffs(vec![BigReal::one(prec), z(), z(), z(), g]),
        TruncSeries::from_i64s(&[-1], prec),
        TruncSeries::from_i64s(&[0, 1], prec),
        TruncSeries::from_coeffs(vec![z(), z(), BigReal::from_ratio(1, 2, prec)]),
        ParityHint::EvenPotential,
    )
}

/// Parameter values used when a builtin is requested without them.
pub fn default_parameters(name: &str) -> Option<BTreeMap<String, String>> {
    let pairs: &[(&str, &str)] = match name {
        "harmonic" => &[],
        "anharmonic" => &[("g", "0.1")],
        "quantum_dot" => &[("omega", "1"), ("lambda", "1"), ("l", "0.5")],
        _ => return None,
    };
    Some(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

/// Catalog lookup. Parameter names: `g` (anharmonic); `omega`, `lambda`,
/// `l` (quantum_dot); harmonic takes none.
pub fn builtin(name: &str, params: &BTreeMap<String, String>, prec: Precision) -> Result<ProblemDef> {
    let (problem, defaults) = match name {
        "harmonic" => {
            check_known(params, &[])?;
            let d = Defaults {
                window: EnergyWindow {
                    e_min: 0.0,
                    e_max: 14.0,
                    grid_step: EnergyWindow::DEFAULT_STEP,
                },
                k_list: vec![30, 40],
                ..Defaults::generic()
            };
            (Problem::Regular(anharmonic(BigReal::zero(prec))?), d)
        }
        "anharmonic" => {
            check_known(params, &["g"])?;
            let g = param(params, "g", prec)?;
            let d = Defaults {
                tol_stab: 1e-5,
                ..Defaults::generic()
            };
            (Problem::Regular(anharmonic(g)?), d)
        }
        "quantum_dot" => {
            check_known(params, &["omega", "lambda", "l"])?;
            let omega = param(params, "omega", prec)?;
            if omega.signum() <= 0 {
                return Err(AtemError::InvalidParam {
                    name: "omega".into(),
                    reason: "must be positive".into(),
                });
            }
            let p = SingularProblem::quantum_dot(
                omega,
                param(params, "lambda", prec)?,
                param(params, "l", prec)?,
            )?;
            let d = Defaults {
                window: EnergyWindow {
                    e_min: 0.0,
                    e_max: 6.0,
                    grid_step: EnergyWindow::DEFAULT_STEP,
                },
                k_list: vec![70, 80],
                tol_stab: 1e-2,
                half_width: 10.0,
            };
            (Problem::Singular(p), d)
        }
        other => return Err(AtemError::UnknownProblem(other.into())),
    };
    Ok(ProblemDef {
        name: name.into(),
        problem,
        parameters: params.clone(),
        defaults,
    })
}

// ---------------------------------------------------------------------------
// spec files

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Regular,
    Singular,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
struct WindowSpec {
    e_min: f64,
    e_max: f64,
    #[serde(default = "default_step")]
    grid_step: f64,
}

fn default_step() -> f64 {
    EnergyWindow::DEFAULT_STEP
}

/// Raw file contents; every field optional so missing ones can be
/// reported by name.
#[derive(Serialize, Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    schema_version: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    kind: Option<Kind>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    parameters: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q0_base: Option<Vec<String>>,
    #[serde(rename = "q0_E", skip_serializing_if = "Option::is_none")]
    q0_e: Option<Vec<String>>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<Vec<String>>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    b: Option<Vec<String>>,
    #[serde(rename = "C_base", skip_serializing_if = "Option::is_none")]
    c_base: Option<Vec<String>>,
    #[serde(rename = "C_E", skip_serializing_if = "Option::is_none")]
    c_e: Option<Vec<String>>,
    envelope: Option<BTreeMap<String, Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parity_hint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<WindowSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol_stab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
}

struct Loader<'a> {
    params: BTreeMap<&'a str, BigReal>,
    prec: Precision,
}

impl Loader<'_> {
    fn scalar(&self, field: &str, raw: &str) -> Result<BigReal> {
        let s = raw.trim();
        let (neg, name) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        if let Some(v) = self.params.get(name) {
            return Ok(if neg { -v } else { v.clone() });
        }
        BigReal::parse(s, self.prec).map_err(|_| {
            AtemError::Schema(format!(
                "{field}: {raw:?} is neither a decimal number nor a parameter name"
            ))
        })
    }

    fn poly(&self, field: &str, coeffs: &Option<Vec<String>>, kind: &str) -> Result<TruncSeries> {
        let coeffs = coeffs
            .as_ref()
            .ok_or_else(|| AtemError::Schema(format!("{field} required for kind={kind}")))?;
        if coeffs.is_empty() {
            return Err(AtemError::Schema(format!("{field}: empty coefficient list")));
        }
        let vals = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.scalar(&format!("{field}[{i}]"), c))
            .collect::<Result<Vec<_>>>()?;
        Ok(TruncSeries::from_coeffs(vals))
    }

    fn envelope_poly(&self, env: &BTreeMap<String, Value>, key: &str) -> Result<TruncSeries> {
        let field = format!("envelope.{key}");
        let v = env
            .get(key)
            .ok_or_else(|| AtemError::Schema(format!("{field} required for kind=regular")))?;
        let list: Vec<String> = serde_json::from_value(v.clone())
            .map_err(|_| AtemError::Schema(format!("{field}: expected an array of strings")))?;
        self.poly(&field, &Some(list), "regular")
    }

    fn envelope_scalar(&self, env: &BTreeMap<String, Value>, key: &str) -> Result<BigReal> {
        let field = format!("envelope.{key}");
        match env.get(key) {
            Some(Value::String(s)) => self.scalar(&field, s),
            Some(_) => Err(AtemError::Schema(format!("{field}: expected a string"))),
            None => Err(AtemError::Schema(format!("{field} required for kind=singular"))),
        }
    }
}

fn check_envelope_keys(env: &BTreeMap<String, Value>, allowed: &[&str]) -> Result<()> {
    match env.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(AtemError::Schema(format!(
            "envelope.{k}: unknown field (expected {})",
            allowed.join(", ")
        ))),
        None => Ok(()),
    }
}

fn forbid(present: bool, field: &str, kind: &str) -> Result<()> {
    if present {
        Err(AtemError::Schema(format!("{field} not allowed for kind={kind}")))
    } else {
        Ok(())
    }
}

/// Parses a spec document at the given precision.
pub fn parse_spec(text: &str, prec: Precision) -> Result<ProblemDef> {
    let raw: SpecFile = serde_json::from_str(text).map_err(|e| AtemError::SpecParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match raw.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(AtemError::Schema(format!("schema_version {v} unsupported (expected 1)"))),
        None => return Err(AtemError::Schema("schema_version required".into())),
    }
    let kind = raw
        .kind
        .ok_or_else(|| AtemError::Schema("kind required (regular or singular)".into()))?;

    let mut params = BTreeMap::new();
    for (k, v) in &raw.parameters {
        if k.is_empty() || k.starts_with('-') || BigReal::parse(k, prec).is_ok() {
            return Err(AtemError::Schema(format!("parameters: invalid name {k:?}")));
        }
        let val = BigReal::parse(v, prec).map_err(|_| {
            AtemError::Schema(format!("parameters.{k}: {v:?} is not a decimal number"))
        })?;
        params.insert(k.as_str(), val);
    }
    let ld = Loader { params, prec };
    let env = raw
        .envelope
        .clone()
        .ok_or_else(|| AtemError::Schema("envelope required".into()))?;

    let mut defaults = Defaults::generic();
    let problem = match kind {
        Kind::Regular => {
            for (present, f) in [
                (raw.a.is_some(), "A"),
                (raw.b.is_some(), "B"),
                (raw.c_base.is_some(), "C_base"),
                (raw.c_e.is_some(), "C_E"),
            ] {
                forbid(present, f, "regular")?;
            }
            check_envelope_keys(&env, &["W", "W_integral"])?;
            let parity = match raw.parity_hint.as_deref() {
                None | Some("none") => ParityHint::None,
                Some("even_potential") => ParityHint::EvenPotential,
                Some(other) => {
                    return Err(AtemError::Schema(format!(
                        "parity_hint: {other:?} (expected even_potential or none)"
                    )))
                }
            };
            Problem::Regular(RegularProblem::new(
                ld.poly("p0", &raw.p0, "regular")?,
                ld.poly("q0_base", &raw.q0_base, "regular")?,
                ld.poly("q0_E", &raw.q0_e, "regular")?,
                ld.envelope_poly(&env, "W")?,
                ld.envelope_poly(&env, "W_integral")?,
                parity,
            )?)
        }
        Kind::Singular => {
            for (present, f) in [
                (raw.p0.is_some(), "p0"),
                (raw.q0_base.is_some(), "q0_base"),
                (raw.q0_e.is_some(), "q0_E"),
                (raw.parity_hint.is_some(), "parity_hint"),
            ] {
                forbid(present, f, "singular")?;
            }
            check_envelope_keys(&env, &["ell", "omega"])?;
            defaults.tol_stab = 1e-2;
            defaults.half_width = 10.0;
            let envelope = RadialEnvelope {
                ell: ld.envelope_scalar(&env, "ell")?,
                omega: ld.envelope_scalar(&env, "omega")?,
            };
            Problem::Singular(SingularProblem::new(
                ld.poly("A", &raw.a, "singular")?,
                ld.poly("B", &raw.b, "singular")?,
                ld.poly("C_base", &raw.c_base, "singular")?,
                ld.poly("C_E", &raw.c_e, "singular")?,
                envelope,
                EnergyOffset::natural(prec),
            )?)
        }
    };

    if let Some(w) = &raw.window {
        defaults.window = EnergyWindow::new(w.e_min, w.e_max, w.grid_step)?;
    }
    if let Some(ks) = &raw.k_list {
        if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AtemError::Schema("k_list: must be non-empty and strictly ascending".into()));
        }
        defaults.k_list = ks.clone();
    }
    if let Some(t) = raw.tol_stab {
        if !(t > 0.0 && t.is_finite()) {
            return Err(AtemError::Schema("tol_stab: must be positive".into()));
        }
        defaults.tol_stab = t;
    }
    if let Some(l) = raw.half_width {
        if !(l > 0.0 && l.is_finite()) {
            return Err(AtemError::Schema("half_width: must be positive".into()));
        }
        defaults.half_width = l;
    }
    if let Problem::Singular(p) = &problem {
        let k_max = *defaults.k_list.last().expect("non-empty");
        p.check_indicial(k_max)?;
    }
    Ok(ProblemDef {
        name: raw.name.unwrap_or_else(|| "custom".into()),
        problem,
        parameters: raw.parameters,
        defaults,
    })
}

pub fn load_spec(path: &Path, prec: Precision) -> Result<ProblemDef> {
    let text = std::fs::read_to_string(path).map_err(|source| AtemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text, prec)
}

fn literals(s: &TruncSeries) -> Vec<String> {
    s.coeffs().iter().map(BigReal::to_decimal_string).collect()
}

/// Serializes a definition with every coefficient written out as a
/// literal; parameters are kept for the record.
pub fn to_spec_json(def: &ProblemDef) -> String {
    let mut f = SpecFile {
        schema_version: Some(SCHEMA_VERSION),
        name: Some(def.name.clone()),
        parameters: def.parameters.clone(),
        window: Some(WindowSpec {
            e_min: def.defaults.window.e_min,
            e_max: def.defaults.window.e_max,
            grid_step: def.defaults.window.grid_step,
        }),
        k_list: Some(def.defaults.k_list.clone()),
        tol_stab: Some(def.defaults.tol_stab),
        half_width: Some(def.defaults.half_width),
        ..SpecFile::default()
    };
    let mut env = BTreeMap::new();
    match &def.problem {
        Problem::Regular(p) => {
            f.kind = Some(Kind::Regular);
            f.p0 = Some(literals(&p.p0));
            f.q0_base = Some(literals(&p.q0_base));
            f.q0_e = Some(literals(&p.q0_e));
            env.insert("W".into(), Value::from(literals(&p.envelope_w)));
            env.insert("W_integral".into(), Value::from(literals(&p.envelope_integral)));
            f.parity_hint = Some(
                match p.parity_hint {
                    ParityHint::EvenPotential => "even_potential",
                    ParityHint::None => "none",
                }
                .into(),
            );
        }
        Problem::Singular(p) => {
            f.kind = Some(Kind::Singular);
            f.a = Some(literals(&p.a));
            f.b = Some(literals(&p.b));
            f.c_base = Some(literals(&p.c_base));
            f.c_e = Some(literals(&p.c_e));
            env.insert("ell".into(), Value::from(p.envelope.ell.to_decimal_string()));
            env.insert("omega".into(), Value::from(p.envelope.omega.to_decimal_string()));
        }
    }
    f.envelope = Some(env);
    let mut out = serde_json::to_string_pretty(&f).expect("spec serializes");
    out.push('\n');
    out
}
