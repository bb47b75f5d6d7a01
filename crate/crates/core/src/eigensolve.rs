//! Root finding on quantization functionals and stability filtering
//! across truncation orders.
//!
//! Functional values span hundreds of decades, so roots are located and
//! refined on sign alone: a uniform grid scan finds sign changes, bisection
//! narrows them. A root is accepted only if it persists, within `tol_stab`,
//! between the two largest truncation orders requested.

use std::cmp::Ordering;

use log::debug;

use crate::bigreal::{BigReal, Precision};
use crate::error::{AtemError, Result};
use crate::exec::Execution;

/// A scalar quantization functional `E -> delta(E)` at fixed order.
pub trait Functional: Sync {
    fn eval(&self, energy: &BigReal) -> Result<BigReal>;
}

impl<F> Functional for F
where
    F: Fn(&BigReal) -> Result<BigReal> + Sync,
{
    fn eval(&self, energy: &BigReal) -> Result<BigReal> {
        self(energy)
    }
}

/// A family of functionals indexed by truncation order `k`.
pub trait FunctionalFamily: Sync {
    fn eval_at(&self, k: usize, energy: &BigReal) -> Result<BigReal>;

    fn min_order(&self) -> usize {
        2
    }
}

struct AtOrder<'a, F: ?Sized> {
    family: &'a F,
    k: usize,
}

impl<F: FunctionalFamily + ?Sized> Functional for AtOrder<'_, F> {
    fn eval(&self, energy: &BigReal) -> Result<BigReal> {
        self.family.eval_at(self.k, energy)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyWindow {
    pub e_min: f64,
    pub e_max: f64,
    pub grid_step: f64,
}

impl EnergyWindow {
    pub const DEFAULT_STEP: f64 = 0.05;
    const MAX_CELLS: f64 = 1e6;

    pub fn new(e_min: f64, e_max: f64, grid_step: f64) -> Result<Self> {
        if !(e_min.is_finite() && e_max.is_finite() && e_min < e_max) {
            return Err(AtemError::InvalidWindow(format!(
                "need e_min < e_max, got [{e_min}, {e_max}]"
            )));
        }
        if !(grid_step > 0.0 && grid_step.is_finite()) {
            return Err(AtemError::InvalidWindow(format!(
                "grid step must be positive, got {grid_step}"
            )));
        }
        if (e_max - e_min) / grid_step > Self::MAX_CELLS {
            return Err(AtemError::InvalidWindow(format!(
                "more than {} grid cells",
                Self::MAX_CELLS
            )));
        }
        Ok(EnergyWindow {
            e_min,
            e_max,
            grid_step,
        })
    }

    pub fn cells(&self) -> usize {
        ((self.e_max - self.e_min) / self.grid_step - 1e-9).ceil().max(1.0) as usize
    }

    /// Grid points `e_min + (e_max - e_min) i / N`, computed in extended
    /// precision so integer-valued points are hit exactly.
    pub fn grid(&self, prec: Precision) -> Vec<BigReal> {
        let n = self.cells();
        let lo = BigReal::from_f64(self.e_min, prec);
        let width = &BigReal::from_f64(self.e_max, prec) - &lo;
        (0..=n)
            .map(|i| &lo + &width.mul_i64(i as i64).div_i64(n as i64))
            .collect()
    }

    fn spacing(&self) -> f64 {
        (self.e_max - self.e_min) / self.cells() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    pub lo: BigReal,
    pub hi: BigReal,
    /// `log10 max(|delta(lo)|, |delta(hi)|)`, the local magnitude that
    /// residuals are measured against.
    pub scale_log10: f64,
}

impl Bracket {
    /// A grid point where the functional is exactly zero.
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub precision: Precision,
    /// Bisection stops once the bracket is narrower than this.
    pub tol_e: f64,
    /// Largest accepted drift of a root between consecutive orders.
    pub tol_stab: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            precision: Precision::DEFAULT,
            tol_e: 1e-12,
            tol_stab: 1e-6,
            execution: Execution::default(),
        }
    }
}

fn eval_checked(f: &(impl Functional + ?Sized), e: &BigReal) -> Result<BigReal> {
    f.eval(e).map_err(|source| AtemError::FunctionalFailed {
        energy: e.to_f64(),
        source: Box::new(source),
    })
}

/// Decades by which `|delta|` must dip below both neighbours, without a
/// sign change, to trigger one level of grid halving.
const DIP_DECADES: f64 = 10.0;

/// Sign-change brackets of `f` over the window grid.
pub fn scan_brackets(
    f: &(impl Functional + ?Sized),
    window: &EnergyWindow,
    prec: Precision,
    exec: Execution,
) -> Result<Vec<Bracket>> {
    let grid = window.grid(prec);
    let values: Vec<BigReal> = exec
        .map(&grid, |e| eval_checked(f, e))
        .into_iter()
        .collect::<Result<_>>()?;
    let signs: Vec<i32> = values.iter().map(BigReal::signum).collect();
    let logs: Vec<f64> = values.iter().map(BigReal::log10_abs).collect();

    let mut out = Vec::new();
    for i in 0..grid.len() {
        if signs[i] == 0 {
            out.push(Bracket {
                lo: grid[i].clone(),
                hi: grid[i].clone(),
                scale_log10: f64::NEG_INFINITY,
            });
        }
    }
    for i in 0..grid.len() - 1 {
        if signs[i] * signs[i + 1] < 0 {
            out.push(Bracket {
                lo: grid[i].clone(),
                hi: grid[i + 1].clone(),
                scale_log10: logs[i].max(logs[i + 1]),
            });
        }
    }

    // one level of halving around deep dips without a sign change
    let dips: Vec<usize> = (1..grid.len().saturating_sub(1))
        .filter(|&i| {
            signs[i] != 0
                && signs[i - 1] == signs[i]
                && signs[i + 1] == signs[i]
                && logs[i] < logs[i - 1].min(logs[i + 1]) - DIP_DECADES
        })
        .collect();
    for i in dips {
        let mid_lo = (&grid[i - 1] + &grid[i]).div_i64(2);
        let mid_hi = (&grid[i] + &grid[i + 1]).div_i64(2);
        let pts = [
            (grid[i - 1].clone(), values[i - 1].clone()),
            (mid_lo.clone(), eval_checked(f, &mid_lo)?),
            (grid[i].clone(), values[i].clone()),
            (mid_hi.clone(), eval_checked(f, &mid_hi)?),
            (grid[i + 1].clone(), values[i + 1].clone()),
        ];
        debug!("halving grid around E = {}", grid[i].to_f64());
        for w in pts.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.1.signum() * b.1.signum() < 0 {
                out.push(Bracket {
                    lo: a.0.clone(),
                    hi: b.0.clone(),
                    scale_log10: a.1.log10_abs().max(b.1.log10_abs()),
                });
            }
        }
        for (e, v) in [&pts[1], &pts[3]] {
            if v.is_zero() {
                out.push(Bracket {
                    lo: e.clone(),
                    hi: e.clone(),
                    scale_log10: f64::NEG_INFINITY,
                });
            }
        }
    }
    out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(Ordering::Equal));
    Ok(out)
}

/// A refined root with its residual `log10(|delta(E)| / local scale)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Root {
    pub energy: BigReal,
    pub residual: f64,
}

/// Sign bisection to a bracket width of at most `tol_e`. If the endpoints
/// turn out to share a sign the bracket is widened once by `widen` on each
/// side before giving up.
pub fn refine_root(
    f: &(impl Functional + ?Sized),
    bracket: &Bracket,
    tol_e: f64,
    widen: f64,
) -> Result<Root> {
    if bracket.is_exact() {
        return Ok(Root {
            energy: bracket.lo.clone(),
            residual: f64::NEG_INFINITY,
        });
    }
    let prec = bracket.lo.precision();
    let mut lo = bracket.lo.clone();
    let mut hi = bracket.hi.clone();
    let mut f_lo = eval_checked(f, &lo)?;
    let mut f_hi = eval_checked(f, &hi)?;
    let mut widened = false;
    let scale = |a: &BigReal, b: &BigReal| {
        if bracket.scale_log10.is_finite() {
            bracket.scale_log10
        } else {
            a.log10_abs().max(b.log10_abs())
        }
    };
    loop {
        if f_lo.is_zero() {
            return Ok(Root {
                energy: lo,
                residual: f64::NEG_INFINITY,
            });
        }
        if f_hi.is_zero() {
            return Ok(Root {
                energy: hi,
                residual: f64::NEG_INFINITY,
            });
        }
        if f_lo.signum() != f_hi.signum() {
            break;
        }
        if widened {
            return Err(AtemError::NoSignChange {
                lo: lo.to_f64(),
                hi: hi.to_f64(),
            });
        }
        widened = true;
        let w = BigReal::from_f64(widen, prec);
        lo = &lo - &w;
        hi = &hi + &w;
        f_lo = eval_checked(f, &lo)?;
        f_hi = eval_checked(f, &hi)?;
    }
    let s_lo = f_lo.signum();
    let local = scale(&f_lo, &f_hi);
    let tol = BigReal::from_f64(tol_e, prec);
    while (&hi - &lo) > tol {
        let mid = (&lo + &hi).div_i64(2);
        if mid == lo || mid == hi {
            break;
        }
        let fm = eval_checked(f, &mid)?;
        match fm.signum() {
            0 => {
                return Ok(Root {
                    energy: mid,
                    residual: f64::NEG_INFINITY,
                })
            }
            s if s == s_lo => lo = mid,
            _ => hi = mid,
        }
    }
    let energy = (&lo + &hi).div_i64(2);
    let residual = eval_checked(f, &energy)?.log10_abs() - local;
    Ok(Root { energy, residual })
}

/// All refined roots of `f` in the window, ascending and deduplicated.
pub fn find_roots(
    f: &(impl Functional + ?Sized),
    window: &EnergyWindow,
    opts: &SolverOptions,
) -> Result<Vec<Root>> {
    let brackets = scan_brackets(f, window, opts.precision, opts.execution)?;
    let refined: Vec<Root> = opts
        .execution
        .map(&brackets, |b| refine_root(f, b, opts.tol_e, window.spacing()))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut roots: Vec<Root> = Vec::with_capacity(refined.len());
    for r in refined {
        if let Some(last) = roots.last() {
            if (&r.energy - &last.energy).abs().to_f64() <= 2.0 * opts.tol_e {
                continue;
            }
        }
        roots.push(r);
    }
    Ok(roots)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub energy: BigReal,
    pub k: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub energy: BigReal,
    pub k_used: usize,
    pub residual: f64,
    /// Distance to the matched root at the previous order.
    pub stability: f64,
    pub state_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Spectrum {
    pub accepted: Vec<EigenResult>,
    /// Roots of the last two orders without a partner within `tol_stab`.
    pub spurious: Vec<Candidate>,
}

fn validate_orders(family: &(impl FunctionalFamily + ?Sized), k_list: &[usize]) -> Result<()> {
    if k_list.is_empty() {
        return Err(AtemError::InvalidParam {
            name: "k_list".into(),
            reason: "empty".into(),
        });
    }
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AtemError::InvalidParam {
            name: "k_list".into(),
            reason: "must be strictly ascending".into(),
        });
    }
    if k_list[0] < family.min_order() {
        return Err(AtemError::InvalidParam {
            name: "k".into(),
            reason: format!("must be at least {}", family.min_order()),
        });
    }
    Ok(())
}

/// Refined roots for each order in `k_list`.
pub fn roots_by_order(
    family: &(impl FunctionalFamily + ?Sized),
    window: &EnergyWindow,
    k_list: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<Vec<Candidate>>> {
    validate_orders(family, k_list)?;
    k_list
        .iter()
        .map(|&k| {
            let f = AtOrder { family, k };
            let roots = find_roots(&f, window, opts)?;
            debug!("k = {k}: {} roots", roots.len());
            Ok(roots
                .into_iter()
                .map(|r| Candidate {
                    energy: r.energy,
                    k,
                    residual: r.residual,
                })
                .collect())
        })
        .collect()
}

/// Greedy nearest-neighbour pairing: pairs are taken in order of distance,
/// ties going to the lower index in `prev` (the lower-order ordering).
/// Returns `(prev_index, cur_index, distance)` for pairs within `max_dist`.
fn pair_nearest(prev: &[BigReal], cur: &[BigReal], max_dist: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * cur.len());
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in cur.iter().enumerate() {
            let d = (a - b).abs().to_f64();
            if d <= max_dist {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap_or(Ordering::Equal)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 && w[0].0 > 0.0 {
            debug!("matching tie at distance {:e}", w[0].0);
        }
    }
    let mut used_prev = vec![false; prev.len()];
    let mut used_cur = vec![false; cur.len()];
    let mut out = Vec::new();
    for (d, i, j) in pairs {
        if !used_prev[i] && !used_cur[j] {
            used_prev[i] = true;
            used_cur[j] = true;
            out.push((i, j, d));
        }
    }
    out.sort_by_key(|&(_, j, _)| j);
    out
}

fn spectrum_from_roots(per_k: &[Vec<Candidate>], tol_stab: f64) -> Spectrum {
    let cur = per_k.last().expect("validated non-empty");
    if per_k.len() == 1 {
        return Spectrum {
            accepted: cur
                .iter()
                .enumerate()
                .map(|(i, c)| EigenResult {
                    energy: c.energy.clone(),
                    k_used: c.k,
                    residual: c.residual,
                    stability: f64::NAN,
                    state_index: i,
                })
                .collect(),
            spurious: Vec::new(),
        };
    }
    let prev = &per_k[per_k.len() - 2];
    let energies = |v: &[Candidate]| v.iter().map(|c| c.energy.clone()).collect::<Vec<_>>();
    let pairs = pair_nearest(&energies(prev), &energies(cur), tol_stab);

    let mut matched_prev = vec![false; prev.len()];
    let mut matched_cur = vec![false; cur.len()];
    let mut accepted = Vec::new();
    for &(i, j, d) in &pairs {
        matched_prev[i] = true;
        matched_cur[j] = true;
        accepted.push(EigenResult {
            energy: cur[j].energy.clone(),
            k_used: cur[j].k,
            residual: cur[j].residual,
            stability: d,
            state_index: 0,
        });
    }
    accepted.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap_or(Ordering::Equal));
    for (i, r) in accepted.iter_mut().enumerate() {
        r.state_index = i;
    }
    let mut spurious: Vec<Candidate> = prev
        .iter()
        .zip(&matched_prev)
        .chain(cur.iter().zip(&matched_cur))
        .filter(|(_, &m)| !m)
        .map(|(c, _)| c.clone())
        .collect();
    spurious.sort_by(|a, b| {
        a.energy
            .partial_cmp(&b.energy)
            .unwrap_or(Ordering::Equal)
            .then(a.k.cmp(&b.k))
    });
    Spectrum { accepted, spurious }
}

/// Roots at the largest order that persist from the previous order.
pub fn stable_spectrum(
    family: &(impl FunctionalFamily + ?Sized),
    window: &EnergyWindow,
    k_list: &[usize],
    opts: &SolverOptions,
) -> Result<Spectrum> {
    let per_k = roots_by_order(family, window, k_list, opts)?;
    Ok(spectrum_from_roots(&per_k, opts.tol_stab))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellStatus {
    /// Within `tol_stab` of the same state at the next order.
    Stable,
    /// Drifts by more than `tol_stab` before the next order.
    Unstable,
    /// Last row, or a single-order table.
    Final,
    /// No root was assigned to this state at this order.
    Missing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub energy: Option<BigReal>,
    pub status: CellStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub ks: Vec<usize>,
    pub cells: Vec<Vec<Cell>>,
    /// Roots of each row that no state column claimed.
    pub extras: Vec<Vec<Candidate>>,
    pub spectrum: Spectrum,
}

impl ConvergenceTable {
    pub fn states(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn energy(&self, row: usize, state: usize) -> Option<&BigReal> {
        self.cells[row][state].energy.as_ref()
    }
}

/// Rows are orders, columns the accepted states at the largest order;
/// every row's roots are assigned to columns by nearest energy.
pub fn convergence_table(
    family: &(impl FunctionalFamily + ?Sized),
    window: &EnergyWindow,
    k_list: &[usize],
    opts: &SolverOptions,
) -> Result<ConvergenceTable> {
    let per_k = roots_by_order(family, window, k_list, opts)?;
    let spectrum = spectrum_from_roots(&per_k, opts.tol_stab);
    let columns: Vec<BigReal> = spectrum.accepted.iter().map(|r| r.energy.clone()).collect();

    let mut cells = Vec::with_capacity(per_k.len());
    let mut extras = Vec::with_capacity(per_k.len());
    for roots in &per_k {
        let energies: Vec<BigReal> = roots.iter().map(|c| c.energy.clone()).collect();
        let pairs = pair_nearest(&columns, &energies, f64::INFINITY);
        let mut row = vec![
            Cell {
                energy: None,
                status: CellStatus::Missing,
            };
            columns.len()
        ];
        let mut claimed = vec![false; roots.len()];
        for (col, j, _) in pairs {
            claimed[j] = true;
            row[col].energy = Some(energies[j].clone());
            row[col].status = CellStatus::Final;
        }
        extras.push(
            roots
                .iter()
                .zip(&claimed)
                .filter(|(_, &c)| !c)
                .map(|(c, _)| c.clone())
                .collect(),
        );
        cells.push(row);
    }
    for r in 0..cells.len().saturating_sub(1) {
        for c in 0..columns.len() {
            let (cur, next) = (&cells[r][c].energy, &cells[r + 1][c].energy);
            if let (Some(a), Some(b)) = (cur, next) {
                let d = (a - b).abs().to_f64();
                cells[r][c].status = if d <= opts.tol_stab {
                    CellStatus::Stable
                } else {
                    CellStatus::Unstable
                };
            } else if cur.is_some() {
                cells[r][c].status = CellStatus::Unstable;
            }
        }
    }
    Ok(ConvergenceTable {
        ks: k_list.to_vec(),
        cells,
        extras,
        spectrum,
    })
}
