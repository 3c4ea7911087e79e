//! Grid scan of a scalar secular function followed by root refinement.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{MslError, Result};
use crate::exec::{map_grid, Execution};

/// Relative size of the imaginary part below which a scan is treated as real.
pub const REAL_SCAN_TOL: f64 = 1e-9;
/// A refined minimum is a root only when it drops this far below its neighbours.
pub const MINIMUM_RATIO: f64 = 1e-6;
/// A bisected sign change counts as a root only below this fraction of the
/// larger bracket-end value.
pub const POLE_RATIO: f64 = 1e-3;
const MAX_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Sign changes when every unmasked value is real, minima otherwise.
    #[default]
    Auto,
    /// Sign changes of the real part, refined by bisection.
    Sign,
    /// Local minima of the modulus, refined by golden-section search.
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub tol: f64,
    pub mode: ScanMode,
    pub exec: Execution,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            mode: ScanMode::Auto,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
}

/// Scan values, brackets and refined roots of one secular function.
/// A `None` value marks a grid point where the function could not be
/// evaluated; no bracket ever spans such a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecularScan {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub values: Vec<Option<Complex64>>,
    pub mode: ScanMode,
    pub brackets: Vec<(f64, f64)>,
    pub roots: Vec<Root>,
    /// Bisection limits that failed the residual test: poles, or roots
    /// sitting on a pole.
    pub rejected_poles: Vec<f64>,
    /// Why each masked grid point could not be evaluated, in grid order.
    pub masked: Vec<MaskedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskedPoint {
    pub param: f64,
    pub status: String,
}

/// Short status tag for an evaluation failure.
pub fn failure_status(err: &MslError) -> &'static str {
    match err {
        MslError::Overflow { .. } => "overflow",
        MslError::Resonance { .. } => "resonance",
        MslError::IllConditioned { .. } | MslError::SingularBlock { .. } | MslError::SingularB { .. } => {
            "ill_conditioned"
        }
        MslError::Partition(_) | MslError::Solver { .. } => "degenerate",
        MslError::Modeling(_) => "not_confined",
        _ => "error",
    }
}

impl SecularScan {
    pub fn root_values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.masked.len()
    }

    /// One CSV row per root: `parameter,root,residual,variant`.
    pub fn write_roots_csv<W: Write>(&self, out: W, variant: &str) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["parameter", "root", "residual", "variant"])?;
        for r in &self.roots {
            w.write_record([
                self.parameter.clone(),
                format!("{:.15e}", r.value),
                format!("{:.6e}", r.residual),
                variant.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Validate a scan grid: at least two finite, strictly increasing points.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(MslError::InvalidInput("scan grid needs at least two points".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(MslError::InvalidInput("scan grid contains non-finite values".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MslError::InvalidInput("scan grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `count` equally spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (stop - start) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { stop } else { start + h * i as f64 })
                .collect()
        }
    }
}

fn eval<F>(f: &F, x: f64) -> Option<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    eval_status(f, x).ok()
}

fn eval_status<F>(f: &F, x: f64) -> std::result::Result<Complex64, &'static str>
where
    F: Fn(f64) -> Result<Complex64>,
{
    match f(x) {
        Ok(v) if v.re.is_finite() && v.im.is_finite() => Ok(v),
        Ok(_) => Err("non_finite"),
        Err(e) => Err(failure_status(&e)),
    }
}

fn resolve_mode(values: &[Option<Complex64>], requested: ScanMode) -> ScanMode {
    match requested {
        ScanMode::Auto => {
            // Imaginary noise is judged against the typical magnitude so that
            // values next to a root do not count as complex.
            let mut norms: Vec<f64> = values.iter().flatten().map(|v| v.norm()).collect();
            norms.sort_by(f64::total_cmp);
            let typical = norms.get(norms.len() / 2).copied().unwrap_or(0.0);
            let real = values
                .iter()
                .flatten()
                .all(|v| v.im.abs() <= REAL_SCAN_TOL * v.norm().max(typical).max(f64::MIN_POSITIVE));
            if real {
                ScanMode::Sign
            } else {
                ScanMode::Minimum
            }
        }
        m => m,
    }
}

/// Evaluate `f` on `grid`, bracket candidate roots and refine each to
/// `|Δparam| ≤ tol`. Evaluation errors mask grid points instead of failing.
pub fn scan_and_refine<F>(parameter: &str, f: F, grid: &[f64], opts: &ScanOptions) -> Result<SecularScan>
where
    F: Fn(f64) -> Result<Complex64> + Sync + Send,
{
    check_grid(grid)?;
    if !(opts.tol > 0.0) {
        return Err(MslError::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let evaluated = map_grid(grid, opts.exec, |&x| eval_status(&f, x));
    let masked = grid
        .iter()
        .zip(&evaluated)
        .filter_map(|(&param, v)| {
            v.err().map(|status| MaskedPoint {
                param,
                status: status.to_string(),
            })
        })
        .collect();
    let values: Vec<Option<Complex64>> = evaluated.into_iter().map(|v| v.ok()).collect();
    let mode = resolve_mode(&values, opts.mode);
    let mut scan = SecularScan {
        parameter: parameter.to_string(),
        grid: grid.to_vec(),
        values,
        mode,
        brackets: Vec::new(),
        roots: Vec::new(),
        rejected_poles: Vec::new(),
        masked,
    };
    match mode {
        ScanMode::Minimum => refine_minima(&mut scan, &f, opts.tol),
        _ => refine_sign_changes(&mut scan, &f, opts.tol),
    }
    Ok(scan)
}

/// Substitute for a masked grid point: the evaluable point closest to
/// `masked` on the segment towards `from`, probing geometrically.
fn probe_towards<F>(f: &F, from: f64, masked: f64) -> Option<(f64, Complex64)>
where
    F: Fn(f64) -> Result<Complex64>,
{
    (1..=PROBE_DEPTH).rev().find_map(|j| {
        let x = masked + (from - masked) * 0.5f64.powi(j as i32);
        (x != masked && x != from).then_some(x).and_then(|x| eval(f, x).map(|v| (x, v)))
    })
}

const PROBE_DEPTH: usize = 30;

fn refine_sign_changes<F>(scan: &mut SecularScan, f: &F, tol: f64)
where
    F: Fn(f64) -> Result<Complex64>,
{
    let grid = scan.grid.clone();
    let values = scan.values.clone();
    // Segments between evaluable points; a masked neighbour is replaced by
    // the closest evaluable probe so levels next to it are not lost.
    let mut segments: Vec<((f64, Complex64), (f64, Complex64))> = Vec::new();
    for i in 0..grid.len() {
        let Some(v) = values[i] else { continue };
        if v.re == 0.0 {
            scan.brackets.push((grid[i], grid[i]));
            scan.roots.push(Root {
                value: grid[i],
                residual: v.norm(),
                bracket: (grid[i], grid[i]),
            });
            continue;
        }
        if let Some(&next) = values.get(i + 1) {
            match next {
                Some(next) => segments.push(((grid[i], v), (grid[i + 1], next))),
                None => segments.extend(probe_towards(f, grid[i], grid[i + 1]).map(|p| ((grid[i], v), p))),
            }
        }
        if i > 0 && values[i - 1].is_none() {
            segments.extend(probe_towards(f, grid[i], grid[i - 1]).map(|p| (p, (grid[i], v))));
        }
    }
    for ((lo, f_lo), (hi, f_hi)) in segments {
        if f_hi.re == 0.0 || f_lo.re.signum() == f_hi.re.signum() {
            continue;
        }
        scan.brackets.push((lo, hi));
        match bisect(f, lo, hi, f_lo.re, tol) {
            Some(x) => {
                let residual = eval(f, x).map(|r| r.norm()).unwrap_or(f64::INFINITY);
                // A genuine root collapses |f| relative to the bracket ends; a
                // pole (or a pole sitting next to a root) does not.
                if residual <= POLE_RATIO * f_lo.norm().max(f_hi.norm()) {
                    scan.roots.push(Root {
                        value: x,
                        residual,
                        bracket: (lo, hi),
                    });
                } else {
                    scan.rejected_poles.push(x);
                }
            }
            None => scan.rejected_poles.push(0.5 * (lo + hi)),
        }
    }
    refine_touching(scan, f, tol);
    scan.roots.sort_by(|a, b| a.value.total_cmp(&b.value));
    scan.rejected_poles.sort_by(f64::total_cmp);
    scan.brackets.sort_by(|a, b| a.0.total_cmp(&b.0));
}

/// Double roots of a real function touch zero without a sign change. They
/// show up as grid minima of |f| whose refined value collapses by
/// [`MINIMUM_RATIO`]; the location is then polished on the derivative.
fn refine_touching<F>(scan: &mut SecularScan, f: &F, tol: f64)
where
    F: Fn(f64) -> Result<Complex64>,
{
    let g: Vec<Option<f64>> = scan.values.iter().map(|v| v.map(|z| z.re)).collect();
    for i in 1..g.len().saturating_sub(1) {
        let (Some(a), Some(m), Some(b)) = (g[i - 1], g[i], g[i + 1]) else {
            continue;
        };
        if m == 0.0 || a.signum() != m.signum() || b.signum() != m.signum() {
            continue;
        }
        if !(m.abs() <= a.abs() && m.abs() < b.abs()) {
            continue;
        }
        let (lo, hi) = (scan.grid[i - 1], scan.grid[i + 1]);
        let Some((x, value)) = golden_section(f, lo, hi, tol) else {
            continue;
        };
        if value > MINIMUM_RATIO * a.abs().min(b.abs()) {
            continue;
        }
        let w = (1e3 * tol).max(1e-9 * x.abs());
        let side = |x: f64| eval(f, x).map(|v| v.re);
        let x = match (side(x - w), side(x + w)) {
            // A simple root hidden next to a pole or a second root.
            (Some(l), Some(r)) if l.signum() != r.signum() => bisect(f, x - w, x + w, l, tol).unwrap_or(x),
            _ => polish_double_root(f, x, lo, hi).unwrap_or(x),
        };
        let residual = eval(f, x).map(|v| v.norm()).unwrap_or(value);
        scan.brackets.push((lo, hi));
        scan.roots.push(Root {
            value: x,
            residual,
            bracket: (lo, hi),
        });
    }
}

/// Newton on f' with Richardson-extrapolated central differences.
fn polish_double_root<F>(f: &F, mut x: f64, lo: f64, hi: f64) -> Option<f64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let h = 1e-2 * (hi - lo);
    let re = |x: f64| eval(f, x).map(|v| v.re);
    for _ in 0..3 {
        let (p1, m1, p2, m2, c0) = (re(x + h)?, re(x - h)?, re(x + 2.0 * h)?, re(x - 2.0 * h)?, re(x)?);
        let d1 = (4.0 * (p1 - m1) / (2.0 * h) - (p2 - m2) / (4.0 * h)) / 3.0;
        let d2 = (4.0 * (p1 - 2.0 * c0 + m1) / (h * h) - (p2 - 2.0 * c0 + m2) / (4.0 * h * h)) / 3.0;
        if !(d2.abs() > 0.0) {
            return None;
        }
        let next = x - d1 / d2;
        if !(next > lo && next < hi) {
            return None;
        }
        let done = (next - x).abs() <= 1e-15 * x.abs().max(1.0);
        x = next;
        if done {
            break;
        }
    }
    Some(x)
}

fn bisect<F>(f: &F, mut lo: f64, mut hi: f64, f_lo: f64, tol: f64) -> Option<f64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let sign_lo = f_lo.signum();
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let v = eval(f, mid)?.re;
        if v == 0.0 {
            return Some(mid);
        }
        if v.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn refine_minima<F>(scan: &mut SecularScan, f: &F, tol: f64)
where
    F: Fn(f64) -> Result<Complex64>,
{
    let g: Vec<Option<f64>> = scan.values.iter().map(|v| v.map(|z| z.norm())).collect();
    for i in 1..g.len().saturating_sub(1) {
        let (Some(a), Some(m), Some(b)) = (g[i - 1], g[i], g[i + 1]) else {
            continue;
        };
        if !(m <= a && m < b) {
            continue;
        }
        let (lo, hi) = (scan.grid[i - 1], scan.grid[i + 1]);
        scan.brackets.push((lo, hi));
        let Some((x, value)) = golden_section(f, lo, hi, tol) else {
            continue;
        };
        if value <= MINIMUM_RATIO * a.min(b) {
            scan.roots.push(Root {
                value: x,
                residual: value,
                bracket: (lo, hi),
            });
        }
    }
}

fn golden_section<F>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> Option<(f64, f64)>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let g = |x: f64| eval(f, x).map(|v| v.norm());
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= tol || !(x1 > lo && x2 < hi) {
            break;
        }
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2)?;
        }
    }
    Some(if g1 <= g2 { (x1, g1) } else { (x2, g2) })
}
