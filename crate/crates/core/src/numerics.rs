//! Adaptive Simpson quadrature and golden-section search.

use crate::error::{Error, Result};

/// Maximum bisection depth of a quadrature panel.
pub const MAX_QUAD_DEPTH: u32 = 48;

/// Integrand evaluations allowed per call before giving up.
pub const MAX_QUAD_EVALUATIONS: usize = 4_000_000;

/// Number of uniform panels the domain is cut into before adapting.
const INITIAL_PANELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-panel Richardson error estimates.
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * ∫|f|)`.
///
/// The domain is cut into 64 uniform panels, each refined by recursive
/// Simpson bisection with Richardson extrapolation. A panel that still misses
/// its share of the tolerance at depth [`MAX_QUAD_DEPTH`], or refinement past
/// [`MAX_QUAD_EVALUATIONS`], turns the whole call into [`Error::Convergence`],
/// which carries the best estimate.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Quadrature>
where
    F: FnMut(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("bounds", format!("[{a}, {b}] must be finite")));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }

    let width = (b - a) / INITIAL_PANELS as f64;
    // Endpoints and midpoints of every initial panel.
    let mut grid = Vec::with_capacity(2 * INITIAL_PANELS + 1);
    for i in 0..=2 * INITIAL_PANELS {
        let x = if i == 2 * INITIAL_PANELS { b } else { a + 0.5 * width * i as f64 };
        grid.push((x, f(x)));
    }

    let mut scale = 0.0;
    for p in 0..INITIAL_PANELS {
        let (x0, f0) = grid[2 * p];
        let (_, fm) = grid[2 * p + 1];
        let (x1, f1) = grid[2 * p + 2];
        scale += (x1 - x0) / 6.0 * (f0.abs() + 4.0 * fm.abs() + f1.abs());
    }
    if !scale.is_finite() {
        return Err(Error::Domain("integrand is not finite on the quadrature grid".into()));
    }
    let tol = abs_tol.max(rel_tol * scale);
    let panel_tol = tol / INITIAL_PANELS as f64;

    let mut value = 0.0;
    let mut state = State { evaluations: grid.len(), error: 0.0, converged: true };
    for p in 0..INITIAL_PANELS {
        let (x0, f0) = grid[2 * p];
        let (xm, fm) = grid[2 * p + 1];
        let (x1, f1) = grid[2 * p + 2];
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        let panel = Panel { a: x0, m: xm, b: x1, fa: f0, fm, fb: f1, whole };
        value += refine(&mut f, panel, panel_tol, MAX_QUAD_DEPTH, &mut state);
    }
    let State { evaluations, error: error_estimate, converged } = state;

    if !value.is_finite() {
        return Err(Error::Domain("integrand is not finite inside the domain".into()));
    }
    if !converged {
        return Err(Error::Convergence {
            what: format!("adaptive Simpson on [{a}, {b}] to tolerance {tol:e}"),
            estimate: value,
            achieved_error: error_estimate,
        });
    }
    Ok(Quadrature { value, error_estimate, evaluations })
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

struct State {
    evaluations: usize,
    error: f64,
    converged: bool,
}

fn refine<F: FnMut(f64) -> f64>(f: &mut F, p: Panel, tol: f64, depth: u32, state: &mut State) -> f64 {
    let lm = 0.5 * (p.a + p.m);
    let rm = 0.5 * (p.m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    state.evaluations += 2;
    let left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
    let right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
    let delta = left + right - p.whole;
    if delta.abs() <= 15.0 * tol || lm <= p.a || rm >= p.b {
        state.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    if depth == 0 || state.evaluations >= MAX_QUAD_EVALUATIONS {
        state.converged = false;
        state.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    let lp = Panel { a: p.a, m: lm, b: p.m, fa: p.fa, fm: flm, fb: p.fm, whole: left };
    let rp = Panel { a: p.m, m: rm, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right };
    refine(f, lp, 0.5 * tol, depth - 1, state) + refine(f, rp, 0.5 * tol, depth - 1, state)
}

/// Maximizes a unimodal `f` on `[lo, hi]` until the bracket is narrower than `width_tol`.
///
/// Returns the best point visited and its value.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, width_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > width_tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
