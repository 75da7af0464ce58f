//! Adaptive Simpson quadrature with semi-infinite support. Every integrand in
//! this crate carries an exponential tail, so the infinite case is handled by
//! doubling windows that stop once two consecutive windows contribute below
//! tolerance.

use crate::{Error, Result};

/// Tolerance and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum recursion depth per panel; 2^depth subdivisions.
    pub max_subdivisions: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 50,
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// Recursive adaptive Simpson with Richardson acceptance; on depth exhaustion
/// returns Err carrying the best estimate so far.
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> std::result::Result<f64, f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let s2 = left + right;
    let err = s2 - whole;
    if err.abs() <= 15.0 * tol || (b - a).abs() < 1e-300 {
        return Ok(s2 + err / 15.0);
    }
    if depth == 0 {
        return Err(s2 + err / 15.0);
    }
    let half_tol = 0.5 * tol;
    match (
        adaptive(f, a, m, fa, flm, fm, left, half_tol, depth - 1),
        adaptive(f, m, b, fm, frm, fb, right, half_tol, depth - 1),
    ) {
        (Ok(l), Ok(r)) => Ok(l + r),
        (l, r) => Err(l.unwrap_or_else(|e| e) + r.unwrap_or_else(|e| e)),
    }
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, q: &Quadrature) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    let tol = q.abs_tol.max(q.rel_tol * whole.abs());
    adaptive(f, a, b, fa, fm, fb, whole, tol, q.max_subdivisions).map_err(|partial| {
        Error::Quadrature {
            partial,
            detail: format!("subdivision limit on [{a}, {b}]"),
        }
    })
}

/// Integrate `f` over [lower, upper]; `upper` may be `f64::INFINITY` when `f`
/// is dominated by an exponential tail. The semi-infinite range is swept with
/// doubling windows and truncated once two consecutive windows each fall
/// below tolerance (the envelope has then decayed past any contribution).
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, q: &Quadrature) -> Result<f64> {
    if !lower.is_finite() {
        return Err(Error::Domain("lower integration limit must be finite".into()));
    }
    if upper.is_finite() {
        if upper < lower {
            return Err(Error::Domain(format!(
                "integration bounds out of order: [{lower}, {upper}]"
            )));
        }
        return integrate_finite(&f, lower, upper, q);
    }

    let mut total = 0.0;
    let mut a = lower;
    let mut width = 1.0f64.max(lower.abs() * 1e-3);
    let mut quiet = 0u32;
    for _ in 0..80 {
        let b = a + width;
        let piece = integrate_finite(&f, a, b, q)?;
        total += piece;
        if piece.abs() <= q.abs_tol.max(q.rel_tol * total.abs()) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        a = b;
        width *= 2.0;
    }
    Err(Error::Quadrature {
        partial: total,
        detail: "tail did not decay within the window budget".into(),
    })
}
