//! Scalar root finding for monotone functions.

use crate::error::{Error, Result};

/// Root of an increasing function `f` on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`.
///
/// Illinois-accelerated regula falsi, safeguarded by bisection so the
/// bracket at least halves every other step. Stops when the bracket is
/// below `xtol` (absolute) or `f` is exactly zero.
pub fn solve_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo > 0.0 || fhi < 0.0 || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::numerical(format!("root not bracketed on [{lo}, {hi}]"), flo.min(-fhi)));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    let mut it = 0;
    while hi - lo > xtol && it < 300 {
        it += 1;
        let width = hi - lo;
        let mut x = if it % 3 == 0 { 0.5 * (lo + hi) } else { lo - flo * (hi - lo) / (fhi - flo) };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if hi - lo > 0.75 * width && it % 3 != 0 {
            // slow progress; the next iteration bisects
            continue;
        }
    }
    Ok(if -flo < fhi { lo } else { hi })
}

/// Expand `[lo, hi]` geometrically until `f(lo) ≤ 0 ≤ f(hi)` for an increasing `f` on `(0, ∞)`.
pub fn bracket_positive<F: FnMut(f64) -> f64>(mut f: F, start: f64) -> Result<(f64, f64)> {
    let mut lo = start;
    let mut hi = start;
    let mut k = 0;
    while f(lo) > 0.0 {
        lo *= 0.5;
        k += 1;
        if k > 200 {
            return Err(Error::numerical("bracket (lower end)", lo));
        }
    }
    k = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        k += 1;
        if k > 200 {
            return Err(Error::numerical("bracket (upper end)", hi));
        }
    }
    Ok((lo, hi))
}
