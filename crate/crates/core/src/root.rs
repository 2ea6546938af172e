//! Bracketed scalar root finding.
//!
//! Both solvers keep a sign-changing bracket at every iteration, so they
//! converge for any continuous function whose values at the bracket ends
//! have opposite signs. Acceleration steps (false position, or Newton when a
//! derivative is supplied) are only accepted when they land strictly inside
//! the current bracket and shrink it fast enough; otherwise the solver falls
//! back to plain bisection.

use crate::math::abs;

/// Iteration cap. Bisection alone needs ~1100 halvings to exhaust the f64 range.
const MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("no sign change across bracket: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { f_lo: f64, f_hi: f64 },
    #[error("invalid bracket ({lo}, {hi})")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("function returned a non-finite value at {at}")]
    NonFinite { at: f64 },
}

fn check_bracket(lo: f64, hi: f64, tol: f64) -> Result<(), RootError> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && tol > 0.0) {
        return Err(RootError::InvalidBracket { lo, hi });
    }
    Ok(())
}

fn finite(x: f64, at: f64) -> Result<f64, RootError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(RootError::NonFinite { at })
    }
}

/// Finds a root of `f` inside `bracket`.
///
/// Returns `r` with `|f(r)| <= tol`, or the midpoint of a sign-changing
/// bracket of width `<= tol`. Uses the Illinois variant of false position,
/// guarded by bisection whenever the bracket fails to halve.
pub fn solve_scalar_bracketed<F>(mut f: F, bracket: (f64, f64), tol: f64) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = bracket;
    check_bracket(lo, hi, tol)?;
    let mut f_lo = finite(f(lo), lo)?;
    let mut f_hi = finite(f(hi), hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(RootError::NoSignChange { f_lo, f_hi });
    }

    // which end was retained last time: -1 lo, +1 hi
    let mut retained = 0i8;
    let mut prev_width = hi - lo;
    for _ in 0..MAX_ITER {
        let width = hi - lo;
        if width <= tol {
            break;
        }
        let mid = lo + 0.5 * width;
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        // bisect when false position stalls or leaves the open bracket
        if !(x > lo && x < hi) || width > 0.5 * prev_width {
            x = mid;
        }
        if x <= lo || x >= hi {
            // bracket exhausted at floating point resolution
            break;
        }
        prev_width = width;
        let fx = finite(f(x), x)?;
        if abs(fx) <= tol {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if retained == 1 {
                f_hi *= 0.5;
            }
            retained = 1;
        } else {
            hi = x;
            f_hi = fx;
            if retained == -1 {
                f_lo *= 0.5;
            }
            retained = -1;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

/// Safeguarded Newton iteration inside a sign-changing bracket.
///
/// Takes a Newton step from the current iterate when it stays in the bracket
/// and at least halves the previous correction, bisects otherwise. Stops when
/// `|f(r)| <= tol` or the correction drops below `tol`.
pub fn solve_newton_bracketed<F, D>(
    mut f: F,
    mut df: D,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = bracket;
    check_bracket(lo, hi, tol)?;
    let f_lo = finite(f(lo), lo)?;
    let f_hi = finite(f(hi), hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(RootError::NoSignChange { f_lo, f_hi });
    }
    // orient so that f(lo) < 0 < f(hi)
    if f_lo > 0.0 {
        core::mem::swap(&mut lo, &mut hi);
    }

    let mut x = 0.5 * (lo + hi);
    let mut dx_old = abs(hi - lo);
    let mut dx = dx_old;
    for _ in 0..MAX_ITER {
        let fx = finite(f(x), x)?;
        if abs(fx) <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dfx = df(x);
        let newton_out = ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0.0;
        let slow = abs(2.0 * fx) > abs(dx_old * dfx);
        dx_old = dx;
        let next = if !dfx.is_finite() || dfx == 0.0 || newton_out || slow {
            dx = 0.5 * (hi - lo);
            lo + dx
        } else {
            dx = fx / dfx;
            x - dx
        };
        if next == x {
            return Ok(x);
        }
        x = next;
        if abs(dx) <= tol {
            return Ok(x);
        }
    }
    Ok(x)
}
