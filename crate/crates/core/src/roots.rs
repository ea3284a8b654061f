//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on a sign-changing bracket `[lo, hi]`.
///
/// Combines bisection with secant and inverse quadratic steps; the bracket
/// is kept at every iteration, so convergence is guaranteed for any
/// function that changes sign, continuous or not.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !fa.is_finite() || !fb.is_finite() || fa.signum() == fb.signum() {
        return Err(Error::RootNotFound {
            lo,
            hi,
            reason: format!("no sign change (f(lo) = {fa:e}, f(hi) = {fb:e})"),
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::RootNotFound {
        lo,
        hi,
        reason: format!("no convergence after {max_iter} iterations"),
    })
}

/// Scans `[start, end]` in steps of `step` and refines every sign change.
///
/// Stops after `max_roots` roots. Grid points where `f` is exactly zero are
/// reported directly.
pub fn scan_roots<F>(
    mut f: F,
    start: f64,
    end: f64,
    step: f64,
    xtol: f64,
    max_roots: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> f64,
{
    let mut roots = Vec::new();
    let mut x0 = start;
    let mut f0 = f(x0);
    while x0 < end && roots.len() < max_roots {
        let x1 = (x0 + step).min(end);
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() {
            roots.push(brent(&mut f, x0, x1, xtol, 200)?);
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_handles_step_function() {
        let r = brent(|x| if x < 0.3 { -1.0 } else { 1.0 }, 0.0, 1.0, 1e-13, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_missing_bracket() {
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 50),
            Err(Error::RootNotFound { .. })
        ));
    }

    #[test]
    fn scan_finds_all_sine_roots() {
        let roots = scan_roots(f64::sin, 0.1, 10.0, 0.05, 1e-14, 10).unwrap();
        assert_eq!(roots.len(), 3);
        for (i, r) in roots.iter().enumerate() {
            assert!((r - (i + 1) as f64 * std::f64::consts::PI).abs() < 1e-12);
        }
    }
}
