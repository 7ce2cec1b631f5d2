//! Scalar root finders: bracketed bisection with Newton polish, Brent, and
//! complex Newton/Muller iterations.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bisection of a sign change on `[lo, hi]` down to `bracket_tol`, then
/// safeguarded Newton until the step falls below `newton_tol`.
pub fn bisect_then_newton(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    bracket_tol: f64,
    newton_tol: f64,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > bracket_tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = f(x) / d;
        let next = x - step;
        if next < lo - bracket_tol || next > hi + bracket_tol {
            break;
        }
        x = next;
        if step.abs() < newton_tol {
            break;
        }
    }
    Ok(x)
}

/// Brent's method on a bracketing interval.
pub fn brent(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoConvergence(format!("no sign change on [{a}, {b}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1 * xm.signum() };
        fb = f(b);
    }
    Err(Error::NoConvergence("brent iteration limit".into()))
}

/// Complex Newton with a central finite-difference derivative.
///
/// `admissible` rejects iterates outside the region where `f` is defined;
/// a rejected step is reported as an error so callers can fall back.
pub fn complex_newton(
    f: impl Fn(Complex64) -> Result<Complex64>,
    z0: Complex64,
    step: f64,
    tol: f64,
    max_iter: usize,
    admissible: impl Fn(Complex64) -> bool,
) -> Result<Complex64> {
    let mut z = z0;
    for _ in 0..max_iter {
        let fz = f(z)?;
        let dh = Complex64::new(step, 0.0);
        let deriv = (f(z + dh)? - f(z - dh)?) / (dh * 2.0);
        if deriv.norm() == 0.0 || !deriv.norm().is_finite() {
            return Err(Error::NoConvergence("vanishing derivative in Newton".into()));
        }
        let delta = fz / deriv;
        let next = z - delta;
        if !admissible(next) {
            return Err(Error::OutsideStrip(format!("{next}")));
        }
        z = next;
        if delta.norm() < tol {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence(format!("Newton stalled near {z}")))
}

/// Muller's method from three starting points.
pub fn muller(
    f: impl Fn(Complex64) -> Result<Complex64>,
    mut x0: Complex64,
    mut x1: Complex64,
    mut x2: Complex64,
    tol: f64,
    max_iter: usize,
    admissible: impl Fn(Complex64) -> bool,
) -> Result<Complex64> {
    let mut f0 = f(x0)?;
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..max_iter {
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - a * f2 * 4.0).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        let dx = if den.norm() == 0.0 { Complex64::new(tol, 0.0) } else { -f2 * 2.0 / den };
        let x3 = x2 + dx;
        if !admissible(x3) {
            return Err(Error::OutsideStrip(format!("{x3}")));
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 = x3;
        f2 = f(x2)?;
        if dx.norm() < tol {
            return Ok(x2);
        }
    }
    Err(Error::NoConvergence(format!("Muller stalled near {x2}")))
}
