//! Special functions on complex arguments: the Macdonald function K₀ and a
//! cancellation-free `exp(w) - 1`.

use num_complex::Complex64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Macdonald function K₀(x) for `Re x >= 0`, `x != 0`.
///
/// Ascending series for `|x| <= 2`, Steed's continued fraction beyond.
pub fn bessel_k0(x: Complex64) -> Complex64 {
    if x.norm() <= 2.0 {
        k0_series(x)
    } else {
        k0_continued_fraction(x)
    }
}

fn k0_series(x: Complex64) -> Complex64 {
    let q = x * x * 0.25;
    let mut term = Complex64::new(1.0, 0.0);
    let mut i0 = term;
    let mut harmonic = 0.0;
    let mut tail = Complex64::new(0.0, 0.0);
    for m in 1..60 {
        let mf = m as f64;
        term = term * q / (mf * mf);
        harmonic += 1.0 / mf;
        i0 += term;
        tail += term * harmonic;
        if term.norm() * harmonic < 1e-17 * i0.norm() {
            break;
        }
    }
    -((x * 0.5).ln() + EULER_GAMMA) * i0 + tail
}

fn k0_continued_fraction(x: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let mut b = (one + x) * 2.0;
    let mut d = one / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = Complex64::new(a1, 0.0);
    let mut c = a1;
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -c * a / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += qnew * c;
        b += 2.0;
        d = one / (b + d * a);
        delh = (b * d - one) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-16 * s.norm() {
            break;
        }
    }
    let _ = h;
    (Complex64::new(PI, 0.0) / (x * 2.0)).sqrt() * (-x).exp() / s
}

/// `exp(w) - 1` without cancellation for small `|w|`.
pub fn expm1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-2 {
        let mut term = w;
        let mut acc = w;
        for k in 2..12 {
            term = term * w / k as f64;
            acc += term;
        }
        acc
    } else {
        w.exp() - 1.0
    }
}

/// `(exp(w) - 1 - w) / w²`, regular at `w = 0`.
pub fn phi2(w: Complex64) -> Complex64 {
    if w.norm() < 0.1 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut acc = term;
        for k in 3..20 {
            term = term * w / k as f64;
            acc += term;
        }
        acc
    } else {
        (expm1(w) - w) / (w * w)
    }
}

/// `sin(w)/w`, regular at `w = 0`.
pub fn sinc(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        let w2 = w * w;
        1.0 - w2 / 6.0 + w2 * w2 / 120.0
    } else {
        w.sin() / w
    }
}
