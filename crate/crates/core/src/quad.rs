//! Quadrature helpers: Gauss–Legendre rules, composite panels, adaptive
//! Gauss–Kronrod and dyadic grading toward logarithmic endpoints.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

/// Scalar types that can be accumulated by the integrators.
pub trait Integrand:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Cached 16-point rule, the workhorse for smooth panels.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// A fixed rule mapped onto `[a, b]`.
pub fn map_rule(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    rule.0
        .iter()
        .zip(rule.1.iter())
        .map(move |(&x, &w)| (mid + half * x, half * w))
}

/// Composite Gauss–Legendre over equal panels.
pub fn composite<T: Integrand>(f: impl Fn(f64) -> T, a: f64, b: f64, panels: usize) -> T {
    let rule = gl16();
    let width = (b - a) / panels as f64;
    let mut acc = T::default();
    for k in 0..panels {
        let lo = a + width * k as f64;
        for (x, w) in map_rule(rule, lo, lo + width) {
            acc = acc + f(x) * w;
        }
    }
    acc
}

/// Integral over `[a, b]` of a function with an integrable (logarithmic or
/// weaker) singularity at `a`, by dyadic grading toward the endpoint.
pub fn graded_at_left<T: Integrand>(f: impl Fn(f64) -> T, a: f64, b: f64) -> T {
    let rule = gl16();
    let mut acc = T::default();
    let mut hi = b;
    let len = b - a;
    for level in 1..=48 {
        let lo = a + len * 0.5f64.powi(level);
        for (x, w) in map_rule(rule, lo, hi) {
            acc = acc + f(x) * w;
        }
        hi = lo;
    }
    acc
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Integrand>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS7_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * KRONROD_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * KRONROD_WEIGHTS[i];
        if i % 2 == 1 {
            gauss = gauss + s * GAUSS7_WEIGHTS[i / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    let err = (kron - gauss).magnitude();
    (kron, err)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive<T> {
    pub value: T,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on `[a, b]`.
pub fn adaptive<T: Integrand>(f: impl Fn(f64) -> T, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Adaptive<T> {
    let mut intervals: Vec<(f64, f64, T, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    intervals.push((a, b, v, e));
    let max_intervals = 4000;
    loop {
        let total = intervals.iter().fold(T::default(), |acc, iv| acc + iv.2);
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        let target = abs_tol.max(rel_tol * total.magnitude());
        if err <= target || intervals.len() >= max_intervals {
            return Adaptive {
                value: total,
                error: err,
                converged: err <= target,
            };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, iv)| if iv.3 > best.1 { (i, iv.3) } else { best });
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Adaptive integration split at the given interior breakpoints.
pub fn adaptive_with_breaks<T: Integrand>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Adaptive<T> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let pieces = (pts.len() - 1).max(1) as f64;
    let mut out = Adaptive {
        value: T::default(),
        error: 0.0,
        converged: true,
    };
    for w in pts.windows(2) {
        let r = adaptive(&f, w[0], w[1], abs_tol / pieces, 1e-13);
        out.value = out.value + r.value;
        out.error += r.error;
        out.converged &= r.converged;
    }
    out
}
