//! Line-restricted resolvent kernels of the unperturbed two-line operator.
//!
//! In the partial Fourier variable `p` along the lines, the line-to-line
//! blocks of the resolvent form the 2×2 symbol `r - r M⁻¹ r` with
//! `M = -I/α + r` and `r = [[m(0), m(2a)], [m(2a), m(0)]]`. Mirror symmetry
//! diagonalizes it into an even and an odd scalar symbol
//! `g± = ρ±/(1 - αρ±)`, `ρ± = (1 ± e^{-2κa})/(2κ)`, `κ = √(p² - z)`.
//!
//! Each scalar symbol is split as
//!
//! ```text
//! g = 1/(2κ) + c₂/κ² + Σ_j 2φ_j(a)²/(κ² - κ_j²) + r(p)
//! ```
//!
//! whose pieces transform to `K₀(k|s|)/2π`, `e^{-k|s|}/2k`, the channel terms
//! `(i/2) e^{iτ_j|s|}/τ_j` and a smooth, rapidly decaying continuum `r`. Only the
//! channel terms depend on the sheet, so continuation across the cut amounts
//! to flipping `τ₀`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{adaptive, gl16, graded_at_left, map_rule};
use crate::special::{bessel_k0, expm1, phi2, sinc};
use crate::transverse::{solve_equal, TransverseSpectrum};

type C64 = Complex64;
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sheet {
    First,
    Second,
}

/// Energy together with the branch used for the ground-state channel.
///
/// On the second sheet `τ₀` is the continuation of its first-sheet value
/// from the upper half plane through the cut: it agrees with the first
/// sheet for `Im z >= 0` and equals `-τ₀` for `Im z < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetedEnergy {
    pub z: C64,
    pub sheet0: Sheet,
}

impl SheetedEnergy {
    pub fn first(z: C64) -> Self {
        SheetedEnergy { z, sheet0: Sheet::First }
    }

    pub fn second(z: C64) -> Self {
        SheetedEnergy { z, sheet0: Sheet::Second }
    }

    pub fn real(x: f64) -> Self {
        Self::first(C64::new(x, 0.0))
    }

    /// `τ_j(z)` with `τ_j² = z - ξ_j`.
    pub fn tau(&self, j: usize, spec: &TransverseSpectrum) -> Result<C64> {
        let xi = spec.eigenvalue(j).ok_or(Error::Threshold(j))?;
        let t = tau_first(self.z, xi);
        if t.norm() == 0.0 {
            return Err(Error::Threshold(j));
        }
        Ok(if j == 0 && self.sheet0 == Sheet::Second && self.z.im < 0.0 { -t } else { t })
    }
}

/// First-sheet branch `Im τ >= 0`; on the cut this is the boundary value
/// from above, `τ = +√(z - ξ)`.
pub fn tau_first(z: C64, xi: f64) -> C64 {
    let t = (z - xi).sqrt();
    if t.im < 0.0 {
        -t
    } else {
        t
    }
}

/// `κ_p = √(p² - z)` on the principal branch.
pub fn kappa_p(p: f64, z: C64) -> Result<C64> {
    let w = p * p - z;
    if w.im == 0.0 && w.re <= 0.0 {
        return Err(Error::BranchCut(w.re));
    }
    Ok(w.sqrt())
}

/// Partial Fourier transform of the free Green function between points at
/// vertical distance `delta`: `e^{-κ_p δ}/(2κ_p)`.
pub fn free_multiplier(p: f64, z: C64, delta: f64) -> Result<C64> {
    let k = kappa_p(p, z)?;
    Ok((-k * delta).exp() / (k * 2.0))
}

fn free_matrix(p: f64, z: C64, a: f64) -> Result<Mat2> {
    let d = free_multiplier(p, z, 0.0)?;
    let o = free_multiplier(p, z, 2.0 * a)?;
    Ok([[d, o], [o, d]])
}

/// `M(p, z) = -I/α + r(p, z)`.
pub fn gamma0_matrix(p: f64, z: C64, alpha: f64, a: f64) -> Result<Mat2> {
    let mut m = free_matrix(p, z, a)?;
    let diag = if alpha.is_infinite() { 0.0 } else { -1.0 / alpha };
    m[0][0] += diag;
    m[1][1] += diag;
    Ok(m)
}

fn mat_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

/// Symbol of the line-to-line resolvent blocks, `r - r M⁻¹ r`.
pub fn line_resolvent_multiplier(p: f64, z: C64, alpha: f64, a: f64) -> Result<Mat2> {
    let r = free_matrix(p, z, a)?;
    let m = gamma0_matrix(p, z, alpha, a)?;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if det.norm() <= 1e-14 * scale * scale {
        return Err(Error::SingularMatrix { p, z: format!("{z}") });
    }
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let rmr = mat_mul(&mat_mul(&r, &inv), &r);
    let mut out = r;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] -= rmr[i][j];
        }
    }
    Ok(out)
}

/// Mirror sectors: functions even or odd under `x₂ ↦ -x₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Even,
    Odd,
}

impl Sector {
    pub fn channel(self) -> usize {
        match self {
            Sector::Even => 0,
            Sector::Odd => 1,
        }
    }
}

/// Combine sector kernels into the 2×2 line block.
pub fn blocks_from_sectors(even: C64, odd: C64) -> Mat2 {
    let d = (even + odd) * 0.5;
    let o = (even - odd) * 0.5;
    [[d, o], [o, d]]
}

/// `(i/2) e^{iτ|s|}/τ · [φ_j(±a) φ_j(±a)]`.
pub fn channel_kernel(j: usize, e: &SheetedEnergy, s: f64, spec: &TransverseSpectrum) -> Result<Mat2> {
    let phi = spec.channel(j).ok_or(Error::Threshold(j))?;
    let tau = e.tau(j, spec)?;
    let g = I * 0.5 * (I * tau * s.abs()).exp() / tau;
    let (up, um) = (phi.u_plus, phi.u_minus);
    Ok([[g * (up * up), g * (up * um)], [g * (um * up), g * (um * um)]])
}

/// `∫_{-h}^{h} (h - |t|) e^{iτ|jh + t|} dt`.
pub fn exp_cell_element(tau: C64, j: usize, h: f64) -> C64 {
    if j == 0 {
        phi2(I * tau * h) * (2.0 * h * h)
    } else {
        let s = sinc(tau * (0.5 * h));
        (I * tau * (j as f64 * h)).exp() * s * s * (h * h)
    }
}

/// Toeplitz Galerkin matrix on uniform cells of width `h`: entry `(i, l)` is
/// `elements[|i - l|]`, the kernel averaged over the two cells with the
/// normalized indicator basis.
#[derive(Debug, Clone)]
pub struct CellKernel {
    pub h: f64,
    pub elements: Vec<C64>,
}

impl CellKernel {
    pub fn entry(&self, i: usize, l: usize) -> C64 {
        self.elements[i.abs_diff(l)]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Kernel evaluator for fixed `(α, a)`.
#[derive(Debug, Clone)]
pub struct LineKernels {
    pub alpha: f64,
    pub a: f64,
    pub spec: TransverseSpectrum,
    /// Cutoff of the Galerkin continuum integral.
    pub p_max: f64,
    /// Cutoff of the pointwise continuum integral.
    pub p_max_pointwise: f64,
}

/// Relative half-width of the interpolation window around channel poles.
const POLE_WINDOW: f64 = 2e-3;

impl LineKernels {
    pub fn new(alpha: f64, a: f64) -> Result<Self> {
        Ok(LineKernels {
            alpha,
            a,
            spec: solve_equal(alpha, a)?,
            p_max: 200.0,
            p_max_pointwise: 2000.0,
        })
    }

    fn channel_weight(&self, sector: Sector) -> Option<(f64, f64)> {
        let phi = self.spec.channel(sector.channel())?;
        Some((phi.kappa, 2.0 * phi.u_plus * phi.u_plus))
    }

    /// Coefficient of `1/κ²` in the large-`p` expansion of the sector symbol
    /// after the channel pole is removed.
    pub fn c2(&self, sector: Sector) -> f64 {
        0.25 * self.alpha - self.channel_weight(sector).map_or(0.0, |(_, w)| w)
    }

    /// Sector symbol `g = ρ/(1 - αρ)` as a function of `κ`.
    pub fn sector_symbol(&self, kappa: C64, sector: Sector) -> C64 {
        let e = (-kappa * (2.0 * self.a)).exp();
        let rho = match sector {
            Sector::Even => (1.0 + e) / (kappa * 2.0),
            Sector::Odd => -expm1(-kappa * (2.0 * self.a)) / (kappa * 2.0),
        };
        rho / (1.0 - rho * self.alpha)
    }

    fn continuum_direct(&self, kappa: C64, sector: Sector) -> C64 {
        let k2 = kappa * kappa;
        let mut r = self.sector_symbol(kappa, sector) - 1.0 / (kappa * 2.0) - self.c2(sector) / k2;
        if let Some((kj, w)) = self.channel_weight(sector) {
            r -= w / (k2 - kj * kj);
        }
        r
    }

    /// Smooth remainder `r` of the sector symbol; regular at the channel pole.
    pub fn continuum_symbol(&self, kappa: C64, sector: Sector) -> C64 {
        if let Some((kj, _)) = self.channel_weight(sector) {
            let d = POLE_WINDOW * kj;
            if (kappa - kj).norm() < 2.0 * d {
                // cubic interpolation through points away from the cancellation
                let nodes = [-2.0, -1.0, 1.0, 2.0];
                let vals: Vec<C64> = nodes
                    .iter()
                    .map(|&t| self.continuum_direct(C64::new(kj + t * d, 0.0), sector))
                    .collect();
                let x = (kappa - kj) / d;
                let mut acc = C64::new(0.0, 0.0);
                for (i, &ti) in nodes.iter().enumerate() {
                    let mut l = C64::new(1.0, 0.0);
                    for (m, &tm) in nodes.iter().enumerate() {
                        if m != i {
                            l *= (x - tm) / (ti - tm);
                        }
                    }
                    acc += l * vals[i];
                }
                return acc;
            }
        }
        self.continuum_direct(kappa, sector)
    }

    fn k_of(z: C64) -> C64 {
        (-z).sqrt()
    }

    /// `(1/π) ∫₀^∞ cos(ps) r(p) dp`.
    pub fn continuum_pointwise(&self, z: C64, s: f64, sector: Sector) -> Result<C64> {
        let f = |p: f64| -> C64 {
            match kappa_p(p, z) {
                Ok(k) => self.continuum_symbol(k, sector) * (p * s).cos(),
                Err(_) => C64::new(f64::NAN, f64::NAN),
            }
        };
        let pmax = self.p_max_pointwise;
        let mut breaks = vec![0.0];
        let mut x = 0.0;
        while x < pmax {
            x = (x + 1.0).max(x * 1.25).min(pmax);
            breaks.push(x);
        }
        let mut acc = C64::new(0.0, 0.0);
        for w in breaks.windows(2) {
            let r = adaptive(f, w[0], w[1], 1e-14, 1e-12);
            if !r.value.re.is_finite() || !r.value.im.is_finite() {
                return Err(Error::BranchCut(0.0));
            }
            acc += r.value;
        }
        Ok(acc / PI)
    }

    /// Sector kernel at separation `s`, `K_even = K₊₊ + K₊₋`, `K_odd = K₊₊ - K₊₋`.
    ///
    /// At `s = 0` the real part carries the logarithmic singularity and is
    /// reported as `+∞`; the imaginary part is the finite limit.
    pub fn sector_kernel(&self, e: &SheetedEnergy, s: f64, sector: Sector) -> Result<C64> {
        let z = e.z;
        let k = Self::k_of(z);
        let s = s.abs();
        let free = if s == 0.0 {
            C64::new(f64::INFINITY, -k.arg() / (2.0 * PI))
        } else {
            bessel_k0(k * s) / (2.0 * PI)
        };
        let c2 = (-k * s).exp() / (k * 2.0) * self.c2(sector);
        let mut total = free + c2 + self.continuum_pointwise(z, s, sector)?;
        if let Some((_, w)) = self.channel_weight(sector) {
            let tau = e.tau(sector.channel(), &self.spec)?;
            total += I * 0.5 * (I * tau * s).exp() / tau * w;
        }
        Ok(total)
    }

    /// All four line blocks at separation `s`.
    pub fn line_kernel(&self, e: &SheetedEnergy, s: f64) -> Result<Mat2> {
        let even = self.sector_kernel(e, s, Sector::Even)?;
        let odd = self.sector_kernel(e, s, Sector::Odd)?;
        Ok(blocks_from_sectors(even, odd))
    }

    /// First-sheet kernel from the inverse Fourier transform of the full
    /// 2×2 symbol, without the channel decomposition. Needs `Im z != 0`
    /// or `z` below the spectrum.
    pub fn line_kernel_direct(&self, z: C64, s: f64) -> Result<Mat2> {
        let s = s.abs();
        if s == 0.0 {
            return Err(Error::InvalidModel("direct kernel needs s != 0".into()));
        }
        let k = Self::k_of(z);
        let lead = self.alpha * 0.25;
        let mut err: Option<Error> = None;
        let integrand = |p: f64, i: usize, j: usize| -> C64 {
            let sym = match line_resolvent_multiplier(p, z, self.alpha, self.a) {
                Ok(v) => v,
                Err(_) => return C64::new(f64::NAN, 0.0),
            };
            let kp = kappa_p(p, z).unwrap();
            let free = free_multiplier(p, z, if i == j { 0.0 } else { 2.0 * self.a }).unwrap();
            let mut v = sym[i][j] - free;
            if i == j {
                v -= lead / (kp * kp);
            }
            v * (p * s).cos()
        };
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, j) in [(0usize, 0usize), (0, 1)] {
            let mut acc = C64::new(0.0, 0.0);
            let mut lo = 0.0;
            while lo < self.p_max_pointwise {
                let hi = (lo + 1.0).max(lo * 1.25).min(self.p_max_pointwise);
                let r = adaptive(|p| integrand(p, i, j), lo, hi, 1e-14, 1e-12);
                if !r.value.re.is_finite() {
                    err = Some(Error::SingularMatrix { p: lo, z: format!("{z}") });
                }
                acc += r.value;
                lo = hi;
            }
            let dist = if i == j { s } else { (s * s + 4.0 * self.a * self.a).sqrt() };
            let mut v = acc / PI + bessel_k0(k * dist) / (2.0 * PI);
            if i == j {
                v += (-k * s).exp() / (k * 2.0) * lead;
            }
            out[i][j] = v;
        }
        if let Some(e) = err {
            return Err(e);
        }
        out[1][1] = out[0][0];
        out[1][0] = out[0][1];
        Ok(out)
    }

    /// Galerkin elements of the sector kernel on cells of width `h`, for
    /// offsets `0..n`.
    pub fn cell_kernel(&self, e: &SheetedEnergy, sector: Sector, h: f64, n: usize) -> Result<CellKernel> {
        let z = e.z;
        let k = Self::k_of(z);
        let mut elements = vec![C64::new(0.0, 0.0); n];

        // free logarithmic part in real space
        let f = |s: f64| bessel_k0(k * s) / (2.0 * PI);
        let rule = gl16();
        for (j, el) in elements.iter_mut().enumerate() {
            let jf = j as f64;
            *el = if j == 0 {
                graded_at_left(|s| f(s) * (h - s), 0.0, h) * 2.0
            } else {
                let left = if j == 1 {
                    graded_at_left(|s| f(s) * s, 0.0, h)
                } else {
                    map_rule(rule, (jf - 1.0) * h, jf * h)
                        .fold(C64::new(0.0, 0.0), |acc, (s, w)| acc + f(s) * ((s - (jf - 1.0) * h) * w))
                };
                let right = map_rule(rule, jf * h, (jf + 1.0) * h)
                    .fold(C64::new(0.0, 0.0), |acc, (s, w)| acc + f(s) * (((jf + 1.0) * h - s) * w));
                left + right
            };
        }

        // closed-form exponential pieces
        let c2 = self.c2(sector);
        let tau_free = I * k;
        let channel = match self.channel_weight(sector) {
            Some((_, w)) => Some((e.tau(sector.channel(), &self.spec)?, w)),
            None => None,
        };
        for (j, el) in elements.iter_mut().enumerate() {
            *el += exp_cell_element(tau_free, j, h) / (k * 2.0) * c2;
            if let Some((tau, w)) = channel {
                *el += I * 0.5 / tau * exp_cell_element(tau, j, h) * w;
            }
        }

        // smooth continuum on a z-independent p grid
        let span = (n.max(1) as f64) * h;
        let width = (2.0 * PI / span).min(0.5);
        let panels = (self.p_max / width).ceil() as usize;
        let width = self.p_max / panels as f64;
        for m in 0..panels {
            let lo = width * m as f64;
            for (p, w) in map_rule(rule, lo, lo + width) {
                let kp = kappa_p(p, z)?;
                let sh = (0.5 * p * h).sin();
                let weight = self.continuum_symbol(kp, sector) * (w * 4.0 * sh * sh / (p * p) / PI);
                // cos(j θ) by the Chebyshev recurrence
                let c1 = (p * h).cos();
                let (mut prev, mut cur) = (c1, 1.0);
                for el in elements.iter_mut() {
                    *el += weight * cur;
                    let next = 2.0 * c1 * cur - prev;
                    prev = cur;
                    cur = next;
                }
            }
        }

        for el in elements.iter_mut() {
            *el /= h;
        }
        Ok(CellKernel { h, elements })
    }
}
