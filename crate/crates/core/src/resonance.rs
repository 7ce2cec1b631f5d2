//! Resonances from breaking the mirror symmetry.
//!
//! With `V₊ = V₀ + εV_p`, `V₋ = V₀`, the symmetric system's embedded
//! eigenvalue `ν` turns into a pole of the continued resolvent. The pole is
//! a zero of `Γ^II(z) = 1 + |εV_p|^{1/2} R^II(z) (εV_p)^{1/2}`, where `R` is the
//! `(+,+)` line block of the mirror-symmetric resolvent, continued from the
//! upper half plane. `R` is assembled per sector from the Krein correction
//! `R_σ = K_σ - K_σ V^{1/2} (1 + |V|^{1/2} K_σ V^{1/2})⁻¹ |V|^{1/2} K_σ`.
//!
//! All matrices act on the orthonormal cell basis `1_cell/√h`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::birman_schwinger::{BirmanSchwinger, EmbeddedState, QuadratureSpec};
use crate::error::{Error, Result};
use crate::kernels::{LineKernels, Sector, SheetedEnergy};
use crate::potentials::{signed_sqrt, LinePotential, ModelConfig};
use crate::roots::{complex_newton, muller};

type C64 = Complex64;

#[derive(Debug, Clone, Serialize)]
pub struct ResonancePole {
    pub nu_k: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub linear_shift: f64,
    pub gamma_r: f64,
    pub gamma_i: f64,
    pub width: f64,
    pub epsilon: f64,
}

impl ResonancePole {
    pub fn z(&self) -> C64 {
        C64::new(self.z_re, self.z_im)
    }
}

/// `(ω, V_p ω)` and the `ε²` coefficients `Γ_r + iΓ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbative {
    pub linear_shift: f64,
    pub gamma_r: f64,
    pub gamma_i: f64,
}

/// Residue data of the mirror resolvent at an embedded eigenvalue.
#[derive(Debug, Clone)]
pub struct Residue {
    pub nu: f64,
    /// `+`-line trace of the normalized eigenfunction in the cell basis.
    pub trace: DVector<f64>,
    /// Rank-one residue `P`.
    pub projector: DMatrix<C64>,
    /// Regular part `A(ν)`, boundary value from the lower half plane of the
    /// second sheet.
    pub regular: DMatrix<C64>,
    /// Second singular value of `P` relative to the first.
    pub rank_defect: f64,
}

/// Number of nodes on the residue contour.
const CONTOUR_NODES: usize = 32;
/// Contour radius relative to `μ₀ - ξ₀`.
const CONTOUR_RADIUS: f64 = 1e-3;

/// Mirror-symmetric model `V₊ = V₋ = V₀` with a perturbation profile `V_p`
/// on the `+` line.
#[derive(Debug, Clone)]
pub struct ResonanceProblem {
    pub kernels: LineKernels,
    pub quad: QuadratureSpec,
    pub v0: Vec<f64>,
    pub vp: Vec<f64>,
    /// Cells where `V_p` is nonzero.
    pub vp_cells: Vec<usize>,
    /// Rate `C` of the certified bound `|V(x)| ≤ K e^{-C|x|}`, if any.
    pub decay_rate: Option<f64>,
    symmetric: BirmanSchwinger,
}

fn lu_solve(m: DMatrix<C64>, rhs: &DMatrix<C64>, z: C64) -> Result<DMatrix<C64>> {
    m.lu().solve(rhs).ok_or_else(|| Error::SingularMatrix { p: f64::NAN, z: format!("{z}") })
}

impl ResonanceProblem {
    pub fn new(alpha: f64, a: f64, v0: &LinePotential, vp: &LinePotential, h: f64) -> Result<Self> {
        let union = ModelConfig::new(alpha, a, LinePotential::sum(vec![v0.clone(), vp.clone()])?, v0.clone())?;
        let quad = QuadratureSpec::for_model(&union, h)?;
        let mirror = ModelConfig::mirror(alpha, a, v0.clone())?;
        let symmetric = BirmanSchwinger::new(&mirror, quad)?;
        if symmetric.kernels.spec.xi1.is_none() {
            return Err(Error::Hypothesis("resonances need an embedded eigenvalue, so alpha*a > 1".into()));
        }
        let v0c = quad.cell_averages(v0);
        let vpc = quad.cell_averages(vp);
        let vp_cells = (0..quad.n_cells).filter(|&i| vpc[i] != 0.0).collect();
        let decay_rate = match (v0.decay_bound(), vp.decay_bound()) {
            (Some(x), Some(y)) => Some(x.c.min(y.c)),
            (Some(x), None) => Some(x.c),
            (None, Some(y)) => Some(y.c),
            (None, None) => None,
        };
        Ok(ResonanceProblem { kernels: symmetric.kernels.clone(), quad, v0: v0c, vp: vpc, vp_cells, decay_rate, symmetric })
    }

    pub fn xi0(&self) -> f64 {
        self.kernels.spec.xi0
    }

    pub fn mu0(&self) -> f64 {
        self.kernels.spec.xi1.expect("checked in new")
    }

    /// Embedded eigenvalues of the symmetric system.
    pub fn embedded(&self) -> Result<Vec<EmbeddedState>> {
        self.symmetric.find_all_embedded()
    }

    /// Rejects energies outside the continuation strip `Im τ₀ > -C/2`.
    pub fn check_strip(&self, e: &SheetedEnergy) -> Result<()> {
        let tau = e.tau(0, &self.kernels.spec)?;
        if let Some(c) = self.decay_rate {
            if tau.im <= -0.5 * c {
                return Err(Error::OutsideStrip(format!("Im tau0 = {} at z = {}, strip bound {}", tau.im, e.z, -0.5 * c)));
            }
        }
        Ok(())
    }

    fn sector_matrix(&self, e: &SheetedEnergy, sector: Sector) -> Result<DMatrix<C64>> {
        let n = self.quad.n_cells;
        let kern = self.kernels.cell_kernel(e, sector, self.quad.h(), n)?;
        let k = DMatrix::from_fn(n, n, |i, l| kern.entry(i, l));
        let ds = DVector::from_iterator(n, self.v0.iter().map(|&v| C64::new(signed_sqrt(v), 0.0)));
        let da = DVector::from_iterator(n, self.v0.iter().map(|&v| C64::new(v.abs().sqrt(), 0.0)));
        // 1 + D_a K D_s, and D_a K
        let mut m = k.clone();
        for i in 0..n {
            for l in 0..n {
                m[(i, l)] *= da[i] * ds[l];
            }
            m[(i, i)] += 1.0;
        }
        let mut dak = k.clone();
        for i in 0..n {
            dak.row_mut(i).scale_mut(da[i].re);
        }
        let x = lu_solve(m, &dak, e.z)?;
        let mut kds = k.clone();
        for l in 0..n {
            kds.column_mut(l).scale_mut(ds[l].re);
        }
        Ok(k - kds * x)
    }

    /// `(+,+)` block of the mirror-symmetric line resolvent.
    pub fn mirror_resolvent_kernel(&self, e: &SheetedEnergy) -> Result<DMatrix<C64>> {
        let even = self.sector_matrix(e, Sector::Even)?;
        let odd = self.sector_matrix(e, Sector::Odd)?;
        Ok((even + odd) * C64::new(0.5, 0.0))
    }

    /// `Γ^II(z)` on the cells where `V_p` is nonzero. For `Im z ≥ 0` it
    /// coincides with the first-sheet matrix.
    pub fn gamma_ii(&self, z: C64, eps: f64) -> Result<DMatrix<C64>> {
        let e = SheetedEnergy::second(z);
        self.check_strip(&e)?;
        let r = self.mirror_resolvent_kernel(&e)?;
        Ok(self.gamma_from(&r, eps))
    }

    fn gamma_from(&self, r: &DMatrix<C64>, eps: f64) -> DMatrix<C64> {
        let idx = &self.vp_cells;
        let m = idx.len();
        DMatrix::from_fn(m, m, |i, l| {
            let (p, q) = (idx[i], idx[l]);
            let left = (eps * self.vp[p]).abs().sqrt();
            let right = signed_sqrt(eps * self.vp[q]);
            let id = if i == l { 1.0 } else { 0.0 };
            r[(p, q)] * (left * right) + id
        })
    }

    /// Residue `P` and regular part `A(ν)` of the mirror resolvent by
    /// trapezoidal contour integrals on a small circle around `ν`.
    pub fn residue(&self, nu: f64) -> Result<Residue> {
        let radius = CONTOUR_RADIUS * (self.mu0() - self.xi0());
        let n = self.quad.n_cells;
        let mut p = DMatrix::<C64>::zeros(n, n);
        let mut a = DMatrix::<C64>::zeros(n, n);
        for k in 0..CONTOUR_NODES {
            let w = C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / CONTOUR_NODES as f64);
            let g = self.mirror_resolvent_kernel(&SheetedEnergy::second(nu + w * radius))?;
            // P = -(1/2πi)∮ G dz, A(ν) = (1/2πi)∮ G/(z - ν) dz
            p -= &g * (w * radius / CONTOUR_NODES as f64);
            a += g / C64::new(CONTOUR_NODES as f64, 0.0);
        }
        let pr = p.map(|x| x.re);
        let sv = pr.clone().svd(false, false).singular_values;
        let rank_defect = if sv.len() > 1 && sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };
        let j = (0..n).max_by(|&i, &l| pr[(i, i)].partial_cmp(&pr[(l, l)]).unwrap()).unwrap_or(0);
        if !(pr[(j, j)] > 0.0) {
            return Err(Error::Hypothesis(format!("no positive residue at nu = {nu}")));
        }
        let trace = pr.column(j) / pr[(j, j)].sqrt();
        Ok(Residue { nu, trace, projector: p, regular: a, rank_defect })
    }

    /// Weighted `V_p` trace `V_p t` in the cell basis.
    fn vp_times(&self, t: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(t.len(), t.iter().zip(&self.vp).map(|(x, v)| x * v))
    }

    /// `(ω, V_p ω)` and `Γ_r + iΓ_i = -(V_p ω, A(ν) V_p ω)` on the `+` line.
    pub fn perturbative_coefficients(&self, res: &Residue) -> Perturbative {
        let wt = self.vp_times(&res.trace);
        let linear_shift = res.trace.dot(&wt);
        let wc = wt.map(|x| C64::new(x, 0.0));
        let g = -(wc.transpose() * &res.regular * &wc)[(0, 0)];
        Perturbative { linear_shift, gamma_r: g.re, gamma_i: g.im }
    }

    /// `‖ω‖²` from the trace: `2 (V₀t, K_odd'(ν) V₀t)`, by a centered
    /// difference of the odd sector kernel.
    pub fn norm_from_trace(&self, res: &Residue) -> Result<f64> {
        let n = self.quad.n_cells;
        let d = 1e-4 * (self.mu0() - self.xi0());
        let h = self.quad.h();
        let kp = self.kernels.cell_kernel(&SheetedEnergy::real(res.nu + d), Sector::Odd, h, n)?;
        let km = self.kernels.cell_kernel(&SheetedEnergy::real(res.nu - d), Sector::Odd, h, n)?;
        let vt = DVector::from_iterator(n, res.trace.iter().zip(&self.v0).map(|(x, v)| x * v));
        let mut acc = 0.0;
        for i in 0..n {
            for l in 0..n {
                acc += vt[i] * vt[l] * (kp.entry(i, l).re - km.entry(i, l).re);
            }
        }
        Ok(acc / d)
    }

    /// Pole of the continued resolvent near `ν` for perturbation size `eps`.
    pub fn find_pole(&self, res: &Residue, coeffs: &Perturbative, eps: f64) -> Result<ResonancePole> {
        if !(eps > 0.0) {
            return Err(Error::InvalidModel(format!("epsilon must be positive, got {eps}")));
        }
        let nu = res.nu;
        let gap = (nu - self.xi0()).min(self.mu0() - nu);
        // (ν - z) det Γ^II(z) removes the pole of Γ^II at ν.
        let f = |z: C64| -> Result<C64> {
            let g = self.gamma_ii(z, eps)?;
            Ok(g.lu().determinant() * (C64::new(nu, 0.0) - z))
        };
        let admissible = |z: C64| (z - nu).norm() < 0.5 * gap && self.check_strip(&SheetedEnergy::second(z)).is_ok();
        let seed = C64::new(nu + eps * coeffs.linear_shift, 0.0);
        let scale = (eps * coeffs.linear_shift.abs()).max(eps * eps).max(1e-9);
        let step = 1e-7 * scale;
        let tol = 1e-13 * nu.abs().max(1.0);
        let z = match complex_newton(f, seed, step, tol, 60, admissible) {
            Ok(z) => z,
            Err(_) => {
                let d = C64::new(0.0, -scale);
                muller(f, seed - d, seed, seed + d, tol, 200, admissible)?
            }
        };
        if z.im > tol {
            return Err(Error::NoConvergence(format!("pole search ended in the upper half plane at {z}")));
        }
        let z = C64::new(z.re, z.im.min(0.0));
        Ok(ResonancePole {
            nu_k: nu,
            z_re: z.re,
            z_im: z.im,
            linear_shift: coeffs.linear_shift,
            gamma_r: coeffs.gamma_r,
            gamma_i: coeffs.gamma_i,
            width: -2.0 * z.im,
            epsilon: eps,
        })
    }

    /// Poles for each `eps`, searched concurrently.
    pub fn track(&self, res: &Residue, coeffs: &Perturbative, eps: &[f64], threads: usize) -> Vec<Result<ResonancePole>> {
        let threads = threads.max(1);
        let mut out: Vec<Option<Result<ResonancePole>>> = (0..eps.len()).map(|_| None).collect();
        std::thread::scope(|s| {
            for chunk in out.chunks_mut(eps.len().div_ceil(threads).max(1)).zip(eps.chunks(eps.len().div_ceil(threads).max(1))) {
                s.spawn(move || {
                    for (slot, &e) in chunk.0.iter_mut().zip(chunk.1) {
                        *slot = Some(self.find_pole(res, coeffs, e));
                    }
                });
            }
        });
        out.into_iter().map(|r| r.expect("every slot is filled")).collect()
    }
}

/// Least-squares slope of `log width` against `log ε`, skipping widths at
/// or below `floor`. Needs two usable points.
pub fn width_exponent(poles: &[ResonancePole], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = poles.iter().filter(|p| p.width > floor).map(|p| (p.epsilon.ln(), p.width.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// `Γ_w / (2ε² · (-Γ_i))`; one when the golden rule holds exactly.
pub fn golden_rule_ratio(pole: &ResonancePole) -> f64 {
    pole.width / (2.0 * pole.epsilon * pole.epsilon * -pole.gamma_i)
}

/// Default ε grid for the width law.
pub const EPSILON_GRID: [f64; 7] = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1];

/// Widths below this are treated as quadrature noise.
pub const WIDTH_FLOOR: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;

    fn well() -> LinePotential {
        LinePotential::boxed(-0.2, 0.0, 1.0).unwrap()
    }

    fn bump() -> LinePotential {
        LinePotential::boxed(1.0, 0.0, 1.0).unwrap()
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_background_gives_free_line_block() {
        let h = 0.05;
        let prob = ResonanceProblem::new(2.0, 1.0, &LinePotential::zero(), &bump(), h).unwrap();
        assert!(prob.embedded().unwrap().is_empty());
        let z = C64::new(-0.9, 0.2);
        let r = prob.mirror_resolvent_kernel(&SheetedEnergy::first(z)).unwrap();
        // far from the diagonal the Galerkin element is h times the pointwise kernel
        for j in [6usize, 10, 20] {
            let direct = prob.kernels.line_kernel_direct(z, j as f64 * h).unwrap()[0][0];
            let cell = r[(0, j)] / h;
            assert!((cell - direct).norm() < 2e-3 * direct.norm(), "offset {j}: {cell} vs {direct}");
        }
    }

    #[test]
    fn real_and_symmetric_below_threshold() {
        let prob = ResonanceProblem::new(2.0, 1.0, &well(), &bump(), 0.05).unwrap();
        let r = prob.mirror_resolvent_kernel(&SheetedEnergy::real(prob.xi0() - 0.3)).unwrap();
        let scale = max_abs(&r);
        assert!(r.iter().all(|x| x.im.abs() < 1e-12 * scale));
        assert!(max_abs(&(&r - r.transpose())) < 1e-12 * scale);
    }

    #[test]
    fn gamma_tends_to_identity_as_coupling_vanishes() {
        let prob = ResonanceProblem::new(2.0, 1.0, &well(), &bump(), 0.05).unwrap();
        let z = C64::new(-0.9, -0.01);
        let id = DMatrix::<C64>::identity(prob.vp_cells.len(), prob.vp_cells.len());
        assert_eq!(prob.gamma_ii(z, 0.0).unwrap(), id);
        let d1 = max_abs(&(prob.gamma_ii(z, 1e-4).unwrap() - &id));
        let d2 = max_abs(&(prob.gamma_ii(z, 1e-6).unwrap() - &id));
        assert!(d1 > 0.0 && (d1 / d2 - 100.0).abs() < 1e-6, "{d1} {d2}");
    }

    #[test]
    fn sheets_agree_in_the_upper_half_plane() {
        let prob = ResonanceProblem::new(2.0, 1.0, &well(), &bump(), 0.05).unwrap();
        for z in [C64::new(-0.9, 0.05), C64::new(-0.7, 0.3), C64::new(-1.3, 0.01)] {
            let a = prob.mirror_resolvent_kernel(&SheetedEnergy::first(z)).unwrap();
            let b = prob.mirror_resolvent_kernel(&SheetedEnergy::second(z)).unwrap();
            assert!(max_abs(&(&a - &b)) < 1e-12 * max_abs(&a));
        }
    }

    #[test]
    fn golden_rule_coefficient_is_dissipative_and_the_pole_is_a_zero() {
        let prob = ResonanceProblem::new(2.0, 1.0, &well(), &bump(), 0.04).unwrap();
        let nu = prob.embedded().unwrap()[0].nu;
        let res = prob.residue(nu).unwrap();
        assert!(res.rank_defect < 1e-8);
        assert!((prob.norm_from_trace(&res).unwrap() - 1.0).abs() < 1e-3);
        let c = prob.perturbative_coefficients(&res);
        assert!(c.gamma_i < 0.0 && c.linear_shift > 0.0);
        let pole = prob.find_pole(&res, &c, 1e-2).unwrap();
        assert!(pole.z_im < 0.0);
        let g = prob.gamma_ii(pole.z(), 1e-2).unwrap();
        let sv = g.svd(false, false).singular_values;
        let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(smallest < 1e-8 * sv.max(), "smallest singular value {smallest}");
    }

    #[test]
    fn odd_perturbation_has_no_first_order_shift() {
        let odd = LinePotential::sum(vec![
            LinePotential::boxed(1.0, -0.5, 0.5).unwrap(),
            LinePotential::boxed(-1.0, 0.5, 0.5).unwrap(),
        ])
        .unwrap();
        let prob = ResonanceProblem::new(2.0, 1.0, &well(), &odd, 0.04).unwrap();
        let res = prob.residue(prob.embedded().unwrap()[0].nu).unwrap();
        let c = prob.perturbative_coefficients(&res);
        assert!(c.linear_shift.abs() < 1e-10, "{}", c.linear_shift);
        assert!(c.gamma_i <= 0.0);
    }
}
