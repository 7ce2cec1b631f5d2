//! Birman–Schwinger discretization on the two lines.
//!
//! The line potentials are discretized by piecewise-constant Galerkin cells;
//! `B(z) = |V|^{1/2} K(z) V^{1/2}` then becomes a matrix with Toeplitz blocks.
//! For real `z` below the threshold the symmetric pencil `S + A(z)`,
//! `S = sgn V`, `A = |V|^{1/2} K |V|^{1/2}`, has eigenvalues nondecreasing
//! in `z`, and `det(1 + B) = det(S + A) det S`. Counting its positive
//! eigenvalues counts eigenvalues of the two-dimensional operator below `z`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::{sym_eigen, sym_eigenvalues};
use crate::error::{Error, Result};
use crate::kernels::{CellKernel, LineKernels, Sector, SheetedEnergy};
use crate::potentials::{signed_sqrt, LinePotential, ModelConfig};
use crate::roots::brent;
use crate::transverse::lambda_tilde_with;

type C64 = Complex64;

/// Uniform cells on `[-x_max, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub x_max: f64,
    pub n_cells: usize,
}

impl QuadratureSpec {
    pub fn new(x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) || n_cells == 0 {
            return Err(Error::InvalidModel(format!("bad quadrature: x_max={x_max}, n_cells={n_cells}")));
        }
        Ok(QuadratureSpec { x_max, n_cells })
    }

    /// Cells of width close to `h` covering the potentials' support.
    pub fn for_model(cfg: &ModelConfig, h: f64) -> Result<Self> {
        let r = cfg.support_radius();
        if !r.is_finite() {
            return Err(Error::InvalidPotential("potential support is unbounded".into()));
        }
        let x_max = if r > 0.0 { r } else { 1.0 };
        Self::new(x_max, ((2.0 * x_max / h).round() as usize).max(2))
    }

    pub fn h(&self) -> f64 {
        2.0 * self.x_max / self.n_cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_cells).map(|i| -self.x_max + (i as f64 + 0.5) * h).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.h(); self.n_cells]
    }

    pub fn cell_averages(&self, v: &LinePotential) -> Vec<f64> {
        let h = self.h();
        (0..self.n_cells)
            .map(|i| {
                let lo = -self.x_max + i as f64 * h;
                v.cell_average(lo, lo + h)
            })
            .collect()
    }

    /// Same cells refined by `factor` and widened by `grow`, keeping the
    /// cell width an integer fraction of the original one.
    pub fn refined(&self, factor: usize, grow: f64) -> Self {
        let h = self.h() / factor as f64;
        let x_max = self.x_max * grow;
        let n = (2.0 * x_max / h).round() as usize;
        QuadratureSpec { x_max: 0.5 * n as f64 * h, n_cells: n }
    }
}

/// Discretized `B(z)` blocks and their Hilbert–Schmidt norm.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub z: SheetedEnergy,
    /// `blocks[i][j]` maps line `j` to line `i`, index 0 is the `+` line.
    pub blocks: [[DMatrix<C64>; 2]; 2],
    pub hs_norm: f64,
}

impl KernelMatrix {
    pub fn full(&self) -> DMatrix<C64> {
        let n = self.blocks[0][0].nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..2 {
            for j in 0..2 {
                m.view_mut((i * n, j * n), (n, n)).copy_from(&self.blocks[i][j]);
            }
        }
        m
    }
}

/// Eigenvalue with its line trace `(x, f₊(x), f₋(x))`.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub z: f64,
    pub multiplicity: usize,
    pub trace: Vec<(f64, f64, f64)>,
}

/// Embedded eigenvalue of the mirror-symmetric system with the `+`-line
/// trace of its odd eigenfunction.
#[derive(Debug, Clone)]
pub struct EmbeddedState {
    pub nu: f64,
    pub centers: Vec<f64>,
    pub trace_plus: Vec<f64>,
}

/// Discretized problem for a fixed model and cell grid.
#[derive(Debug, Clone)]
pub struct BirmanSchwinger {
    pub kernels: LineKernels,
    pub cfg: ModelConfig,
    pub quad: QuadratureSpec,
    /// Cell averages on the `+` and `-` lines.
    pub v: [Vec<f64>; 2],
    /// `(line, cell)` pairs with nonzero potential.
    pub active: Vec<(usize, usize)>,
}

/// Separation from the threshold kept by real-axis scans.
pub const THRESHOLD_MARGIN: f64 = 1e-4;

impl BirmanSchwinger {
    pub fn new(cfg: &ModelConfig, quad: QuadratureSpec) -> Result<Self> {
        let kernels = LineKernels::new(cfg.alpha, cfg.a)?;
        let v = [quad.cell_averages(&cfg.v_plus), quad.cell_averages(&cfg.v_minus)];
        let active = (0..2)
            .flat_map(|l| (0..quad.n_cells).map(move |i| (l, i)))
            .filter(|&(l, i)| v[l][i] != 0.0)
            .collect();
        Ok(BirmanSchwinger { kernels, cfg: cfg.clone(), quad, v, active })
    }

    pub fn xi0(&self) -> f64 {
        self.kernels.spec.xi0
    }

    fn sector_kernels(&self, e: &SheetedEnergy) -> Result<(CellKernel, CellKernel)> {
        let h = self.quad.h();
        let n = self.quad.n_cells;
        Ok((
            self.kernels.cell_kernel(e, Sector::Even, h, n)?,
            self.kernels.cell_kernel(e, Sector::Odd, h, n)?,
        ))
    }

    /// Line block `(i, j)` entry between cells `k` and `l`.
    fn block_entry(even: &CellKernel, odd: &CellKernel, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let (e, o) = (even.entry(k, l), odd.entry(k, l));
        if i == j {
            (e + o) * 0.5
        } else {
            (e - o) * 0.5
        }
    }

    pub fn assemble_b(&self, e: &SheetedEnergy) -> Result<KernelMatrix> {
        let (even, odd) = self.sector_kernels(e)?;
        let n = self.quad.n_cells;
        let mut hs = 0.0;
        let blocks = [0, 1].map(|i| {
            [0, 1].map(|j| {
                DMatrix::from_fn(n, n, |k, l| {
                    let left = self.v[i][k].abs().sqrt();
                    let right = signed_sqrt(self.v[j][l]);
                    let val = Self::block_entry(&even, &odd, i, j, k, l) * (left * right);
                    hs += val.norm_sqr();
                    val
                })
            })
        });
        Ok(KernelMatrix { z: *e, blocks, hs_norm: hs.sqrt() })
    }

    /// `S + A(z)` on the active cells, for real `z` below the threshold.
    pub fn symmetric_pencil(&self, z: f64) -> Result<DMatrix<f64>> {
        if z >= self.xi0() {
            return Err(Error::Window { lo: z, hi: self.xi0(), reason: "real pencil needs z below the threshold".into() });
        }
        let (even, odd) = self.sector_kernels(&SheetedEnergy::real(z))?;
        let m = self.active.len();
        Ok(DMatrix::from_fn(m, m, |r, c| {
            let (i, k) = self.active[r];
            let (j, l) = self.active[c];
            let a = Self::block_entry(&even, &odd, i, j, k, l).re * (self.v[i][k].abs() * self.v[j][l].abs()).sqrt();
            if r == c {
                a + self.v[i][k].signum()
            } else {
                a
            }
        }))
    }

    fn positive_sign_count(&self) -> usize {
        self.active.iter().filter(|&&(l, i)| self.v[l][i] > 0.0).count()
    }

    /// Eigenvalues of `S + A(z)`, descending.
    fn pencil_eigenvalues(&self, z: f64) -> Result<Vec<f64>> {
        let m = self.symmetric_pencil(z)?;
        let mut ev = sym_eigenvalues(&m)?;
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(ev)
    }

    /// Number of eigenvalues of the two-dimensional operator below `z`.
    pub fn count_below(&self, z: f64) -> Result<usize> {
        if self.active.is_empty() {
            return Ok(0);
        }
        let pos = self.pencil_eigenvalues(z)?.iter().filter(|&&x| x > 0.0).count();
        Ok(pos.saturating_sub(self.positive_sign_count()))
    }

    /// Smallest eigenvalue of the symmetrized `1 + B(z)`, sign-definite V only.
    pub fn mu_min(&self, z: f64) -> Result<f64> {
        let ev = self.pencil_eigenvalues(z)?;
        let p0 = self.positive_sign_count();
        if p0 == self.active.len() {
            Ok(*ev.last().unwrap_or(&1.0))
        } else if p0 == 0 {
            Ok(-ev.first().copied().unwrap_or(-1.0))
        } else {
            Err(Error::Hypothesis("mu_min needs a sign-definite potential".into()))
        }
    }

    /// Lower bound for the spectrum from the one-dimensional comparison.
    pub fn spectral_floor(&self) -> Result<f64> {
        let vp = self.v[0].iter().copied().fold(0.0, f64::min);
        let vm = self.v[1].iter().copied().fold(0.0, f64::min);
        let floor = lambda_tilde_with(vp, vm, self.cfg.alpha, self.cfg.a, self.xi0())?;
        Ok(self.xi0() + floor)
    }

    /// Eigenvalues in `[lo, hi]`, `hi < ξ₀`, by monotone counting and Brent
    /// refinement of each crossing.
    pub fn find_discrete(&self, lo: f64, hi: f64) -> Result<Vec<BoundState>> {
        if !(lo < hi) || hi >= self.xi0() {
            return Err(Error::Window { lo, hi, reason: "search interval must lie below the threshold".into() });
        }
        if self.active.is_empty() {
            return Ok(Vec::new());
        }
        let p0 = self.positive_sign_count();
        let n_lo = self.count_below(lo)?;
        let n_hi = self.count_below(hi)?;
        let mut roots: Vec<f64> = Vec::new();
        for m in (n_lo + 1)..=n_hi {
            let idx = p0 + m - 1;
            let f = |z: f64| self.pencil_eigenvalues(z).map(|ev| ev[idx]).unwrap_or(f64::NAN);
            roots.push(brent(f, lo, hi, 1e-11)?);
        }
        let mut out: Vec<BoundState> = Vec::new();
        for z in roots {
            if let Some(last) = out.last_mut() {
                if (last.z - z).abs() < 1e-8 {
                    last.multiplicity += 1;
                    continue;
                }
            }
            out.push(BoundState { z, multiplicity: 1, trace: self.trace_at(z)? });
        }
        Ok(out)
    }

    /// Eigenvalues between the spectral floor and the threshold margin.
    pub fn find_all_discrete(&self) -> Result<Vec<BoundState>> {
        let hi = self.xi0() - THRESHOLD_MARGIN * self.xi0().abs().max(1.0);
        let lo = self.spectral_floor()? - 1e-3;
        if lo >= hi {
            return Ok(Vec::new());
        }
        self.find_discrete(lo, hi)
    }

    fn trace_at(&self, z: f64) -> Result<Vec<(f64, f64, f64)>> {
        let pencil = self.symmetric_pencil(z)?;
        let eig = sym_eigen(&pencil)?;
        let (k, _) = eig
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &v)| if v.abs() < b.1 { (i, v.abs()) } else { b });
        let u: DVector<f64> = eig.vectors.column(k).into_owned();
        // f = -K V^{1/2} φ with φ = S u, so V^{1/2} φ = |V|^{1/2} u.
        let (even, odd) = self.sector_kernels(&SheetedEnergy::real(z))?;
        let n = self.quad.n_cells;
        let h = self.quad.h();
        let mut f = [vec![0.0; n], vec![0.0; n]];
        for (line, fl) in f.iter_mut().enumerate() {
            for (k, out) in fl.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, &(j, l)) in self.active.iter().enumerate() {
                    acc -= Self::block_entry(&even, &odd, line, j, k, l).re * self.v[j][l].abs().sqrt() * u[c];
                }
                *out = acc / h.sqrt();
            }
        }
        let peak = f.iter().flatten().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        let centers = self.quad.centers();
        Ok((0..n).map(|k| (centers[k], f[0][k] / peak, f[1][k] / peak)).collect())
    }

    /// Numerical evidence that nothing lies below `ξ₀`: the count is zero on
    /// a grid from `z_probe` up to the threshold margin.
    pub fn certify_no_spectrum_below(&self, z_probe: f64) -> Result<bool> {
        if self.active.is_empty() {
            return Ok(true);
        }
        let top = self.xi0() - THRESHOLD_MARGIN * self.xi0().abs().max(1.0);
        if z_probe >= top {
            return Err(Error::Window { lo: z_probe, hi: top, reason: "probe must lie below the threshold".into() });
        }
        let n = 12;
        for k in 0..=n {
            // geometric in the distance to the threshold
            let t = k as f64 / n as f64;
            let d = (self.xi0() - z_probe) * ((self.xi0() - top) / (self.xi0() - z_probe)).powf(t);
            if self.count_below(self.xi0() - d)? > 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn require_mirror(&self) -> Result<()> {
        if !self.cfg.is_mirror_symmetric() {
            return Err(Error::Hypothesis("mirror-symmetric potentials required".into()));
        }
        Ok(())
    }

    /// Single-line sector pencil `S + |V|^{1/2} K_σ |V|^{1/2}` for mirror
    /// potentials at real `z` where the sector kernel is real.
    pub fn sector_pencil(&self, z: f64, sector: Sector) -> Result<(DMatrix<f64>, Vec<usize>)> {
        self.require_mirror()?;
        let h = self.quad.h();
        let kern = self.kernels.cell_kernel(&SheetedEnergy::real(z), sector, h, self.quad.n_cells)?;
        let v = &self.v[0];
        let idx: Vec<usize> = (0..self.quad.n_cells).filter(|&i| v[i] != 0.0).collect();
        let m = DMatrix::from_fn(idx.len(), idx.len(), |r, c| {
            let (k, l) = (idx[r], idx[c]);
            let a = kern.entry(k, l).re * (v[k].abs() * v[l].abs()).sqrt();
            if r == c {
                a + v[k].signum()
            } else {
                a
            }
        });
        Ok((m, idx))
    }

    fn odd_eigenvalues(&self, z: f64) -> Result<Vec<f64>> {
        let (m, _) = self.sector_pencil(z, Sector::Odd)?;
        let mut ev = sym_eigenvalues(&m)?;
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(ev)
    }

    /// Odd-sector eigenvalues in `[lo, hi] ⊂ [ξ₀, μ₀)`; these are embedded
    /// eigenvalues of the mirror-symmetric operator.
    pub fn find_embedded(&self, lo: f64, hi: f64) -> Result<Vec<EmbeddedState>> {
        self.require_mirror()?;
        let spec = &self.kernels.spec;
        let mu0 = spec.xi1.ok_or_else(|| Error::Hypothesis("embedded search needs alpha*a > 1".into()))?;
        let top = mu0 - THRESHOLD_MARGIN * (mu0 - spec.xi0);
        if lo < spec.xi0 || hi > top || lo >= hi {
            return Err(Error::Window { lo, hi, reason: format!("window must lie in [{}, {top}]", spec.xi0) });
        }
        let v = &self.v[0];
        let p0 = v.iter().filter(|&&x| x > 0.0).count();
        let count = |z: f64| -> Result<usize> {
            Ok(self.odd_eigenvalues(z)?.iter().filter(|&&x| x > 0.0).count().saturating_sub(p0))
        };
        let (n_lo, n_hi) = (count(lo)?, count(hi)?);
        let mut out = Vec::new();
        for m in (n_lo + 1)..=n_hi {
            let idx = p0 + m - 1;
            let f = |z: f64| self.odd_eigenvalues(z).map(|ev| ev[idx]).unwrap_or(f64::NAN);
            let nu = brent(f, lo, hi, 1e-12)?;
            out.push(self.embedded_state(nu)?);
        }
        Ok(out)
    }

    /// Whole admissible window `[ξ₀, μ₀ - margin]`.
    pub fn find_all_embedded(&self) -> Result<Vec<EmbeddedState>> {
        let spec = &self.kernels.spec;
        let mu0 = spec.xi1.ok_or_else(|| Error::Hypothesis("embedded search needs alpha*a > 1".into()))?;
        self.find_embedded(spec.xi0, mu0 - THRESHOLD_MARGIN * (mu0 - spec.xi0))
    }

    fn embedded_state(&self, nu: f64) -> Result<EmbeddedState> {
        let (m, idx) = self.sector_pencil(nu, Sector::Odd)?;
        let eig = sym_eigen(&m)?;
        let (k, _) = eig
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &v)| if v.abs() < b.1 { (i, v.abs()) } else { b });
        let u = eig.vectors.column(k);
        let h = self.quad.h();
        let kern = self.kernels.cell_kernel(&SheetedEnergy::real(nu), Sector::Odd, h, self.quad.n_cells)?;
        let v = &self.v[0];
        // The odd sector kernel is K₊₊ - K₊₋, acting on f₊ with f₋ = -f₊.
        let mut trace: Vec<f64> = (0..self.quad.n_cells)
            .map(|k| {
                -idx.iter()
                    .enumerate()
                    .map(|(c, &l)| kern.entry(k, l).re * v[l].abs().sqrt() * u[c])
                    .sum::<f64>()
                    / h.sqrt()
            })
            .collect();
        let peak = trace.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        trace.iter_mut().for_each(|t| *t /= peak);
        Ok(EmbeddedState { nu, centers: self.quad.centers(), trace_plus: trace })
    }
}
