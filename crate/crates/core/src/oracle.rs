//! Finite-difference reference solvers.
//!
//! The δ-lines become single grid rows carrying `(V(x₁) - α)/h`, on a
//! Dirichlet box. The one-dimensional problem is solved by Sturm bisection;
//! the two-dimensional one by shift-invert Lanczos, where the shifted
//! operator is the separable part `T₁⊗I + I⊗T₂` plus a low-rank line
//! correction, inverted with a Woodbury update.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::potentials::{LinePotential, ModelConfig};

fn aligned_index(x: f64, origin: f64, h: f64) -> Result<usize> {
    let t = (x - origin) / h;
    if (t - t.round()).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::InvalidModel(format!("grid not aligned: {x} is not a multiple of h={h} from {origin}")));
    }
    Ok(t.round() as usize)
}

/// Symmetric tridiagonal matrix `diag`, `off`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 * mid.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        })
    }
}

/// `-d²/dx²` on the interior nodes of `(-l, l)` with Dirichlet ends.
fn laplacian_1d(l: f64, h: f64) -> Result<(Tridiagonal, Vec<f64>)> {
    let n = aligned_index(l, -l, h)?;
    let nodes: Vec<f64> = (1..n).map(|i| -l + i as f64 * h).collect();
    let m = nodes.len();
    Ok((
        Tridiagonal { diag: vec![2.0 / (h * h); m], off: vec![-1.0 / (h * h); m.saturating_sub(1)] },
        nodes,
    ))
}

/// Lowest two eigenvalues of the transverse operator with strengths
/// `β₊` at `a` and `β₋` at `-a`, on `(-l2, l2)`.
pub fn fd_transverse_general(beta_plus: f64, beta_minus: f64, a: f64, l2: f64, h: f64) -> Result<[f64; 2]> {
    let (mut t, _) = laplacian_1d(l2, h)?;
    let jp = aligned_index(a, -l2, h)? - 1;
    let jm = aligned_index(-a, -l2, h)? - 1;
    t.diag[jp] -= beta_plus / h;
    t.diag[jm] -= beta_minus / h;
    Ok([t.eigenvalue(0), t.eigenvalue(1)])
}

pub fn fd_transverse(alpha: f64, a: f64, l2: f64, h: f64) -> Result<[f64; 2]> {
    fd_transverse_general(alpha, alpha, a, l2, h)
}

/// Two-level Richardson extrapolation for a second-order method.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolated {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub value: Vec<f64>,
    pub error: Vec<f64>,
}

pub fn richardson(coarse: Vec<f64>, fine: Vec<f64>) -> Extrapolated {
    let value: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| f + (f - c) / 3.0).collect();
    let error: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (f - c).abs() / 3.0).collect();
    Extrapolated { coarse, fine, value, error }
}

pub fn fd_transverse_extrapolated(beta_plus: f64, beta_minus: f64, a: f64, l2: f64, h: f64) -> Result<Extrapolated> {
    let c = fd_transverse_general(beta_plus, beta_minus, a, l2, h)?;
    let f = fd_transverse_general(beta_plus, beta_minus, a, l2, 0.5 * h)?;
    Ok(richardson(c.to_vec(), f.to_vec()))
}

/// Grid problem on `(-l1, l1) × (-l2, l2)` or, for the odd sector, on
/// `(-l1, l1) × (0, l2)` with a Dirichlet wall at `x₂ = 0`.
#[derive(Debug, Clone)]
pub struct FdProblem {
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
    pub alpha: f64,
    pub a: f64,
    pub half: bool,
    /// Line rows: transverse node index and `V` at the `x₁` nodes.
    lines: Vec<(usize, Vec<f64>)>,
    /// Separable bulk potential `w(x₁)` at the `x₁` nodes.
    bulk: Vec<f64>,
    x1: Vec<f64>,
    n2: usize,
}

fn node_averages(v: &LinePotential, nodes: &[f64], h: f64) -> Vec<f64> {
    nodes.iter().map(|&x| v.cell_average(x - 0.5 * h, x + 0.5 * h)).collect()
}

impl FdProblem {
    pub fn new(cfg: &ModelConfig, l1: f64, l2: f64, h: f64) -> Result<Self> {
        let (_, x1) = laplacian_1d(l1, h)?;
        let n2 = aligned_index(l2, -l2, h)? - 1;
        let jp = aligned_index(cfg.a, -l2, h)? - 1;
        let jm = aligned_index(-cfg.a, -l2, h)? - 1;
        let lines = vec![(jp, node_averages(&cfg.v_plus, &x1, h)), (jm, node_averages(&cfg.v_minus, &x1, h))];
        Ok(FdProblem { l1, l2, h, alpha: cfg.alpha, a: cfg.a, half: false, bulk: vec![0.0; x1.len()], lines, x1, n2 })
    }

    /// Odd sector of a mirror-symmetric model.
    pub fn new_odd(cfg: &ModelConfig, l1: f64, l2: f64, h: f64) -> Result<Self> {
        if !cfg.is_mirror_symmetric() {
            return Err(Error::Hypothesis("odd sector needs mirror-symmetric potentials".into()));
        }
        let (_, x1) = laplacian_1d(l1, h)?;
        let n2 = aligned_index(l2, 0.0, h)? - 1;
        let jp = aligned_index(cfg.a, 0.0, h)? - 1;
        let lines = vec![(jp, node_averages(&cfg.v_plus, &x1, h))];
        Ok(FdProblem { l1, l2, h, alpha: cfg.alpha, a: cfg.a, half: true, bulk: vec![0.0; x1.len()], lines, x1, n2 })
    }

    /// Adds `w(x₁)` acting on the whole plane.
    pub fn with_bulk(mut self, w: impl Fn(f64) -> f64) -> Self {
        self.bulk = self.x1.iter().map(|&x| w(x)).collect();
        self
    }

    pub fn dimension(&self) -> usize {
        self.x1.len() * self.n2
    }

    fn t1(&self) -> Tridiagonal {
        let h2 = self.h * self.h;
        let n = self.x1.len();
        Tridiagonal {
            diag: self.bulk.iter().map(|w| 2.0 / h2 + w).collect(),
            off: vec![-1.0 / h2; n - 1],
        }
    }

    fn t2(&self) -> Tridiagonal {
        let h2 = self.h * self.h;
        let mut t = Tridiagonal { diag: vec![2.0 / h2; self.n2], off: vec![-1.0 / h2; self.n2 - 1] };
        for (j, _) in &self.lines {
            t.diag[*j] -= self.alpha / self.h;
        }
        t
    }

    /// Transverse ground state at this mesh.
    pub fn transverse_ground(&self) -> f64 {
        self.t2().eigenvalue(0)
    }

    /// Dense matrix, for small grids only.
    pub fn dense(&self) -> DMatrix<f64> {
        let (n1, n2) = (self.x1.len(), self.n2);
        let t1 = self.t1().dense();
        let t2 = self.t2().dense();
        let mut m = DMatrix::zeros(n1 * n2, n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                let r = i * n2 + j;
                for jj in 0..n2 {
                    m[(r, i * n2 + jj)] += t2[(j, jj)];
                }
                for ii in 0..n1 {
                    m[(r, ii * n2 + j)] += t1[(i, ii)];
                }
            }
        }
        for (j, v) in &self.lines {
            for i in 0..n1 {
                m[(i * n2 + j, i * n2 + j)] += v[i] / self.h;
            }
        }
        m
    }

    /// Crude lower bound for the spectrum (Gershgorin on the line rows).
    fn spectrum_floor(&self) -> f64 {
        let vmin = self
            .lines
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .chain(self.bulk.iter().copied())
            .fold(0.0, f64::min);
        let t2min = self.t2().eigenvalue(0);
        t2min + 2.0 * vmin / self.h - 1.0
    }

    /// Lowest `k` eigenvalues by shift-invert Lanczos.
    pub fn lowest(&self, k: usize, seed: u64) -> Result<Vec<f64>> {
        self.lowest_with_shift(k, self.spectrum_floor(), seed)
    }

    /// Lowest `k` eigenvalues, given a shift `sigma` below the spectrum.
    pub fn lowest_with_shift(&self, k: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
        let solver = ShiftedSolver::new(self, sigma)?;
        let n = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let theta = lanczos_largest(|x| solver.apply(x), start, k, 1e-11, 300)?;
        Ok(theta.iter().map(|t| solver.sigma + 1.0 / t).collect())
    }

    /// Eigenvalues below `cap`, at most `k_max` of them.
    pub fn eigenvalues_below(&self, cap: f64, k_max: usize, seed: u64) -> Result<Vec<f64>> {
        let ev = self.lowest(k_max, seed)?;
        Ok(ev.into_iter().filter(|&e| e < cap).collect())
    }
}

/// `(H - σ)⁻¹` through the separable part and a Woodbury correction.
struct ShiftedSolver {
    sigma: f64,
    s1: DMatrix<f64>,
    lam1: Vec<f64>,
    q2: DMatrix<f64>,
    mu2: Vec<f64>,
    n1: usize,
    n2: usize,
    /// (x₁ index, x₂ index, V/h) of the correction points.
    points: Vec<(usize, usize, f64)>,
    capacitance: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ShiftedSolver {
    fn new(p: &FdProblem, sigma: f64) -> Result<Self> {
        let e1 = sym_eigen(&p.t1().dense())?;
        let e2 = sym_eigen(&p.t2().dense())?;
        let (n1, n2) = (p.x1.len(), p.n2);
        let points: Vec<(usize, usize, f64)> = p
            .lines
            .iter()
            .flat_map(|(j, v)| v.iter().enumerate().filter(|(_, &x)| x != 0.0).map(move |(i, &x)| (i, *j, x / p.h)))
            .collect();
        let mut s = ShiftedSolver {
            sigma,
            s1: e1.vectors,
            lam1: e1.values,
            q2: e2.vectors,
            mu2: e2.values,
            n1,
            n2,
            points,
            capacitance: None,
        };
        if !s.points.is_empty() {
            let rows: Vec<usize> = {
                let mut r: Vec<usize> = s.points.iter().map(|p| p.1).collect();
                r.sort();
                r.dedup();
                r
            };
            // F_rs(k) = Σ_m Q_rm Q_sm / (λ_k + μ_m - σ)
            let nr = rows.len();
            let mut f = vec![0.0; n1 * nr * nr];
            for k in 0..n1 {
                for (a, &r) in rows.iter().enumerate() {
                    for (b, &t) in rows.iter().enumerate() {
                        let mut acc = 0.0;
                        for m in 0..n2 {
                            acc += s.q2[(r, m)] * s.q2[(t, m)] / (s.lam1[k] + s.mu2[m] - sigma);
                        }
                        f[(k * nr + a) * nr + b] = acc;
                    }
                }
            }
            let np = s.points.len();
            let row_pos = |r: usize| rows.iter().position(|&x| x == r).unwrap();
            let mut c = DMatrix::zeros(np, np);
            for (u, &(i, r, d)) in s.points.iter().enumerate() {
                for (w, &(ii, t, _)) in s.points.iter().enumerate() {
                    let (a, b) = (row_pos(r), row_pos(t));
                    let mut acc = 0.0;
                    for k in 0..n1 {
                        acc += s.s1[(i, k)] * s.s1[(ii, k)] * f[(k * nr + a) * nr + b];
                    }
                    c[(u, w)] = acc;
                }
                c[(u, u)] += 1.0 / d;
            }
            s.capacitance = Some(c.lu());
        }
        Ok(s)
    }

    fn separable_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut hat = self.s1.transpose() * b * &self.q2;
        for k in 0..self.n1 {
            for m in 0..self.n2 {
                hat[(k, m)] /= self.lam1[k] + self.mu2[m] - self.sigma;
            }
        }
        &self.s1 * hat * self.q2.transpose()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let b = DMatrix::from_row_slice(self.n1, self.n2, x.as_slice());
        let y = self.separable_solve(&b);
        let out = match &self.capacitance {
            None => y,
            Some(lu) => {
                let g = DVector::from_iterator(self.points.len(), self.points.iter().map(|&(i, j, _)| y[(i, j)]));
                let c = lu.solve(&g).expect("capacitance matrix is invertible");
                let mut rhs = DMatrix::zeros(self.n1, self.n2);
                for (u, &(i, j, _)) in self.points.iter().enumerate() {
                    rhs[(i, j)] = c[u];
                }
                y - self.separable_solve(&rhs)
            }
        };
        // row-major flattening, matching the input layout
        DVector::from_iterator(self.n1 * self.n2, (0..self.n1).flat_map(|i| (0..self.n2).map(move |j| (i, j))).map(|(i, j)| out[(i, j)]))
    }
}

/// Largest `k` eigenvalues of a symmetric positive operator by Lanczos with
/// full reorthogonalization.
pub fn lanczos_largest(
    op: impl Fn(&DVector<f64>) -> DVector<f64>,
    start: DVector<f64>,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = start.len();
    let max_iter = max_iter.min(n);
    let mut basis: Vec<DVector<f64>> = vec![start.normalize()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    loop {
        let j = basis.len() - 1;
        let mut w = op(&basis[j]);
        let alpha = w.dot(&basis[j]);
        alphas.push(alpha);
        for _ in 0..2 {
            for v in &basis {
                let c = w.dot(v);
                w.axpy(-c, v, 1.0);
            }
        }
        let beta = w.norm();
        let m = alphas.len();
        if m >= k {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let e = sym_eigen(&t)?;
            let order: Vec<usize> = (0..m).rev().collect();
            let converged = order[..k].iter().all(|&i| (beta * e.vectors[(m - 1, i)]).abs() <= tol * e.values[i].abs());
            if converged || beta < 1e-14 || m >= max_iter {
                if !converged && beta >= 1e-14 {
                    return Err(Error::NoConvergence(format!("Lanczos: {m} iterations without convergence")));
                }
                return Ok(order[..k].iter().map(|&i| e.values[i]).collect());
            }
        }
        betas.push(beta);
        basis.push(w / beta);
    }
}

/// Lowest eigenvalues at `h` and `h/2`, extrapolated.
pub fn fd_2d_extrapolated(cfg: &ModelConfig, l1: f64, l2: f64, h: f64, k: usize, odd: bool, seed: u64) -> Result<Extrapolated> {
    let build = |hh: f64| if odd { FdProblem::new_odd(cfg, l1, l2, hh) } else { FdProblem::new(cfg, l1, l2, hh) };
    let coarse = build(h)?.lowest(k, seed)?;
    let fine = build(0.5 * h)?.lowest(k, seed)?;
    Ok(richardson(coarse, fine))
}

/// Eigenvalues of the 2D problem below `ξ₀`: returns the extrapolated
/// values whose coarse and fine representatives both sit below the
/// respective mesh thresholds.
pub fn fd_2d(cfg: &ModelConfig, l1: f64, l2: f64, h: f64, k_max: usize, seed: u64) -> Result<Extrapolated> {
    let pc = FdProblem::new(cfg, l1, l2, h)?;
    let pf = FdProblem::new(cfg, l1, l2, 0.5 * h)?;
    let cc = pc.eigenvalues_below(pc.transverse_ground(), k_max, seed)?;
    let cf = pf.eigenvalues_below(pf.transverse_ground(), k_max, seed)?;
    let n = cc.len().min(cf.len());
    Ok(richardson(cc[..n].to_vec(), cf[..n].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;

    #[test]
    fn sturm_matches_dense() {
        let t = Tridiagonal { diag: vec![2.0, -1.0, 3.0, 0.5], off: vec![0.3, -0.7, 1.1] };
        let dense = sym_eigenvalues(&t.dense()).unwrap();
        for (k, d) in dense.iter().enumerate() {
            assert!((t.eigenvalue(k) - d).abs() < 1e-12);
        }
    }

    #[test]
    fn free_box_ground_state() {
        let [e0, _] = fd_transverse(0.0, 1.0, 5.0, 0.01).unwrap();
        let exact = (std::f64::consts::PI / 10.0).powi(2);
        assert!((e0 - exact).abs() < 1e-5);
    }

    #[test]
    fn lanczos_matches_dense_on_small_grid() {
        let v = LinePotential::boxed(-0.5, 0.0, 0.5).unwrap();
        let cfg = ModelConfig::new(2.0, 0.5, v, LinePotential::zero()).unwrap();
        let p = FdProblem::new(&cfg, 2.0, 1.5, 0.25).unwrap();
        let dense = sym_eigenvalues(&p.dense()).unwrap();
        let lz = p.lowest(3, 1).unwrap();
        for k in 0..3 {
            assert!((lz[k] - dense[k]).abs() < 1e-9, "{k}: {} vs {}", lz[k], dense[k]);
        }
        let q = FdProblem::new_odd(&ModelConfig::mirror(2.0, 0.5, LinePotential::boxed(-0.5, 0.0, 0.5).unwrap()).unwrap(), 2.0, 1.5, 0.25)
            .unwrap()
            .with_bulk(|x| -0.1 / (1.0 + x * x));
        let dense = sym_eigenvalues(&q.dense()).unwrap();
        assert!((q.lowest(1, 2).unwrap()[0] - dense[0]).abs() < 1e-9);
    }
}
