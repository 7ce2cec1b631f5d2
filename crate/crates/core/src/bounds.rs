//! Variational certificates: the discrete-spectrum test functional, form
//! lower bounds, local and global Hardy inequalities, subcritical couplings
//! and the Weyl-sequence residual.
//!
//! Form evaluations use separated test functions `ψ = f(x₁) φ(x₂)`, with `f`
//! piecewise linear on a fixed grid. Then every term reduces to a
//! one-dimensional integral.

use serde::Serialize;
use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::oracle::Tridiagonal;
use crate::potentials::ModelConfig;
use crate::quad::{adaptive, adaptive_with_breaks, gauss_legendre, map_rule};
use crate::transverse::{lambda_tilde_with, solve_equal, Eigenfunction, TransverseSpectrum};

/// `Q[ψₙ] = ∫|φₙ'|² + φ₀(a)² ∫(V₊ + V₋) φₙ²` for the trapezoid `φₙ` equal to
/// one on `[-n, n]` and vanishing outside `[-2n, 2n]`.
pub fn disc_certificate(cfg: &ModelConfig, n: f64) -> Result<f64> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidModel(format!("n must be positive, got {n}")));
    }
    let spec = solve_equal(cfg.alpha, cfg.a)?;
    let phi0 = spec.channel(0).expect("ground state exists");
    let trace = phi0.eval(cfg.a).powi(2) / phi0.norm_sq();
    let trap = |x: f64| {
        let t = x.abs();
        if t <= n {
            1.0
        } else if t <= 2.0 * n {
            (2.0 * n - t) / n
        } else {
            0.0
        }
    };
    let mut breaks: Vec<f64> = vec![-2.0 * n, -n, n, 2.0 * n];
    breaks.extend(cfg.v_plus.breakpoints().into_iter().chain(cfg.v_minus.breakpoints()).filter(|x| x.abs() < 2.0 * n));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let integral = adaptive_with_breaks(
        |x: f64| (cfg.v_plus.eval(x) + cfg.v_minus.eval(x)) * trap(x).powi(2),
        -2.0 * n,
        2.0 * n,
        &breaks,
        1e-13,
    );
    Ok(2.0 / n + trace * integral.value)
}

/// Smallest `n` on the doubling ladder `1, 2, 4, …` (capped at `n_max`)
/// where `Q[ψₙ] < 0`.
pub fn disc_certificate_search(cfg: &ModelConfig, n_max: f64) -> Result<Option<(f64, f64)>> {
    let mut n = 1.0;
    loop {
        let q = disc_certificate(cfg, n)?;
        if q < 0.0 {
            return Ok(Some((n, q)));
        }
        if n >= n_max {
            return Ok(None);
        }
        n = (2.0 * n).min(n_max);
    }
}

/// Transverse factor `φ(x₂)` of a separated test function.
#[derive(Debug, Clone, Copy)]
pub enum TransverseFactor {
    /// Eigenfunction of the unperturbed transverse operator, channel `j`.
    Channel(usize),
    Gaussian { center: f64, width: f64 },
}

/// Norms of a transverse factor, all computed by quadrature.
#[derive(Debug, Clone, Copy)]
struct FactorData {
    norm_sq: f64,
    grad_sq: f64,
    at_plus: f64,
    at_minus: f64,
}

fn factor_data(phi: TransverseFactor, spec: &TransverseSpectrum, a: f64) -> Result<FactorData> {
    let eig: Option<Eigenfunction> = match phi {
        TransverseFactor::Channel(j) => Some(*spec.channel(j).ok_or(Error::Threshold(j))?),
        TransverseFactor::Gaussian { .. } => None,
    };
    let value = |x: f64| match (&eig, phi) {
        (Some(e), _) => e.eval(x),
        (None, TransverseFactor::Gaussian { center, width }) => (-(x - center).powi(2) / (2.0 * width * width)).exp(),
        _ => unreachable!(),
    };
    let slope = |x: f64| match (&eig, phi) {
        (Some(e), _) => e.derivative(x, true),
        (None, TransverseFactor::Gaussian { center, width }) => {
            -(x - center) / (width * width) * (-(x - center).powi(2) / (2.0 * width * width)).exp()
        }
        _ => unreachable!(),
    };
    let reach = match phi {
        TransverseFactor::Channel(_) => a + 40.0 / eig.map_or(1.0, |e| e.kappa),
        TransverseFactor::Gaussian { center, width } => center.abs() + 12.0 * width,
    }
    .max(2.0 * a);
    let breaks = [-a, a];
    let norm_sq = adaptive_with_breaks(|x: f64| value(x).powi(2), -reach, reach, &breaks, 1e-14).value;
    let grad_sq = adaptive_with_breaks(|x: f64| slope(x).powi(2), -reach, reach, &breaks, 1e-14).value;
    Ok(FactorData { norm_sq, grad_sq, at_plus: value(a), at_minus: value(-a) })
}

/// `ρ(x₁) = 1/(1 + (x₁ - x₁⁰)²)`.
pub fn hardy_weight(x: f64, x1_0: f64) -> f64 {
    1.0 / (1.0 + (x - x1_0).powi(2))
}

/// Evaluator of form quantities for test functions `f` that are piecewise
/// linear on the nodes `lo + k·dx` and vanish at both ends.
#[derive(Debug, Clone)]
pub struct FormEvaluator {
    pub cfg: ModelConfig,
    pub spec: TransverseSpectrum,
    pub lo: f64,
    pub dx: f64,
    pub n_nodes: usize,
    /// Quadrature points: `(segment, local coordinate in [0,1], weight)`.
    points: Vec<(usize, f64, f64)>,
    v_plus: Vec<f64>,
    v_minus: Vec<f64>,
    lambda: Vec<f64>,
    xs: Vec<f64>,
}

impl FormEvaluator {
    pub fn new(cfg: &ModelConfig, lo: f64, hi: f64, n_nodes: usize) -> Result<Self> {
        if !(hi > lo) || n_nodes < 3 {
            return Err(Error::InvalidModel("form grid needs hi > lo and at least 3 nodes".into()));
        }
        let spec = solve_equal(cfg.alpha, cfg.a)?;
        let dx = (hi - lo) / (n_nodes - 1) as f64;
        let mut bps: Vec<f64> = cfg.v_plus.breakpoints();
        bps.extend(cfg.v_minus.breakpoints());
        let rule = gauss_legendre(8);
        let mut points = Vec::new();
        for s in 0..n_nodes - 1 {
            let (a, b) = (lo + s as f64 * dx, lo + (s + 1) as f64 * dx);
            let mut cuts: Vec<f64> = bps.iter().copied().filter(|&x| x > a && x < b).collect();
            cuts.insert(0, a);
            cuts.push(b);
            cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for w in cuts.windows(2) {
                // subdivide so Gaussian profiles are resolved
                let pieces = ((w[1] - w[0]) / 0.05).ceil().max(1.0) as usize;
                let step = (w[1] - w[0]) / pieces as f64;
                for k in 0..pieces {
                    let p0 = w[0] + k as f64 * step;
                    for (x, wt) in map_rule(&rule, p0, p0 + step) {
                        points.push((s, (x - a) / dx, wt));
                    }
                }
            }
        }
        let xs: Vec<f64> = points.iter().map(|&(s, t, _)| lo + (s as f64 + t) * dx).collect();
        let v_plus: Vec<f64> = xs.iter().map(|&x| cfg.v_plus.eval(x)).collect();
        let v_minus: Vec<f64> = xs.iter().map(|&x| cfg.v_minus.eval(x)).collect();
        let mut cache: HashMap<(u64, u64), f64> = HashMap::new();
        let mut lambda = Vec::with_capacity(xs.len());
        for i in 0..xs.len() {
            let key = (v_plus[i].to_bits(), v_minus[i].to_bits());
            let val = match cache.get(&key) {
                Some(&v) => v,
                None => {
                    let v = if v_plus[i] == 0.0 && v_minus[i] == 0.0 {
                        0.0
                    } else {
                        lambda_tilde_with(v_plus[i], v_minus[i], cfg.alpha, cfg.a, spec.xi0)?
                    };
                    cache.insert(key, v);
                    v
                }
            };
            lambda.push(val);
        }
        Ok(FormEvaluator { cfg: cfg.clone(), spec, lo, dx, n_nodes, points, v_plus, v_minus, lambda, xs })
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|k| self.lo + k as f64 * self.dx).collect()
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n_nodes {
            return Err(Error::InvalidModel(format!("expected {} samples, got {}", self.n_nodes, f.len())));
        }
        Ok(())
    }

    fn f_at(&self, f: &[f64], i: usize) -> f64 {
        let (s, t, _) = self.points[i];
        f[s] * (1.0 - t) + f[s + 1] * t
    }

    /// `∫ q f²` with `q` sampled at the quadrature points.
    fn weighted(&self, f: &[f64], q: impl Fn(usize) -> f64) -> f64 {
        (0..self.points.len()).map(|i| self.points[i].2 * q(i) * self.f_at(f, i).powi(2)).sum()
    }

    fn kinetic(&self, f: &[f64]) -> f64 {
        f.windows(2).map(|w| (w[1] - w[0]).powi(2) / self.dx).sum()
    }

    /// `ℰ[ψ] - ξ₀‖ψ‖²` for `ψ = f ⊗ φ`.
    pub fn form_gap(&self, f: &[f64], phi: TransverseFactor) -> Result<f64> {
        self.check(f)?;
        let d = factor_data(phi, &self.spec, self.cfg.a)?;
        let f_sq = self.weighted(f, |_| 1.0);
        let transverse = d.grad_sq - self.cfg.alpha * (d.at_plus.powi(2) + d.at_minus.powi(2)) - self.spec.xi0 * d.norm_sq;
        let lines = d.at_plus.powi(2) * self.weighted(f, |i| self.v_plus[i]) + d.at_minus.powi(2) * self.weighted(f, |i| self.v_minus[i]);
        Ok(self.kinetic(f) * d.norm_sq + f_sq * transverse + lines)
    }

    /// `‖ψ‖²` and `∫ w(x₁)|ψ|²`.
    pub fn weighted_norm(&self, f: &[f64], phi: TransverseFactor, w: impl Fn(f64) -> f64) -> Result<f64> {
        self.check(f)?;
        let d = factor_data(phi, &self.spec, self.cfg.a)?;
        Ok(d.norm_sq * self.weighted(f, |i| w(self.xs[i])))
    }

    /// Left minus right side of `ℰ[ψ] - ξ₀‖ψ‖² ≥ ∫|∂₁ψ|² + ∫(λ + offset)|ψ|²`.
    pub fn lower_bound_gap_with_offset(&self, f: &[f64], phi: TransverseFactor, offset: f64) -> Result<f64> {
        self.check(f)?;
        let d = factor_data(phi, &self.spec, self.cfg.a)?;
        let rhs = d.norm_sq * (self.kinetic(f) + self.weighted(f, |i| self.lambda[i] + offset));
        Ok(self.form_gap(f, phi)? - rhs)
    }

    pub fn lower_bound_gap(&self, f: &[f64], phi: TransverseFactor) -> Result<f64> {
        self.lower_bound_gap_with_offset(f, phi, 0.0)
    }

    /// `ℰ[ψ] - ξ₀‖ψ‖² - c ∫ρ|ψ|²` for a global certificate.
    pub fn hardy_gap(&self, f: &[f64], phi: TransverseFactor, cert: &HardyCertificate) -> Result<f64> {
        let (c, x0) = match cert {
            HardyCertificate::Global { c, x1_0, .. } => (*c, *x1_0),
            HardyCertificate::Local { .. } => return Err(Error::Hypothesis("hardy_gap needs a global certificate".into())),
        };
        Ok(self.form_gap(f, phi)? - c * self.weighted_norm(f, phi, |x| hardy_weight(x, x0))?)
    }
}

/// Interval where the local weight exceeds [`LAMBDA_NOISE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HardyCertificate {
    Local {
        nodes: Vec<f64>,
        lambda: Vec<f64>,
        positive: Vec<Interval>,
        degenerate: bool,
    },
    Global {
        c: f64,
        x1_0: f64,
        r: f64,
        v0: f64,
        lambda0: f64,
    },
}

impl HardyCertificate {
    pub fn constant(&self) -> Option<f64> {
        match self {
            HardyCertificate::Global { c, .. } => Some(*c),
            HardyCertificate::Local { .. } => None,
        }
    }
}

fn require_nonnegative(cfg: &ModelConfig) -> Result<()> {
    if !cfg.v_plus.is_nonnegative() || !cfg.v_minus.is_nonnegative() {
        return Err(Error::Hypothesis("Hardy inequalities need V+ >= 0 and V- >= 0".into()));
    }
    Ok(())
}

/// Values of `λ` at or below this are root-finding noise.
pub const LAMBDA_NOISE: f64 = 1e-12;

/// `H - ξ₀ ≥ λ(x₁)` with `λ` sampled on `grid`.
pub fn hardy_local(cfg: &ModelConfig, grid: &[f64]) -> Result<HardyCertificate> {
    require_nonnegative(cfg)?;
    let lambda = crate::transverse::lambda_field(cfg, grid)?;
    let mut positive = Vec::new();
    let mut start: Option<f64> = None;
    for (i, (&x, &l)) in grid.iter().zip(&lambda).enumerate() {
        match (l > LAMBDA_NOISE, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                positive.push(Interval { lo: s, hi: grid[i - 1] });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        positive.push(Interval { lo: s, hi: *grid.last().unwrap() });
    }
    let degenerate = positive.is_empty();
    Ok(HardyCertificate::Local { nodes: grid.to_vec(), lambda, positive, degenerate })
}

/// `c = (λ₀/16)/(λ₀ + 1/8 + 1/R²)`.
pub fn hardy_constant(lambda0: f64, r: f64) -> f64 {
    (lambda0 / 16.0) / (lambda0 + 0.125 + 1.0 / (r * r))
}

/// `H - ξ₀ ≥ c ρ` given `V₊ ≥ V₀` or `V₋ ≥ V₀` on `(x₁⁰ - R, x₁⁰ + R)`.
pub fn hardy_global(cfg: &ModelConfig, x1_0: f64, r: f64, v0: f64) -> Result<HardyCertificate> {
    require_nonnegative(cfg)?;
    if !(r > 0.0 && v0 > 0.0) {
        return Err(Error::InvalidModel(format!("R and V0 must be positive, got R={r}, V0={v0}")));
    }
    let samples = 4001;
    for k in 1..samples - 1 {
        let x = x1_0 - r + 2.0 * r * k as f64 / (samples - 1) as f64;
        if cfg.v_plus.eval(x) < v0 && cfg.v_minus.eval(x) < v0 {
            return Err(Error::Hypothesis(format!("neither V+ nor V- reaches V0={v0} at x1={x}")));
        }
    }
    let spec = solve_equal(cfg.alpha, cfg.a)?;
    let lambda0 = lambda_tilde_with(v0, 0.0, cfg.alpha, cfg.a, spec.xi0)?;
    Ok(HardyCertificate::Global { c: hardy_constant(lambda0, r), x1_0, r, v0, lambda0 })
}

/// `ε₀ = c / sup(w₋(x)(1 + (x - x₁⁰)²))`, the largest coupling with
/// `εw ≥ -cρ`; infinite when `w ≥ 0`.
pub fn subcritical_epsilon(cert: &HardyCertificate, w: impl Fn(f64) -> f64) -> Result<f64> {
    let (c, x0) = match cert {
        HardyCertificate::Global { c, x1_0, .. } => (*c, *x1_0),
        HardyCertificate::Local { .. } => return Err(Error::Hypothesis("subcritical_epsilon needs a global certificate".into())),
    };
    let scaled = |d: f64| {
        let lo = (-w(x0 - d)).max(0.0);
        let hi = (-w(x0 + d)).max(0.0);
        lo.max(hi) * (1.0 + d * d)
    };
    let mut sup: f64 = 0.0;
    let mut d = 0.0;
    while d < 50.0 {
        sup = sup.max(scaled(d));
        d += 1e-3;
    }
    let mut tail = Vec::new();
    let mut d = 50.0;
    while d <= 1e8 {
        let v = scaled(d);
        sup = sup.max(v);
        tail.push(v);
        d *= 1.05;
    }
    if !sup.is_finite() || tail.last().is_some_and(|&v| v > 10.0 * tail[tail.len() / 2].max(f64::MIN_POSITIVE) && v > sup * 0.5) {
        return Err(Error::Hypothesis("w is not bounded by C/x1^2".into()));
    }
    Ok(if sup == 0.0 { f64::INFINITY } else { c / sup })
}

/// Lowest eigenvalue of `-d²/dx₁² + λ(x₁) + εw(x₁)` on `(x₁⁰ - L, x₁⁰ + L)`
/// with Dirichlet ends, by finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BulkCheck {
    pub epsilon: f64,
    pub reduced_bottom: f64,
    pub certified: bool,
}

/// Evidence that `inf σ(H + εW) ≥ ξ₀` for a bulk potential `W = w(x₁)`.
///
/// `H - ξ₀ ≥ (-d² + λ) ⊗ 1`, so it suffices that the one-dimensional
/// operator `-d² + λ + εw` is nonnegative; it is checked by finite
/// differences on a large window.
pub fn certify_no_spectrum_below_bulk(
    cfg: &ModelConfig,
    w: impl Fn(f64) -> f64,
    eps: f64,
    center: f64,
    half_width: f64,
    h: f64,
) -> Result<BulkCheck> {
    let n = (2.0 * half_width / h).round() as usize;
    if n < 3 {
        return Err(Error::InvalidModel("window too small for the mesh".into()));
    }
    let nodes: Vec<f64> = (1..n).map(|k| center - half_width + k as f64 * h).collect();
    let lambda = crate::transverse::lambda_field(cfg, &nodes)?;
    let t = Tridiagonal {
        diag: nodes.iter().zip(&lambda).map(|(&x, l)| 2.0 / (h * h) + l + eps * w(x)).collect(),
        off: vec![-1.0 / (h * h); nodes.len() - 1],
    };
    let bottom = t.eigenvalue(0);
    Ok(BulkCheck { epsilon: eps, reduced_bottom: bottom, certified: bottom >= 0.0 })
}

/// Normalized bump `φ(x) ∝ exp(-1/(1 - x²))` on `(-1, 1)` and the norms of
/// its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub scale: f64,
    pub d1_norm: f64,
    pub d2_norm: f64,
}

fn bump_raw(x: f64) -> [f64; 3] {
    if x.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - x * x;
    let v = (-1.0 / q).exp();
    // φ' = -2x/q² φ, φ'' = (6x⁴ - 2)/q⁴ φ
    [v, -2.0 * x / (q * q) * v, (6.0 * x.powi(4) - 2.0) / q.powi(4) * v]
}

pub fn bump() -> &'static Bump {
    static B: OnceLock<Bump> = OnceLock::new();
    B.get_or_init(|| {
        let n0 = adaptive(|x: f64| bump_raw(x)[0].powi(2), -1.0, 1.0, 1e-15, 1e-13).value;
        let n1 = adaptive(|x: f64| bump_raw(x)[1].powi(2), -1.0, 1.0, 1e-15, 1e-13).value;
        let n2 = adaptive(|x: f64| bump_raw(x)[2].powi(2), -1.0, 1.0, 1e-15, 1e-13).value;
        let scale = 1.0 / n0.sqrt();
        Bump { scale, d1_norm: scale * n1.sqrt(), d2_norm: scale * n2.sqrt() }
    })
}

/// Terms of the Weyl-sequence residual for `ψₙ = φₙ(x₁) φ₀(x₂) e^{ikx₁}`,
/// `φₙ(x) = n^{-1/2} φ(x/n - n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylResidual {
    pub n: f64,
    pub k: f64,
    pub second_derivative: f64,
    pub first_derivative: f64,
    pub potential_plus: f64,
    pub potential_minus: f64,
    /// `‖φ̈ₙ‖ + 2|k|‖φ̇ₙ‖ + |φ₀(a)|(‖V₊φₙ‖ + ‖V₋φₙ‖)`, with `φ₀` normalized.
    pub bound: f64,
}

pub fn weyl_residual(cfg: &ModelConfig, n: f64, k: f64) -> Result<WeylResidual> {
    if !(n >= 1.0) {
        return Err(Error::InvalidModel(format!("n must be at least 1, got {n}")));
    }
    let b = bump();
    let spec = solve_equal(cfg.alpha, cfg.a)?;
    let phi0 = spec.channel(0).expect("ground state exists");
    let trace = phi0.eval(cfg.a).abs() / phi0.norm_sq().sqrt();
    let second_derivative = b.d2_norm / (n * n);
    let first_derivative = b.d1_norm / n;
    let center = n * n;
    let pot = |v: &crate::potentials::LinePotential| {
        let f = |x: f64| {
            let u = bump_raw(x / n - n)[0] * b.scale / n.sqrt();
            (v.eval(x) * u).powi(2)
        };
        adaptive(f, center - n, center + n, 1e-30, 1e-10).value.sqrt()
    };
    let potential_plus = pot(&cfg.v_plus);
    let potential_minus = pot(&cfg.v_minus);
    let bound = second_derivative + 2.0 * k.abs() * first_derivative + trace * (potential_plus + potential_minus);
    Ok(WeylResidual { n, k, second_derivative, first_derivative, potential_plus, potential_minus, bound })
}
