//! One-dimensional problem with two attractive point interactions at `±a`.
//!
//! Bound states of `-d²/dx² - β₊ δ(x-a) - β₋ δ(x+a)` are `ψ = e^{-κ|x|}`-type
//! piecewise exponentials; `κ > 0` solves
//! `(2κ-β₊)(2κ-β₋) = β₊β₋ e^{-4κa}`. For equal strengths `β₊ = β₋ = α` this
//! factorizes into an even and an odd branch.

use crate::error::{Error, Result};
use crate::potentials::ModelConfig;
use crate::roots::bisect_then_newton;

const BRACKET_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-14;

/// Piecewise-exponential bound state: `ψ(x) = u₊ e^{-κ(x-a)}` for `x > a`,
/// `u₋ e^{κ(x+a)}` for `x < -a`, and a combination of `sinh` inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenfunction {
    pub kappa: f64,
    pub a: f64,
    /// ψ(a)
    pub u_plus: f64,
    /// ψ(-a)
    pub u_minus: f64,
}

impl Eigenfunction {
    pub fn energy(&self) -> f64 {
        -self.kappa * self.kappa
    }

    /// `sinh(κt)/sinh(κL)` for `0 <= t <= L`, without overflow.
    fn sinh_ratio(&self, t: f64, l: f64) -> f64 {
        let k = self.kappa;
        if k * l > 20.0 {
            (k * (t - l)).exp() * (-(-2.0 * k * t).exp_m1()) / (-(-2.0 * k * l).exp_m1())
        } else {
            (k * t).sinh() / (k * l).sinh()
        }
    }

    fn cosh_ratio(&self, t: f64, l: f64) -> f64 {
        let k = self.kappa;
        if k * l > 20.0 {
            (k * (t - l)).exp() * (1.0 + (-2.0 * k * t).exp()) / (-(-2.0 * k * l).exp_m1())
        } else {
            (k * t).cosh() / (k * l).sinh()
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (k, a) = (self.kappa, self.a);
        if x >= a {
            self.u_plus * (-k * (x - a)).exp()
        } else if x <= -a {
            self.u_minus * (k * (x + a)).exp()
        } else {
            let l = 2.0 * a;
            self.u_plus * self.sinh_ratio(x + a, l) + self.u_minus * self.sinh_ratio(a - x, l)
        }
    }

    /// One-sided derivative; `from_right` selects `ψ'(x+0)` at the interfaces.
    pub fn derivative(&self, x: f64, from_right: bool) -> f64 {
        let (k, a) = (self.kappa, self.a);
        let outside_right = x > a || (x == a && from_right);
        let outside_left = x < -a || (x == -a && !from_right);
        if outside_right {
            -k * self.u_plus * (-k * (x - a)).exp()
        } else if outside_left {
            k * self.u_minus * (k * (x + a)).exp()
        } else {
            let l = 2.0 * a;
            k * (self.u_plus * self.cosh_ratio(x + a, l) - self.u_minus * self.cosh_ratio(a - x, l))
        }
    }

    /// `∫ψ²` over ℝ in closed form.
    pub fn norm_sq(&self) -> f64 {
        let (k, l) = (self.kappa, 2.0 * self.a);
        let (up, um) = (self.u_plus, self.u_minus);
        let outer = (up * up + um * um) / (2.0 * k);
        let kl = k * l;
        let (inv_sinh, coth) = if kl > 350.0 { (0.0, 1.0) } else { (1.0 / kl.sinh(), 1.0 / kl.tanh()) };
        let self_part = coth / (2.0 * k) - 0.5 * l * inv_sinh * inv_sinh;
        let cross_part = 0.5 * l * coth * inv_sinh - inv_sinh / (2.0 * k);
        outer + (up * up + um * um) * self_part + 2.0 * up * um * cross_part
    }

    fn normalized(mut self) -> Self {
        let n = self.norm_sq().sqrt();
        self.u_plus /= n;
        self.u_minus /= n;
        self
    }

    /// Jump `ψ'(x+0) - ψ'(x-0)` at `x = ±a`.
    pub fn derivative_jump(&self, plus: bool) -> f64 {
        let x = if plus { self.a } else { -self.a };
        self.derivative(x, true) - self.derivative(x, false)
    }
}

/// Spectrum of the equal-strength problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseSpectrum {
    pub alpha: f64,
    pub a: f64,
    pub xi0: f64,
    pub xi1: Option<f64>,
    pub kappa0: f64,
    pub kappa1: Option<f64>,
    /// Even ground state, positive.
    pub phi0: Eigenfunction,
    /// Odd excited state, positive on `(0, ∞)`.
    pub phi1: Option<Eigenfunction>,
}

impl TransverseSpectrum {
    /// Channel indices present: `[0]` or `[0, 1]`.
    pub fn index_set(&self) -> Vec<usize> {
        if self.xi1.is_some() {
            vec![0, 1]
        } else {
            vec![0]
        }
    }

    pub fn eigenvalue_count(&self) -> usize {
        self.index_set().len()
    }

    pub fn channel(&self, j: usize) -> Option<&Eigenfunction> {
        match j {
            0 => Some(&self.phi0),
            1 => self.phi1.as_ref(),
            _ => None,
        }
    }

    pub fn eigenvalue(&self, j: usize) -> Option<f64> {
        match j {
            0 => Some(self.xi0),
            1 => self.xi1,
            _ => None,
        }
    }
}

/// `(α²/4) e^{-4κa} - (κ - α/2)²`.
pub fn secular_residual(alpha: f64, a: f64, kappa: f64) -> f64 {
    let g = 0.5 * alpha * (-2.0 * kappa * a).exp();
    let d = kappa - 0.5 * alpha;
    (g - d) * (g + d)
}

fn check_params(alpha: f64, a: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidModel(format!("alpha must be positive, got {alpha}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidModel(format!("a must be positive, got {a}")));
    }
    Ok(())
}

pub fn solve_equal(alpha: f64, a: f64) -> Result<TransverseSpectrum> {
    check_params(alpha, a)?;
    let half = 0.5 * alpha;

    // Even branch: κ - α/2 = (α/2) e^{-2κa}, increasing, sign change on [α/2, α].
    let even = |k: f64| k - half - half * (-2.0 * k * a).exp();
    let even_d = |k: f64| 1.0 + alpha * a * (-2.0 * k * a).exp();
    let kappa0 = bisect_then_newton(even, even_d, half, alpha, BRACKET_TOL * half, NEWTON_TOL)?;

    // Odd branch: α/2 - κ = (α/2) e^{-2κa}; concave with h(0) = 0, so the
    // positive root exists iff h'(0) = αa - 1 > 0 and lies right of the maximum.
    let kappa1 = if alpha * a > 1.0 {
        let odd = |k: f64| -k - half * (-2.0 * k * a).exp_m1();
        let odd_d = |k: f64| -1.0 + alpha * a * (-2.0 * k * a).exp();
        let peak = (alpha * a).ln() / (2.0 * a);
        Some(bisect_then_newton(odd, odd_d, peak, half, BRACKET_TOL * half.min(1.0).max(peak), NEWTON_TOL)?)
    } else {
        None
    };

    let phi0 = Eigenfunction { kappa: kappa0, a, u_plus: 1.0, u_minus: 1.0 }.normalized();
    let phi1 = kappa1.map(|k| Eigenfunction { kappa: k, a, u_plus: 1.0, u_minus: -1.0 }.normalized());
    Ok(TransverseSpectrum {
        alpha,
        a,
        xi0: -kappa0 * kappa0,
        xi1: kappa1.map(|k| -k * k),
        kappa0,
        kappa1,
        phi0,
        phi1,
    })
}

/// `(2κ-β₊)(2κ-β₋) - β₊β₋ e^{-4κa}`.
pub fn general_secular(beta_plus: f64, beta_minus: f64, a: f64, kappa: f64) -> f64 {
    (2.0 * kappa - beta_plus) * (2.0 * kappa - beta_minus) - beta_plus * beta_minus * (-4.0 * kappa * a).exp()
}

/// The secular function divided by κ, which removes the trivial root at 0.
fn reduced_secular(bp: f64, bm: f64, a: f64, k: f64) -> f64 {
    let e = if k == 0.0 { 4.0 * a } else { -(-4.0 * k * a).exp_m1() / k };
    4.0 * k - 2.0 * (bp + bm) + bp * bm * e
}

fn reduced_secular_derivative(bp: f64, bm: f64, a: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 4.0 - bp * bm * 8.0 * a * a;
    }
    let ex = (-4.0 * k * a).exp();
    4.0 + bp * bm * (4.0 * a * ex / k + (-4.0 * a * k).exp_m1() / (k * k))
}

/// Interface matching matrix whose null vector is `(ψ(a), ψ(-a))`.
pub fn matching_matrix(bp: f64, bm: f64, a: f64, k: f64) -> [[f64; 2]; 2] {
    let kl = 2.0 * k * a;
    let (coth, csch) = if kl > 350.0 { (1.0, 0.0) } else { (1.0 / kl.tanh(), 1.0 / kl.sinh()) };
    [
        [bp - k - k * coth, k * csch],
        [k * csch, bm - k - k * coth],
    ]
}

/// All bound states of the unequal-strength problem, sorted by decreasing κ.
pub fn solve_general(beta_plus: f64, beta_minus: f64, a: f64) -> Result<Vec<Eigenfunction>> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidModel(format!("a must be positive, got {a}")));
    }
    if !(beta_plus.is_finite() && beta_minus.is_finite()) {
        return Err(Error::InvalidModel("strengths must be finite".into()));
    }
    if beta_plus <= 0.0 && beta_minus <= 0.0 {
        return Ok(Vec::new());
    }
    let bmax = beta_plus.abs().max(beta_minus.abs());
    let g = |k: f64| reduced_secular(beta_plus, beta_minus, a, k);
    let dg = |k: f64| reduced_secular_derivative(beta_plus, beta_minus, a, k);
    let step = 1e-4 * bmax.max(1.0);
    let k_hi = bmax + 1.0;
    let n = (k_hi / step).ceil() as usize;

    let mut roots: Vec<f64> = Vec::new();
    let mut prev_k = k_hi;
    let mut prev_g = g(k_hi);
    let mut prev_prev_g = f64::NAN;
    for i in (0..n).rev() {
        let k = step * i as f64;
        let gk = g(k);
        if gk == 0.0 && k > 0.0 {
            roots.push(k);
        } else if gk.signum() != prev_g.signum() && prev_g != 0.0 {
            roots.push(bisect_then_newton(g, dg, k, prev_k, BRACKET_TOL * bmax.max(1.0), NEWTON_TOL)?);
        } else if prev_g.abs() < gk.abs() && prev_g.abs() < prev_prev_g.abs() {
            // a touching (double) root shows up as a near-zero local minimum of |G|
            if let Some(r) = touching_root(&g, k, prev_k + step, bmax) {
                roots.push(r);
            }
        }
        prev_prev_g = prev_g;
        prev_k = k;
        prev_g = gk;
    }
    roots.retain(|&k| k > 0.0);
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-9 * bmax.max(1.0));

    let mut out = Vec::new();
    for k in roots {
        let m = matching_matrix(beta_plus, beta_minus, a, k);
        // Null vector from the better-conditioned row.
        let (up, um) = if m[0][0].abs() + m[0][1].abs() >= m[1][0].abs() + m[1][1].abs() {
            (-m[0][1], m[0][0])
        } else {
            (m[1][1], -m[1][0])
        };
        let scale = (up * up + um * um).sqrt();
        if scale == 0.0 {
            continue;
        }
        let (up, um) = (up / scale, um / scale);
        let resid = (m[0][0] * up + m[0][1] * um).abs() + (m[1][0] * up + m[1][1] * um).abs();
        let mnorm = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if resid > 1e-7 * mnorm.max(1.0) {
            continue;
        }
        let sign = if up.abs() >= um.abs() { up.signum() } else { um.signum() };
        out.push(Eigenfunction { kappa: k, a, u_plus: sign * up, u_minus: sign * um }.normalized());
    }
    out.sort_by(|x, y| y.kappa.partial_cmp(&x.kappa).unwrap());
    Ok(out)
}

fn touching_root(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, bmax: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c).abs() < g(d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    let k = 0.5 * (a + b);
    (g(k).abs() < 1e-10 * bmax.max(1.0) && k > 0.0).then_some(k)
}

/// `λ̃(v₊, v₋)`: bottom of the one-dimensional operator with strengths
/// `α - v±`, measured from the unperturbed ground state.
pub fn lambda_tilde_with(v_plus: f64, v_minus: f64, alpha: f64, a: f64, xi0: f64) -> Result<f64> {
    let states = solve_general(alpha - v_plus, alpha - v_minus, a)?;
    let bottom = states.first().map_or(0.0, |s| s.energy());
    Ok(bottom - xi0)
}

pub fn lambda_tilde(v_plus: f64, v_minus: f64, cfg: &ModelConfig) -> Result<f64> {
    let spec = solve_equal(cfg.alpha, cfg.a)?;
    lambda_tilde_with(v_plus, v_minus, cfg.alpha, cfg.a, spec.xi0)
}

/// `λ(x) = λ̃(V₊(x), V₋(x))` at the given nodes.
pub fn lambda_field(cfg: &ModelConfig, nodes: &[f64]) -> Result<Vec<f64>> {
    let spec = solve_equal(cfg.alpha, cfg.a)?;
    nodes
        .iter()
        .map(|&x| {
            let (vp, vm) = (cfg.v_plus.eval(x), cfg.v_minus.eval(x));
            if vp == 0.0 && vm == 0.0 {
                Ok(0.0)
            } else {
                lambda_tilde_with(vp, vm, cfg.alpha, cfg.a, spec.xi0)
            }
        })
        .collect()
}

/// Half-line operator with a Dirichlet condition at 0 and one interaction at `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineSpectrum {
    pub threshold: f64,
    pub eigenvalue: Option<f64>,
    /// Bottom of the essential spectrum of the half-plane comparison operator.
    pub mu0: f64,
}

pub fn dirichlet_halfline(alpha: f64, a: f64) -> Result<HalfLineSpectrum> {
    let spec = solve_equal(alpha, a)?;
    Ok(HalfLineSpectrum {
        threshold: 0.0,
        eigenvalue: spec.xi1,
        mu0: spec.xi1.unwrap_or(0.0),
    })
}
