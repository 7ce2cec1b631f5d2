//! Line potentials and the two-line model configuration.
//!
//! A [`LinePotential`] is a bounded real profile on ℝ. Analytic families carry
//! exact sup norms and exponential-decay certificates; tabulated profiles are
//! interpolated linearly and treated as compactly supported.

use crate::error::{Error, Result};
use crate::quad::{gl16, map_rule};

/// How a tabulated profile continues past its last sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Zero,
    /// Constant continuation of the end values. Only meant for testing the
    /// vanishing checks on profiles that do not decay.
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Gaussian { depth: f64, center: f64, width: f64 },
    Box { depth: f64, center: f64, half_width: f64 },
    Sum(Vec<Profile>),
    Tabulated { xs: Vec<f64>, values: Vec<f64>, extension: Extension },
}

/// Certified bound `|V(x)| <= k * exp(-c |x|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub c: f64,
    pub k: f64,
}

/// Outcome of [`LinePotential::check_vanishing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vanishing {
    pub vanishes: bool,
    /// Smallest tested radius beyond which `|V| < tol`.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePotential {
    profile: Profile,
    sup_norm: f64,
    decay: Option<DecayBound>,
}

/// `sgn(v) |v|^{1/2}`.
pub fn signed_sqrt(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().sqrt()
    }
}

/// Grid size of the dense heuristic checks.
const DENSE_POINTS: usize = 10_000;
/// Relative level below which a Gaussian tail is treated as absent.
const GAUSSIAN_CUTOFF: f64 = 1e-16;

impl Profile {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Gaussian { depth, center, width } => {
                let u = (x - center) / width;
                depth * (-0.5 * u * u).exp()
            }
            Profile::Box { depth, center, half_width } => {
                if (x - center).abs() <= *half_width {
                    *depth
                } else {
                    0.0
                }
            }
            Profile::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Profile::Tabulated { xs, values, extension } => interpolate(xs, values, *extension, x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::Gaussian { depth, center, width } => {
                if !(depth.is_finite() && center.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidPotential(format!(
                        "gaussian needs finite depth/center and positive width, got {depth}, {center}, {width}"
                    )));
                }
            }
            Profile::Box { depth, center, half_width } => {
                if !(depth.is_finite() && center.is_finite() && half_width.is_finite() && *half_width >= 0.0) {
                    return Err(Error::InvalidPotential(format!(
                        "box needs finite depth/center and nonnegative half width, got {depth}, {center}, {half_width}"
                    )));
                }
            }
            Profile::Sum(terms) => {
                for t in terms {
                    t.validate()?;
                }
            }
            Profile::Tabulated { xs, values, .. } => {
                if xs.len() != values.len() || xs.len() < 2 {
                    return Err(Error::InvalidPotential("table needs at least two (x, V) rows".into()));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidPotential("table abscissae must be strictly increasing".into()));
                }
                if xs.iter().chain(values.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPotential("table contains non-finite entries".into()));
                }
            }
        }
        Ok(())
    }

    /// Radius outside of which the profile is (numerically) zero.
    fn support_radius(&self) -> f64 {
        match self {
            Profile::Gaussian { depth, center, width } => {
                if *depth == 0.0 {
                    0.0
                } else {
                    center.abs() + width * (2.0 * (depth.abs() / (GAUSSIAN_CUTOFF * depth.abs().max(1.0))).ln()).sqrt()
                }
            }
            Profile::Box { depth, center, half_width } => {
                if *depth == 0.0 {
                    0.0
                } else {
                    center.abs() + half_width
                }
            }
            Profile::Sum(terms) => terms.iter().map(Profile::support_radius).fold(0.0, f64::max),
            Profile::Tabulated { xs, values, extension } => match extension {
                Extension::Hold if values[0] != 0.0 || values[values.len() - 1] != 0.0 => f64::INFINITY,
                _ => xs[0].abs().max(xs[xs.len() - 1].abs()),
            },
        }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Profile::Gaussian { center, .. } => out.push(*center),
            Profile::Box { center, half_width, .. } => {
                out.push(center - half_width);
                out.push(center + half_width);
            }
            Profile::Sum(terms) => terms.iter().for_each(|t| t.breakpoints(out)),
            Profile::Tabulated { xs, .. } => out.extend_from_slice(xs),
        }
    }

    fn decay(&self) -> Option<DecayBound> {
        match self {
            Profile::Gaussian { depth, center, width } => {
                let (c, w2) = (*center, width * width);
                // sup of -(x-c)^2/(2w^2) + |x|, split by the sign of x.
                let mut best = -c * c / (2.0 * w2);
                if c + w2 >= 0.0 {
                    best = best.max(c + 0.5 * w2);
                }
                if c - w2 <= 0.0 {
                    best = best.max(-c + 0.5 * w2);
                }
                Some(DecayBound { c: 1.0, k: depth.abs() * best.exp() })
            }
            Profile::Box { depth, center, half_width } => Some(DecayBound {
                c: 1.0,
                k: depth.abs() * (center.abs() + half_width).exp(),
            }),
            Profile::Sum(terms) => {
                let mut k = 0.0;
                for t in terms {
                    k += t.decay()?.k;
                }
                Some(DecayBound { c: 1.0, k })
            }
            Profile::Tabulated { .. } => None,
        }
    }

    fn integral(&self) -> f64 {
        match self {
            Profile::Gaussian { depth, width, .. } => depth * width * (2.0 * std::f64::consts::PI).sqrt(),
            Profile::Box { depth, half_width, .. } => 2.0 * depth * half_width,
            Profile::Sum(terms) => terms.iter().map(Profile::integral).sum(),
            Profile::Tabulated { xs, values, extension } => {
                if *extension == Extension::Hold && (values[0] != 0.0 || values[values.len() - 1] != 0.0) {
                    return f64::NAN;
                }
                xs.windows(2)
                    .zip(values.windows(2))
                    .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
                    .sum()
            }
        }
    }

    fn is_analytic_piecewise_constant(&self) -> bool {
        match self {
            Profile::Box { .. } => true,
            Profile::Sum(terms) => terms.iter().all(Profile::is_analytic_piecewise_constant),
            _ => false,
        }
    }
}

fn interpolate(xs: &[f64], values: &[f64], extension: Extension, x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] {
        return match extension {
            Extension::Zero => 0.0,
            Extension::Hold => values[0],
        };
    }
    if x > xs[n - 1] {
        return match extension {
            Extension::Zero => 0.0,
            Extension::Hold => values[n - 1],
        };
    }
    let i = xs.partition_point(|&t| t <= x).clamp(1, n - 1);
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    values[i - 1] + t * (values[i] - values[i - 1])
}

impl LinePotential {
    pub fn new(profile: Profile) -> Result<Self> {
        profile.validate()?;
        let decay = profile.decay();
        let mut p = LinePotential { profile, sup_norm: 0.0, decay };
        p.sup_norm = p.compute_sup_norm();
        Ok(p)
    }

    pub fn zero() -> Self {
        LinePotential {
            profile: Profile::Sum(Vec::new()),
            sup_norm: 0.0,
            decay: Some(DecayBound { c: 1.0, k: 0.0 }),
        }
    }

    pub fn gaussian(depth: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(Profile::Gaussian { depth, center, width })
    }

    pub fn boxed(depth: f64, center: f64, half_width: f64) -> Result<Self> {
        Self::new(Profile::Box { depth, center, half_width })
    }

    pub fn sum(terms: Vec<LinePotential>) -> Result<Self> {
        Self::new(Profile::Sum(terms.into_iter().map(|t| t.profile).collect()))
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>, extension: Extension) -> Result<Self> {
        Self::new(Profile::Tabulated { xs, values, extension })
    }

    /// Loads a two-column `x,V` CSV file with strictly increasing `x`.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::InvalidPotential(format!("{}: row {} has fewer than two columns", path.display(), line + 1)));
            }
            let parse = |s: &str| s.parse::<f64>();
            match (parse(&record[0]), parse(&record[1])) {
                (Ok(x), Ok(v)) => {
                    xs.push(x);
                    values.push(v);
                }
                // a header row is allowed only first
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::InvalidPotential(format!("{}: row {} is not numeric", path.display(), line + 1)));
                }
            }
        }
        Self::tabulated(xs, values, Extension::Zero)
    }

    /// `scale * V`.
    pub fn scaled(&self, scale: f64) -> Self {
        let profile = match &self.profile {
            Profile::Gaussian { depth, center, width } => Profile::Gaussian { depth: depth * scale, center: *center, width: *width },
            Profile::Box { depth, center, half_width } => Profile::Box { depth: depth * scale, center: *center, half_width: *half_width },
            Profile::Sum(terms) => Profile::Sum(
                terms
                    .iter()
                    .map(|t| LinePotential { profile: t.clone(), sup_norm: 0.0, decay: None }.scaled(scale).profile)
                    .collect(),
            ),
            Profile::Tabulated { xs, values, extension } => Profile::Tabulated {
                xs: xs.clone(),
                values: values.iter().map(|v| v * scale).collect(),
                extension: *extension,
            },
        };
        Self::new(profile).expect("scaling keeps a valid profile valid")
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn decay_bound(&self) -> Option<DecayBound> {
        self.decay
    }

    pub fn support_radius(&self) -> f64 {
        self.profile.support_radius()
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    pub fn integral(&self) -> f64 {
        self.profile.integral()
    }

    /// Sorted points where the profile has kinks, jumps or peaks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.profile.breakpoints(&mut out);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// Whether `V >= 0` (resp. `V <= 0`) everywhere, checked on breakpoints
    /// and the dense grid.
    pub fn is_nonnegative(&self) -> bool {
        self.check_points().iter().all(|&x| self.eval(x) >= 0.0)
    }

    pub fn is_nonpositive(&self) -> bool {
        self.check_points().iter().all(|&x| self.eval(x) <= 0.0)
    }

    /// Average of `V` over `[lo, hi]`, exact for boxes and tables.
    pub fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return self.eval(lo);
        }
        let mut pts: Vec<f64> = self.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
        pts.insert(0, lo);
        pts.push(hi);
        let rule = gl16();
        let mut acc = 0.0;
        for w in pts.windows(2) {
            // Gaussians wider than the cell are resolved by one panel; narrow
            // ones get subdivided.
            let pieces = match &self.profile {
                p if p.is_analytic_piecewise_constant() => 1,
                _ => (((w[1] - w[0]) / self.min_scale()).ceil() as usize).clamp(1, 64),
            };
            let step = (w[1] - w[0]) / pieces as f64;
            for k in 0..pieces {
                let a = w[0] + step * k as f64;
                for (x, wt) in map_rule(rule, a, a + step) {
                    acc += wt * self.eval(x);
                }
            }
        }
        acc / (hi - lo)
    }

    fn min_scale(&self) -> f64 {
        fn walk(p: &Profile) -> f64 {
            match p {
                Profile::Gaussian { width, .. } => 0.5 * width,
                Profile::Box { .. } => f64::INFINITY,
                Profile::Sum(t) => t.iter().map(walk).fold(f64::INFINITY, f64::min),
                Profile::Tabulated { .. } => f64::INFINITY,
            }
        }
        walk(&self.profile)
    }

    fn check_radius(&self) -> f64 {
        let r = self.support_radius();
        let finite = if r.is_finite() {
            r
        } else {
            match &self.profile {
                Profile::Tabulated { xs, .. } => xs[0].abs().max(xs[xs.len() - 1].abs()),
                _ => 10.0,
            }
        };
        2.0 * finite.max(10.0)
    }

    fn check_points(&self) -> Vec<f64> {
        let r = self.check_radius();
        let mut pts: Vec<f64> = (0..DENSE_POINTS)
            .map(|i| -r + 2.0 * r * i as f64 / (DENSE_POINTS - 1) as f64)
            .collect();
        pts.extend(self.breakpoints());
        pts
    }

    /// Dense-grid test of `sup_{|x|>L} |V(x)| < tol`; returns the smallest
    /// tested `L`. Heuristic evidence, not a proof.
    pub fn check_vanishing(&self, tol: f64) -> Vanishing {
        if self.is_zero() {
            return Vanishing { vanishes: true, radius: Some(0.0) };
        }
        let r = self.check_radius();
        let mut pts: Vec<(f64, f64)> = (0..DENSE_POINTS)
            .map(|i| {
                let x = -r + 2.0 * r * i as f64 / (DENSE_POINTS - 1) as f64;
                (x.abs(), self.eval(x).abs())
            })
            .collect();
        pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        if pts[0].1 >= tol {
            return Vanishing { vanishes: false, radius: None };
        }
        // Walk inward while the tail supremum stays below tol.
        let mut radius = pts[0].0;
        for &(ax, v) in &pts {
            if v >= tol {
                break;
            }
            radius = ax;
        }
        if radius <= pts[pts.len() - 1].0 {
            radius = 0.0;
        }
        Vanishing { vanishes: true, radius: Some(radius) }
    }

    fn compute_sup_norm(&self) -> f64 {
        match &self.profile {
            Profile::Gaussian { depth, .. } | Profile::Box { depth, .. } => depth.abs(),
            Profile::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Profile::Sum(terms) if terms.is_empty() => 0.0,
            Profile::Sum(_) => {
                let f = |x: f64| self.eval(x).abs();
                let mut pts = self.breakpoints();
                // one-sided limits at jumps
                let jumps: Vec<f64> = pts.iter().flat_map(|&b| [b - 1e-12, b + 1e-12]).collect();
                pts.extend(jumps);
                let r = self.support_radius().clamp(1.0, 1e6);
                let grid: Vec<f64> = (0..DENSE_POINTS)
                    .map(|i| -r + 2.0 * r * i as f64 / (DENSE_POINTS - 1) as f64)
                    .collect();
                let mut best = pts.iter().map(|&x| f(x)).fold(0.0, f64::max);
                let step = grid[1] - grid[0];
                for i in 1..grid.len() - 1 {
                    let (a, b, c) = (f(grid[i - 1]), f(grid[i]), f(grid[i + 1]));
                    best = best.max(b);
                    if b >= a && b >= c {
                        best = best.max(golden_max(&f, grid[i] - step, grid[i] + step));
                    }
                }
                best * (1.0 + 1e-12)
            }
        }
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(0.5 * (a + b)).max(f(c)).max(f(d))
}

/// Coupling `alpha > 0`, half distance `a > 0` and the two line potentials.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub alpha: f64,
    pub a: f64,
    pub v_plus: LinePotential,
    pub v_minus: LinePotential,
}

impl ModelConfig {
    pub fn new(alpha: f64, a: f64, v_plus: LinePotential, v_minus: LinePotential) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidModel(format!("alpha must be positive, got {alpha}")));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidModel(format!("a must be positive, got {a}")));
        }
        Ok(ModelConfig { alpha, a, v_plus, v_minus })
    }

    pub fn unperturbed(alpha: f64, a: f64) -> Result<Self> {
        Self::new(alpha, a, LinePotential::zero(), LinePotential::zero())
    }

    /// Both lines carry the same potential.
    pub fn mirror(alpha: f64, a: f64, v0: LinePotential) -> Result<Self> {
        Self::new(alpha, a, v0.clone(), v0)
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.v_plus == self.v_minus
    }

    pub fn support_radius(&self) -> f64 {
        self.v_plus.support_radius().max(self.v_minus.support_radius())
    }
}
