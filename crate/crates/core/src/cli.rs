//! Command-line front end: TOML configuration, orchestration and output.
//!
//! Every command writes its artifact into `--out` and prints a short summary.
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::birman_schwinger::{BirmanSchwinger, QuadratureSpec, THRESHOLD_MARGIN};
use crate::bounds::{
    certify_no_spectrum_below_bulk, disc_certificate, disc_certificate_search, hardy_global, hardy_local, subcritical_epsilon,
    weyl_residual,
};
use crate::error::Error;
use crate::oracle::{fd_2d, fd_2d_extrapolated, fd_transverse_extrapolated};
use crate::potentials::{LinePotential, ModelConfig};
use crate::resonance::{golden_rule_ratio, width_exponent, ResonancePole, ResonanceProblem, EPSILON_GRID, WIDTH_FLOOR};
use crate::transverse::{lambda_field, secular_residual, solve_equal};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "twoline", version, about = "Spectral analysis of two parallel leaky delta-lines with line potentials")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "twoline-out")]
    pub out: PathBuf,
    /// Worker threads for concurrent searches (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the iterative eigensolver start vectors.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Coupling strength, overrides `model.alpha`.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Half distance between the lines, overrides `model.a`.
    #[arg(long = "a", global = true)]
    pub a: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Transverse eigenvalues xi0, xi1.
    Transverse,
    /// xi0 and xi1 against alpha on (0, 4] at step 0.01.
    Fig2,
    /// The local weight lambda(x1) on a grid.
    LambdaMap,
    /// Discrete eigenvalues below xi0.
    BoundStates,
    /// Embedded eigenvalues of the mirror-symmetric model.
    Embedded,
    /// Resonance poles over the epsilon grid.
    Resonance,
    /// Local and global Hardy certificates.
    Hardy,
    /// Variational certificate for spectrum below xi0.
    CertifyDisc,
    /// Weyl-sequence residual bounds.
    Weyl,
    /// Cross-validation against finite differences.
    OracleCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Transverse => "transverse",
            Command::Fig2 => "fig2",
            Command::LambdaMap => "lambda-map",
            Command::BoundStates => "bound-states",
            Command::Embedded => "embedded",
            Command::Resonance => "resonance",
            Command::Hardy => "hardy",
            Command::CertifyDisc => "certify-disc",
            Command::Weyl => "weyl",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidModel(_) | Error::InvalidPotential(_) | Error::Hypothesis(_) | Error::Io(_) | Error::Csv(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn config_err(path: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{path}: {msg}"))
}

// ---------------------------------------------------------------- config

/// Profile declaration, tagged by `kind`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero,
    Box { depth: f64, center: f64, half_width: f64 },
    Gaussian { depth: f64, center: f64, width: f64 },
    Sum { terms: Vec<ProfileSpec> },
    /// Two-column CSV `x, V(x)`; relative paths resolve against the config file.
    Table { path: PathBuf },
}

impl ProfileSpec {
    fn build(&self, base: &Path, key: &str) -> Result<LinePotential, Failure> {
        let wrap = |r: crate::Result<LinePotential>| r.map_err(|e| config_err(key, e));
        match self {
            ProfileSpec::Zero => Ok(LinePotential::zero()),
            ProfileSpec::Box { depth, center, half_width } => wrap(LinePotential::boxed(*depth, *center, *half_width)),
            ProfileSpec::Gaussian { depth, center, width } => wrap(LinePotential::gaussian(*depth, *center, *width)),
            ProfileSpec::Sum { terms } => {
                let parts = terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t.build(base, &format!("{key}.terms[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                wrap(LinePotential::sum(parts))
            }
            ProfileSpec::Table { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                if !full.is_file() {
                    return Err(config_err(&format!("{key}.path"), format!("file {} does not exist", full.display())));
                }
                wrap(LinePotential::from_csv(&full))
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: Option<f64>,
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub v_plus: Option<ProfileSpec>,
    pub v_minus: Option<ProfileSpec>,
    /// Mirror-symmetric part on both lines.
    pub v0: Option<ProfileSpec>,
    /// Symmetry-breaking profile added on the `+` line.
    pub vp: Option<ProfileSpec>,
    pub epsilon: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    /// Cell width of the line discretization.
    pub h: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection { h: 0.02 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
    /// Half length of the half box used for the odd sector.
    pub l1_odd: f64,
    pub k_max: usize,
    pub l2_transverse: f64,
    pub h_transverse: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { l1: 14.0, l2: 8.0, h: 0.1, l1_odd: 30.0, k_max: 8, l2_transverse: 20.0, h_transverse: 0.01 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalHardySection {
    pub x1_0: f64,
    pub r: f64,
    pub v0: f64,
    /// Bulk perturbation `W(x₁)` whose subcritical coupling is reported.
    pub perturbation: Option<ProfileSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardySection {
    #[serde(default)]
    pub grid: GridSection,
    pub global: Option<GlobalHardySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyDiscSection {
    pub n_max: f64,
}

impl Default for CertifyDiscSection {
    fn default() -> Self {
        CertifyDiscSection { n_max: 1e4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeylSection {
    pub n_from: u32,
    pub n_to: u32,
    pub k: Vec<f64>,
}

impl Default for WeylSection {
    fn default() -> Self {
        WeylSection { n_from: 10, n_to: 100, k: vec![0.0, 0.5, 1.0] }
    }
}

/// Whole configuration file; every section is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub potentials: PotentialSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub lambda_map: GridSection,
    #[serde(default)]
    pub hardy: HardySection,
    #[serde(default)]
    pub certify_disc: CertifyDiscSection,
    #[serde(default)]
    pub weyl: WeylSection,
}

impl RunConfig {
    /// Parses TOML, reporting the key path of the first offending entry.
    pub fn from_toml(text: &str) -> Result<Self, Failure> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            if path == "." || path.is_empty() {
                Failure::Config(msg)
            } else {
                config_err(&path, msg)
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        if !path.is_file() {
            return Err(Failure::Config(format!("config file {} does not exist", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Configuration with command-line overrides and the directory used to
/// resolve relative table paths.
struct Context {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    threads: usize,
    seed: u64,
    alpha: Option<f64>,
    a: Option<f64>,
}

impl Context {
    fn alpha(&self) -> Result<f64, Failure> {
        let v = self.alpha.or(self.cfg.model.alpha).ok_or_else(|| config_err("model.alpha", "missing key"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(config_err("model.alpha", format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn a(&self) -> Result<f64, Failure> {
        let v = self.a.or(self.cfg.model.a).ok_or_else(|| config_err("model.a", "missing key"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(config_err("model.a", format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn profile(&self, spec: &Option<ProfileSpec>, key: &str) -> Result<Option<LinePotential>, Failure> {
        spec.as_ref().map(|s| s.build(&self.base, key)).transpose()
    }

    /// `V₊, V₋` from either explicit lines or the mirror part `v0`.
    fn model(&self) -> Result<ModelConfig, Failure> {
        let p = &self.cfg.potentials;
        let (alpha, a) = (self.alpha()?, self.a()?);
        let explicit = p.v_plus.is_some() || p.v_minus.is_some();
        if explicit && p.v0.is_some() {
            return Err(config_err("potentials", "give either v_plus/v_minus or v0, not both"));
        }
        let (vp, vm) = if explicit {
            (
                self.profile(&p.v_plus, "potentials.v_plus")?.unwrap_or_else(LinePotential::zero),
                self.profile(&p.v_minus, "potentials.v_minus")?.unwrap_or_else(LinePotential::zero),
            )
        } else if let Some(v0) = self.profile(&p.v0, "potentials.v0")? {
            (v0.clone(), v0)
        } else {
            (LinePotential::zero(), LinePotential::zero())
        };
        Ok(ModelConfig::new(alpha, a, vp, vm)?)
    }

    fn h(&self) -> Result<f64, Failure> {
        let h = self.cfg.quadrature.h;
        if !(h.is_finite() && h > 0.0) {
            return Err(config_err("quadrature.h", format!("must be positive, got {h}")));
        }
        Ok(h)
    }

    fn ensure_out(&self) -> Result<(), Failure> {
        fs::create_dir_all(&self.out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", self.out.display())))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf, Failure> {
        self.ensure_out()?;
        let path = self.out.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, Failure> {
        self.ensure_out()?;
        let path = self.out.join(format!("{name}.csv"));
        let io = |e: csv::Error| Failure::Config(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn envelope(command: Command, model: Value, provenance: Value, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "generator": concat!("twoline ", env!("CARGO_PKG_VERSION")),
        "model": model,
        "provenance": provenance,
        "result": result,
    })
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn quad_provenance(q: &QuadratureSpec) -> Value {
    json!({ "cell_width": q.h(), "n_cells": q.n_cells, "x_max": q.x_max })
}

// ---------------------------------------------------------------- commands

fn cmd_transverse(ctx: &Context) -> Result<String, Failure> {
    let (alpha, a) = (ctx.alpha()?, ctx.a()?);
    let s = solve_equal(alpha, a)?;
    let residuals: Vec<f64> = std::iter::once(s.kappa0).chain(s.kappa1).map(|k| secular_residual(alpha, a, k).abs()).collect();
    let result = json!({
        "xi0": s.xi0,
        "xi1": s.xi1,
        "kappa0": s.kappa0,
        "kappa1": s.kappa1,
        "eigenvalue_count": s.eigenvalue_count(),
    });
    let prov = json!({ "root_tolerance": 1e-12, "secular_residuals": residuals });
    let path = ctx.write_json("transverse", &envelope(Command::Transverse, json!({"alpha": alpha, "a": a}), prov, result))?;
    let xi1 = s.xi1.map_or("none (alpha*a <= 1)".to_string(), |x| format!("{x:.10}"));
    Ok(format!("xi0 = {:.10}\nxi1 = {xi1}\nwrote {}", s.xi0, path.display()))
}

fn cmd_fig2(ctx: &Context) -> Result<String, Failure> {
    let a = ctx.a.or(ctx.cfg.model.a).unwrap_or(1.0);
    if !(a.is_finite() && a > 0.0) {
        return Err(config_err("model.a", format!("must be positive, got {a}")));
    }
    let mut rows = Vec::with_capacity(400);
    let mut first_xi1 = None;
    for k in 1..=400 {
        let alpha = k as f64 / 100.0;
        let s = solve_equal(alpha, a)?;
        if s.xi1.is_some() && first_xi1.is_none() {
            first_xi1 = Some(alpha);
        }
        rows.push(vec![num(alpha), num(s.xi0), opt_num(s.xi1)]);
    }
    let path = ctx.write_csv("fig2", &["alpha", "xi0", "xi1"], &rows)?;
    let prov = json!({ "alpha_step": 0.01, "alpha_max": 4.0, "root_tolerance": 1e-12 });
    ctx.write_json("fig2.meta", &envelope(Command::Fig2, json!({"a": a}), prov, json!({"csv": "fig2.csv", "rows": rows.len()})))?;
    let onset = first_xi1.map_or("never".into(), |x| format!("alpha = {x}"));
    Ok(format!("{} rows, xi1 first present at {onset}\nwrote {}", rows.len(), path.display()))
}

fn grid(g: &GridSection, key: &str, default_half: f64, default_n: usize) -> Result<Vec<f64>, Failure> {
    let lo = g.lo.unwrap_or(-default_half);
    let hi = g.hi.unwrap_or(default_half);
    let n = g.n.unwrap_or(default_n);
    if !(lo < hi) || n < 2 {
        return Err(config_err(key, format!("need lo < hi and n >= 2, got lo={lo}, hi={hi}, n={n}")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn default_half_width(cfg: &ModelConfig) -> f64 {
    let r = cfg.support_radius();
    if r.is_finite() && r > 0.0 {
        r + 2.0
    } else {
        10.0
    }
}

fn cmd_lambda_map(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    let nodes = grid(&ctx.cfg.lambda_map, "lambda_map", default_half_width(&cfg), 401)?;
    let lambda = lambda_field(&cfg, &nodes)?;
    let rows: Vec<Vec<String>> = nodes
        .iter()
        .zip(&lambda)
        .map(|(&x, &l)| vec![num(x), num(cfg.v_plus.eval(x)), num(cfg.v_minus.eval(x)), num(l)])
        .collect();
    let path = ctx.write_csv("lambda-map", &["x1", "v_plus", "v_minus", "lambda"], &rows)?;
    let prov = json!({ "nodes": nodes.len(), "lo": nodes[0], "hi": nodes[nodes.len() - 1], "root_tolerance": 1e-12 });
    ctx.write_json(
        "lambda-map.meta",
        &envelope(Command::LambdaMap, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, json!({"csv": "lambda-map.csv"})),
    )?;
    let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let max = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("lambda range [{min:.6e}, {max:.6e}] on {} nodes\nwrote {}", nodes.len(), path.display()))
}

fn cmd_bound_states(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    let quad = QuadratureSpec::for_model(&cfg, ctx.h()?)?;
    let bs = BirmanSchwinger::new(&cfg, quad)?;
    let states = bs.find_all_discrete()?;
    let records: Vec<Value> = states
        .iter()
        .map(|s| json!({ "z": s.z, "multiplicity_estimate": s.multiplicity, "trace_samples": s.trace }))
        .collect();
    let mut prov = quad_provenance(&quad);
    prov["root_tolerance"] = json!(1e-11);
    prov["threshold_margin"] = json!(THRESHOLD_MARGIN);
    let result = json!({ "xi0": bs.xi0(), "states": records });
    let path = ctx.write_json("bound-states", &envelope(Command::BoundStates, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, result))?;
    let mut out = format!("xi0 = {:.10}, {} eigenvalue(s) below it\n", bs.xi0(), states.len());
    for s in &states {
        out.push_str(&format!("  z = {:.10} (multiplicity {})\n", s.z, s.multiplicity));
    }
    out.push_str(&format!("wrote {}", path.display()));
    Ok(out)
}

fn cmd_embedded(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    if !cfg.is_mirror_symmetric() {
        return Err(config_err("potentials", "embedded eigenvalues need V+ = V- (use potentials.v0)"));
    }
    let quad = QuadratureSpec::for_model(&cfg, ctx.h()?)?;
    let bs = BirmanSchwinger::new(&cfg, quad)?;
    let states = bs.find_all_embedded()?;
    let mu0 = bs.kernels.spec.xi1;
    let records: Vec<Value> = states
        .iter()
        .map(|s| {
            let samples: Vec<(f64, f64, f64)> = s.centers.iter().zip(&s.trace_plus).map(|(&x, &f)| (x, f, -f)).collect();
            json!({ "z": s.nu, "multiplicity_estimate": 1, "trace_samples": samples })
        })
        .collect();
    let mut prov = quad_provenance(&quad);
    prov["root_tolerance"] = json!(1e-12);
    prov["threshold_margin"] = json!(THRESHOLD_MARGIN);
    let result = json!({ "xi0": bs.xi0(), "mu0": mu0, "states": records });
    let path = ctx.write_json("embedded", &envelope(Command::Embedded, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, result))?;
    let mut out = format!("window [xi0, mu0) = [{:.10}, {:.10}), {} embedded eigenvalue(s)\n", bs.xi0(), mu0.unwrap_or(f64::NAN), states.len());
    for s in &states {
        out.push_str(&format!("  nu = {:.10}\n", s.nu));
    }
    out.push_str(&format!("wrote {}", path.display()));
    Ok(out)
}

fn cmd_resonance(ctx: &Context) -> Result<String, Failure> {
    let p = &ctx.cfg.potentials;
    let v0 = ctx.profile(&p.v0, "potentials.v0")?.ok_or_else(|| config_err("potentials.v0", "missing key"))?;
    let vp = ctx.profile(&p.vp, "potentials.vp")?.ok_or_else(|| config_err("potentials.vp", "missing key"))?;
    let eps = p.epsilon.clone().unwrap_or_else(|| EPSILON_GRID.to_vec());
    if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(config_err("potentials.epsilon", "must be a nonempty list of positive numbers"));
    }
    let (alpha, a) = (ctx.alpha()?, ctx.a()?);
    let h = ctx.h()?;
    let prob = ResonanceProblem::new(alpha, a, &v0, &vp, h)?;
    let embedded = prob.embedded()?;
    if embedded.is_empty() {
        return Err(Failure::Numerical("the mirror-symmetric model has no embedded eigenvalue to perturb".into()));
    }
    let mut families = Vec::new();
    let mut summary = String::new();
    for state in &embedded {
        let res = prob.residue(state.nu)?;
        let coeffs = prob.perturbative_coefficients(&res);
        let poles = prob.track(&res, &coeffs, &eps, ctx.threads).into_iter().collect::<crate::Result<Vec<ResonancePole>>>()?;
        let exponent = width_exponent(&poles, WIDTH_FLOOR);
        let ratios: Vec<f64> = poles.iter().map(golden_rule_ratio).collect();
        let smallest = poles.iter().zip(&ratios).min_by(|x, y| x.0.epsilon.total_cmp(&y.0.epsilon)).map(|(_, r)| *r);
        summary.push_str(&format!(
            "nu = {:.10}: shift (w, Vp w) = {:.6}, Gamma_i = {:.6}, width exponent = {}, golden-rule ratio at smallest eps = {}\n",
            state.nu,
            coeffs.linear_shift,
            coeffs.gamma_i,
            exponent.map_or("n/a".into(), |x| format!("{x:.4}")),
            smallest.map_or("n/a".into(), |x| format!("{x:.5}")),
        ));
        families.push(json!({
            "nu_k": state.nu,
            "residue_rank_defect": res.rank_defect,
            "poles": poles,
            "width_exponent": exponent,
            "golden_rule_ratios": ratios,
            "golden_rule_ratio": smallest,
        }));
    }
    let mut prov = quad_provenance(&prob.quad);
    prov["width_floor"] = json!(WIDTH_FLOOR);
    prov["newton_tolerance"] = json!(1e-13);
    prov["epsilon"] = json!(eps);
    let model = json!({"alpha": alpha, "a": a, "xi0": prob.xi0(), "mu0": prob.mu0()});
    let path = ctx.write_json("resonance", &envelope(Command::Resonance, model, prov, json!({ "families": families })))?;
    summary.push_str(&format!("wrote {}", path.display()));
    Ok(summary)
}

fn cmd_hardy(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    let nodes = grid(&ctx.cfg.hardy.grid, "hardy.grid", default_half_width(&cfg), 401)?;
    let local = hardy_local(&cfg, &nodes)?;
    let mut summary = String::new();
    if let crate::bounds::HardyCertificate::Local { positive, degenerate, .. } = &local {
        if *degenerate {
            summary.push_str("local weight vanishes on the grid (degenerate certificate)\n");
        } else {
            for iv in positive {
                summary.push_str(&format!("local weight positive on [{:.4}, {:.4}]\n", iv.lo, iv.hi));
            }
        }
    }
    let mut result = json!({ "local": local });
    if let Some(g) = &ctx.cfg.hardy.global {
        let cert = hardy_global(&cfg, g.x1_0, g.r, g.v0)?;
        let c = cert.constant().expect("global certificate");
        summary.push_str(&format!("global constant c = {c:.6e}\n"));
        result["global"] = serde_json::to_value(&cert).expect("certificate serializes");
        if let Some(w) = ctx.profile(&g.perturbation, "hardy.global.perturbation")? {
            let eps0 = subcritical_epsilon(&cert, |x| w.eval(x))?;
            let mut sub = json!({ "epsilon0": if eps0.is_finite() { json!(eps0) } else { json!("infinity") } });
            if eps0.is_finite() {
                let check = certify_no_spectrum_below_bulk(&cfg, |x| w.eval(x), 0.9 * eps0, g.x1_0, 200.0, 0.05)?;
                summary.push_str(&format!(
                    "subcritical coupling eps0 = {eps0:.6e}; at 0.9*eps0 the reduced bottom is {:.3e} ({})\n",
                    check.reduced_bottom,
                    if check.certified { "certified" } else { "not certified" }
                ));
                sub["check"] = serde_json::to_value(check).expect("check serializes");
            } else {
                summary.push_str("perturbation has no negative part: eps0 = infinity\n");
            }
            result["subcritical"] = sub;
        }
    }
    let prov = json!({ "grid_nodes": nodes.len(), "hypothesis_samples": 4001, "bulk_window_half_width": 200.0, "bulk_mesh": 0.05 });
    let path = ctx.write_json("hardy", &envelope(Command::Hardy, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, result))?;
    summary.push_str(&format!("wrote {}", path.display()));
    Ok(summary)
}

fn cmd_certify_disc(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    let n_max = ctx.cfg.certify_disc.n_max;
    if !(n_max.is_finite() && n_max >= 1.0) {
        return Err(config_err("certify_disc.n_max", format!("must be >= 1, got {n_max}")));
    }
    let mut ladder = Vec::new();
    let mut n = 1.0;
    loop {
        ladder.push(json!({ "n": n, "q": disc_certificate(&cfg, n)? }));
        if n >= n_max {
            break;
        }
        n = (2.0 * n).min(n_max);
    }
    let found = disc_certificate_search(&cfg, n_max)?;
    let nonnegative = cfg.v_plus.is_nonnegative() && cfg.v_minus.is_nonnegative();
    let mut result = json!({
        "integral": cfg.v_plus.integral() + cfg.v_minus.integral(),
        "certified": found.is_some(),
        "certificate": found.map(|(n, q)| json!({ "n": n, "q": q })),
        "ladder": ladder,
    });
    let mut summary = match found {
        Some((n, q)) => format!("Q[psi_n] = {q:.6e} < 0 at n = {n}: spectrum below xi0\n"),
        None => format!("no negative Q[psi_n] up to n = {n_max}\n"),
    };
    let mut prov = json!({ "integration_tolerance": 1e-13, "n_max": n_max });
    if nonnegative {
        let quad = QuadratureSpec::for_model(&cfg, ctx.h()?)?;
        let bs = BirmanSchwinger::new(&cfg, quad)?;
        let clear = bs.certify_no_spectrum_below(bs.xi0() - 1.0)?;
        result["no_spectrum_below_threshold"] = json!(clear);
        prov["quadrature"] = quad_provenance(&quad);
        summary.push_str(&format!("nonnegative potentials: no spectrum below xi0 {}\n", if clear { "confirmed" } else { "NOT confirmed" }));
    }
    let path = ctx.write_json("certify-disc", &envelope(Command::CertifyDisc, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, result))?;
    summary.push_str(&format!("wrote {}", path.display()));
    Ok(summary)
}

fn cmd_weyl(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    let w = &ctx.cfg.weyl;
    if w.n_from == 0 || w.n_from > w.n_to || w.k.is_empty() {
        return Err(config_err("weyl", "need 1 <= n_from <= n_to and a nonempty k list"));
    }
    let mut rows = Vec::new();
    let mut first_last = Vec::new();
    for &k in &w.k {
        let mut first = None;
        let mut last = 0.0;
        for n in w.n_from..=w.n_to {
            let r = weyl_residual(&cfg, n as f64, k)?;
            first.get_or_insert(r.bound);
            last = r.bound;
            rows.push(vec![
                n.to_string(),
                num(k),
                num(r.bound),
                num(r.second_derivative),
                num(r.first_derivative),
                num(r.potential_plus),
                num(r.potential_minus),
            ]);
        }
        first_last.push((k, first.unwrap_or(0.0), last));
    }
    let header = ["n", "k", "residual_bound", "second_derivative", "first_derivative", "potential_plus", "potential_minus"];
    let path = ctx.write_csv("weyl", &header, &rows)?;
    let prov = json!({ "n_from": w.n_from, "n_to": w.n_to, "k": w.k, "constant": 1.0 });
    ctx.write_json("weyl.meta", &envelope(Command::Weyl, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, json!({"csv": "weyl.csv"})))?;
    let mut out = String::new();
    for (k, f, l) in first_last {
        out.push_str(&format!("k = {k}: residual bound {f:.4e} at n = {} -> {l:.4e} at n = {}\n", w.n_from, w.n_to));
    }
    out.push_str(&format!("wrote {}", path.display()));
    Ok(out)
}

struct CheckRow {
    name: String,
    reference: f64,
    oracle: f64,
    oracle_error: f64,
    tolerance: f64,
    relative: bool,
}

impl CheckRow {
    fn deviation(&self) -> f64 {
        let d = (self.reference - self.oracle).abs();
        if self.relative {
            d / self.oracle.abs().max(f64::MIN_POSITIVE)
        } else {
            d
        }
    }

    fn pass(&self) -> bool {
        self.deviation() <= self.tolerance
    }

    fn json(&self) -> Value {
        json!({
            "name": self.name,
            "reference": self.reference,
            "oracle": self.oracle,
            "oracle_error": self.oracle_error,
            "deviation": self.deviation(),
            "tolerance": self.tolerance,
            "tolerance_kind": if self.relative { "relative" } else { "absolute" },
            "pass": self.pass(),
        })
    }
}

fn cmd_oracle_check(ctx: &Context) -> Result<String, Failure> {
    let cfg = ctx.model()?;
    let o = &ctx.cfg.oracle;
    let mut rows = Vec::new();
    let mut notes = Vec::new();

    let spec = solve_equal(cfg.alpha, cfg.a)?;
    let fd1 = fd_transverse_extrapolated(cfg.alpha, cfg.alpha, cfg.a, o.l2_transverse, o.h_transverse)?;
    for (j, reference) in std::iter::once(spec.xi0).chain(spec.xi1).enumerate() {
        rows.push(CheckRow {
            name: format!("transverse xi{j}"),
            reference,
            oracle: fd1.value[j],
            oracle_error: fd1.error[j],
            tolerance: 1e-3,
            relative: false,
        });
    }

    let quad = QuadratureSpec::for_model(&cfg, ctx.h()?)?;
    let bs = BirmanSchwinger::new(&cfg, quad)?;
    let discrete = bs.find_all_discrete()?;
    let fd = fd_2d(&cfg, o.l1, o.l2, o.h, o.k_max, ctx.seed)?;
    if discrete.len() != fd.value.len() {
        notes.push(format!("count mismatch: {} Birman-Schwinger eigenvalues, {} finite-difference", discrete.len(), fd.value.len()));
    }
    for (k, (s, (&v, &e))) in discrete.iter().zip(fd.value.iter().zip(&fd.error)).enumerate() {
        rows.push(CheckRow { name: format!("discrete z{k}"), reference: s.z, oracle: v, oracle_error: e, tolerance: 0.02, relative: true });
    }

    if cfg.is_mirror_symmetric() && !cfg.v_plus.is_zero() && spec.xi1.is_some() {
        let embedded = bs.find_all_embedded()?;
        if !embedded.is_empty() {
            let fo = fd_2d_extrapolated(&cfg, o.l1_odd, o.l2, o.h, embedded.len(), true, ctx.seed)?;
            for (k, (s, (&v, &e))) in embedded.iter().zip(fo.value.iter().zip(&fo.error)).enumerate() {
                rows.push(CheckRow { name: format!("embedded nu{k}"), reference: s.nu, oracle: v, oracle_error: e, tolerance: 0.02, relative: true });
            }
        }
    }

    let all_pass = notes.is_empty() && rows.iter().all(CheckRow::pass);
    let prov = json!({
        "quadrature": quad_provenance(&quad),
        "box": { "l1": o.l1, "l2": o.l2, "l1_odd": o.l1_odd, "h": o.h, "extrapolation": "richardson, second order" },
        "transverse_box": { "l2": o.l2_transverse, "h": o.h_transverse },
        "seed": ctx.seed,
    });
    let result = json!({ "pass": all_pass, "checks": rows.iter().map(CheckRow::json).collect::<Vec<_>>(), "notes": notes });
    let path = ctx.write_json("oracle-check", &envelope(Command::OracleCheck, json!({"alpha": cfg.alpha, "a": cfg.a}), prov, result))?;
    let mut out = String::new();
    for r in &rows {
        out.push_str(&format!(
            "{} {:<14} reference {:.8}  oracle {:.8} +- {:.1e}\n",
            if r.pass() { "PASS" } else { "FAIL" },
            r.name,
            r.reference,
            r.oracle,
            r.oracle_error
        ));
    }
    for n in &notes {
        out.push_str(&format!("FAIL {n}\n"));
    }
    out.push_str(&format!("wrote {}", path.display()));
    if all_pass {
        Ok(out)
    } else {
        Err(Failure::Numerical(format!("oracle disagreement\n{out}")))
    }
}

// ---------------------------------------------------------------- entry

/// Runs one command with parsed arguments; returns the summary text.
pub fn execute(cli: &Cli) -> Result<String, Failure> {
    let (cfg, base) = match &cli.config {
        Some(p) => (RunConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let ctx = Context { cfg, base, out: cli.out.clone(), threads, seed: cli.seed, alpha: cli.alpha, a: cli.a };
    match cli.command {
        Command::Transverse => cmd_transverse(&ctx),
        Command::Fig2 => cmd_fig2(&ctx),
        Command::LambdaMap => cmd_lambda_map(&ctx),
        Command::BoundStates => cmd_bound_states(&ctx),
        Command::Embedded => cmd_embedded(&ctx),
        Command::Resonance => cmd_resonance(&ctx),
        Command::Hardy => cmd_hardy(&ctx),
        Command::CertifyDisc => cmd_certify_disc(&ctx),
        Command::Weyl => cmd_weyl(&ctx),
        Command::OracleCheck => cmd_oracle_check(&ctx),
    }
}

/// Parses `args`, runs the command, prints the summary or diagnostic and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("twoline {}: {f}", cli.command.name());
            f.exit_code()
        }
    }
}
