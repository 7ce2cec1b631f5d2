//! Reference values pinned by independent computations, and the qualitative
//! statements they rest on.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoline::birman_schwinger::{BirmanSchwinger, QuadratureSpec};
use twoline::bounds::{disc_certificate, hardy_local, weyl_residual, FormEvaluator, HardyCertificate, TransverseFactor};
use twoline::kernels::{channel_kernel, free_multiplier, gamma0_matrix, LineKernels, SheetedEnergy};
use twoline::oracle::{fd_2d, fd_transverse, fd_transverse_extrapolated};
use twoline::potentials::{LinePotential, ModelConfig};
use twoline::quad::adaptive;
use twoline::resonance::ResonanceProblem;
use twoline::special::bessel_k0;
use twoline::transverse::{dirichlet_halfline, lambda_field, lambda_tilde, solve_equal, solve_general};

fn boxed(d: f64, c: f64, w: f64) -> LinePotential {
    LinePotential::boxed(d, c, w).unwrap()
}

fn bs_for(cfg: &ModelConfig, h: f64) -> BirmanSchwinger {
    BirmanSchwinger::new(cfg, QuadratureSpec::for_model(cfg, h).unwrap()).unwrap()
}

// ------------------------------------------------------------ transverse

#[test]
fn reference_transverse_values_match_the_finite_difference_oracle() {
    let s = solve_equal(2.0, 1.0).unwrap();
    let fd = fd_transverse_extrapolated(2.0, 2.0, 1.0, 20.0, 0.01).unwrap();
    // oracle values frozen from the extrapolated run
    assert!((fd.value[0] + 1.2295650722).abs() < 1e-9);
    assert!((fd.value[1] + 0.6349095703).abs() < 1e-9);
    assert!((s.xi0 - fd.value[0]).abs() < 1e-6 && (s.xi1.unwrap() - fd.value[1]).abs() < 1e-6);
    assert!((s.kappa0 - 1.1089).abs() < 1e-4 && (s.kappa1.unwrap() - 0.7968).abs() < 1e-4);
    assert!((s.xi0 + 1.2297).abs() < 1e-3 && (s.xi1.unwrap() + 0.6349).abs() < 1e-4);
}

#[test]
fn boundary_coupling_has_one_state() {
    let s = solve_equal(1.0, 1.0).unwrap();
    assert_eq!(s.eigenvalue_count(), 1);
    assert!((s.kappa0 - 0.639).abs() < 1e-3 && (s.xi0 + 0.409).abs() < 1e-3);
    let fd = fd_transverse_extrapolated(1.0, 1.0, 1.0, 20.0, 0.01).unwrap();
    assert!((s.xi0 - fd.value[0]).abs() < 1e-5);
    assert_eq!(solve_equal(0.5, 1.0).unwrap().index_set(), vec![0]);
}

#[test]
fn unequal_strengths_are_pinned_by_the_oracle() {
    let states = solve_general(2.0, 1.0, 1.0).unwrap();
    assert_eq!(states.len(), 2);
    let fd = fd_transverse_extrapolated(2.0, 1.0, 1.0, 40.0, 0.01).unwrap();
    for (st, o) in states.iter().zip(&fd.value) {
        assert!((st.energy() - o).abs() < 1e-5, "{} vs {o}", st.energy());
    }
    assert!((states[0].energy() + 1.0334538079).abs() < 1e-9);
    assert!((states[1].energy() + 0.0692639158).abs() < 1e-9);
}

#[test]
fn half_plane_threshold() {
    let s = solve_equal(2.0, 1.0).unwrap();
    assert_eq!(dirichlet_halfline(2.0, 1.0).unwrap().mu0, s.xi1.unwrap());
    let h = dirichlet_halfline(1.0, 1.0).unwrap();
    assert_eq!((h.mu0, h.eigenvalue), (0.0, None));
    let x1 = dirichlet_halfline(1.0001, 1.0).unwrap().eigenvalue.unwrap();
    assert!(x1 < 0.0 && x1 > -1e-6);
}

#[test]
fn local_weight_examples() {
    let cfg = ModelConfig::unperturbed(2.0, 1.0).unwrap();
    let xi0 = solve_equal(2.0, 1.0).unwrap().xi0;
    assert!(lambda_tilde(0.0, 0.0, &cfg).unwrap().abs() < 1e-10);
    assert!((lambda_tilde(2.0, 2.0, &cfg).unwrap() + xi0).abs() < 1e-12);
    for v in [1e-3, 0.1, 1.0, 5.0] {
        assert!(lambda_tilde(v, 0.0, &cfg).unwrap() > 0.0);
    }
    let cfg = ModelConfig::new(2.0, 1.0, boxed(0.5, 0.0, 1.0), LinePotential::gaussian(0.2, 3.0, 0.4).unwrap()).unwrap();
    let nodes: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
    let lam = lambda_field(&cfg, &nodes).unwrap();
    assert!(lam.iter().all(|&l| l >= -1e-12) && lam.iter().any(|&l| l > 0.1));
    for (&x, &l) in nodes.iter().zip(&lam) {
        let direct = lambda_tilde(cfg.v_plus.eval(x), cfg.v_minus.eval(x), &cfg).unwrap();
        if cfg.v_plus.eval(x) == 0.0 && cfg.v_minus.eval(x) == 0.0 {
            assert_eq!(l, 0.0);
        }
        assert!((l - direct).abs() < 1e-14);
    }
}

// ------------------------------------------------------------ kernels

/// `(1/2π)∫ e^{ips} m(p) dp` for an even multiplier decaying like `1/p`,
/// by partial integrals up to the zeros of `cos(ps)` and repeated averaging.
fn oscillatory_transform(m: impl Fn(f64) -> f64, s: f64) -> f64 {
    let period = std::f64::consts::PI / s;
    let f = |p: f64| m(p) * (p * s).cos();
    let mut acc = adaptive(f, 0.0, 0.5 * period, 1e-15, 1e-14).value;
    let mut partial = Vec::new();
    for k in 0..60 {
        let lo = (k as f64 + 0.5) * period;
        acc += adaptive(f, lo, lo + period, 1e-15, 1e-14).value;
        if k >= 40 {
            partial.push(acc);
        }
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    partial[0] / std::f64::consts::PI
}

#[test]
fn free_multiplier_transforms_to_macdonald_function() {
    let z = Complex64::new(-1.0, 0.0);
    let lhs = oscillatory_transform(|p| free_multiplier(p, z, 0.0).unwrap().re, 1.0);
    let k0 = bessel_k0(Complex64::new(1.0, 0.0));
    // tabulated K₀(1)
    assert!((k0.re - 0.421_024_438_240_708_3).abs() < 1e-14);
    assert!((lhs - k0.re / (2.0 * std::f64::consts::PI)).abs() < 1e-8, "{lhs}");
}

#[test]
fn interaction_matrix_is_regular_on_the_real_axis_below_threshold() {
    let xi0 = solve_equal(2.0, 1.0).unwrap().xi0;
    for z in [xi0 - 0.01, xi0 - 0.5, xi0 - 3.0] {
        let z = Complex64::new(z, 0.0);
        let dets: Vec<f64> = (0..2000)
            .map(|k| {
                let m = gamma0_matrix(0.005 * k as f64, z, 2.0, 1.0).unwrap();
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re
            })
            .collect();
        assert!(dets.iter().all(|&d| d > 0.0) || dets.iter().all(|&d| d < 0.0));
    }
    let z = Complex64::new(-0.3, 0.0);
    let p = (z.re - xi0).sqrt();
    let m = gamma0_matrix(p, z, 2.0, 1.0).unwrap();
    assert!((m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm() < 1e-12);
}

#[test]
fn kernel_below_spectrum_is_real_positive_and_decaying() {
    let kern = LineKernels::new(2.0, 1.0).unwrap();
    let e = SheetedEnergy::real(kern.spec.xi0 - 1.0);
    let mut prev = [f64::INFINITY; 2];
    for s in [0.2, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let k = kern.line_kernel(&e, s).unwrap();
        for (slot, v) in prev.iter_mut().zip([k[0][0], k[0][1]]) {
            assert!(v.im.abs() < 1e-13 && v.re > 0.0 && v.re < *slot);
            *slot = v.re;
        }
        assert_eq!(k[0][1], k[1][0]);
    }
}

#[test]
fn second_sheet_channel_grows_in_the_lower_half_plane() {
    let kern = LineKernels::new(2.0, 1.0).unwrap();
    let lam = 0.5 * (kern.spec.xi0 + kern.spec.xi1.unwrap());
    let e = SheetedEnergy::second(Complex64::new(lam, -0.05));
    let tau = e.tau(0, &kern.spec).unwrap();
    assert!(tau.im < 0.0);
    let c = |s: f64| channel_kernel(0, &e, s, &kern.spec).unwrap()[0][0].norm();
    let rate = (c(6.0) / c(2.0)).ln() / 4.0;
    assert!((rate + tau.im).abs() < 1e-12);
}

// ------------------------------------------------------------ Birman–Schwinger

#[test]
fn hilbert_schmidt_norm_decays_far_below_threshold() {
    let cfg = ModelConfig::mirror(2.0, 1.0, boxed(-0.3, 0.0, 2.0)).unwrap();
    let bs = bs_for(&cfg, 0.05);
    let norms: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|d| bs.assemble_b(&SheetedEnergy::real(bs.xi0() - d)).unwrap().hs_norm).collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn discrete_eigenvalue_converges_and_matches_oracle_within_its_error_bar() {
    let cfg = ModelConfig::mirror(2.0, 1.0, boxed(-0.3, 0.0, 2.0)).unwrap();
    let coarse = QuadratureSpec::for_model(&cfg, 0.04).unwrap();
    let z0 = BirmanSchwinger::new(&cfg, coarse).unwrap().find_all_discrete().unwrap()[0].z;
    let z1 = BirmanSchwinger::new(&cfg, coarse.refined(2, 1.5)).unwrap().find_all_discrete().unwrap()[0].z;
    assert!((z0 - z1).abs() < 1e-4, "{z0} vs {z1}");
    let fd = fd_2d(&cfg, 14.0, 8.0, 0.1, 4, 7).unwrap();
    assert_eq!(fd.value.len(), 1);
    assert!((z1 - fd.value[0]).abs() <= fd.error[0], "{z1} vs {} +- {}", fd.value[0], fd.error[0]);
}

#[test]
fn eigenvalues_deepen_with_coupling() {
    let mut prev = f64::INFINITY;
    for g in [0.5, 1.0, 1.5, 2.0] {
        let cfg = ModelConfig::mirror(2.0, 1.0, boxed(-0.3 * g, 0.0, 2.0)).unwrap();
        let z = bs_for(&cfg, 0.05).find_all_discrete().unwrap()[0].z;
        assert!(z <= prev);
        prev = z;
    }
}

#[test]
fn sign_of_the_potential_decides_spectrum_below_threshold() {
    let repulsive = ModelConfig::new(2.0, 1.0, boxed(0.4, 0.0, 1.0), boxed(0.1, 1.0, 1.0)).unwrap();
    let bs = bs_for(&repulsive, 0.05);
    assert!(bs.find_all_discrete().unwrap().is_empty());
    assert!(bs.certify_no_spectrum_below(bs.xi0() - 1.0).unwrap());
    let attractive = ModelConfig::new(2.0, 1.0, boxed(-0.4, 0.0, 1.0), boxed(0.1, 1.0, 1.0)).unwrap();
    let bs = bs_for(&attractive, 0.05);
    assert!(!bs.certify_no_spectrum_below(bs.xi0() - 1.0).unwrap());
}

#[test]
fn embedded_eigenvalue_leaves_the_window_at_weak_coupling() {
    let spec = solve_equal(2.0, 1.0).unwrap();
    let mu0 = spec.xi1.unwrap();
    let mut prev = f64::NEG_INFINITY;
    for g in [0.2, 0.1, 0.05] {
        let cfg = ModelConfig::mirror(2.0, 1.0, boxed(-g, 0.0, 1.0)).unwrap();
        let found = bs_for(&cfg, 0.02).find_all_embedded().unwrap();
        assert_eq!(found.len(), 1);
        let nu = found[0].nu;
        assert!(nu > prev && nu >= spec.xi0 && nu < mu0);
        prev = nu;
    }
    assert!(mu0 - prev < 0.01);
}

// ------------------------------------------------------------ resonances

#[test]
fn residue_is_rank_one_and_widths_quadruple() {
    let prob = ResonanceProblem::new(2.0, 1.0, &boxed(-0.2, 0.0, 1.0), &boxed(1.0, 0.0, 1.0), 0.04).unwrap();
    let nu = prob.embedded().unwrap()[0].nu;
    let res = prob.residue(nu).unwrap();
    assert!(res.rank_defect < 1e-8);
    let c = prob.perturbative_coefficients(&res);
    let eps = [1e-3, 2e-3, 5e-3, 1e-2];
    let poles: Vec<_> = prob.track(&res, &c, &eps, 2).into_iter().map(Result::unwrap).collect();
    assert!(poles.iter().all(|p| p.z_im <= 0.0));
    let ratio = poles[1].width / poles[0].width;
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    // continuity: the poles follow ν + εs + ε²Γ without jumps
    for p in &poles {
        let predicted = Complex64::new(nu + p.epsilon * c.linear_shift + p.epsilon.powi(2) * c.gamma_r, p.epsilon.powi(2) * c.gamma_i);
        let g = Complex64::new(c.gamma_r, c.gamma_i).norm();
        assert!((p.z() - predicted).norm() < 0.2 * p.epsilon.powi(2) * g, "eps {}", p.epsilon);
    }
}

// ------------------------------------------------------------ bounds

fn trapezoid(nodes: &[f64], n: f64) -> Vec<f64> {
    nodes
        .iter()
        .map(|&x| {
            let t = x.abs();
            if t <= n {
                1.0
            } else {
                ((2.0 * n - t) / n).max(0.0)
            }
        })
        .collect()
}

#[test]
fn closed_form_certificate_matches_direct_form_evaluation() {
    let profiles = [
        (boxed(-0.3, 0.0, 2.0), boxed(-0.3, 0.0, 2.0)),
        (LinePotential::gaussian(-0.5, 0.5, 0.8).unwrap(), boxed(0.2, -1.0, 0.5)),
    ];
    for (vp, vm) in profiles {
        let cfg = ModelConfig::new(2.0, 1.0, vp, vm).unwrap();
        for n in [2.0, 3.0] {
            let eval = FormEvaluator::new(&cfg, -2.0 * n, 2.0 * n, 161).unwrap();
            let f = trapezoid(&eval.nodes(), n);
            let direct = eval.form_gap(&f, TransverseFactor::Channel(0)).unwrap() / eval.spec.phi0.norm_sq();
            let closed = disc_certificate(&cfg, n).unwrap();
            assert!((direct - closed).abs() < 1e-6, "n = {n}: {direct} vs {closed}");
        }
    }
}

#[test]
fn lower_bound_inequality_holds_and_the_checker_catches_a_false_one() {
    let free = ModelConfig::unperturbed(2.0, 1.0).unwrap();
    let eval = FormEvaluator::new(&free, -6.0, 6.0, 121).unwrap();
    let f = trapezoid(&eval.nodes(), 3.0);
    assert!(eval.lower_bound_gap(&f, TransverseFactor::Channel(0)).unwrap().abs() < 1e-10);

    let cfg = ModelConfig::new(2.0, 1.0, boxed(0.5, 0.0, 1.0), LinePotential::gaussian(0.3, 2.0, 0.7).unwrap()).unwrap();
    let eval = FormEvaluator::new(&cfg, -6.0, 6.0, 121).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let f: Vec<f64> = (0..121).map(|i| if i == 0 || i == 120 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let phi = match rng.gen_range(0..3) {
            0 => TransverseFactor::Channel(0),
            1 => TransverseFactor::Channel(1),
            _ => TransverseFactor::Gaussian { center: rng.gen_range(-2.0..2.0), width: rng.gen_range(0.3..2.0) },
        };
        assert!(eval.lower_bound_gap(&f, phi).unwrap() >= -1e-8);
    }
    let f = trapezoid(&eval.nodes(), 2.5);
    assert!(eval.lower_bound_gap_with_offset(&f, TransverseFactor::Channel(0), 0.1).unwrap() < 0.0);
}

#[test]
fn local_certificate_support_matches_the_potential() {
    let cfg = ModelConfig::new(2.0, 1.0, boxed(0.5, 0.0, 1.0), LinePotential::zero()).unwrap();
    let grid: Vec<f64> = (0..=80).map(|i| -2.0 + 0.05 * i as f64).collect();
    match hardy_local(&cfg, &grid).unwrap() {
        HardyCertificate::Local { lambda, positive, degenerate, .. } => {
            assert!(!degenerate && positive.len() == 1);
            for (&x, &l) in grid.iter().zip(&lambda) {
                assert_eq!(l > 0.0, x.abs() <= 1.0, "x = {x}");
            }
        }
        HardyCertificate::Global { .. } => unreachable!(),
    }
    let zero = ModelConfig::unperturbed(2.0, 1.0).unwrap();
    assert!(matches!(hardy_local(&zero, &grid).unwrap(), HardyCertificate::Local { degenerate: true, .. }));
}

#[test]
fn classical_hardy_inequality_on_samples() {
    for (p, q) in [(1.0, 1.0), (1.5, 0.5), (2.0, 3.0), (0.75, 2.0)] {
        let f = |x: f64| x.powf(p) * (-q * x).exp();
        let df = |x: f64| (p * x.powf(p - 1.0) - q * x.powf(p)) * (-q * x).exp();
        let lhs = adaptive(|x: f64| df(x).powi(2), 0.0, 80.0 / q, 1e-14, 1e-12).value;
        let rhs = 0.25 * adaptive(|x: f64| (f(x) / x).powi(2), 0.0, 80.0 / q, 1e-14, 1e-12).value;
        assert!(lhs >= rhs, "p = {p}, q = {q}: {lhs} < {rhs}");
    }
}

#[test]
fn weyl_potential_terms_vanish_or_obey_the_tail_bound() {
    let compact = ModelConfig::mirror(2.0, 1.0, boxed(-0.5, 0.0, 3.0)).unwrap();
    let r = weyl_residual(&compact, 5.0, 0.5).unwrap();
    assert_eq!((r.potential_plus, r.potential_minus), (0.0, 0.0));
    let (depth, width) = (-0.8, 1.5);
    let g = ModelConfig::new(2.0, 1.0, LinePotential::gaussian(depth, 0.0, width).unwrap(), LinePotential::zero()).unwrap();
    for n in [2.0, 3.0, 4.0] {
        let r = weyl_residual(&g, n, 0.0).unwrap();
        let tail = depth.abs() * (-(n * n - n) * (n * n - n) / (2.0 * width * width)).exp();
        assert!(r.potential_plus <= tail * (1.0 + 1e-9) && r.potential_plus > 0.0, "n = {n}");
    }
}

// ------------------------------------------------------------ oracle

#[test]
fn unperturbed_box_has_nothing_below_threshold() {
    let cfg = ModelConfig::unperturbed(2.0, 1.0).unwrap();
    assert!(fd_2d(&cfg, 6.0, 6.0, 0.2, 4, 7).unwrap().value.is_empty());
}

#[test]
fn transverse_box_size_convergence() {
    let s = solve_equal(2.0, 1.0).unwrap();
    let small = fd_transverse(2.0, 1.0, 5.0, 0.01).unwrap()[0];
    let large = fd_transverse(2.0, 1.0, 10.0, 0.01).unwrap()[0];
    assert!((small - large).abs() < (-s.kappa0 * 5.0).exp());
}
