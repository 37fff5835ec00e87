mod common;

use common::*;
use nls_core::grid::{Grid, VecField, C64, I};
use nls_core::linop::{self, apply_h, discrete_spectrum, shooting_mu, ModeBasis};
use nls_core::soliton::{self, SolitonParams};
use nls_core::Error;

fn grid() -> Grid {
    Grid::spatial(30.0, 2048).unwrap()
}

#[test]
fn sigma3_phi_is_in_the_kernel() {
    // a box wide enough that phi_{1/2} has no periodic kink at the edge
    let g = Grid::spatial(60.0, 4096).unwrap();
    for &omega in &[0.5, 1.0, 2.0] {
        let pr = SolitonParams::new(omega, 0.0, P).unwrap();
        let f = soliton::phi(&pr, &g).unwrap().sigma3();
        let hf = apply_h(omega, P, &f).unwrap();
        assert!(hf.max_abs() < 1e-8, "omega={omega}: {}", hf.max_abs());
    }
}

#[test]
fn generalized_kernel_chain() {
    let g = grid();
    let pr = SolitonParams::new(1.0, 0.0, P).unwrap();
    let dphi = soliton::d_phi_domega(&pr, &g).unwrap();
    let s3phi = soliton::phi(&pr, &g).unwrap().sigma3();
    let h = apply_h(1.0, P, &dphi).unwrap();
    let d = &h + &s3phi;
    assert!(d.max_abs() < 1e-6, "{}", d.max_abs());
}

#[test]
fn far_field_is_free_operator() {
    let g = grid();
    let u: Vec<C64> = g.x().iter().map(|&x| C64::new((-(x.abs() - 22.0).powi(2)).exp(), 0.0)).collect();
    let f = VecField::new(&g, u.clone(), u.iter().map(|v| v * 0.5).collect()).unwrap();
    let hf = apply_h(1.0, P, &f).unwrap();
    let fa = g.derivative(f.a(), 2);
    let fb = g.derivative(f.b(), 2);
    for j in 0..g.len() {
        let want_a = -fa[j] + f.a()[j];
        let want_b = fb[j] - f.b()[j];
        assert!((hf.a()[j] - want_a).norm() < 1e-12);
        assert!((hf.b()[j] - want_b).norm() < 1e-12);
    }
}

#[test]
fn unstable_mode_invariants() {
    let g = grid();
    for &p in &[6.0, 7.0] {
        for &omega in &[0.5, 1.0, 2.0] {
            let sd = discrete_spectrum(omega, p, &g).unwrap();
            assert!(sd.xi_residual().unwrap() < 1e-8, "p={p} omega={omega}");
            assert!(sd.xi.sigma1_conj_defect() < 1e-8);
            let l = sd.lambda1_pairing();
            assert!(l.im.abs() < 1e-8 && (l.re - sd.lambda1).abs() < 1e-8 && sd.lambda1 != 0.0);
            assert!((sd.d1 + 1.0 / sd.lambda1).abs() < 1e-15);
            let fit = sd.decay_fit();
            assert!(fit.a > 0.0 && fit.r_squared > 0.99);
            assert!(sd.xi.even_defect() < 1e-12);
        }
    }
}

#[test]
fn dense_and_shooting_mu_agree() {
    let sd = discrete_spectrum(1.0, P, &grid()).unwrap();
    let shot = shooting_mu(1.0, P, 0.1, 10.0).unwrap();
    assert!((sd.mu - shot).abs() < 1e-6 * shot, "{} vs {shot}", sd.mu);
}

#[test]
fn direct_solves_follow_linear_scaling() {
    let g = spectral_grid();
    let mu1 = ModeBasis::compute(1.0, P, &g).unwrap().mu();
    let mu2 = ModeBasis::compute(2.0, P, &g).unwrap().mu();
    assert!((mu2 / mu1 - 2.0).abs() < 1e-6);
}

#[test]
fn only_the_expected_discrete_modes() {
    // compute() classifies every eigenvalue below the gap and errors on strays
    let b = ModeBasis::compute(1.0, P, &spectral_grid()).unwrap();
    assert!(b.null_eigenvalue().abs() < 1e-6);
    assert!(b.continuum_edge() >= 1.0 - 1e-9);
}

#[test]
fn coarse_grid_fails_loudly() {
    let g = Grid::spatial(30.0, 64).unwrap();
    let r = ModeBasis::compute(1.0, P, &g);
    assert!(r.is_err());
}

#[test]
fn discrete_projections() {
    let g = spectral_grid();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    let f = random_field(&g, 3);
    let pd = sd.project_d(&f).unwrap();
    let pc = sd.project_c(&f).unwrap();
    assert!(rel(&(&pd + &pc), &f) < 1e-14);
    assert!(rel(&sd.project_d(&pd).unwrap(), &pd) < 1e-10);
    assert!(sd.project_c(&pd).unwrap().norm_l2() < 1e-10 * f.norm_l2());
    assert!(sd.project_c(&sd.xi).unwrap().norm_l2() < 1e-10);
    for v in sd.projector.basis() {
        assert!(pc.pair(&v.sigma3()).norm() < 1e-10 * f.norm_l2());
    }
}

#[test]
fn degenerate_gram_is_rejected() {
    let g = spectral_grid();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    let b = sd.projector.basis().to_vec();
    let r = linop::DiscreteProjector::new(vec![b[0].clone(), b[0].clone(), b[2].clone(), b[3].clone()]);
    assert!(matches!(r, Err(Error::DegenerateSpectrum(_))));
}

#[test]
fn continuum_projection_matches_discrete_complement() {
    let g = spectral_grid();
    let cs = continuum();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    for seed in 0..3 {
        let f = random_field(&g, seed);
        let a = cs.project_c(&f).unwrap();
        let b = sd.project_c(&f).unwrap();
        assert!(rel(&a, &b) < 1e-8);
    }
}

#[test]
fn plus_minus_split() {
    let g = spectral_grid();
    let cs = continuum();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    for seed in 0..10 {
        let f = sd.project_c(&random_field(&g, 100 + seed)).unwrap();
        let (fp, fm) = cs.project_pm(&f).unwrap();
        assert!(rel(&(&fp + &fm), &f) < 1e-8);
        // sigma_1 conj exchanges the two halves
        let (gp, _) = cs.project_pm(&f.sigma1_conj()).unwrap();
        assert!(rel(&gp, &fm.sigma1_conj()) < 1e-10);
    }
}

/// Relative size of `[P+ - P-, H] f`.
fn commutator(cs: &nls_core::linop::ContinuousSpectrum, f: &VecField) -> f64 {
    let (fp, fm) = cs.project_pm(f).unwrap();
    let hf = apply_h(cs.omega(), P, f).unwrap();
    let lhs = apply_h(cs.omega(), P, &(&fp - &fm)).unwrap();
    let (hp, hm) = cs.project_pm(&hf).unwrap();
    rel(&lhs, &(&hp - &hm))
}

// The continuum modes come from the squared problem, whose rounding floor
// grows like eps * k_max^4; on dx ~ 0.09 it sits well below 1e-8.
#[test]
fn sign_operator_commutes_with_h() {
    let g = Grid::spatial(24.0, 512).unwrap();
    let cs = nls_core::linop::ContinuousSpectrum::compute(1.0, P, &g).unwrap();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    for seed in 0..10 {
        let f = sd.project_c(&random_field(&g, 100 + seed)).unwrap();
        let c = commutator(&cs, &f);
        assert!(c < 1e-8, "seed {seed}: {c:.3e}");
    }
}

#[test]
fn sign_operator_commutator_floor_on_default_spectral_grid() {
    let g = spectral_grid();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    for seed in 0..10 {
        let f = sd.project_c(&random_field(&g, 100 + seed)).unwrap();
        let c = commutator(continuum(), &f);
        assert!(c < 3e-8, "seed {seed}: {c:.3e}");
    }
}

#[test]
fn semigroup_properties() {
    let g = spectral_grid();
    let cs = continuum();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    let f = sd.project_c(&random_field(&g, 7)).unwrap();
    let id = cs.semigroup(0.0, &f).unwrap();
    assert!(rel(&id, &f) < 1e-8);
    let composed = cs.semigroup(0.3, &cs.semigroup(0.7, &f).unwrap()).unwrap();
    let direct = cs.semigroup(1.0, &f).unwrap();
    assert!(rel(&composed, &direct) < 1e-8);
    let q0 = f.inner(&f.sigma3());
    let mut sup: f64 = 0.0;
    for k in 0..=50 {
        let e = cs.semigroup(k as f64, &f).unwrap();
        sup = sup.max(g.mass(e.a()).sqrt());
        assert!(sd.project_d(&e).unwrap().norm_l2() < 1e-8 * f.norm_l2());
        assert!((e.inner(&e.sigma3()) - q0).norm() < 1e-8 * f.norm_l2().powi(2));
    }
    assert!(sup < 5.0 * g.mass(f.a()).sqrt());
    assert!(cs.semigroup(f64::NAN, &f).is_err());
}

#[test]
fn semigroup_generator_is_h() {
    let g = spectral_grid();
    let cs = continuum();
    let sd = discrete_spectrum(1.0, P, &g).unwrap();
    let f = sd.project_c(&random_field(&g, 9)).unwrap();
    let h = 1e-4;
    let fwd = cs.semigroup(h, &f).unwrap();
    let bwd = cs.semigroup(-h, &f).unwrap();
    let dt = (&fwd - &bwd).scaled(I / (2.0 * h));
    let hf = apply_h(1.0, P, &f).unwrap();
    assert!(rel(&dt, &hf) < 1e-4);
}
