mod common;

use std::sync::OnceLock;

use common::*;
use nls_core::evolve::{evolve_and_track, EvolveOptions, Scheme, Status};
use nls_core::grid::{VecField, C64};
use nls_core::manifold::{
    graph_value, picard_solve, shoot, tilde_f_c, GraphMethod, PicardOptions, PicardResult, SeedData, ShootOptions,
};
use nls_core::modulation::Frame;
use nls_core::Error;

const EPS: f64 = 0.02;

fn frame() -> &'static Frame {
    static F: OnceLock<Frame> = OnceLock::new();
    F.get_or_init(|| Frame::new(P, 1.0, &spectral_grid()).unwrap())
}

fn bump_seed(eps: f64, z_minus: f64) -> SeedData {
    let mut s = SeedData::zero(frame(), 0.3, eps);
    s.h0 = SeedData::bump(frame(), 0.5 * eps, 1.5, 1.0, 0.4).unwrap();
    s.z_minus0 = z_minus;
    s
}

fn solve(seed: &SeedData, horizon: f64) -> PicardResult {
    picard_solve(frame(), continuum(), seed, horizon, &PicardOptions::default()).unwrap()
}

fn bump_solution() -> &'static PicardResult {
    static R: OnceLock<PicardResult> = OnceLock::new();
    R.get_or_init(|| solve(&bump_seed(EPS, 0.1 * EPS), 8.0))
}

fn fine_shoot_options() -> ShootOptions {
    let mut so = ShootOptions::default();
    so.evolve.scheme = Scheme::Yoshida4;
    so.evolve.dt = 1e-3;
    so
}

#[test]
fn seed_validation() {
    let f = frame();
    assert!(bump_seed(EPS, 0.0).validate(f, 1.0).is_ok());
    let big = bump_seed(EPS, 0.3 * EPS);
    assert!(matches!(big.validate(f, 1.0), Err(Error::Precondition(_))));
    let mut rough = bump_seed(EPS, 0.0);
    rough.h0 = SeedData::bump(f, 2.0 * EPS, 1.5, 1.0, 0.0).unwrap();
    assert!(matches!(rough.validate(f, 1.0), Err(Error::Precondition(_))));
    let mut discrete = bump_seed(EPS, 0.0);
    let (xi, _) = f.xi(1.0);
    discrete.h0 = xi.scaled(C64::new(1e-3, 0.0));
    assert!(discrete.validate(f, 1.0).is_err());
    let mut zero_eps = bump_seed(EPS, 0.0);
    zero_eps.eps = 0.0;
    assert!(zero_eps.validate(f, 1.0).is_err());
}

#[test]
fn zero_seed_is_the_ground_state() {
    let seed = SeedData::zero(frame(), 0.7, EPS);
    let r = solve(&seed, 8.0);
    let s = &r.system;
    assert!(r.report.converged);
    for j in 0..s.len() {
        assert_eq!(s.z_plus[j], 0.0);
        assert_eq!(s.z_minus[j], 0.0);
        assert_eq!(s.omega[j], 1.0);
        assert!((s.gamma[j] - 0.7).abs() < 1e-15);
        assert_eq!(s.f_c(j).max_abs(), 0.0);
    }
}

#[test]
fn picard_contracts_and_keeps_symmetry() {
    let r = bump_solution();
    let rep = &r.report;
    assert!(rep.converged, "{:?}", rep.outer_residuals);
    assert!(rep.contraction < 0.5, "{}", rep.contraction);
    assert!(rep.symmetry_defect < 1e-10);
    let s = &r.system;
    let proj = frame().projector0();
    for j in (0..s.len()).step_by(40) {
        let fc = s.f_c(j);
        assert!(proj.project_d(fc).unwrap().max_abs() < 1e-9 * fc.max_abs());
    }
    // on-manifold sizes
    let sup_w = s.omega.iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max);
    let sup_zp = s.z_plus.iter().map(|z| z.abs()).fold(0.0, f64::max);
    assert!(sup_w < EPS && sup_zp < EPS * EPS);
    assert!(s.z_minus.last().unwrap().abs() < 0.1 * s.z_minus[0].abs());
}

/// The reconstructed initial datum follows the fixed point under the full flow
/// until the unstable mode amplifies the discretization error.
#[test]
fn fixed_point_matches_the_flow_initially() {
    let r = bump_solution();
    let s = &r.system;
    let u0 = s.initial_field(frame()).unwrap();
    let opts = EvolveOptions {
        dt: 1e-3,
        scheme: Scheme::Yoshida4,
        track_interval: s.dt,
        guess: Some((s.omega[0], s.theta[0])),
        ..Default::default()
    };
    let tr = evolve_and_track(&spectral_grid(), P, &u0, 0.5, Some(frame()), &opts).unwrap();
    // the O(dt^2) quadrature error of the fixed point at dt = 0.05 is ~2e-7
    for q in &tr.points {
        let j = (q.t / s.dt).round() as usize;
        assert!((q.omega - s.omega[j]).abs() < 1e-7, "t={} omega", q.t);
        assert!((q.gamma - s.gamma[j]).abs() < 5e-7, "t={} gamma", q.t);
        assert!((q.z_plus - s.z_plus[j]).abs() < 1e-6, "t={} z+ {:e}", q.t, q.z_plus - s.z_plus[j]);
        assert!((q.z_minus - s.z_minus[j]).abs() < 5e-7, "t={} z- {:e} of {:e}", q.t, q.z_minus - s.z_minus[j], s.z_minus[j]);
    }
}

#[test]
fn shoot_agrees_with_picard_at_the_same_point() {
    let r = bump_solution();
    let s = &r.system;
    let mut seed = bump_seed(EPS, 0.1 * EPS);
    seed.h0 = s.f_c(0).clone();
    let so = fine_shoot_options();
    let sh = shoot(frame(), &seed, (-1e-3, 1e-3), 2.0, &so).unwrap();
    // the splitting offset of the unstable coordinate at dt = 1e-3 is ~6e-8
    let diff = (sh.a_star - s.z_plus[0]).abs();
    assert!(diff < 2e-7, "shoot {:e} picard {:e}", sh.a_star, s.z_plus[0]);
    assert!(sh.bracket.1 - sh.bracket.0 < 1e-12);
}

#[test]
fn zero_seed_shoot_finds_the_ground_state() {
    let seed = SeedData::zero(frame(), 0.0, EPS);
    let so = fine_shoot_options();
    let sh = shoot(frame(), &seed, (-EPS, EPS), 4.0, &so).unwrap();
    assert!(sh.a_star.abs() < 2e-7, "{:e}", sh.a_star);
    let sm = sh.summary();
    assert!(matches!(sm.status, Status::Running | Status::Converged));
    assert!(sm.sup_omega_deviation < 1e-8);
    assert!(sm.sup_z_plus < 1e-6);
    assert!((sm.t_end - 4.0).abs() < 1e-9);
}

#[test]
fn bad_bracket_is_reported() {
    let seed = SeedData::zero(frame(), 0.0, EPS);
    let so = ShootOptions { tol: 1e-6, ..fine_shoot_options() };
    let err = shoot(frame(), &seed, (1e-3, 2e-3), 1.0, &so).unwrap_err();
    assert!(matches!(err, Error::BadBracket(_)) && err.is_precondition());
}

#[test]
fn graph_value_is_gauge_invariant() {
    let seed = bump_seed(EPS, 0.0);
    let opts = PicardOptions::default();
    let (a, m) = graph_value(frame(), continuum(), &seed, 8.0, &opts, None).unwrap();
    let (b, _) = graph_value(frame(), continuum(), &seed.with_gamma(2.1), 8.0, &opts, None).unwrap();
    assert_eq!(m, GraphMethod::Picard);
    assert!((a - b).abs() < 1e-10);
    assert_eq!(graph_value(frame(), continuum(), &SeedData::zero(frame(), 0.0, EPS), 8.0, &opts, None).unwrap().0, 0.0);
}

#[test]
fn graph_value_is_quadratic() {
    let opts = PicardOptions::default();
    let value = |eps: f64| graph_value(frame(), continuum(), &bump_seed(eps, 0.0), 8.0, &opts, None).unwrap().0;
    let ratio = value(0.02) / value(0.01);
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
}

#[test]
fn short_horizon_is_refused() {
    let err = picard_solve(frame(), continuum(), &bump_seed(EPS, 0.0), 3.0, &PicardOptions::default()).unwrap_err();
    assert!(err.is_precondition());
}

#[test]
fn duhamel_tail_of_a_constant_forcing() {
    let cs = continuum();
    let g = spectral_grid();
    let gfield = cs.project_c(&random_field(&g, 4)).unwrap();
    let dt = 0.05;
    let n = 41;
    let t_end = dt * (n - 1) as f64;
    let forcing = vec![gfield.clone(); n];
    let ell = vec![0.0; n];
    let out = tilde_f_c(cs, dt, &ell, &forcing).unwrap();
    // exact: per mode int_t^T e^{+-i s (tau - t)} dtau
    let c = cs.coefficients(&gfield).unwrap();
    for &j in &[0usize, 17, 40] {
        let t = j as f64 * dt;
        let mut e = c.clone();
        for (k, &s) in cs.frequencies().iter().enumerate() {
            let w = |sg: f64| {
                let z = C64::new(0.0, sg * s);
                ((z * (t_end - t)).exp() - 1.0) / z
            };
            e.plus[k] *= w(1.0);
            e.minus[k] *= w(-1.0);
        }
        let want = cs.synthesize(&e);
        let err = (&out[j] - &want).norm_l2() / want.norm_l2().max(1e-300);
        assert!(err < 1e-12 || (j == 40 && out[j].norm_l2() < 1e-14), "t={t}: {err:e}");
        assert!(out[j].sigma1_conj_defect() < 1e-12);
    }
    let zero = tilde_f_c(cs, dt, &ell, &vec![VecField::zeros(&g); n]).unwrap();
    assert!(zero.iter().all(|f| f.max_abs() == 0.0));
    assert!(tilde_f_c(cs, dt, &ell[1..], &forcing).is_err());
}
