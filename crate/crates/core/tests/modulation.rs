mod common;

use std::sync::OnceLock;

use common::*;
use nls_core::grid::{VecField, C64, I};
use nls_core::modulation::{nonlinear_remainder, Frame, ModState};
use nls_core::soliton::{self, SolitonParams};
use nls_core::Error;

fn frame() -> &'static Frame {
    static F: OnceLock<Frame> = OnceLock::new();
    F.get_or_init(|| Frame::new(P, 1.0, &spectral_grid()).unwrap())
}

/// `e^{i gamma}(phi_omega + eps * bump)` with a generic complex even bump.
fn perturbed(omega: f64, gamma: f64, eps: f64, seed: u64) -> Vec<C64> {
    let g = spectral_grid();
    let pr = SolitonParams::new(omega, gamma, P).unwrap();
    let bump = random_field(&g, seed);
    soliton::orbit_point(&pr, &g)
        .unwrap()
        .iter()
        .zip(bump.a())
        .map(|(u, b)| u + C64::from_polar(eps, gamma) * b)
        .collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `u_t = i (u_xx + |u|^{p-1} u)`.
fn nls_rhs(u: &[C64]) -> Vec<C64> {
    let g = spectral_grid();
    let uxx = g.derivative(u, 2);
    u.iter().zip(&uxx).map(|(v, d)| I * (d + v * v.norm().powf(P - 1.0))).collect()
}

#[test]
fn pure_soliton_has_trivial_coordinates() {
    let f = frame();
    for &(omega, gamma) in &[(1.0, 0.0), (1.05, 0.7), (0.93, -2.0)] {
        let u = perturbed(omega, gamma, 0.0, 0);
        let s = f.decompose(&u, (1.0, 0.0)).unwrap();
        assert!((s.omega - omega).abs() < 1e-12, "{}", s.omega);
        assert!((s.gamma - gamma).abs() < 1e-12);
        assert!(s.z_plus.abs() < 1e-12 && s.z_minus.abs() < 1e-12);
        assert!(s.f().max_abs() < 1e-12);
    }
}

#[test]
fn decompose_reconstruct_round_trip() {
    let f = frame();
    for seed in 1..4 {
        let u = perturbed(1.02, 0.4, 1e-2, seed);
        let s = f.decompose(&u, (1.0, 0.0)).unwrap();
        let back = f.reconstruct(&s).unwrap();
        assert!(max_diff(&back, &u) < 1e-12, "seed {seed}: {}", max_diff(&back, &u));
        // orthogonality conditions hold for the reconstructed remainder
        let r = f.remainder(&s).unwrap();
        let (c1, c2) = f.constraints(s.omega, r.a());
        assert!(c1.abs() < 1e-12 && c2.abs() < 1e-12, "{c1:e} {c2:e}");
        // f_c lies in the reference continuum, f_d in its complement
        assert!(f.projector0().project_d(&s.f_c).unwrap().max_abs() < 1e-10);
        assert!(f.projector0().project_c(&s.f_d).unwrap().max_abs() < 1e-10);
        assert!(s.f_c.sigma1_conj_defect() < 1e-12);
    }
}

#[test]
fn phase_rotation_is_covariant() {
    let f = frame();
    let u = perturbed(1.0, 0.0, 5e-3, 7);
    let a = f.decompose(&u, (1.0, 0.0)).unwrap();
    let rot: Vec<C64> = u.iter().map(|v| v * C64::from_polar(1.0, 1.3)).collect();
    let b = f.decompose(&rot, (1.0, 1.3)).unwrap();
    assert!((b.omega - a.omega).abs() < 1e-13);
    assert!((b.gamma - a.gamma - 1.3).abs() < 1e-12);
    assert!((b.z_plus - a.z_plus).abs() < 1e-12 && (b.z_minus - a.z_minus).abs() < 1e-12);
    assert!((&b.f_c - &a.f_c).max_abs() < 1e-12);
}

#[test]
fn far_from_manifold_is_reported() {
    let f = frame();
    let g = spectral_grid();
    // mass concentrated far from the origin: orthogonal to every phi_omega up to round-off
    let u: Vec<C64> = g.x().iter().map(|&x| C64::new((-(x.abs() - 20.0).powi(2)).exp(), 0.0) * 1e-40).collect();
    assert!(matches!(f.decompose(&u, (1.0, 0.0)), Err(Error::NotNearManifold(_) | Error::Degenerate(_))));
    assert!(f.decompose(&u[1..], (1.0, 0.0)).is_err());
}

#[test]
fn nonlinear_remainder_is_quadratic() {
    let g = spectral_grid();
    let pr = SolitonParams::new(1.0, 0.0, P).unwrap();
    let phi = soliton::profile(&pr, &g);
    let r = random_field(&g, 3);
    let size = |eps: f64| {
        let re: Vec<C64> = r.a().iter().map(|v| v * eps).collect();
        nonlinear_remainder(&re, &phi, P).iter().map(|v| v.norm()).fold(0.0, f64::max)
    };
    let ratio = size(1e-3) / size(5e-4);
    assert!((ratio - 4.0).abs() < 0.02, "{ratio}");
    // p = 7: |w|^6 w is a polynomial, compare with the exact quadratic term
    let eps = 1e-4;
    let n = nonlinear_remainder(&r.a().iter().map(|v| v * eps).collect::<Vec<_>>(), &phi, P);
    for ((&nk, &f), &rk) in n.iter().zip(&phi).zip(r.a()).step_by(37) {
        // second-order term of (f+r)^4 (f+conj r)^3
        let q = f.powi(5) * (6.0 * rk * rk + 12.0 * rk * rk.conj() + 3.0 * rk.conj() * rk.conj()) * eps * eps;
        assert!((nk - q).norm() <= 1e-3 * q.norm() + 1e-20, "{nk} vs {q}");
    }
}

#[test]
fn rates_match_differentiated_flow() {
    let f = frame();
    for seed in [11, 12] {
        let u = perturbed(1.01, 0.2, 2e-2, seed);
        let s = f.decompose(&u, (1.0, 0.0)).unwrap();
        let rates = f.rates(&s).unwrap();
        let ut = nls_rhs(&u);
        let h = 1e-5;
        let shifted = |sgn: f64| -> ModState {
            let v: Vec<C64> = u.iter().zip(&ut).map(|(a, b)| a + sgn * h * b).collect();
            f.decompose(&v, (s.omega, s.gamma)).unwrap()
        };
        let (sp, sm) = (shifted(1.0), shifted(-1.0));
        let d = |a: f64, b: f64| (a - b) / (2.0 * h);
        let om = d(sp.omega, sm.omega);
        let th = d(sp.gamma, sm.gamma);
        let zp = d(sp.z_plus, sm.z_plus);
        let zm = d(sp.z_minus, sm.z_minus);
        let tol = 1e-6;
        assert!((om - rates.omega_dot).abs() < tol, "omega' {om} vs {}", rates.omega_dot);
        assert!((th - s.omega - rates.gamma_dot).abs() < tol, "gamma' {} vs {}", th - s.omega, rates.gamma_dot);
        assert!((zp - rates.z_plus_dot).abs() < tol, "z+' {zp} vs {}", rates.z_plus_dot);
        assert!((zm - rates.z_minus_dot).abs() < tol, "z-' {zm} vs {}", rates.z_minus_dot);
    }
}

#[test]
fn parameter_rates_are_quadratic() {
    let f = frame();
    let g = spectral_grid();
    let rate = |eps: f64| {
        let s = f.decompose(&perturbed(1.0, 0.0, eps, 5), (1.0, 0.0)).unwrap();
        let r = f.rates(&s).unwrap();
        let mu = f.mu(s.omega);
        (r.omega_dot.abs(), r.gamma_dot.abs(), (r.z_plus_dot - mu * s.z_plus).abs())
    };
    let (a1, b1, c1) = rate(2e-3);
    let (a2, b2, c2) = rate(1e-3);
    for (x, y) in [(a1, a2), (b1, b2), (c1, c2)] {
        assert!((x / y - 4.0).abs() < 0.1, "{x} / {y}");
    }
    let s = ModState::soliton(&g, 1.0, 0.0, 1.0);
    let r = f.rates(&s).unwrap();
    assert!(r.omega_dot.abs() < 1e-14 && r.gamma_dot.abs() < 1e-14 && r.z_plus_dot.abs() < 1e-14);
}

#[test]
fn complete_fd_restores_orthogonality() {
    let f = frame();
    let g = spectral_grid();
    let fc = f.projector0().project_c(&random_field(&g, 21).scaled(C64::new(1e-2, 0.0))).unwrap();
    // at omega_0 nothing needs completing
    assert!(f.complete_fd(&fc, 1.0).unwrap().max_abs() < 1e-12);
    for &omega in &[0.95, 1.03, 1.1] {
        let fd = f.complete_fd(&fc, omega).unwrap();
        assert!(f.projector0().project_c(&fd).unwrap().max_abs() < 1e-10);
        let sum = &fd + &fc;
        let leak = f.projector(omega).unwrap().project_d(&sum).unwrap().max_abs();
        assert!(leak < 1e-12, "omega={omega}: {leak}");
        assert!(fd.sigma1_conj_defect() < 1e-12);
        // f_d is first order in the frequency offset
        assert!(fd.norm_l2() < 5.0 * (omega - 1.0f64).abs() * fc.norm_l2() + 1e-14);
    }
    let err = f.complete_fd(&fc, 1.2).unwrap_err();
    assert!(matches!(err, Error::WindowTooLarge { .. }) && err.is_precondition());
    let s = f.assemble(1.04, 0.0, 1e-3, -2e-3, fc.clone()).unwrap();
    let r = f.remainder(&s).unwrap();
    let (c1, c2) = f.constraints(1.04, r.a());
    assert!(c1.abs() < 1e-12 && c2.abs() < 1e-12);
    let back = f.decompose(&f.reconstruct(&s).unwrap(), (1.04, 0.0)).unwrap();
    assert!((back.omega - 1.04).abs() < 1e-12 && (back.z_plus - 1e-3).abs() < 1e-12);
    assert!((&back.f_c - &fc).max_abs() < 1e-12);
}

#[test]
fn mismatched_grid_is_rejected() {
    let f = frame();
    let other = nls_core::Grid::spatial(30.0, 512).unwrap();
    let s = ModState::soliton(&other, 1.0, 0.0, 1.0);
    assert!(matches!(f.reconstruct(&s), Err(Error::GridMismatch)));
    let _ = VecField::zeros(&other);
}
