use nls_core::grid::Grid;
use nls_core::soliton::*;
use nls_core::Error;

fn params(omega: f64, p: f64) -> SolitonParams {
    SolitonParams::new(omega, 0.0, p).unwrap()
}

#[test]
fn rejects_subcritical_and_bad_omega() {
    assert!(SolitonParams::new(1.0, 0.0, 5.0).is_err());
    assert!(SolitonParams::new(0.0, 0.0, 7.0).is_err());
    assert!(params(1.0, 7.0).check_window(0.5).is_ok());
    assert!(params(2.5, 7.0).check_window(0.5).is_err());
}

#[test]
fn peak_value_p7() {
    assert!((value(1.0, 7.0, 0.0) - 4f64.powf(1.0 / 6.0)).abs() < 1e-15);
    assert!((value(1.0, 7.0, 0.0) - 1.259921).abs() < 1e-6);
}

#[test]
fn scaling_identity() {
    for &p in &[6.0, 7.0, 9.0] {
        for &x in &[0.0, 0.3, 1.1, 2.7] {
            let lhs = value(4.0, p, x);
            let rhs = 4f64.powf(1.0 / (p - 1.0)) * value(1.0, p, 2.0 * x);
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let d = 1e-5;
    for &p in &[6.0, 7.0, 9.0] {
        for &omega in &[0.5, 1.0, 2.0] {
            for &x in &[0.0, 0.4, 1.5, 3.0] {
                let fd = (value(omega + d, p, x) - value(omega - d, p, x)) / (2.0 * d);
                let an = d_omega_value(omega, p, x);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "p={p} w={omega} x={x}");
                let fd2 = (d_omega_value(omega + d, p, x) - d_omega_value(omega - d, p, x)) / (2.0 * d);
                let an2 = d2_omega_value(omega, p, x);
                assert!((fd2 - an2).abs() <= 1e-6 * an2.abs().max(1e-3));
            }
        }
    }
}

#[test]
fn d_omega_at_origin_p7() {
    assert!((d_omega_value(1.0, 7.0, 0.0) - 4f64.powf(1.0 / 6.0) / 6.0).abs() < 1e-15);
}

#[test]
fn sech_integrals_closed_form() {
    assert!((sech_power_integral(1.0) - std::f64::consts::PI).abs() < 1e-13);
    assert!((sech_power_integral(2.0) - 2.0).abs() < 1e-13);
    // int sech^4 = 4/3
    assert!((sech_power_integral(4.0) - 4.0 / 3.0).abs() < 1e-13);
}

#[test]
fn mass_scaling_and_sign() {
    for &p in &[6.0, 7.0, 9.0] {
        let (m1, dm1) = mass_curve(1.0, p);
        let (m4, _) = mass_curve(4.0, p);
        assert!(m1 > 0.0);
        let want = 4f64.powf(2.0 / (p - 1.0) - 0.5);
        assert!((m4 / m1 - want).abs() < 1e-12);
        let h = 1e-5;
        let fd = (mass_curve(1.0 + h, p).0 - mass_curve(1.0 - h, p).0) / (2.0 * h);
        assert!((fd - dm1).abs() < 1e-6 * dm1.abs());
    }
    assert!(mass_curve(1.0, 7.0).1 < 0.0);
}

#[test]
fn mass_matches_grid_quadrature() {
    let g = Grid::spatial(30.0, 2048).unwrap();
    let pr = params(1.0, 7.0);
    let f = profile(&pr, &g);
    let m: f64 = g.integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>());
    assert!((m - mass_curve(1.0, 7.0).0).abs() < 1e-12);
}

#[test]
fn residual_is_small_at_default_grid() {
    let g = Grid::spatial(30.0, 2048).unwrap();
    assert!(ode_residual(&params(1.0, 7.0), &g) < 1e-10);
}

#[test]
fn edge_guard_rejects_small_box() {
    let g = Grid::spatial(5.0, 256).unwrap();
    assert!(matches!(phi(&params(0.5, 9.0), &g), Err(Error::Unresolved(_))));
}
