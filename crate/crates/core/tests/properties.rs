use nls_core::grid::{Grid, C64};
use nls_core::soliton;
use proptest::prelude::*;

fn gaussian(grid: &Grid, width: f64, k: f64, shift: f64) -> Vec<C64> {
    grid.x().iter().map(|&x| C64::from_polar((-((x - shift) / width).powi(2)).exp(), k * x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_flow_is_a_unitary_group(width in 0.5..3.0f64, k in -2.0..2.0f64, s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let g = Grid::spatial(20.0, 256).unwrap();
        let u = gaussian(&g, width, k, 1.0);
        let mut a = u.clone();
        g.free_flow(&mut a, s);
        g.free_flow(&mut a, t);
        let mut b = u.clone();
        g.free_flow(&mut b, s + t);
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
        prop_assert!((g.mass(&a) - g.mass(&u)).abs() < 1e-12 * g.mass(&u));
    }

    #[test]
    fn free_flow_commutes_with_phase(c in 0.0..6.3f64, t in -3.0..3.0f64) {
        let g = Grid::spatial(20.0, 256).unwrap();
        let rot = C64::from_polar(1.0, c);
        let mut a = gaussian(&g, 1.2, 0.7, -0.5);
        let mut b: Vec<C64> = a.iter().map(|z| z * rot).collect();
        g.free_flow(&mut a, t);
        g.free_flow(&mut b, t);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x * rot - y).norm() < 1e-13));
    }

    #[test]
    fn soliton_scaling(omega in 0.3..3.0f64, x in -4.0..4.0f64, p in 4.0..10.0f64) {
        // phi_omega(x) = omega^{1/(p-1)} phi_1(sqrt(omega) x)
        let lhs = soliton::value(omega, p, x);
        let rhs = omega.powf(1.0 / (p - 1.0)) * soliton::value(1.0, p, omega.sqrt() * x);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1e-300));
    }

    #[test]
    fn mass_curve_is_a_power_law(omega in 0.3..3.0f64, p in 5.5..10.0f64) {
        // M(omega) = M(1) omega^{2/(p-1) - 1/2}, decreasing for p > 5
        let (m, dm) = soliton::mass_curve(omega, p);
        let beta = 2.0 / (p - 1.0) - 0.5;
        let (m1, _) = soliton::mass_curve(1.0, p);
        prop_assert!((m - m1 * omega.powf(beta)).abs() < 1e-12 * m);
        prop_assert!((dm - beta * m / omega).abs() < 1e-10 * m);
        prop_assert!(dm < 0.0);
    }
}
