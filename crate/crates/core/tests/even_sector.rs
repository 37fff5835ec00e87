use nls_core::grid::{Grid, C64};
use nls_core::linop::EvenSector;

#[test]
fn gather_scatter_round_trip_and_inner_product() {
    let g = Grid::spatial(10.0, 64).unwrap();
    let s = EvenSector::new(&g);
    let f: Vec<C64> = g.x().iter().map(|&x| C64::new((-x * x).exp(), x.cos())).collect();
    let back = s.scatter(&s.gather(&f));
    for (a, b) in f.iter().zip(&back) {
        assert!((a - b).norm() < 1e-14);
    }
    let gf = s.gather(&f);
    let dot: C64 = gf.iter().map(|v| v * v).sum();
    let direct = g.integrate_c(&f.iter().map(|v| v * v).collect::<Vec<_>>());
    assert!((dot - direct).norm() < 1e-12);
}

#[test]
fn laplacian_is_symmetric_and_matches_spectral_derivative() {
    let g = Grid::spatial(10.0, 64).unwrap();
    let s = EvenSector::new(&g);
    let lap = s.laplacian();
    assert!((&lap - lap.transpose()).amax() < 1e-12);
    let f: Vec<f64> = g.x().iter().map(|&x| (-0.5 * x * x).exp()).collect();
    let want = s.gather_real(&g.derivative_real(&f, 2));
    let got = &lap * nalgebra::DVector::from_vec(s.gather_real(&f));
    for (a, b) in want.iter().zip(got.iter()) {
        assert!((a - b).abs() < 1e-11);
    }
}
