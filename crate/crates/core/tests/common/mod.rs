#![allow(dead_code)]

use std::sync::OnceLock;

use nls_core::grid::{Grid, VecField, C64};
use nls_core::linop::ContinuousSpectrum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P: f64 = 7.0;

/// Grid used for anything that needs the continuum diagonalization.
pub fn spectral_grid() -> Grid {
    Grid::spatial(30.0, 1024).unwrap()
}

pub fn continuum() -> &'static ContinuousSpectrum {
    static CS: OnceLock<ContinuousSpectrum> = OnceLock::new();
    CS.get_or_init(|| ContinuousSpectrum::compute(1.0, P, &spectral_grid()).unwrap())
}

/// Even, band-limited random field of the form `(u, conj u)`.
pub fn random_field(grid: &Grid, seed: u64) -> VecField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.5), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let u: Vec<C64> = grid
        .x()
        .iter()
        .map(|&x| {
            terms.iter().fold(C64::default(), |acc, &(w, k, re, im)| {
                acc + C64::new(re, im) * (-(x / w).powi(2)).exp() * (k * x).cos()
            })
        })
        .collect();
    VecField::from_scalar(grid, &u)
}

pub fn rel(a: &VecField, b: &VecField) -> f64 {
    (a - b).norm_l2() / b.norm_l2().max(1e-300)
}
