//! Reduction of even grid functions to the half line.
//!
//! An even function is determined by its values at offsets `m = 0..=N/2`
//! from the origin. Offsets `0` and `N/2` are fixed by the reflection, every
//! other offset stands for two grid points. Storing `sqrt(w_m dx) f(x_m)`
//! (`w_m` the orbit size) makes the Euclidean dot product equal to the
//! rectangle-rule integral over the full box, so every self-adjoint grid
//! operator becomes a symmetric matrix.

use nalgebra::DMatrix;

use crate::grid::{Grid, C64};

#[derive(Clone, Debug)]
pub struct EvenSector {
    grid: Grid,
    index: Vec<usize>,
    scale: Vec<f64>,
    weight: Vec<f64>,
}

impl EvenSector {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let half = n / 2;
        let index: Vec<usize> = (0..=half).map(|m| (half + m) % n).collect();
        let weight: Vec<f64> =
            (0..=half).map(|m| if m == 0 || m == half { 1.0 } else { 2.0 }).collect();
        let scale = weight.iter().map(|w| (w * grid.dx()).sqrt()).collect();
        Self { grid: grid.clone(), index, scale, weight }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Abscissae `x >= 0` of the representatives (the last one is `x = -L`).
    pub fn abscissae(&self) -> Vec<f64> {
        self.index.iter().map(|&j| self.grid.x()[j]).collect()
    }

    pub fn gather(&self, f: &[C64]) -> Vec<C64> {
        self.index.iter().zip(&self.scale).map(|(&j, &s)| f[j] * s).collect()
    }

    pub fn gather_real(&self, f: &[f64]) -> Vec<f64> {
        self.index.iter().zip(&self.scale).map(|(&j, &s)| f[j] * s).collect()
    }

    /// Inverse of [`gather`](Self::gather): an even function on the full grid.
    pub fn scatter(&self, g: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.grid.len()];
        for ((&j, &s), &v) in self.index.iter().zip(&self.scale).zip(g) {
            let val = v / s;
            out[j] = val;
            out[self.grid.mirror(j)] = val;
        }
        out
    }

    pub fn scatter_real(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for ((&j, &s), &v) in self.index.iter().zip(&self.scale).zip(g) {
            out[j] = v / s;
            out[self.grid.mirror(j)] = v / s;
        }
        out
    }

    /// Symmetric matrix of the spectral second derivative on even functions.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut stencil: Vec<C64> =
            self.grid.wavenumbers().iter().map(|&k| C64::new(-k * k, 0.0)).collect();
        self.grid.ifft(&mut stencil);
        let c = |d: i64| stencil[d.rem_euclid(n as i64) as usize].re;
        let dim = self.dim();
        let half = (n / 2) as i64;
        DMatrix::from_fn(dim, dim, |m, q| {
            let (m, q) = (m as i64, q as i64);
            let orbit_sum = if q == 0 || q == half { c(m - q) } else { c(m - q) + c(m + q) };
            (self.weight[m as usize] / self.weight[q as usize]).sqrt() * orbit_sum
        })
    }
}
