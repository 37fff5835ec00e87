//! The unstable eigenvector across frequencies.
//!
//! The operator family satisfies `H_omega = omega S H_1 S^{-1}` with the
//! dilation `(S f)(x) = f(sqrt(omega) x)`, hence `mu(omega) = omega mu(1)` and
//! `xi(omega, x) = sqrt(omega) xi(1, sqrt(omega) x)`. One dense solve at
//! `omega = 1` on a reference grid therefore determines the mode everywhere.

use std::sync::{Arc, Mutex, OnceLock};

use super::modes::ModeBasis;
use crate::error::Result;
use crate::grid::{CosineSeries, Grid, VecField, C64};
use crate::soliton;

pub const REFERENCE_HALF_LENGTH: f64 = 30.0;

/// Number of points of the reference grid: at least 1024 and enough that the
/// analyticity strip of `sech^2(kappa x)` is resolved to round-off.
pub fn reference_points(p: f64) -> usize {
    let kappa = soliton::kappa(1.0, p);
    let mut n = 1024usize;
    loop {
        let nyquist = std::f64::consts::PI * n as f64 / (2.0 * REFERENCE_HALF_LENGTH);
        if nyquist * std::f64::consts::FRAC_PI_2 / kappa >= 26.0 {
            return n;
        }
        n *= 2;
    }
}

#[derive(Clone, Debug)]
pub struct UnstableMode {
    p: f64,
    mu1: f64,
    lambda1_1: f64,
    null_eigenvalue: f64,
    series: CosineSeries,
}

impl UnstableMode {
    /// Dense solve at `omega = 1` on the reference grid.
    pub fn compute(p: f64) -> Result<Self> {
        let grid = Grid::spatial(REFERENCE_HALF_LENGTH, reference_points(p))?;
        Self::compute_on(p, &grid)
    }

    pub fn compute_on(p: f64, grid: &Grid) -> Result<Self> {
        let basis = ModeBasis::compute(1.0, p, grid)?;
        let (xi, lambda1) = basis.unstable_mode();
        Ok(Self {
            p,
            mu1: basis.mu(),
            lambda1_1: lambda1,
            null_eigenvalue: basis.null_eigenvalue(),
            series: CosineSeries::from_samples(grid, xi.a()),
        })
    }

    /// Shared, lazily computed reference mode for exponent `p`.
    pub fn reference(p: f64) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<Vec<(u64, Arc<UnstableMode>)>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let key = p.to_bits();
        {
            let guard = cache.lock().expect("mode cache poisoned");
            if let Some((_, m)) = guard.iter().find(|(k, _)| *k == key) {
                return Ok(m.clone());
            }
        }
        let mode = Arc::new(Self::compute(p)?);
        cache.lock().expect("mode cache poisoned").push((key, mode.clone()));
        Ok(mode)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mu(&self, omega: f64) -> f64 {
        omega * self.mu1
    }

    /// `lambda_1(omega) = sqrt(omega) lambda_1(1)` for the unit-normalized
    /// reference mode carried along by the dilation.
    pub fn lambda1(&self, omega: f64) -> f64 {
        omega.sqrt() * self.lambda1_1
    }

    pub fn null_eigenvalue(&self) -> f64 {
        self.null_eigenvalue
    }

    /// First component `xi_1(omega, x)` and its omega-derivative.
    pub fn component(&self, omega: f64, x: f64) -> (C64, C64) {
        let s = omega.sqrt();
        let y = s * x;
        let (v, d) = self.series.eval_with_derivative(y);
        (s * v, (v + y * d) / (2.0 * s))
    }

    pub fn xi(&self, omega: f64, grid: &Grid) -> VecField {
        let u: Vec<C64> = grid.x().iter().map(|&x| self.component(omega, x).0).collect();
        VecField::from_scalar(grid, &u)
    }

    /// `(xi(omega), d_omega xi(omega))` on `grid`.
    pub fn xi_with_derivative(&self, omega: f64, grid: &Grid) -> (VecField, VecField) {
        let (u, du): (Vec<C64>, Vec<C64>) =
            grid.x().iter().map(|&x| self.component(omega, x)).unzip();
        (VecField::from_scalar(grid, &u), VecField::from_scalar(grid, &du))
    }
}

/// Chebyshev interpolation of `xi(omega)` and `d_omega xi` on a fixed grid
/// over a frequency window, for repeated cheap evaluation.
#[derive(Clone, Debug)]
pub struct XiInterpolant {
    mode: Arc<UnstableMode>,
    grid: Grid,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<Vec<C64>>,
    derivs: Vec<Vec<C64>>,
}

impl XiInterpolant {
    pub const NODES: usize = 14;

    pub fn new(mode: Arc<UnstableMode>, grid: &Grid, lo: f64, hi: f64) -> Self {
        let n = Self::NODES;
        let nodes: Vec<f64> = (0..n)
            .map(|i| {
                let t = (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * t
            })
            .collect();
        let weights = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                if i == 0 || i == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let (values, derivs) = nodes
            .iter()
            .map(|&w| {
                grid.x().iter().map(|&x| mode.component(w, x)).unzip::<C64, C64, Vec<_>, Vec<_>>()
            })
            .unzip();
        Self { mode, grid: grid.clone(), nodes, weights, values, derivs }
    }

    pub fn mode(&self) -> &UnstableMode {
        &self.mode
    }

    pub fn window(&self) -> (f64, f64) {
        (self.nodes[self.nodes.len() - 1], self.nodes[0])
    }

    pub fn eval(&self, omega: f64) -> (VecField, VecField) {
        let (lo, hi) = self.window();
        if omega < lo || omega > hi {
            return self.mode.xi_with_derivative(omega, &self.grid);
        }
        let coeffs: Vec<f64> = if let Some(i) = self.nodes.iter().position(|&w| w == omega) {
            (0..self.nodes.len()).map(|j| if j == i { 1.0 } else { 0.0 }).collect()
        } else {
            let raw: Vec<f64> =
                self.nodes.iter().zip(&self.weights).map(|(&w, &c)| c / (omega - w)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        };
        let combine = |set: &[Vec<C64>]| -> Vec<C64> {
            let mut out = vec![C64::default(); self.grid.len()];
            for (c, v) in coeffs.iter().zip(set) {
                if *c != 0.0 {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += *c * x;
                    }
                }
            }
            out
        };
        let u = combine(&self.values);
        let du = combine(&self.derivs);
        (VecField::from_scalar(&self.grid, &u), VecField::from_scalar(&self.grid, &du))
    }
}
