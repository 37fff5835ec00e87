//! Periodic spatial lattice, two-component fields and the bilinear pairing.
//!
//! The real line is approximated by the periodic box `[-L, L)` sampled at
//! `N` equispaced points `x_j = -L + j dx`. Point `j = N/2` is the origin and
//! the reflection `x -> -x` maps index `j` to `(N - j) mod N`. Integrals use
//! the rectangle rule, which is spectrally accurate for smooth periodic
//! integrands. Derivatives are taken spectrally.

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Safety factor between the Nyquist wavenumber and the widest frequency
/// `sqrt(omega)` that must be resolved.
pub const RESOLUTION_FACTOR: f64 = 8.0;

#[derive(Clone)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
    dt: f64,
    t_max: f64,
    x: Arc<[f64]>,
    k: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n_points", &self.n_points)
            .field("dt", &self.dt)
            .field("t_max", &self.t_max)
            .finish()
    }
}

/// Two grids are interchangeable for field arithmetic when they sample the
/// same box with the same number of points; the time step is irrelevant.
impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.half_length == other.half_length
    }
}

impl Grid {
    pub const DEFAULT_HALF_LENGTH: f64 = 30.0;
    pub const DEFAULT_POINTS: usize = 2048;
    pub const DEFAULT_DT: f64 = 2e-3;
    pub const DEFAULT_T_MAX: f64 = 50.0;

    pub fn new(half_length: f64, n_points: usize, dt: f64, t_max: f64) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!("half length {half_length} must be positive")));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count {n_points} must be a power of two >= 8"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("time step {dt} must be positive")));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon {t_max} must be positive")));
        }
        let dx = 2.0 * half_length / n_points as f64;
        let x: Vec<f64> = (0..n_points).map(|j| -half_length + j as f64 * dx).collect();
        let k: Vec<f64> = (0..n_points)
            .map(|j| {
                let m = if j <= n_points / 2 { j as f64 } else { j as f64 - n_points as f64 };
                std::f64::consts::PI * m / half_length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Self {
            half_length,
            n_points,
            dt,
            t_max,
            x: x.into(),
            k: k.into(),
            forward,
            inverse,
        })
    }

    /// Spatial grid with the default time step and horizon.
    pub fn spatial(half_length: f64, n_points: usize) -> Result<Self> {
        Self::new(half_length, n_points, Self::DEFAULT_DT, Self::DEFAULT_T_MAX)
    }

    pub fn with_time(&self, dt: f64, t_max: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0 && t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("bad time parameters dt={dt}, t_max={t_max}")));
        }
        let mut g = self.clone();
        g.dt = dt;
        g.t_max = t_max;
        Ok(g)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Angular wavenumbers in FFT ordering.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    /// Index of `-x_j`.
    pub fn mirror(&self, j: usize) -> usize {
        (self.n_points - j) % self.n_points
    }

    pub fn origin_index(&self) -> usize {
        self.n_points / 2
    }

    pub fn check_resolution(&self, omega_max: f64) -> Result<()> {
        let needed = RESOLUTION_FACTOR * omega_max.max(0.0).sqrt();
        if self.nyquist() <= needed {
            return Err(Error::Unresolved(format!(
                "Nyquist wavenumber {:.3} does not exceed {:.3} = {}*sqrt({omega_max})",
                self.nyquist(),
                needed,
                RESOLUTION_FACTOR
            )));
        }
        Ok(())
    }

    pub fn fft(&self, data: &mut [C64]) {
        self.forward.process(data);
    }

    /// Normalized inverse transform.
    pub fn ifft(&self, data: &mut [C64]) {
        self.inverse.process(data);
        let s = 1.0 / self.n_points as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    /// Spectral derivative of order 0, 1 or 2. The Nyquist mode is dropped for
    /// odd orders so that real even input stays real even.
    pub fn derivative(&self, f: &[C64], order: u32) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.fft(&mut buf);
        let nyq = self.n_points / 2;
        for (j, v) in buf.iter_mut().enumerate() {
            let k = self.k[j];
            *v *= match order {
                0 => C64::new(1.0, 0.0),
                1 if j == nyq => C64::new(0.0, 0.0),
                1 => C64::new(0.0, k),
                2 => C64::new(-k * k, 0.0),
                _ => {
                    let ik = if j == nyq && order % 2 == 1 { C64::new(0.0, 0.0) } else { C64::new(0.0, k) };
                    ik.powu(order)
                }
            };
        }
        self.ifft(&mut buf);
        buf
    }

    pub fn derivative_real(&self, f: &[f64], order: u32) -> Vec<f64> {
        let c: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.derivative(&c, order).into_iter().map(|v| v.re).collect()
    }

    /// Free Schrodinger flow `exp(i t d_xx)` applied in place.
    pub fn free_flow(&self, f: &mut [C64], t: f64) {
        self.fft(f);
        for (v, &k) in f.iter_mut().zip(self.k.iter()) {
            *v *= C64::from_polar(1.0, -k * k * t);
        }
        self.ifft(f);
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.dx() * f.iter().sum::<f64>()
    }

    pub fn integrate_c(&self, f: &[C64]) -> C64 {
        f.iter().sum::<C64>() * self.dx()
    }

    /// `||f||_{L^2}^2` for a scalar field.
    pub fn mass(&self, f: &[C64]) -> f64 {
        self.dx() * f.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `||f||_{H^k}^2` for a scalar field with the Fourier weight `(1+k^2)^k`.
    pub fn sobolev_sq(&self, f: &[C64], order: u32) -> f64 {
        let mut buf = f.to_vec();
        self.fft(&mut buf);
        let w = self.dx() / self.n_points as f64;
        buf.iter()
            .zip(self.k.iter())
            .map(|(v, &k)| (1.0 + k * k).powi(order as i32) * v.norm_sqr())
            .sum::<f64>()
            * w
    }

    /// Fraction of `int |f|^2` carried by the outer `fraction` of the box.
    pub fn edge_mass_fraction(&self, f: &[C64], fraction: f64) -> f64 {
        let cut = self.half_length * (1.0 - fraction);
        let (mut edge, mut total) = (0.0, 0.0);
        for (v, &x) in f.iter().zip(self.x.iter()) {
            let m = v.norm_sqr();
            total += m;
            if x.abs() >= cut {
                edge += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }
}

/// A two-component complex field `(a, b)` sampled on a [`Grid`].
#[derive(Clone, Debug)]
pub struct VecField {
    grid: Grid,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl VecField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.len();
        Self { grid: grid.clone(), a: vec![C64::default(); n], b: vec![C64::default(); n] }
    }

    pub fn new(grid: &Grid, a: Vec<C64>, b: Vec<C64>) -> Result<Self> {
        for len in [a.len(), b.len()] {
            if len != grid.len() {
                return Err(Error::LengthMismatch { expected: grid.len(), got: len });
            }
        }
        Ok(Self { grid: grid.clone(), a, b })
    }

    /// `(u, conj u)`: the vector form of a scalar field.
    pub fn from_scalar(grid: &Grid, u: &[C64]) -> Self {
        assert_eq!(u.len(), grid.len(), "scalar field length");
        Self { grid: grid.clone(), a: u.to_vec(), b: u.iter().map(|v| v.conj()).collect() }
    }

    /// `(f, f)` for a real profile.
    pub fn from_real(grid: &Grid, f: &[f64]) -> Self {
        assert_eq!(f.len(), grid.len(), "real profile length");
        let c: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self { grid: grid.clone(), a: c.clone(), b: c }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a(&self) -> &[C64] {
        &self.a
    }

    pub fn b(&self) -> &[C64] {
        &self.b
    }

    pub fn a_mut(&mut self) -> &mut [C64] {
        &mut self.a
    }

    pub fn b_mut(&mut self) -> &mut [C64] {
        &mut self.b
    }

    pub fn into_parts(self) -> (Vec<C64>, Vec<C64>) {
        (self.a, self.b)
    }

    pub fn sigma1(&self) -> Self {
        Self { grid: self.grid.clone(), a: self.b.clone(), b: self.a.clone() }
    }

    pub fn sigma3(&self) -> Self {
        Self { grid: self.grid.clone(), a: self.a.clone(), b: self.b.iter().map(|v| -v).collect() }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            a: self.a.iter().map(|v| v.conj()).collect(),
            b: self.b.iter().map(|v| v.conj()).collect(),
        }
    }

    /// `sigma_1 conj(f)`; fields of the form `(u, conj u)` are fixed points.
    pub fn sigma1_conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            a: self.b.iter().map(|v| v.conj()).collect(),
            b: self.a.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            grid: self.grid.clone(),
            a: self.a.iter().map(|v| v * c).collect(),
            b: self.b.iter().map(|v| v * c).collect(),
        }
    }

    pub fn scale(&mut self, c: C64) {
        self.a.iter_mut().for_each(|v| *v *= c);
        self.b.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: C64, other: &VecField) {
        self.assert_same_grid(other);
        for (s, o) in self.a.iter_mut().zip(&other.a) {
            *s += alpha * o;
        }
        for (s, o) in self.b.iter_mut().zip(&other.b) {
            *s += alpha * o;
        }
    }

    /// Pointwise multiplication of both components by a real profile.
    pub fn mul_real(&self, w: &[f64]) -> Self {
        Self {
            grid: self.grid.clone(),
            a: self.a.iter().zip(w).map(|(v, &s)| v * s).collect(),
            b: self.b.iter().zip(w).map(|(v, &s)| v * s).collect(),
        }
    }

    fn assert_same_grid(&self, other: &VecField) {
        assert!(self.grid == other.grid, "field arithmetic across different grids");
    }

    /// Bilinear pairing `int tf g dx` (no conjugation).
    ///
    /// Panics when the grids differ; use [`pair`] for a fallible version.
    pub fn pair(&self, other: &VecField) -> C64 {
        self.assert_same_grid(other);
        let s: C64 = self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum::<C64>()
            + self.b.iter().zip(&other.b).map(|(x, y)| x * y).sum::<C64>();
        s * self.grid.dx()
    }

    /// Sesquilinear pairing `int conj(f) . g dx`.
    pub fn inner(&self, other: &VecField) -> C64 {
        self.assert_same_grid(other);
        let s: C64 = self.a.iter().zip(&other.a).map(|(x, y)| x.conj() * y).sum::<C64>()
            + self.b.iter().zip(&other.b).map(|(x, y)| x.conj() * y).sum::<C64>();
        s * self.grid.dx()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.grid.mass(&self.a) + self.grid.mass(&self.b)).sqrt()
    }

    pub fn norm_h1(&self) -> f64 {
        (self.grid.sobolev_sq(&self.a, 1) + self.grid.sobolev_sq(&self.b, 1)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise deviation from `f(x) = f(-x)`.
    pub fn even_defect(&self) -> f64 {
        let n = self.grid.len();
        let mut d: f64 = 0.0;
        for j in 0..n {
            let m = self.grid.mirror(j);
            d = d.max((self.a[j] - self.a[m]).norm()).max((self.b[j] - self.b[m]).norm());
        }
        d
    }

    /// Largest pointwise deviation from `sigma_1 conj(f) = f`.
    pub fn sigma1_conj_defect(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Restores the exact `(u, conj u)` structure by averaging with its image.
    pub fn symmetrize_sigma1_conj(&self) -> Self {
        let a: Vec<C64> = self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (a + b.conj())).collect();
        let b = a.iter().map(|v| v.conj()).collect();
        Self { grid: self.grid.clone(), a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.b).all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl Add<&VecField> for &VecField {
    type Output = VecField;
    fn add(self, rhs: &VecField) -> VecField {
        self.assert_same_grid(rhs);
        VecField {
            grid: self.grid.clone(),
            a: self.a.iter().zip(&rhs.a).map(|(x, y)| x + y).collect(),
            b: self.b.iter().zip(&rhs.b).map(|(x, y)| x + y).collect(),
        }
    }
}

impl Sub<&VecField> for &VecField {
    type Output = VecField;
    fn sub(self, rhs: &VecField) -> VecField {
        self.assert_same_grid(rhs);
        VecField {
            grid: self.grid.clone(),
            a: self.a.iter().zip(&rhs.a).map(|(x, y)| x - y).collect(),
            b: self.b.iter().zip(&rhs.b).map(|(x, y)| x - y).collect(),
        }
    }
}

/// Bilinear pairing of two fields, refusing fields on different grids.
pub fn pair(f: &VecField, g: &VecField) -> Result<C64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    Ok(f.pair(g))
}

/// `||<x>^s f||_{H^k}` with spectral derivatives and a pointwise weight.
pub fn weighted_norm(f: &VecField, k: u32, s: f64) -> Result<f64> {
    if k > 2 {
        return Err(Error::InvalidParameter(format!("Sobolev order {k} not in {{0,1,2}}")));
    }
    let grid = f.grid();
    let w: Vec<f64> = grid.x().iter().map(|x| (1.0 + x * x).powf(0.5 * s)).collect();
    let g = f.mul_real(&w);
    Ok((grid.sobolev_sq(g.a(), k) + grid.sobolev_sq(g.b(), k)).sqrt())
}

/// Even part `(f(x) + f(-x)) / 2` of each component.
pub fn enforce_even(f: &VecField) -> VecField {
    let grid = f.grid().clone();
    let sym = |c: &[C64]| -> Vec<C64> {
        (0..grid.len()).map(|j| 0.5 * (c[j] + c[grid.mirror(j)])).collect()
    };
    VecField { a: sym(f.a()), b: sym(f.b()), grid }
}

/// Even part of a scalar field.
pub fn enforce_even_scalar(grid: &Grid, u: &mut [C64]) {
    let n = grid.len();
    for j in 1..n / 2 {
        let m = grid.mirror(j);
        let avg = 0.5 * (u[j] + u[m]);
        u[j] = avg;
        u[m] = avg;
    }
}

/// An even function on `[-L, L]` stored as a cosine series
/// `f(y) = sum_q c_q cos(q pi y / L)`, treated as zero for `|y| > L`.
///
/// Used to evaluate a profile computed on one grid at arbitrary points, in
/// particular at rescaled abscissae `sqrt(omega) x`.
#[derive(Clone, Debug)]
pub struct CosineSeries {
    half_length: f64,
    coeffs: Vec<C64>,
}

impl CosineSeries {
    /// Builds the interpolating series from samples of an even function.
    pub fn from_samples(grid: &Grid, f: &[C64]) -> Self {
        let n = grid.len();
        let mut buf = f.to_vec();
        grid.fft(&mut buf);
        let half = n / 2;
        let mut coeffs = Vec::with_capacity(half + 1);
        for q in 0..=half {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            let g = buf[q] * (sign / n as f64);
            let c = if q == 0 || q == half { g } else { 2.0 * g };
            coeffs.push(c);
        }
        Self { half_length: grid.half_length(), coeffs }
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Value and first derivative at `y` (Clenshaw recurrences).
    pub fn eval_with_derivative(&self, y: f64) -> (C64, C64) {
        if y.abs() > self.half_length {
            return (C64::default(), C64::default());
        }
        let theta = std::f64::consts::PI * y / self.half_length;
        let (s, u) = theta.sin_cos();
        let q_max = self.coeffs.len() - 1;
        // value: sum c_q T_q(u)
        let (mut b1, mut b2) = (C64::default(), C64::default());
        for q in (1..=q_max).rev() {
            let b0 = self.coeffs[q] + 2.0 * u * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        let value = self.coeffs[0] + u * b1 - b2;
        // derivative: -(pi/L) sin(theta) sum_{m} (m+1) c_{m+1} U_m(u)
        let (mut d1, mut d2) = (C64::default(), C64::default());
        for m in (0..q_max).rev() {
            let d0 = self.coeffs[m + 1] * (m + 1) as f64 + 2.0 * u * d1 - d2;
            d2 = d1;
            d1 = d0;
        }
        let deriv = -(std::f64::consts::PI / self.half_length) * s * d1;
        (value, deriv)
    }

    pub fn eval(&self, y: f64) -> C64 {
        self.eval_with_derivative(y).0
    }
}
