//! Linearization of the equation at a ground state.
//!
//! With `u = e^{i theta}(phi + r)` and `R = (r, conj r)` the remainder obeys
//! `i R_t = H_omega R + ...` where
//!
//! ```text
//! H_omega = sigma_3 (-d_xx + omega) + omega V(sqrt(omega) x)
//! V(y) = c(y) [[-(p+1), -(p-1)], [p-1, p+1]],  c(y) = (p+1)/4 sech^2((p-1)y/2)
//! ```
//!
//! On even functions `H_omega` has the eigenvalues `+-i mu(omega)`, a
//! two-dimensional generalized kernel spanned by `sigma_3 Phi` and
//! `d_omega Phi`, and continuous spectrum `(-inf, -omega] U [omega, inf)`.

mod continuous;
mod even;
mod modes;
mod shooting;
mod xi;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

pub(crate) use continuous::interval_weights;
pub use continuous::{ContinuousSpectrum, ModeCoefficients};
pub use even::EvenSector;
pub use modes::ModeBasis;
pub use shooting::{matching_function, shooting_mu};
pub use xi::{reference_points, UnstableMode, XiInterpolant, REFERENCE_HALF_LENGTH};

pub(crate) use modes::potential;

use crate::error::{Error, Result};
use crate::grid::{Grid, VecField, C64, I};
use crate::soliton::{self, SolitonParams};

/// `H_omega` as a matrix-valued differential operator on a grid.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    omega: f64,
    p: f64,
    grid: Grid,
    /// `phi_omega^{p-1}` on the grid.
    pot: Vec<f64>,
}

impl LinearizedOperator {
    pub fn new(omega: f64, p: f64, grid: &Grid) -> Self {
        let pot = grid.x().iter().map(|&x| potential(omega, p, x)).collect();
        Self { omega, p, grid: grid.clone(), pot }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn apply(&self, f: &VecField) -> Result<VecField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let axx = self.grid.derivative(f.a(), 2);
        let bxx = self.grid.derivative(f.b(), 2);
        let n = self.grid.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for j in 0..n {
            let (u, v) = (f.a()[j], f.b()[j]);
            let diag = 0.5 * (self.p + 1.0) * self.pot[j];
            let off = 0.5 * (self.p - 1.0) * self.pot[j];
            a.push(-axx[j] + self.omega * u - diag * u - off * v);
            b.push(bxx[j] - self.omega * v + off * u + diag * v);
        }
        VecField::new(&self.grid, a, b)
    }
}

pub fn apply_h(omega: f64, p: f64, f: &VecField) -> Result<VecField> {
    LinearizedOperator::new(omega, p, f.grid()).apply(f)
}

/// Projection onto `span{v_i}` along the `sigma_3`-orthogonal complement of
/// that span: `P f = sum_i v_i <f, d_i>` with duals `d_i` satisfying
/// `<v_i, d_j> = delta_ij`.
#[derive(Clone, Debug)]
pub struct DiscreteProjector {
    basis: Vec<VecField>,
    duals: Vec<VecField>,
}

impl DiscreteProjector {
    pub fn new(basis: Vec<VecField>) -> Result<Self> {
        let n = basis.len();
        let s3: Vec<VecField> = basis.iter().map(|v| v.sigma3()).collect();
        let gram = DMatrix::from_fn(n, n, |j, i| basis[i].pair(&s3[j]));
        let scale = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateSpectrum("singular Gram matrix".into()))?;
        let inv_scale = inv.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(scale * inv_scale < 1e12) {
            return Err(Error::DegenerateSpectrum(format!(
                "Gram matrix condition ~{:.1e}",
                scale * inv_scale
            )));
        }
        let duals = (0..n)
            .map(|i| {
                let mut d = VecField::zeros(basis[0].grid());
                for (j, s) in s3.iter().enumerate() {
                    d.axpy(inv[(i, j)], s);
                }
                d
            })
            .collect();
        Ok(Self { basis, duals })
    }

    pub fn basis(&self) -> &[VecField] {
        &self.basis
    }

    pub fn duals(&self) -> &[VecField] {
        &self.duals
    }

    pub fn coefficients(&self, f: &VecField) -> Result<Vec<C64>> {
        if f.grid() != self.basis[0].grid() {
            return Err(Error::GridMismatch);
        }
        Ok(self.duals.iter().map(|d| f.pair(d)).collect())
    }

    pub fn project_d(&self, f: &VecField) -> Result<VecField> {
        let c = self.coefficients(f)?;
        let mut out = VecField::zeros(f.grid());
        for (ci, v) in c.iter().zip(&self.basis) {
            out.axpy(*ci, v);
        }
        Ok(out)
    }

    pub fn project_c(&self, f: &VecField) -> Result<VecField> {
        Ok(f - &self.project_d(f)?)
    }
}

/// Discrete spectral data of `H_omega` on a working grid.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub omega: f64,
    pub p: f64,
    pub mu: f64,
    pub lambda1: f64,
    pub d1: f64,
    pub xi: VecField,
    pub d_xi: VecField,
    /// `[sigma_3 Phi, d_omega Phi]`.
    pub kernel_basis: [VecField; 2],
    /// Projection onto `span{sigma_3 Phi, d_omega Phi, xi, sigma_1 xi}`.
    pub projector: DiscreteProjector,
    pub mode: Arc<UnstableMode>,
}

impl SpectralData {
    pub fn grid(&self) -> &Grid {
        self.xi.grid()
    }

    pub fn project_d(&self, f: &VecField) -> Result<VecField> {
        self.projector.project_d(f)
    }

    pub fn project_c(&self, f: &VecField) -> Result<VecField> {
        self.projector.project_c(f)
    }

    /// `||H xi - i mu xi|| / ||mu xi||`.
    pub fn xi_residual(&self) -> Result<f64> {
        let hx = apply_h(self.omega, self.p, &self.xi)?;
        let r = &hx - &self.xi.scaled(I * self.mu);
        Ok(r.norm_l2() / (self.mu * self.xi.norm_l2()))
    }

    /// `<xi, sigma_3 xi> / i`; its imaginary part measures the defect.
    pub fn lambda1_pairing(&self) -> C64 {
        self.xi.pair(&self.xi.sigma3()) / I
    }

    pub fn decay_fit(&self) -> DecayFit {
        decay_fit(&self.xi, self.omega)
    }

    pub fn summary(&self) -> Result<SpectrumSummary> {
        let fit = self.decay_fit();
        let pairing = self.lambda1_pairing();
        Ok(SpectrumSummary {
            p: self.p,
            omega: self.omega,
            mu: self.mu,
            mu_over_omega: self.mu / self.omega,
            lambda1: self.lambda1,
            d1: self.d1,
            eigen_residual: self.xi_residual()?,
            lambda1_imag_defect: pairing.im.abs(),
            conjugation_defect: self.xi.sigma1_conj_defect(),
            decay_c: fit.c,
            decay_a: fit.a,
            decay_r_squared: fit.r_squared,
        })
    }
}

/// Serializable digest of [`SpectralData`].
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub p: f64,
    pub omega: f64,
    pub mu: f64,
    pub mu_over_omega: f64,
    pub lambda1: f64,
    pub d1: f64,
    pub eigen_residual: f64,
    pub lambda1_imag_defect: f64,
    pub conjugation_defect: f64,
    pub decay_c: f64,
    pub decay_a: f64,
    pub decay_r_squared: f64,
}

/// Fit of `|xi(x)| ~ c sqrt(omega) e^{-a sqrt(omega) |x|}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub a: f64,
    pub r_squared: f64,
}

pub fn decay_fit(xi: &VecField, omega: f64) -> DecayFit {
    let grid = xi.grid();
    let s = omega.sqrt();
    let peak = xi.max_abs();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&x, v) in grid.x().iter().zip(xi.a()) {
        let m = v.norm();
        if x >= 3.0 / s && m > 1e-8 * peak {
            xs.push(s * x);
            ys.push((m / s).ln());
        }
    }
    let n = xs.len() as f64;
    if n < 3.0 {
        return DecayFit { c: f64::NAN, a: f64::NAN, r_squared: f64::NAN };
    }
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    DecayFit { c: intercept.exp(), a: -slope, r_squared: sxy * sxy / (sxx * syy) }
}

/// Discrete spectral data of `H_omega` on `grid`, obtained by dilating the
/// reference mode for exponent `p`.
pub fn discrete_spectrum(omega: f64, p: f64, grid: &Grid) -> Result<SpectralData> {
    let mode = UnstableMode::reference(p)?;
    spectral_data_from(mode, omega, grid)
}

pub fn spectral_data_from(mode: Arc<UnstableMode>, omega: f64, grid: &Grid) -> Result<SpectralData> {
    let params = SolitonParams::new(omega, 0.0, mode.p())?;
    let (xi, d_xi) = mode.xi_with_derivative(omega, grid);
    let kernel = kernel_basis(&params, grid)?;
    let projector = discrete_projector(&kernel, &xi)?;
    let lambda1 = mode.lambda1(omega);
    Ok(SpectralData {
        omega,
        p: mode.p(),
        mu: mode.mu(omega),
        lambda1,
        d1: -1.0 / lambda1,
        xi,
        d_xi,
        kernel_basis: kernel,
        projector,
        mode,
    })
}

pub fn kernel_basis(params: &SolitonParams, grid: &Grid) -> Result<[VecField; 2]> {
    Ok([soliton::phi(params, grid)?.sigma3(), soliton::d_phi_domega(params, grid)?])
}

pub fn discrete_projector(kernel: &[VecField; 2], xi: &VecField) -> Result<DiscreteProjector> {
    DiscreteProjector::new(vec![kernel[0].clone(), kernel[1].clone(), xi.clone(), xi.sigma1()])
}
