//! Ground states `phi_omega` of `-phi'' + omega phi = phi^p` and their
//! dependence on the frequency.
//!
//! `phi_omega(x) = A sech^{2/(p-1)}(kappa x)` with `A^{p-1} = omega (p+1)/2`
//! and `kappa = (p-1) sqrt(omega) / 2`. Everything here is closed form except
//! the mass constant, which is a one-off quadrature.

use crate::error::{Error, Result};
use crate::grid::{Grid, VecField, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub omega: f64,
    pub gamma: f64,
    pub p: f64,
}

impl SolitonParams {
    pub fn new(omega: f64, gamma: f64, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 5.0) {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 5")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("frequency omega = {omega} must be positive")));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter("phase must be finite".into()));
        }
        Ok(Self { omega, gamma, p })
    }

    /// Checks `omega` against the frequency window `(alpha, 1/alpha)`.
    pub fn check_window(&self, alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("window parameter {alpha} not in (0,1)")));
        }
        if self.omega <= alpha || self.omega >= 1.0 / alpha {
            return Err(Error::InvalidParameter(format!(
                "omega = {} outside ({alpha}, {})",
                self.omega,
                1.0 / alpha
            )));
        }
        Ok(())
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        Self { omega, ..*self }
    }

    pub fn amplitude(&self) -> f64 {
        amplitude(self.omega, self.p)
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.omega, self.p)
    }
}

pub fn amplitude(omega: f64, p: f64) -> f64 {
    (omega * (p + 1.0) / 2.0).powf(1.0 / (p - 1.0))
}

pub fn kappa(omega: f64, p: f64) -> f64 {
    (p - 1.0) * omega.sqrt() / 2.0
}

/// `phi_omega(x)`.
pub fn value(omega: f64, p: f64, x: f64) -> f64 {
    let y = kappa(omega, p) * x;
    amplitude(omega, p) * sech(y).powf(2.0 / (p - 1.0))
}

/// Logarithmic omega-derivative `d_omega log phi` at `x`.
fn log_derivative(omega: f64, p: f64, x: f64) -> f64 {
    let y = kappa(omega, p) * x;
    (1.0 - y * y.tanh()) / ((p - 1.0) * omega)
}

pub fn d_omega_value(omega: f64, p: f64, x: f64) -> f64 {
    value(omega, p, x) * log_derivative(omega, p, x)
}

pub fn d2_omega_value(omega: f64, p: f64, x: f64) -> f64 {
    let y = kappa(omega, p) * x;
    let h = log_derivative(omega, p, x);
    let dh = -h / omega - y * (y.tanh() + y * sech(y).powi(2)) / (2.0 * (p - 1.0) * omega * omega);
    value(omega, p, x) * (h * h + dh)
}

/// `sech`, written to avoid overflow of `cosh` at large arguments.
fn sech(y: f64) -> f64 {
    let e = (-y.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    grid.x().iter().map(|&x| f(x)).collect()
}

/// Largest admissible `phi(L) / phi(0)`.
pub const EDGE_TOLERANCE: f64 = 1e-8;

impl SolitonParams {
    /// The profile must be resolved by the grid and must have decayed to
    /// negligible size at the box edge, otherwise periodic wrap-around
    /// pollutes every spectral derivative.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        grid.check_resolution(self.omega)?;
        let edge = sech(self.kappa() * grid.half_length()).powf(2.0 / (self.p - 1.0));
        if edge > EDGE_TOLERANCE {
            return Err(Error::Unresolved(format!(
                "profile at the box edge is {edge:.2e} of its peak; enlarge L"
            )));
        }
        Ok(())
    }
}

pub fn profile(params: &SolitonParams, grid: &Grid) -> Vec<f64> {
    sample(grid, |x| value(params.omega, params.p, x))
}

pub fn d_omega_profile(params: &SolitonParams, grid: &Grid) -> Vec<f64> {
    sample(grid, |x| d_omega_value(params.omega, params.p, x))
}

pub fn d2_omega_profile(params: &SolitonParams, grid: &Grid) -> Vec<f64> {
    sample(grid, |x| d2_omega_value(params.omega, params.p, x))
}

/// `Phi_omega = (phi_omega, phi_omega)`.
pub fn phi(params: &SolitonParams, grid: &Grid) -> Result<VecField> {
    params.check_grid(grid)?;
    Ok(VecField::from_real(grid, &profile(params, grid)))
}

/// `d_omega Phi_omega`.
pub fn d_phi_domega(params: &SolitonParams, grid: &Grid) -> Result<VecField> {
    params.check_grid(grid)?;
    Ok(VecField::from_real(grid, &d_omega_profile(params, grid)))
}

/// The scalar orbit point `e^{i gamma} phi_omega`.
pub fn orbit_point(params: &SolitonParams, grid: &Grid) -> Result<Vec<C64>> {
    params.check_grid(grid)?;
    let phase = C64::from_polar(1.0, params.gamma);
    Ok(profile(params, grid).into_iter().map(|v| phase * v).collect())
}

/// Sup norm of `-phi'' + omega phi - phi^p` with a spectral second derivative.
pub fn ode_residual(params: &SolitonParams, grid: &Grid) -> f64 {
    let f = profile(params, grid);
    let fxx = grid.derivative_real(&f, 2);
    f.iter()
        .zip(&fxx)
        .map(|(&v, &d)| (-d + params.omega * v - v.powf(params.p)).abs())
        .fold(0.0, f64::max)
}

/// `int sech^a(y) dy`, by the rectangle rule on a truncated line.
pub fn sech_power_integral(a: f64) -> f64 {
    // sech^a(y) < 2^a e^{-a|y|}; stop where the tail is below 1e-18.
    let y_max = (a * std::f64::consts::LN_2 + 18.0 * std::f64::consts::LN_10) / a;
    let h = 0.02;
    let n = (y_max / h).ceil() as usize;
    let interior: f64 = (1..=n).map(|j| sech(j as f64 * h).powf(a)).sum();
    h * (1.0 + 2.0 * interior)
}

/// `(||phi_omega||_2^2, d/domega ||phi_omega||_2^2)`.
///
/// The mass obeys `m(omega) = omega^{2/(p-1) - 1/2} m(1)`; the derivative is
/// taken from that law rather than by differencing quadratures.
pub fn mass_curve(omega: f64, p: f64) -> (f64, f64) {
    let a = 4.0 / (p - 1.0);
    let amp = amplitude(omega, p);
    let mass = amp * amp / kappa(omega, p) * sech_power_integral(a);
    let exponent = 2.0 / (p - 1.0) - 0.5;
    (mass, mass * exponent / omega)
}
