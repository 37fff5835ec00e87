//! Modulation coordinates near the ground-state family.
//!
//! A solution is written `u = e^{i theta}(phi_omega + r)` with the two even
//! orthogonality conditions `<R, Phi_omega> = 0`, `<R, sigma_3 d_omega Phi_omega> = 0`
//! on `R = (r, conj r)`, which fix `(omega, theta)`. The remainder splits as
//! `R = z_+ xi + z_- sigma_1 xi + f` with `f` in the continuous subspace of
//! `H_omega`, and `f = f_d + f_c` with `f_c` in the continuous subspace of the
//! fixed reference operator `H_{omega_0}`.
//!
//! Differentiating the conditions along the flow
//! `i R_t = H_omega R + gamma' sigma_3 (Phi + R) - i omega' d_omega Phi + N`,
//! `N = (m, -conj m)`, `m = -n(r)`, gives a 2x2 linear system for
//! `(omega', gamma')` whose coefficients and right-hand side are integrals
//! against `phi`, `d_omega phi`, `d_omega^2 phi`; pairing with the dual
//! eigenvectors gives the discrete-mode equations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::power;
use crate::grid::{Grid, VecField, C64, I};
use crate::linop::{discrete_projector, kernel_basis, DiscreteProjector, UnstableMode, XiInterpolant};
use crate::soliton::{self, SolitonParams};

/// Half-width of the admissible frequency window relative to `omega_0`.
pub const WINDOW_FRACTION: f64 = 0.1;
pub const NEWTON_MAX_ITER: usize = 25;

/// `n(r) = |phi+r|^{p-1}(phi+r) - phi^p - (p+1)/2 phi^{p-1} r - (p-1)/2 phi^{p-1} conj r`.
pub fn nonlinear_remainder(r: &[C64], phi: &[f64], p: f64) -> Vec<C64> {
    r.iter()
        .zip(phi)
        .map(|(&r, &f)| {
            let w = r + f;
            let fp1 = power(f, p - 1.0);
            w * power(w.norm_sqr(), 0.5 * (p - 1.0))
                - f * fp1
                - 0.5 * (p + 1.0) * fp1 * r
                - 0.5 * (p - 1.0) * fp1 * r.conj()
        })
        .collect()
}

/// Full coordinate set `(omega, gamma, z_+, z_-, f_c, f_d)` relative to `omega_0`.
///
/// `gamma` is the total phase `theta` at the sampled instant.
#[derive(Clone, Debug)]
pub struct ModState {
    pub omega: f64,
    pub gamma: f64,
    pub z_plus: f64,
    pub z_minus: f64,
    pub f_c: VecField,
    pub f_d: VecField,
    pub omega0: f64,
}

impl ModState {
    /// Pure ground state `e^{i gamma} phi_omega`.
    pub fn soliton(grid: &Grid, omega: f64, gamma: f64, omega0: f64) -> Self {
        Self {
            omega,
            gamma,
            z_plus: 0.0,
            z_minus: 0.0,
            f_c: VecField::zeros(grid),
            f_d: VecField::zeros(grid),
            omega0,
        }
    }

    /// `f = f_c + f_d`.
    pub fn f(&self) -> VecField {
        &self.f_c + &self.f_d
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ModRates {
    pub omega_dot: f64,
    pub gamma_dot: f64,
    pub z_plus_dot: f64,
    pub z_minus_dot: f64,
}

impl ModRates {
    pub fn is_finite(&self) -> bool {
        [self.omega_dot, self.gamma_dot, self.z_plus_dot, self.z_minus_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Ground-state profiles at one frequency, sampled on the grid.
#[derive(Clone, Debug)]
pub struct Profiles {
    pub omega: f64,
    pub phi: Vec<f64>,
    pub d_phi: Vec<f64>,
    pub d2_phi: Vec<f64>,
    pub d_mass: f64,
}

impl Profiles {
    pub fn new(grid: &Grid, omega: f64, p: f64) -> Self {
        let pr = SolitonParams { omega, gamma: 0.0, p };
        Self {
            omega,
            phi: soliton::profile(&pr, grid),
            d_phi: soliton::d_omega_profile(&pr, grid),
            d2_phi: soliton::d2_omega_profile(&pr, grid),
            d_mass: soliton::mass_curve(omega, p).1,
        }
    }
}

/// Everything needed to move between `u` and modulation coordinates for a
/// fixed exponent, grid and reference frequency.
#[derive(Clone, Debug)]
pub struct Frame {
    p: f64,
    omega0: f64,
    grid: Grid,
    mode: Arc<UnstableMode>,
    xi: XiInterpolant,
    projector0: DiscreteProjector,
}

impl Frame {
    pub fn new(p: f64, omega0: f64, grid: &Grid) -> Result<Self> {
        let mode = UnstableMode::reference(p)?;
        Self::with_mode(mode, omega0, grid)
    }

    pub fn with_mode(mode: Arc<UnstableMode>, omega0: f64, grid: &Grid) -> Result<Self> {
        let params = SolitonParams::new(omega0, 0.0, mode.p())?;
        params.check_grid(grid)?;
        let delta = WINDOW_FRACTION * omega0;
        let xi = XiInterpolant::new(mode.clone(), grid, omega0 - 1.2 * delta, omega0 + 1.2 * delta);
        let (xi0, _) = xi.eval(omega0);
        let projector0 = discrete_projector(&kernel_basis(&params, grid)?, &xi0)?;
        Ok(Self { p: mode.p(), omega0, grid: grid.clone(), mode, xi, projector0 })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mode(&self) -> &Arc<UnstableMode> {
        &self.mode
    }

    pub fn window(&self) -> f64 {
        WINDOW_FRACTION * self.omega0
    }

    pub fn mu(&self, omega: f64) -> f64 {
        self.mode.mu(omega)
    }

    pub fn lambda1(&self, omega: f64) -> f64 {
        self.mode.lambda1(omega)
    }

    /// `(xi(omega), d_omega xi(omega))` on the frame grid.
    pub fn xi(&self, omega: f64) -> (VecField, VecField) {
        self.xi.eval(omega)
    }

    /// Projector onto `L^2_d(omega_0)`.
    pub fn projector0(&self) -> &DiscreteProjector {
        &self.projector0
    }

    pub fn projector(&self, omega: f64) -> Result<DiscreteProjector> {
        let params = SolitonParams::new(omega, 0.0, self.p)?;
        let (xi, _) = self.xi(omega);
        discrete_projector(&kernel_basis(&params, &self.grid)?, &xi)
    }

    pub fn profiles(&self, omega: f64) -> Profiles {
        Profiles::new(&self.grid, omega, self.p)
    }

    fn check_field(&self, f: &VecField) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `(z_+, z_-)` of a remainder `R` at frequency `omega`.
    pub fn z_coordinates(&self, omega: f64, r: &VecField, xi: &VecField) -> (f64, f64) {
        let l1 = self.lambda1(omega);
        let zp = r.pair(&xi.sigma3()) / (I * l1);
        let zm = r.pair(&xi.sigma1().sigma3()) / (-I * l1);
        (zp.re, zm.re)
    }

    /// Orthogonality residuals `(int Re(r) phi, int Im(r) d_omega phi)`.
    pub fn constraints(&self, omega: f64, r: &[C64]) -> (f64, f64) {
        let pr = self.profiles(omega);
        let dx = self.grid.dx();
        let c1: f64 = r.iter().zip(&pr.phi).map(|(v, f)| v.re * f).sum::<f64>() * dx;
        let c2: f64 = r.iter().zip(&pr.d_phi).map(|(v, f)| v.im * f).sum::<f64>() * dx;
        (c1, c2)
    }

    /// Solves the orthogonality conditions for `(omega, theta)` by Newton's
    /// method, starting from `guess = (omega, theta)`.
    pub fn modulation_parameters(&self, u: &[C64], guess: (f64, f64)) -> Result<(f64, f64)> {
        if u.len() != self.grid.len() {
            return Err(Error::LengthMismatch { expected: self.grid.len(), got: u.len() });
        }
        let dx = self.grid.dx();
        let (mut omega, guess_theta) = guess;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("frequency guess {omega}")));
        }
        let pr = self.profiles(omega);
        let proj: C64 = u.iter().zip(&pr.phi).map(|(v, f)| v * f).sum::<C64>() * dx;
        if proj.norm() == 0.0 {
            return Err(Error::NotNearManifold("field orthogonal to the ground state".into()));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let arg = proj.arg();
        let mut theta = arg + two_pi * ((guess_theta - arg) / two_pi).round();
        let scale = pr.phi.iter().map(|f| f * f).sum::<f64>() * dx;
        for _ in 0..NEWTON_MAX_ITER {
            let pr = self.profiles(omega);
            let rot = C64::from_polar(1.0, -theta);
            let (mut c1, mut c2) = (0.0, 0.0);
            let (mut j11, mut j12, mut j21, mut j22) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..u.len() {
                let w = u[k] * rot;
                let (f, df, d2f) = (pr.phi[k], pr.d_phi[k], pr.d2_phi[k]);
                c1 += (w.re - f) * f;
                c2 += w.im * df;
                j11 += w.im * f;
                j12 += w.re * df - 2.0 * f * df;
                j21 += -w.re * df;
                j22 += w.im * d2f;
            }
            let jac = Matrix2::new(j11, j12, j21, j22) * dx;
            let res = Vector2::new(c1, c2) * dx;
            if !(res.amax().is_finite()) {
                return Err(Error::NotNearManifold("non-finite constraint residual".into()));
            }
            if res.amax() < 1e-14 * scale.max(1.0) {
                return Ok((omega, theta));
            }
            let det = jac.determinant();
            if !(det.abs() > 1e-14 * jac.amax().powi(2)) {
                return Err(Error::Degenerate(format!("constraint Jacobian determinant {det:.3e}")));
            }
            let step = jac.try_inverse().ok_or_else(|| Error::Degenerate("singular Jacobian".into()))? * res;
            theta -= step[0];
            omega -= step[1];
            if !(omega > 0.0) {
                return Err(Error::NotNearManifold(format!("Newton left omega > 0 (omega = {omega})")));
            }
        }
        Err(Error::NotNearManifold(format!("Newton did not converge in {NEWTON_MAX_ITER} iterations")))
    }

    /// `u -> (omega, gamma, z_+, z_-, f_c, f_d)`.
    pub fn decompose(&self, u: &[C64], guess: (f64, f64)) -> Result<ModState> {
        let (omega, theta) = self.modulation_parameters(u, guess)?;
        let phi = self.profiles(omega).phi;
        let rot = C64::from_polar(1.0, -theta);
        let r: Vec<C64> = u.iter().zip(&phi).map(|(v, f)| v * rot - f).collect();
        let rv = VecField::from_scalar(&self.grid, &r);
        let (xi, _) = self.xi(omega);
        let (zp, zm) = self.z_coordinates(omega, &rv, &xi);
        let mut f = rv;
        f.axpy(C64::new(-zp, 0.0), &xi);
        f.axpy(C64::new(-zm, 0.0), &xi.sigma1());
        let f_d = self.projector0.project_d(&f)?;
        let f_c = &f - &f_d;
        Ok(ModState { omega, gamma: theta, z_plus: zp, z_minus: zm, f_c, f_d, omega0: self.omega0 })
    }

    pub fn decompose_field(&self, u: &VecField, guess: (f64, f64)) -> Result<ModState> {
        self.check_field(u)?;
        self.decompose(u.a(), guess)
    }

    /// `R = (z_+ + z_- sigma_1) xi(omega) + f_d + f_c`.
    pub fn remainder(&self, state: &ModState) -> Result<VecField> {
        self.check_field(&state.f_c)?;
        self.check_field(&state.f_d)?;
        let (xi, _) = self.xi(state.omega);
        let mut r = state.f();
        r.axpy(C64::new(state.z_plus, 0.0), &xi);
        r.axpy(C64::new(state.z_minus, 0.0), &xi.sigma1());
        Ok(r)
    }

    /// `u = e^{i gamma}(phi_omega + r)`.
    pub fn reconstruct(&self, state: &ModState) -> Result<Vec<C64>> {
        let r = self.remainder(state)?;
        let phi = self.profiles(state.omega).phi;
        let rot = C64::from_polar(1.0, state.gamma);
        Ok(r.a().iter().zip(&phi).map(|(v, f)| rot * (f + v)).collect())
    }

    /// Time derivatives of the modulation coordinates at `state`.
    pub fn rates(&self, state: &ModState) -> Result<ModRates> {
        let r = self.remainder(state)?;
        self.rates_from_remainder(state.omega, &r)
    }

    /// Rates from the remainder `R = (r, conj r)` at frequency `omega`.
    pub fn rates_from_remainder(&self, omega: f64, rv: &VecField) -> Result<ModRates> {
        let (xi, dxi) = self.xi(omega);
        Ok(self.rates_with(&self.profiles(omega), &xi, &dxi, rv)?.0)
    }

    /// Rates together with the forcing `N = (m, -conj m)`, for cached profiles
    /// and `xi`, `d_omega xi` at `pr.omega`.
    pub(crate) fn rates_with(
        &self,
        pr: &Profiles,
        xi: &VecField,
        dxi: &VecField,
        rv: &VecField,
    ) -> Result<(ModRates, VecField)> {
        let omega = pr.omega;
        let (om_dot, ga_dot, m) = self.parameter_rates(pr, rv.a())?;
        let nb = m.iter().map(|v| -v.conj()).collect();
        let nv = VecField::new(&self.grid, m, nb)?;
        let (zp, zm) = self.z_coordinates(omega, rv, xi);
        let l1 = self.lambda1(omega);
        let d1 = -1.0 / l1;
        let mu = self.mu(omega);
        let dlog_l1 = 0.5 / omega;
        let s1xi = xi.sigma1();
        let gp = C64::new(ga_dot, 0.0) * rv.pair(xi)
            + nv.pair(&xi.sigma3())
            + I * om_dot * rv.pair(&dxi.sigma3());
        let gm = C64::new(ga_dot, 0.0) * rv.pair(&s1xi)
            + nv.pair(&s1xi.sigma3())
            + I * om_dot * rv.pair(&dxi.sigma1().sigma3());
        let zp_dot = mu * zp + d1 * gp.re - dlog_l1 * om_dot * zp;
        let zm_dot = -mu * zm - d1 * gm.re - dlog_l1 * om_dot * zm;
        let rates = ModRates { omega_dot: om_dot, gamma_dot: ga_dot, z_plus_dot: zp_dot, z_minus_dot: zm_dot };
        if !rates.is_finite() {
            return Err(Error::ModulationBreakdown("non-finite rates".into()));
        }
        Ok((rates, nv))
    }

    /// `(omega', gamma', m)` where `m = -n(r)` is the forcing nonlinearity.
    pub(crate) fn parameter_rates(&self, pr: &Profiles, r: &[C64]) -> Result<(f64, f64, Vec<C64>)> {
        let dx = self.grid.dx();
        let n = nonlinear_remainder(r, &pr.phi, self.p);
        let m: Vec<C64> = n.iter().map(|v| -v).collect();
        let (mut re_r_dphi, mut im_r_phi, mut im_r_d2phi) = (0.0, 0.0, 0.0);
        let (mut im_m_phi, mut re_m_dphi) = (0.0, 0.0);
        for k in 0..r.len() {
            re_r_dphi += r[k].re * pr.d_phi[k];
            im_r_phi += r[k].im * pr.phi[k];
            im_r_d2phi += r[k].im * pr.d2_phi[k];
            im_m_phi += m[k].im * pr.phi[k];
            re_m_dphi += m[k].re * pr.d_phi[k];
        }
        let dm = pr.d_mass;
        let mat = Matrix2::new(
            dm - 2.0 * dx * re_r_dphi,
            -2.0 * dx * im_r_phi,
            -2.0 * dx * im_r_d2phi,
            dm + 2.0 * dx * re_r_dphi,
        );
        let rhs = Vector2::new(2.0 * dx * im_m_phi, -2.0 * dx * re_m_dphi);
        let det = mat.determinant();
        if !(det.abs() > 1e-3 * dm * dm) {
            return Err(Error::ModulationBreakdown(format!(
                "modulation matrix nearly singular (det {det:.3e}, d_mass {dm:.3e})"
            )));
        }
        let sol = mat.try_inverse().ok_or_else(|| Error::ModulationBreakdown("singular matrix".into()))? * rhs;
        Ok((sol[0], sol[1], m))
    }

    /// The unique `f_d` in `L^2_d(omega_0)` with `f_d + f_c` in `L^2_c(omega)`.
    pub fn complete_fd(&self, f_c: &VecField, omega: f64) -> Result<VecField> {
        self.check_field(f_c)?;
        let pr = self.profiles(omega);
        let (xi, _) = self.xi(omega);
        let inv = self.completion(&pr, &xi)?;
        Ok(self.complete_with(&inv, &pr, &xi, f_c))
    }

    /// `sigma_3` applied to the basis of `L^2_d(omega)`.
    fn dual_targets(&self, pr: &Profiles, xi: &VecField) -> [VecField; 4] {
        let phi = VecField::from_real(&self.grid, &pr.phi);
        let dphi = VecField::from_real(&self.grid, &pr.d_phi).sigma3();
        [phi, dphi, xi.sigma3(), xi.sigma1().sigma3()]
    }

    /// Inverse of the matrix that maps `f_d` coefficients in the reference
    /// discrete basis to the `L^2_d(omega)` pairings, after the window and
    /// conditioning checks.
    pub(crate) fn completion(&self, pr: &Profiles, xi: &VecField) -> Result<DMatrix<C64>> {
        let limit = self.window();
        let distance = (pr.omega - self.omega0).abs();
        if distance > limit * (1.0 + 1e-12) {
            return Err(Error::WindowTooLarge { distance, limit });
        }
        let s3 = self.dual_targets(pr, xi);
        let src = self.projector0.basis();
        let n = src.len();
        let a = DMatrix::from_fn(n, n, |j, i| src[i].pair(&s3[j]));
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let inv = a.try_inverse().ok_or(Error::WindowTooLarge { distance, limit })?;
        if !(inv.iter().map(|z| z.norm()).fold(0.0, f64::max) * scale < 1e10) {
            return Err(Error::WindowTooLarge { distance, limit });
        }
        Ok(inv)
    }

    pub(crate) fn complete_with(&self, inv: &DMatrix<C64>, pr: &Profiles, xi: &VecField, f_c: &VecField) -> VecField {
        let s3 = self.dual_targets(pr, xi);
        let b = DVector::from_iterator(s3.len(), s3.iter().map(|s| -f_c.pair(s)));
        let c = inv * b;
        let mut f_d = VecField::zeros(&self.grid);
        for (ci, v) in c.iter().zip(self.projector0.basis()) {
            f_d.axpy(*ci, v);
        }
        f_d
    }

    /// Assembles the state with coordinates `(omega, gamma, z_+, z_-, f_c)`
    /// and `f_d` completed so that the orthogonality conditions hold.
    pub fn assemble(&self, omega: f64, gamma: f64, z_plus: f64, z_minus: f64, f_c: VecField) -> Result<ModState> {
        let f_d = self.complete_fd(&f_c, omega)?;
        Ok(ModState { omega, gamma, z_plus, z_minus, f_c, f_d, omega0: self.omega0 })
    }
}
