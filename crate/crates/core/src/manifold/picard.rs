//! Fixed point of the integral form of the modulation system on `[0, T]`.
//!
//! Unknowns live on a uniform time grid: `omega, gamma, z_+, z_-` as scalars
//! and `f_c` through its mode coefficients `c^+-` in the continuum of the
//! reference operator `H_0 = H_{omega_0}`. With the forcing
//!
//! `F = (H_omega - H_0) f + gamma' sigma_3 (Phi + R) - i omega' d_omega Phi + N
//!      - i G_+ xi - i G_- sigma_1 xi - i omega' (z_+ + z_- sigma_1) d_omega xi`,
//!
//! `G_+- = z_+-' -+ mu z_+-`, the continuous part obeys
//! `i c^+-' = +-(s + l) c^+- + g^+-` with `g^+- = F^+- -+ l c^+-` and
//! `l = omega - omega_0 + gamma'`. It is solved backwards from the scattering
//! data `c^+-(T) = e^{-+i(sT + int l)} h_0^+-`, `z_+` backwards from `z_+(T) = 0`,
//! `z_-` forwards from `z_-(0)`. Each interval uses the exact exponential of the
//! frozen frequency and a linear interpolant of the forcing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SeedData;
use crate::error::{Error, Result};
use crate::evolve::power;
use crate::grid::{VecField, C64, I};
use crate::linop::{interval_weights, ContinuousSpectrum};
use crate::modulation::{Frame, ModRates, ModState, Profiles};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardOptions {
    pub dt: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    /// Weight of the new frequency sequence in the outer update.
    pub damping: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Seed validity requires `||h_0||_{H^1} < c_h1 eps`.
    pub c_h1: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { dt: 0.05, inner_tol: 1e-10, outer_tol: 1e-9, damping: 0.5, max_inner: 100, max_outer: 200, c_h1: 1.0 }
    }
}

fn cumulative_trapezoid(v: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solution of the final-value problem `i c' = (s + l) c + g`, `c(T) = e^{-i(sT + Lambda(T))} h`,
/// for every mode (rows) on the time grid (columns). `sign = -1` gives the
/// `-` family, whose frequency is `-(s + l)`.
fn duhamel_backward(freq: &[f64], lambda: &[f64], dt: f64, h: &[C64], g: &DMatrix<C64>, sign: f64) -> DMatrix<C64> {
    let nt = lambda.len();
    let t_end = dt * (nt - 1) as f64;
    let mut c = DMatrix::zeros(freq.len(), nt);
    for (k, &s) in freq.iter().enumerate() {
        let mut ck = C64::from_polar(1.0, -sign * (s * t_end + lambda[nt - 1])) * h[k];
        c[(k, nt - 1)] = ck;
        for j in (0..nt - 1).rev() {
            let rate = sign * (s * dt + lambda[j + 1] - lambda[j]);
            let (a, b) = interval_weights(I * rate);
            ck = C64::from_polar(1.0, rate) * ck + I * dt * (a * g[(k, j)] + b * g[(k, j + 1)]);
            c[(k, j)] = ck;
        }
    }
    c
}

/// `int_t^T e^{-i(t-s)H_0} e^{-+i int_s^t l} P_+- g(s) ds` on the time grid.
///
/// `forcing` holds `g` at each node (only its `P_c` part contributes) and `ell`
/// the scalar phase rate `l`.
pub fn tilde_f_c(cs: &ContinuousSpectrum, dt: f64, ell: &[f64], forcing: &[VecField]) -> Result<Vec<VecField>> {
    if ell.len() != forcing.len() || forcing.len() < 2 {
        return Err(Error::InvalidParameter("need matching phase and forcing sequences of length >= 2".into()));
    }
    let (gp, gm) = cs.coefficients_many(forcing)?;
    let lambda = cumulative_trapezoid(ell, dt);
    let freq: Vec<f64> = cs.frequencies().iter().copied().collect();
    let zero = vec![C64::default(); freq.len()];
    // c = i * integral when the terminal data vanish
    let scale = C64::new(0.0, -1.0);
    let cp = duhamel_backward(&freq, &lambda, dt, &zero, &gp, 1.0) * scale;
    let cm = duhamel_backward(&freq, &lambda, dt, &zero, &gm, -1.0) * scale;
    Ok(cs.synthesize_many(&cp, &cm))
}

/// The discretized fixed point.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub omega0: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub omega: Vec<f64>,
    /// Modulation phase; the total phase is `theta = int omega + gamma`.
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub z_plus: Vec<f64>,
    pub z_minus: Vec<f64>,
    pub ell: Vec<f64>,
    pub omega_dot: Vec<f64>,
    pub gamma_dot: Vec<f64>,
    pub c_plus: DMatrix<C64>,
    pub c_minus: DMatrix<C64>,
    f_c: Vec<VecField>,
}

impl DiscreteSystem {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn f_c(&self, j: usize) -> &VecField {
        &self.f_c[j]
    }

    pub fn f_c_all(&self) -> &[VecField] {
        &self.f_c
    }

    /// Modulation state at node `j`, with `f_d` completed at `omega(t_j)`.
    pub fn state(&self, frame: &Frame, j: usize) -> Result<ModState> {
        frame.assemble(self.omega[j], self.theta[j], self.z_plus[j], self.z_minus[j], self.f_c[j].clone())
    }

    pub fn initial_field(&self, frame: &Frame) -> Result<Vec<C64>> {
        frame.reconstruct(&self.state(frame, 0)?)
    }

    /// Largest even-symmetry and `sigma_1`-conjugation defect over the sequence.
    pub fn symmetry_defect(&self) -> f64 {
        self.f_c.iter().map(|f| f.sigma1_conj_defect().max(f.even_defect())).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "omega", "gamma", "z_plus", "z_minus", "ell", "fc_l2"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for j in 0..self.len() {
            let row = [
                self.times[j],
                self.omega[j],
                self.gamma[j],
                self.z_plus[j],
                self.z_minus[j],
                self.ell[j],
                self.f_c[j].norm_l2(),
            ];
            out.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerRun {
    pub outer: usize,
    pub iterations: usize,
    pub changes: Vec<f64>,
    /// Largest ratio of successive changes while above the round-off floor.
    pub contraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailBounds {
    /// `e^{-mu(omega_0) T}`: size of the truncated unstable-mode tail.
    pub exp_mu_t: f64,
    /// `||F(T)|| / sup_t ||F(t)||`.
    pub forcing_end_ratio: f64,
    /// `T ||F(T)||`, a bound for the truncated Duhamel tail if `||F||` decays like `1/t`.
    pub duhamel_tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub converged: bool,
    pub outer_iterations: usize,
    pub outer_residuals: Vec<f64>,
    pub inner: Vec<InnerRun>,
    /// Contraction factor of the first inner run (from the free iterate).
    pub contraction: f64,
    pub max_contraction: f64,
    pub tail: TailBounds,
    pub symmetry_defect: f64,
    pub z_plus0: f64,
    pub horizon: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub system: DiscreteSystem,
    pub report: PicardReport,
}

/// Cached quantities at one time node for a fixed frequency sequence.
struct Node {
    pr: Profiles,
    xi: VecField,
    dxi: VecField,
    completion: DMatrix<C64>,
    mu: f64,
}

#[derive(Clone)]
struct Unknowns {
    gamma: Vec<f64>,
    z_plus: Vec<f64>,
    z_minus: Vec<f64>,
    c_plus: DMatrix<C64>,
    c_minus: DMatrix<C64>,
}

struct Solver<'a> {
    frame: &'a Frame,
    cs: &'a ContinuousSpectrum,
    seed: &'a SeedData,
    dt: f64,
    nt: usize,
    freq: Vec<f64>,
    h_plus: Vec<C64>,
    h_minus: Vec<C64>,
    /// `phi_{omega_0}^{p-1}`.
    q0: Vec<f64>,
}

impl Solver<'_> {
    fn nodes(&self, omega: &[f64]) -> Result<Vec<Node>> {
        omega
            .iter()
            .map(|&w| {
                let pr = self.frame.profiles(w);
                let (xi, dxi) = self.frame.xi(w);
                let completion = self.frame.completion(&pr, &xi)?;
                Ok(Node { pr, xi, dxi, completion, mu: self.frame.mu(w) })
            })
            .collect()
    }

    fn free(&self) -> Unknowns {
        let nt = self.nt;
        let m = self.freq.len();
        let c_plus = DMatrix::from_fn(m, nt, |k, j| C64::from_polar(1.0, -self.freq[k] * j as f64 * self.dt) * self.h_plus[k]);
        let c_minus = DMatrix::from_fn(m, nt, |k, j| C64::from_polar(1.0, self.freq[k] * j as f64 * self.dt) * self.h_minus[k]);
        Unknowns {
            gamma: vec![self.seed.gamma0; nt],
            z_plus: vec![0.0; nt],
            z_minus: vec![self.seed.z_minus0; nt],
            c_plus,
            c_minus,
        }
    }

    /// Rates and forcing `F` at one node.
    fn forcing(&self, node: &Node, zp: f64, zm: f64, f_c: &VecField) -> Result<(ModRates, VecField)> {
        let fr = self.frame;
        let p = fr.p();
        let pr = &node.pr;
        let omega = pr.omega;
        let f_d = fr.complete_with(&node.completion, pr, &node.xi, f_c);
        let f = f_c + &f_d;
        let mut r = f.clone();
        r.axpy(C64::new(zp, 0.0), &node.xi);
        r.axpy(C64::new(zm, 0.0), &node.xi.sigma1());
        let (rates, nv) = fr.rates_with(pr, &node.xi, &node.dxi, &r)?;
        let (od, gd) = (rates.omega_dot, rates.gamma_dot);
        let gp = rates.z_plus_dot - node.mu * zp;
        let gm = rates.z_minus_dot + node.mu * zm;
        let dw = omega - self.seed.omega0;
        let n = fr.grid().len();
        let (mut fa, mut fb) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let (xa, xb, dxa, dxb) = (node.xi.a(), node.xi.b(), node.dxi.a(), node.dxi.b());
        for k in 0..n {
            let (ua, ub) = (f.a()[k], f.b()[k]);
            let dq = power(pr.phi[k], p - 1.0) - self.q0[k];
            let (da, db) = (0.5 * (p + 1.0) * dq, 0.5 * (p - 1.0) * dq);
            let phi = pr.phi[k];
            let common = -I * od * pr.d_phi[k];
            fa.push(
                dw * ua - da * ua - db * ub + gd * (phi + r.a()[k]) + common + nv.a()[k]
                    - I * (gp * xa[k] + gm * xb[k])
                    - I * od * (zp * dxa[k] + zm * dxb[k]),
            );
            fb.push(
                -dw * ub + db * ua + da * ub - gd * (phi + r.b()[k]) + common + nv.b()[k]
                    - I * (gp * xb[k] + gm * xa[k])
                    - I * od * (zp * dxb[k] + zm * dxa[k]),
            );
        }
        Ok((rates, VecField::new(fr.grid(), fa, fb)?))
    }

    /// One application of the inner map for the frequency sequence `omega`.
    fn apply(
        &self,
        nodes: &[Node],
        omega: &[f64],
        u: &Unknowns,
        fields: &[VecField],
    ) -> Result<(Unknowns, Vec<ModRates>, Vec<f64>, Vec<f64>)> {
        let nt = self.nt;
        let dt = self.dt;
        let mut rates = Vec::with_capacity(nt);
        let mut forcing = Vec::with_capacity(nt);
        for j in 0..nt {
            let (rt, fj) = self.forcing(&nodes[j], u.z_plus[j], u.z_minus[j], &fields[j])?;
            rates.push(rt);
            forcing.push(fj);
        }
        let forcing_norms: Vec<f64> = forcing.iter().map(|f| f.norm_l2()).collect();
        let (fp, fm) = self.cs.coefficients_many(&forcing)?;
        drop(forcing);
        let ell: Vec<f64> = (0..nt).map(|j| omega[j] - self.seed.omega0 + rates[j].gamma_dot).collect();
        let lambda = cumulative_trapezoid(&ell, dt);
        let mut gp = fp;
        let mut gm = fm;
        for j in 0..nt {
            let l = C64::new(ell[j], 0.0);
            for k in 0..self.freq.len() {
                gp[(k, j)] -= l * u.c_plus[(k, j)];
                gm[(k, j)] += l * u.c_minus[(k, j)];
            }
        }
        let c_plus = duhamel_backward(&self.freq, &lambda, dt, &self.h_plus, &gp, 1.0);
        let c_minus = duhamel_backward(&self.freq, &lambda, dt, &self.h_minus, &gm, -1.0);

        let g_plus: Vec<f64> = (0..nt).map(|j| rates[j].z_plus_dot - nodes[j].mu * u.z_plus[j]).collect();
        let g_minus: Vec<f64> = (0..nt).map(|j| rates[j].z_minus_dot + nodes[j].mu * u.z_minus[j]).collect();
        let mut z_plus = vec![0.0; nt];
        for j in (0..nt - 1).rev() {
            let m = 0.5 * (nodes[j].mu + nodes[j + 1].mu) * dt;
            let (a, b) = interval_weights(C64::new(-m, 0.0));
            z_plus[j] = (-m).exp() * z_plus[j + 1] - dt * (a.re * g_plus[j] + b.re * g_plus[j + 1]);
        }
        let mut z_minus = vec![self.seed.z_minus0; nt];
        for j in 0..nt - 1 {
            let m = 0.5 * (nodes[j].mu + nodes[j + 1].mu) * dt;
            let (a, b) = interval_weights(C64::new(-m, 0.0));
            z_minus[j + 1] = (-m).exp() * z_minus[j] + dt * (b.re * g_minus[j] + a.re * g_minus[j + 1]);
        }
        let gd: Vec<f64> = rates.iter().map(|r| r.gamma_dot).collect();
        let gamma = cumulative_trapezoid(&gd, dt).into_iter().map(|g| g + self.seed.gamma0).collect();
        Ok((Unknowns { gamma, z_plus, z_minus, c_plus, c_minus }, rates, ell, forcing_norms))
    }
}

/// Solves the discretized integral system on `[0, horizon]`.
///
/// Inner loop: the map on `(z_+, z_-, gamma, f_c)` for a frozen `omega(.)`,
/// iterated to a sup-norm change below `inner_tol`. Outer loop: damped update of
/// `omega(.)` towards `omega(0) + int omega'`. Failure of the outer loop to
/// settle within `max_outer` cycles is reported, not raised.
pub fn picard_solve(
    frame: &Frame,
    cs: &ContinuousSpectrum,
    seed: &SeedData,
    horizon: f64,
    opts: &PicardOptions,
) -> Result<PicardResult> {
    seed.validate(frame, opts.c_h1)?;
    if cs.grid() != frame.grid() {
        return Err(Error::GridMismatch);
    }
    if (cs.omega() - frame.omega0()).abs() > 1e-14 * frame.omega0() {
        return Err(Error::Precondition("continuum computed at a different reference frequency".into()));
    }
    let mu0 = frame.mu(frame.omega0());
    if !((-mu0 * horizon).exp() < 1e-8) {
        return Err(Error::Precondition(format!(
            "horizon {horizon} too short: e^(-mu T) = {:.3e} is not below 1e-8",
            (-mu0 * horizon).exp()
        )));
    }
    if !(opts.dt > 0.0 && opts.dt < horizon && opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter("need 0 < dt < T and damping in (0, 1]".into()));
    }
    let steps = (horizon / opts.dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let nt = steps + 1;
    let h = cs.coefficients(&seed.h0)?;
    let q0 = frame.profiles(frame.omega0()).phi.iter().map(|&f| power(f, frame.p() - 1.0)).collect();
    let solver = Solver {
        frame,
        cs,
        seed,
        dt,
        nt,
        freq: cs.frequencies().iter().copied().collect(),
        h_plus: h.plus,
        h_minus: h.minus,
        q0,
    };
    let omega_start = seed.omega0 + seed.delta_omega;
    let mut omega = vec![omega_start; nt];
    let mut u = solver.free();
    let mut fields = cs.synthesize_many(&u.c_plus, &u.c_minus);
    let mut inner_runs = Vec::new();
    let mut outer_residuals = Vec::new();
    let mut converged = false;
    let mut last_rates = Vec::new();
    let mut last_ell = Vec::new();
    let mut last_forcing = Vec::new();
    let mut symmetry: f64 = 0.0;
    for outer in 0..opts.max_outer {
        let nodes = solver.nodes(&omega)?;
        let mut changes: Vec<f64> = Vec::new();
        let mut contraction: f64 = 0.0;
        let mut settled = false;
        for _ in 0..opts.max_inner {
            let (next, rates, ell, fnorm) = solver.apply(&nodes, &omega, &u, &fields)?;
            let next_fields = cs.synthesize_many(&next.c_plus, &next.c_minus);
            let df = next_fields
                .iter()
                .zip(&fields)
                .map(|(a, b)| (a - b).norm_l2())
                .fold(0.0, f64::max);
            let change = df
                .max(sup_diff(&next.z_plus, &u.z_plus))
                .max(sup_diff(&next.z_minus, &u.z_minus))
                .max(sup_diff(&next.gamma, &u.gamma));
            if !change.is_finite() {
                return Err(Error::NumericalBlowUp("non-finite inner iterate".into()));
            }
            if let Some(&prev) = changes.last() {
                if prev > 10.0 * opts.inner_tol {
                    let ratio = change / prev;
                    contraction = contraction.max(ratio);
                    if ratio >= 1.0 {
                        return Err(Error::NotContracting(format!(
                            "inner change ratio {ratio:.3} at outer cycle {outer} (change {change:.3e}); eps too large"
                        )));
                    }
                }
            }
            changes.push(change);
            u = next;
            fields = next_fields;
            last_rates = rates;
            last_ell = ell;
            last_forcing = fnorm;
            if change < opts.inner_tol {
                settled = true;
                break;
            }
        }
        inner_runs.push(InnerRun { outer, iterations: changes.len(), changes, contraction });
        if !settled {
            return Err(Error::NotContracting(format!(
                "inner loop did not reach {:.1e} in {} iterations",
                opts.inner_tol, opts.max_inner
            )));
        }
        symmetry = symmetry.max(fields.iter().map(|f| f.sigma1_conj_defect().max(f.even_defect())).fold(0.0, f64::max));
        let od: Vec<f64> = last_rates.iter().map(|r| r.omega_dot).collect();
        let target: Vec<f64> = cumulative_trapezoid(&od, dt).iter().map(|w| omega_start + w).collect();
        let residual = sup_diff(&target, &omega);
        outer_residuals.push(residual);
        if opts.damping * residual < opts.outer_tol {
            converged = true;
            break;
        }
        for (w, t) in omega.iter_mut().zip(&target) {
            *w += opts.damping * (t - *w);
        }
    }
    let times: Vec<f64> = (0..nt).map(|j| j as f64 * dt).collect();
    let theta: Vec<f64> = cumulative_trapezoid(&omega, dt).iter().zip(&u.gamma).map(|(a, g)| a + g).collect();
    let fmax = last_forcing.iter().copied().fold(0.0, f64::max);
    let fend = last_forcing.last().copied().unwrap_or(0.0);
    let tail = TailBounds {
        exp_mu_t: (-mu0 * horizon).exp(),
        forcing_end_ratio: if fmax > 0.0 { fend / fmax } else { 0.0 },
        duhamel_tail: horizon * fend,
    };
    let contraction = inner_runs.first().map_or(0.0, |r| r.contraction);
    let max_contraction = inner_runs.iter().map(|r| r.contraction).fold(0.0, f64::max);
    let system = DiscreteSystem {
        omega0: seed.omega0,
        dt,
        times,
        omega,
        gamma: u.gamma,
        theta,
        z_plus: u.z_plus,
        z_minus: u.z_minus,
        ell: last_ell,
        omega_dot: last_rates.iter().map(|r| r.omega_dot).collect(),
        gamma_dot: last_rates.iter().map(|r| r.gamma_dot).collect(),
        c_plus: u.c_plus,
        c_minus: u.c_minus,
        f_c: fields,
    };
    let report = PicardReport {
        converged,
        outer_iterations: outer_residuals.len(),
        outer_residuals,
        inner: inner_runs,
        contraction,
        max_contraction,
        tail,
        symmetry_defect: symmetry,
        z_plus0: system.z_plus[0],
        horizon,
        nodes: nt,
    };
    Ok(PicardResult { system, report })
}
