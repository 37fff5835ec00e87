//! Points of the center-stable set near the ground-state family.
//!
//! Two constructions:
//! * `shoot`: bisection on the unstable coordinate `z_+(0) = a`. Data with
//!   `a` above the critical value leave the neighbourhood on one side, data
//!   below on the other. Because any residual error in the unstable direction
//!   grows like `e^{mu t}`, a long on-manifold trajectory is produced in
//!   segments, re-solving for the unstable coordinate at each segment start.
//! * `picard_solve`: a fixed point of the integral form of the modulation
//!   system on `[0, T]`, with the unstable coordinate integrated backwards
//!   from `T` and the stable one forwards from `0`.

use serde::Serialize;

mod picard;

pub use picard::{
    picard_solve, tilde_f_c, DiscreteSystem, InnerRun, PicardOptions, PicardReport, PicardResult, TailBounds,
};

use crate::error::{Error, Result};
use crate::evolve::{evolve_and_track, EvolveOptions, Snapshot, Status, TrackPoint, Trajectory};
use crate::grid::{VecField, C64};
use crate::modulation::{Frame, ModState};

/// Parameters of a point on the hyperplane transversal to the unstable direction.
#[derive(Clone, Debug)]
pub struct SeedData {
    pub omega0: f64,
    pub gamma0: f64,
    /// `omega(0) - omega_0`.
    pub delta_omega: f64,
    pub z_minus0: f64,
    /// Continuous part at `t = 0`, in `range P_c(omega_0)`.
    pub h0: VecField,
    pub eps: f64,
}

impl SeedData {
    pub fn zero(frame: &Frame, gamma0: f64, eps: f64) -> Self {
        Self {
            omega0: frame.omega0(),
            gamma0,
            delta_omega: 0.0,
            z_minus0: 0.0,
            h0: VecField::zeros(frame.grid()),
            eps,
        }
    }

    /// Checks the smallness conditions with `||h_0||_{H^1} < c_h1 eps`.
    pub fn validate(&self, frame: &Frame, c_h1: f64) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps = {}", self.eps)));
        }
        if (self.omega0 - frame.omega0()).abs() > 1e-14 * self.omega0 {
            return Err(Error::Precondition("seed and frame reference frequencies differ".into()));
        }
        if self.h0.grid() != frame.grid() {
            return Err(Error::GridMismatch);
        }
        let small = self.z_minus0.abs() + self.delta_omega.abs();
        if small >= self.eps / 5.0 {
            return Err(Error::Precondition(format!(
                "|z_-(0)| + |omega(0) - omega_0| = {small:.3e} not below eps/5"
            )));
        }
        let h1 = self.h0.norm_h1();
        if h1 >= c_h1 * self.eps {
            return Err(Error::Precondition(format!("||h_0||_H1 = {h1:.3e} not below {c_h1} eps")));
        }
        let scale = self.h0.max_abs().max(1e-300);
        if frame.projector0().project_d(&self.h0)?.max_abs() > 1e-9 * scale {
            return Err(Error::Precondition("h_0 is not in the continuous subspace".into()));
        }
        if self.h0.sigma1_conj_defect() > 1e-12 * scale {
            return Err(Error::Precondition("h_0 lacks the sigma_1-conjugation symmetry".into()));
        }
        Ok(())
    }

    /// Continuous-subspace bump `P_c(omega_0)(u, conj u)` with
    /// `u = e^{i phase} e^{-x^2/width^2} cos(k0 x)`, scaled to the given `H^1` norm.
    pub fn bump(frame: &Frame, h1_norm: f64, width: f64, k0: f64, phase: f64) -> Result<VecField> {
        if !(width > 0.0 && h1_norm >= 0.0 && h1_norm.is_finite()) {
            return Err(Error::InvalidParameter(format!("bump width {width}, norm {h1_norm}")));
        }
        let rot = C64::from_polar(1.0, phase);
        let u: Vec<C64> = frame
            .grid()
            .x()
            .iter()
            .map(|&x| rot * ((-(x / width).powi(2)).exp() * (k0 * x).cos()))
            .collect();
        let h = frame.projector0().project_c(&VecField::from_scalar(frame.grid(), &u))?.symmetrize_sigma1_conj();
        let n = h.norm_h1();
        Ok(h.scaled(C64::new(h1_norm / n, 0.0)))
    }

    pub fn with_gamma(&self, gamma0: f64) -> Self {
        Self { gamma0, ..self.clone() }
    }
}

/// Modulation state with `z_+(0) = a` on the seed's hyperplane point.
pub fn initial_state(frame: &Frame, seed: &SeedData, a: f64) -> Result<ModState> {
    frame.assemble(seed.omega0 + seed.delta_omega, seed.gamma0, a, seed.z_minus0, seed.h0.clone())
}

pub fn initial_field(frame: &Frame, seed: &SeedData, a: f64) -> Result<Vec<C64>> {
    frame.reconstruct(&initial_state(frame, seed, a)?)
}

#[derive(Clone, Debug)]
pub struct ShootOptions {
    pub evolve: EvolveOptions,
    /// Bracket width at which bisection stops (the floating-point limit
    /// stops it earlier if reached).
    pub tol: f64,
    pub max_bisections: usize,
    /// Length of an accepted on-manifold segment.
    pub segment: f64,
    /// Look-ahead used to fix the unstable coordinate at a segment start.
    pub lookahead: f64,
    /// Escape declared at `|z_+| > escape_factor * eps`.
    pub escape_factor: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            evolve: EvolveOptions::default(),
            tol: 1e-13,
            max_bisections: 80,
            segment: 4.0,
            lookahead: 10.0,
            escape_factor: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Up,
    Down,
}

/// Re-solve of the unstable coordinate at the start of a segment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Correction {
    pub t: f64,
    pub delta: f64,
    pub trials: usize,
}

#[derive(Clone, Debug)]
pub struct ShootResult {
    pub a_star: f64,
    pub bracket: (f64, f64),
    pub bisections: usize,
    pub trajectory: Trajectory,
    pub corrections: Vec<Correction>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShootSummary {
    pub a_star: f64,
    pub bracket_width: f64,
    pub bisections: usize,
    pub status: Status,
    pub t_end: f64,
    pub sup_omega_deviation: f64,
    pub sup_z_plus: f64,
    pub total_correction: f64,
    pub corrections: Vec<Correction>,
}

impl ShootResult {
    pub fn summary(&self) -> ShootSummary {
        let pts = &self.trajectory.points;
        let w0 = pts.first().map_or(0.0, |q| q.omega);
        ShootSummary {
            a_star: self.a_star,
            bracket_width: self.bracket.1 - self.bracket.0,
            bisections: self.bisections,
            status: self.trajectory.status,
            t_end: self.trajectory.t_end,
            sup_omega_deviation: pts.iter().map(|q| (q.omega - w0).abs()).fold(0.0, f64::max),
            sup_z_plus: pts.iter().map(|q| q.z_plus.abs()).fold(0.0, f64::max),
            total_correction: self.corrections.iter().map(|c| c.delta.abs()).sum(),
            corrections: self.corrections.clone(),
        }
    }
}

struct Shooter<'a> {
    frame: &'a Frame,
    opts: &'a ShootOptions,
    eps: f64,
}

impl Shooter<'_> {
    fn options(&self, guess: (f64, f64), snapshot_times: Vec<f64>) -> EvolveOptions {
        EvolveOptions {
            escape_threshold: Some(self.opts.escape_factor * self.eps),
            tube_radius: Some(self.eps),
            guess: Some(guess),
            snapshot_times,
            keep_states: false,
            ..self.opts.evolve.clone()
        }
    }

    fn run(&self, u: &[C64], horizon: f64, guess: (f64, f64)) -> Result<Trajectory> {
        let g = self.frame.grid();
        evolve_and_track(g, self.frame.p(), u, horizon, Some(self.frame), &self.options(guess, Vec::new()))
    }

    /// Escape direction of the trajectory from `u`; survivors are classified
    /// by the sign of `z_+` at the horizon.
    fn classify(&self, u: &[C64], horizon: f64, guess: (f64, f64)) -> Result<(Side, f64)> {
        let tr = self.run(u, horizon, guess)?;
        let last = tr.points.last().map_or(0.0, |q| q.z_plus);
        let side = match tr.status {
            Status::EscapedUp => Side::Up,
            Status::EscapedDown => Side::Down,
            Status::Running | Status::Converged if last >= 0.0 => Side::Up,
            Status::Running | Status::Converged => Side::Down,
            _ if tr.exit_z_plus.is_some() => {
                if tr.exit_z_plus.unwrap_or(0.0) >= 0.0 {
                    Side::Up
                } else {
                    Side::Down
                }
            }
            s => {
                return Err(Error::Inconclusive(format!(
                    "trajectory ended with {s:?} at t = {:.3} before classification; shrink eps or enlarge the grid",
                    tr.t_end
                )))
            }
        };
        Ok((side, last))
    }

    /// Newton iteration for the shift `delta` of `z_+` at a segment start
    /// that removes the growing mode over the look-ahead window.
    ///
    /// A trial from `z_+ + delta` is followed while `|z_+| < eps/2`; at the last
    /// such instant `t*` the growing part is `~ e^{mu t*}` times the remaining
    /// error in `delta`, which gives the update `-z_+(t*) e^{-mu t*}`. It is
    /// accepted once small and `t*` covers at least half the look-ahead. The
    /// on-manifold size of `z_+` (order `eps^2`) limits the accuracy to
    /// `eps^2 e^{-mu lookahead}`.
    fn correct(&self, state: &ModState) -> Result<(f64, usize)> {
        let guess = (state.omega, state.gamma);
        let mu = self.frame.mu(state.omega);
        let mut delta = 0.0;
        for trial in 1..=Self::MAX_CORRECTIONS {
            let mut s = state.clone();
            s.z_plus += delta;
            let tr = self.run(&self.frame.reconstruct(&s)?, self.opts.lookahead, guess)?;
            let linear = tr.points.iter().take_while(|q| q.z_plus.abs() < 0.5 * self.eps).last();
            let Some(q) = linear.filter(|q| q.t > 0.0) else {
                return Err(Error::Inconclusive("look-ahead trial left the tube immediately".into()));
            };
            let step = -q.z_plus * (-mu * q.t).exp();
            delta += step;
            // rounding alone reaches eps/2 within ~ln(eps/1e-16)/mu, so only half
            // the look-ahead is required to stay inside
            if q.t >= 0.5 * self.opts.lookahead && step.abs() <= 1e-3 * delta.abs().max(self.eps * self.eps * (-mu * q.t).exp()) {
                return Ok((delta, trial));
            }
        }
        Err(Error::Inconclusive(format!(
            "unstable coordinate not fixed after {} look-ahead trials",
            Self::MAX_CORRECTIONS
        )))
    }
}

impl Shooter<'_> {
    const MAX_CORRECTIONS: usize = 12;
}

/// Bisection on `z_+(0)` over `a_range`, then a segmented on-manifold
/// trajectory up to `horizon`.
pub fn shoot(frame: &Frame, seed: &SeedData, a_range: (f64, f64), horizon: f64, opts: &ShootOptions) -> Result<ShootResult> {
    let (mut lo, mut hi) = a_range;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::BadBracket(format!("interval [{lo}, {hi}]")));
    }
    if !(horizon > 0.0 && opts.segment > 0.0 && opts.lookahead >= opts.segment) {
        return Err(Error::InvalidParameter("need horizon > 0 and lookahead >= segment > 0".into()));
    }
    let sh = Shooter { frame, opts, eps: seed.eps };
    let guess = (seed.omega0 + seed.delta_omega, seed.gamma0);
    let mu = frame.mu(seed.omega0);
    // long enough for an offset of `tol` to reach the escape threshold
    let class_horizon = ((opts.escape_factor * seed.eps / opts.tol).ln() / mu + 1.0).max(opts.lookahead);
    let side = |a: f64| -> Result<Side> { Ok(sh.classify(&initial_field(frame, seed, a)?, class_horizon, guess)?.0) };
    let s_lo = side(lo)?;
    let s_hi = side(hi)?;
    if s_lo == s_hi {
        return Err(Error::BadBracket(format!("both ends of [{lo}, {hi}] escape {s_lo:?}")));
    }
    let mut bisections = 0;
    while hi - lo > opts.tol && bisections < opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if side(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }
    let a_star = 0.5 * (lo + hi);

    let mut u = initial_field(frame, seed, a_star)?;
    let mut guess = guess;
    let mut t0 = 0.0;
    let mut points: Vec<TrackPoint> = Vec::new();
    let mut corrections = Vec::new();
    let mut status = Status::Running;
    let mut note = None;
    let mut last: Option<Trajectory> = None;
    let mut gamma_offset = 0.0;
    let mut norms = crate::evolve::NormSummary::default();
    let mut snapshots = Vec::new();
    while t0 < horizon - 1e-12 {
        if t0 > 0.0 {
            let state = frame.decompose(&u, guess)?;
            let (delta, trials) = sh.correct(&state)?;
            let mut s = state;
            s.z_plus += delta;
            u = frame.reconstruct(&s)?;
            corrections.push(Correction { t: t0, delta, trials });
        }
        let len = opts.segment.min(horizon - t0);
        let first = points.is_empty();
        let snaps: Vec<f64> = opts
            .evolve
            .snapshot_times
            .iter()
            .filter(|&&s| (s > t0 + 1e-12 || first) && s <= t0 + len + 1e-12)
            .map(|s| (s - t0).clamp(0.0, len))
            .collect();
        let tr = evolve_and_track(frame.grid(), frame.p(), &u, len, Some(frame), &sh.options(guess, snaps))?;
        let skip = usize::from(!points.is_empty());
        // modulation phase continues across segments
        if let (Some(prev), Some(first)) = (points.last(), tr.points.first()) {
            gamma_offset = prev.gamma - first.gamma;
        }
        snapshots.extend(tr.snapshots.iter().map(|s| Snapshot { t: s.t + t0, u: s.u.clone() }));
        for q in tr.points.iter().skip(skip) {
            let mut q = *q;
            q.t += t0;
            q.gamma += gamma_offset;
            points.push(q);
        }
        if let Some(q) = tr.points.last() {
            guess = (q.omega, q.theta);
        }
        t0 += tr.t_end;
        norms = norms.merge(&tr.norms);
        u = tr.u_final.clone();
        let done = !matches!(tr.status, Status::Running | Status::Converged);
        if done {
            status = tr.status;
            note = tr.note.clone();
        }
        last = Some(tr);
        if done {
            break;
        }
    }
    let mut trajectory = last.ok_or_else(|| Error::InvalidParameter("empty horizon".into()))?;
    trajectory.points = points;
    trajectory.t_end = t0;
    trajectory.norms = norms;
    trajectory.snapshots = snapshots;
    trajectory.status = match status {
        Status::Running if crate::evolve::converged(&trajectory.points, Some(opts.escape_factor * seed.eps)) => {
            Status::Converged
        }
        s => s,
    };
    trajectory.note = note;
    trajectory.u_final = u;
    Ok(ShootResult { a_star, bracket: (lo, hi), bisections, trajectory, corrections })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMethod {
    Picard,
    Shoot,
}

/// `z_+(0)` of the point of the center-stable set above the hyperplane point
/// `(omega(0), gamma_0, z_-(0), h_0)`.
///
/// The Picard solution is used when it converges; otherwise, if `fallback`
/// is given, bisection with `h_0` taken as `f_c(0)` over `[-eps, eps]`.
pub fn graph_value(
    frame: &Frame,
    cs: &crate::linop::ContinuousSpectrum,
    seed: &SeedData,
    horizon: f64,
    opts: &PicardOptions,
    fallback: Option<&ShootOptions>,
) -> Result<(f64, GraphMethod)> {
    let picard = picard_solve(frame, cs, seed, horizon, opts);
    match (picard, fallback) {
        (Ok(r), _) if r.report.converged => Ok((r.report.z_plus0, GraphMethod::Picard)),
        (Ok(_), None) => Err(Error::Inconclusive("outer frequency iteration did not converge".into())),
        (Err(e), None) => Err(e),
        (Err(e), Some(_)) if e.is_precondition() => Err(e),
        (_, Some(so)) => {
            let r = shoot(frame, seed, (-seed.eps, seed.eps), so.lookahead, so)?;
            Ok((r.a_star, GraphMethod::Shoot))
        }
    }
}
