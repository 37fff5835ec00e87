//! Split-step Fourier integration of `i u_t + u_xx + |u|^{p-1} u = 0` with
//! optional tracking of the modulation coordinates.
//!
//! Strang splitting: half a nonlinear phase rotation, a full exact free step
//! in Fourier space, half a nonlinear rotation. Both pieces are unitary, so
//! the discrete mass is conserved to rounding; the energy is only monitored.
//! Consecutive half rotations are fused when no output is due in between.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, VecField, C64};
use crate::modulation::{Frame, ModState};
use crate::soliton;

/// `x^e`, with repeated multiplication when `e` is a small integer.
pub(crate) fn power(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// `u <- e^{i tau |u|^{p-1}} u`.
pub fn nonlinear_phase(u: &mut [C64], tau: f64, p: f64) {
    let e = 0.5 * (p - 1.0);
    for v in u.iter_mut() {
        *v *= C64::from_polar(1.0, tau * power(v.norm_sqr(), e));
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Second-order Strang splitting.
    #[default]
    Strang,
    /// Fourth-order triple-jump composition of three Strang steps.
    Yoshida4,
}

impl Scheme {
    /// Sub-step weights of one step.
    fn weights(self) -> Vec<f64> {
        match self {
            Scheme::Strang => vec![1.0],
            Scheme::Yoshida4 => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                vec![w1, -c * w1, w1]
            }
        }
    }
}

/// Precomputed free propagators `e^{-i k^2 w dt}` for a fixed step.
#[derive(Clone, Debug)]
pub struct Stepper {
    grid: Grid,
    p: f64,
    dt: f64,
    weights: Vec<f64>,
    linear: Vec<Vec<C64>>,
}

impl Stepper {
    pub fn new(grid: &Grid, p: f64, dt: f64) -> Result<Self> {
        Self::with_scheme(grid, p, dt, Scheme::Strang)
    }

    pub fn with_scheme(grid: &Grid, p: f64, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        let weights = scheme.weights();
        let linear = weights
            .iter()
            .map(|w| grid.wavenumbers().iter().map(|&k| C64::from_polar(1.0, -k * k * w * dt)).collect())
            .collect();
        Ok(Self { grid: grid.clone(), p, dt, weights, linear })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn free(&self, u: &mut [C64], sub: usize) {
        self.grid.fft(u);
        u.iter_mut().zip(&self.linear[sub]).for_each(|(v, e)| *v *= e);
        self.grid.ifft(u);
    }

    /// `steps` steps with fused adjacent half rotations.
    pub fn advance(&self, u: &mut [C64], steps: usize) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let w = &self.weights;
        let m = w.len();
        nonlinear_phase(u, 0.5 * w[0] * self.dt, self.p);
        for s in 0..steps {
            for j in 0..m {
                self.free(u, j);
                let next = if j + 1 < m {
                    w[j + 1]
                } else if s + 1 < steps {
                    w[0]
                } else {
                    0.0
                };
                nonlinear_phase(u, 0.5 * (w[j] + next) * self.dt, self.p);
            }
        }
        if u.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NumericalBlowUp("non-finite field after split step".into()))
        }
    }
}

/// One Strang step of length `dt` (negative `dt` integrates backwards).
pub fn step(grid: &Grid, u: &[C64], dt: f64, p: f64) -> Result<Vec<C64>> {
    if u.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: u.len() });
    }
    let peak = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let defect = (1..grid.len()).map(|j| (u[j] - u[grid.mirror(j)]).norm()).fold(0.0, f64::max);
    if defect > 1e-8 * peak.max(1e-300) {
        return Err(Error::Precondition(format!("field is not even (defect {defect:.2e})")));
    }
    let mut v = u.to_vec();
    Stepper::new(grid, p, dt)?.advance(&mut v, 1)?;
    Ok(v)
}

/// `int |u|^2`.
pub fn mass(grid: &Grid, u: &[C64]) -> f64 {
    grid.mass(u)
}

/// `E(u) = 1/2 int |u_x|^2 - 1/(p+1) int |u|^{p+1}`.
pub fn energy(grid: &Grid, u: &[C64], p: f64) -> f64 {
    let ux = grid.derivative(u, 1);
    let kinetic: f64 = ux.iter().map(|v| v.norm_sqr()).sum();
    let potential: f64 = u.iter().map(|v| power(v.norm_sqr(), 0.5 * (p + 1.0))).sum();
    grid.dx() * (0.5 * kinetic - potential / (p + 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Running,
    Converged,
    EscapedUp,
    EscapedDown,
    BlowUp,
    Wrapped,
}

impl Status {
    pub fn is_escape(self) -> bool {
        matches!(self, Status::EscapedUp | Status::EscapedDown)
    }

    fn escape(z_plus: f64) -> Self {
        if z_plus >= 0.0 {
            Status::EscapedUp
        } else {
            Status::EscapedDown
        }
    }
}

/// One row of the coordinate log. `theta` is the total phase, `gamma`
/// the modulation phase `theta - int_0^t omega`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub omega: f64,
    pub gamma: f64,
    pub z_plus: f64,
    pub z_minus: f64,
    pub fc_h1: f64,
    pub fc_weighted: f64,
    pub mass: f64,
    pub energy: f64,
    pub theta: f64,
}

/// Running sums for the space-time norms of the remainder, sampled at the
/// tracking instants with the rectangle rule.
#[derive(Clone, Debug, Default)]
pub struct NormAccumulator {
    q: f64,
    p: f64,
    l4_linf: f64,
    lq_w: f64,
    weighted: f64,
    linf_h1: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct NormSummary {
    pub q: f64,
    /// `||R||_{L^inf_t H^1}`
    pub linf_h1: f64,
    /// `||R||_{L^4_t L^inf_x}`
    pub l4_linf: f64,
    /// `||R||_{L^q_t W^{1,2p}_x}`, `q = 4p/(p-1)`
    pub lq_w1_2p: f64,
    /// `||<x>^{-2} f_c||_{L^2_t L^2_x}`
    pub weighted_fc: f64,
}

impl NormAccumulator {
    pub fn new(p: f64) -> Self {
        Self { q: 4.0 * p / (p - 1.0), p, ..Default::default() }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn add(&mut self, grid: &Grid, r: &[C64], fc_weighted: f64, dt: f64) {
        let sup = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let rx = grid.derivative(r, 1);
        let lp = |f: &[C64]| (grid.dx() * f.iter().map(|v| power(v.norm_sqr(), self.p)).sum::<f64>()).powf(0.5 / self.p);
        let w = lp(r) + lp(&rx);
        self.l4_linf += dt * sup.powi(4);
        self.lq_w += dt * w.powf(self.q);
        self.weighted += dt * fc_weighted * fc_weighted;
        let h1 = (2.0 * grid.sobolev_sq(r, 1)).sqrt();
        self.linf_h1 = self.linf_h1.max(h1);
    }

    pub fn summary(&self) -> NormSummary {
        NormSummary {
            q: self.q,
            linf_h1: self.linf_h1,
            l4_linf: self.l4_linf.powf(0.25),
            lq_w1_2p: self.lq_w.powf(1.0 / self.q),
            weighted_fc: self.weighted.sqrt(),
        }
    }
}

impl NormSummary {
    /// Norms over the union of two disjoint time intervals.
    pub fn merge(&self, other: &NormSummary) -> NormSummary {
        let q = if self.q > 0.0 { self.q } else { other.q };
        NormSummary {
            q,
            linf_h1: self.linf_h1.max(other.linf_h1),
            l4_linf: (self.l4_linf.powi(4) + other.l4_linf.powi(4)).powf(0.25),
            lq_w1_2p: (self.lq_w1_2p.powf(q) + other.lq_w1_2p.powf(q)).powf(1.0 / q),
            weighted_fc: self.weighted_fc.hypot(other.weighted_fc),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub dt: f64,
    pub scheme: Scheme,
    /// Time between decompositions (and conservation samples).
    pub track_interval: f64,
    /// `|z_+|` above this declares escape.
    pub escape_threshold: Option<f64>,
    /// Records the first time `|z_+|` or `|omega - omega_0|` exceeds it.
    pub tube_radius: Option<f64>,
    pub wrap_fraction: f64,
    pub wrap_threshold: f64,
    pub blowup_factor: f64,
    /// Relative energy drift treated as unresolved collapse.
    pub energy_guard: f64,
    pub snapshot_times: Vec<f64>,
    pub keep_states: bool,
    /// Newton seed `(omega, theta)` for the first decomposition.
    pub guess: Option<(f64, f64)>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: Grid::DEFAULT_DT,
            scheme: Scheme::Strang,
            track_interval: 0.1,
            escape_threshold: None,
            tube_radius: None,
            wrap_fraction: 0.1,
            wrap_threshold: 1e-4,
            blowup_factor: 10.0,
            energy_guard: 1e-3,
            snapshot_times: Vec::new(),
            keep_states: false,
            guess: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    #[serde(skip)]
    pub u: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub p: f64,
    pub dt: f64,
    pub tracked: bool,
    pub points: Vec<TrackPoint>,
    pub states: Vec<ModState>,
    pub status: Status,
    pub t_end: f64,
    pub u_final: Vec<C64>,
    pub snapshots: Vec<Snapshot>,
    pub norms: NormSummary,
    pub tube_exit: Option<f64>,
    /// `z_+` at the tube exit; its sign is the escape direction.
    pub exit_z_plus: Option<f64>,
    /// Message attached to a terminal status.
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySummary {
    pub status: Status,
    pub t_end: f64,
    pub samples: usize,
    pub p: f64,
    pub dt: f64,
    pub half_length: f64,
    pub points: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub omega_final: Option<f64>,
    pub gamma_final: Option<f64>,
    pub sup_omega_deviation: Option<f64>,
    pub sup_z_plus: Option<f64>,
    pub tube_exit: Option<f64>,
    pub norms: NormSummary,
    pub snapshot_times: Vec<f64>,
    pub note: Option<String>,
}

impl Trajectory {
    /// Largest relative mass deviation from the initial sample.
    pub fn mass_drift(&self) -> f64 {
        drift(self.points.iter().map(|q| q.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        drift(self.points.iter().map(|q| q.energy))
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|q| q.t).collect()
    }

    pub fn summary(&self) -> TrajectorySummary {
        let last = self.points.last().filter(|_| self.tracked);
        let first = self.points.first().filter(|_| self.tracked);
        TrajectorySummary {
            status: self.status,
            t_end: self.t_end,
            samples: self.points.len(),
            p: self.p,
            dt: self.dt,
            half_length: self.grid.half_length(),
            points: self.grid.len(),
            mass_drift: self.mass_drift(),
            energy_drift: self.energy_drift(),
            omega_final: last.map(|q| q.omega),
            gamma_final: last.map(|q| q.gamma),
            sup_omega_deviation: first
                .map(|f| self.points.iter().map(|q| (q.omega - f.omega).abs()).fold(0.0, f64::max)),
            sup_z_plus: first.map(|_| self.points.iter().map(|q| q.z_plus.abs()).fold(0.0, f64::max)),
            tube_exit: self.tube_exit,
            norms: self.norms,
            snapshot_times: self.snapshots.iter().map(|s| s.t).collect(),
            note: self.note.clone(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "omega", "gamma", "z_plus", "z_minus", "fc_h1", "fc_weighted_l2", "mass", "energy"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for q in &self.points {
            let row = [q.t, q.omega, q.gamma, q.z_plus, q.z_minus, q.fc_h1, q.fc_weighted, q.mass, q.energy];
            w.write_record(row.iter().map(|v| format!("{v:.17e}"))).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, s)?;
        Ok(())
    }

    /// One CSV per snapshot with columns `x, re u, im u`.
    pub fn write_snapshots(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for s in &self.snapshots {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("snapshot_t{:08.3}.csv", s.t)))?);
            writeln!(f, "x,re,im")?;
            for (x, v) in self.grid.x().iter().zip(&s.u) {
                writeln!(f, "{x:.17e},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

fn drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut it = values;
    let Some(v0) = it.next() else { return 0.0 };
    let scale = v0.abs().max(1e-300);
    it.map(|v| (v - v0).abs() / scale).fold(0.0, f64::max)
}

/// Largest soliton amplitude whose profile the grid still resolves.
pub fn resolvable_amplitude(grid: &Grid, p: f64) -> f64 {
    let omega_max = (grid.nyquist() / crate::grid::RESOLUTION_FACTOR).powi(2);
    soliton::amplitude(omega_max, p)
}

struct Tracker<'a> {
    frame: &'a Frame,
    guess: (f64, f64),
    omega_integral: f64,
    last: Option<TrackPoint>,
}

impl Tracker<'_> {
    fn sample(&mut self, u: &[C64], t: f64) -> Result<(TrackPoint, ModState, Vec<C64>)> {
        let s = self.frame.decompose(u, self.guess)?;
        if let Some(prev) = self.last {
            self.omega_integral += 0.5 * (t - prev.t) * (prev.omega + s.omega);
        }
        let grid = self.frame.grid();
        let phi = self.frame.profiles(s.omega).phi;
        let rot = C64::from_polar(1.0, -s.gamma);
        let r: Vec<C64> = u.iter().zip(&phi).map(|(v, f)| v * rot - f).collect();
        let q = TrackPoint {
            t,
            omega: s.omega,
            gamma: s.gamma - self.omega_integral,
            theta: s.gamma,
            z_plus: s.z_plus,
            z_minus: s.z_minus,
            fc_h1: s.f_c.norm_h1(),
            fc_weighted: crate::grid::weighted_norm(&s.f_c, 0, -2.0)?,
            mass: grid.mass(u),
            energy: 0.0,
        };
        Ok((q, s, r))
    }
}

/// Integrates `u0` to `t_final` or a terminal status; with a frame,
/// decomposes every `track_interval` and accumulates the remainder norms.
pub fn evolve_and_track(
    grid: &Grid,
    p: f64,
    u0: &[C64],
    t_final: f64,
    frame: Option<&Frame>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if u0.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: u0.len() });
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("final time {t_final}")));
    }
    if !(opts.track_interval > 0.0) {
        return Err(Error::InvalidParameter("tracking interval must be positive".into()));
    }
    if let Some(f) = frame {
        if f.grid() != grid || f.p() != p {
            return Err(Error::GridMismatch);
        }
    }
    if !VecField::from_scalar(grid, u0).is_finite() {
        return Err(Error::InvalidParameter("initial field is not finite".into()));
    }
    let stepper = Stepper::with_scheme(grid, p, opts.dt, opts.scheme)?;
    let per_sample = ((opts.track_interval / opts.dt).round() as usize).max(1);
    let total_steps = (t_final / opts.dt).round() as usize;
    let mut snap_steps: Vec<(usize, f64)> = opts
        .snapshot_times
        .iter()
        .filter(|&&t| t >= 0.0 && t <= t_final)
        .map(|&t| ((t / opts.dt).round() as usize, t))
        .collect();
    snap_steps.sort_by_key(|s| s.0);
    snap_steps.dedup_by_key(|s| s.0);

    let peak0 = u0.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let blowup = (opts.blowup_factor * peak0).min(resolvable_amplitude(grid, p));
    let energy0 = energy(grid, u0, p);
    let mut u = u0.to_vec();
    let mut acc = NormAccumulator::new(p);
    let mut tracker = frame.map(|f| Tracker {
        frame: f,
        guess: opts.guess.unwrap_or((f.omega0(), 0.0)),
        omega_integral: 0.0,
        last: None,
    });
    let omega0 = frame.map(|f| f.omega0());
    let mut traj = Trajectory {
        grid: grid.clone(),
        p,
        dt: opts.dt,
        tracked: frame.is_some(),
        points: Vec::new(),
        states: Vec::new(),
        status: Status::Running,
        t_end: 0.0,
        u_final: Vec::new(),
        snapshots: Vec::new(),
        norms: NormSummary::default(),
        tube_exit: None,
        exit_z_plus: None,
        note: None,
    };
    let mut n = 0usize;
    let mut next_snap = 0usize;
    loop {
        let t = n as f64 * opts.dt;
        while next_snap < snap_steps.len() && snap_steps[next_snap].0 == n {
            traj.snapshots.push(Snapshot { t: snap_steps[next_snap].1, u: u.clone() });
            next_snap += 1;
        }
        if n.is_multiple_of(per_sample) || n == total_steps {
            if let Some(status) = sample(&mut traj, &mut tracker, &mut acc, &u, t, opts, omega0, grid, p) {
                traj.status = status;
                break;
            }
        }
        if n == total_steps {
            break;
        }
        let mut target = ((n / per_sample) + 1) * per_sample;
        target = target.min(total_steps);
        if next_snap < snap_steps.len() {
            target = target.min(snap_steps[next_snap].0);
        }
        if let Err(e) = stepper.advance(&mut u, target - n) {
            traj.status = Status::BlowUp;
            traj.note = Some(e.to_string());
            n = target;
            break;
        }
        n = target;
        let peak = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak > blowup {
            traj.status = Status::BlowUp;
            traj.note = Some(format!("sup|u| = {peak:.3e} exceeds {blowup:.3e}"));
            break;
        }
        // collapse below the grid scale shows up as loss of energy conservation
        let drift = (energy(grid, &u, p) - energy0).abs() / energy0.abs().max(1e-12);
        if drift > opts.energy_guard {
            traj.status = Status::BlowUp;
            traj.note = Some(format!("relative energy drift {drift:.3e}: dynamics no longer resolved"));
            break;
        }
        if grid.edge_mass_fraction(&u, opts.wrap_fraction) > opts.wrap_threshold {
            traj.status = Status::Wrapped;
            traj.note = Some("mass reached the outer part of the box".into());
            break;
        }
    }
    traj.t_end = n as f64 * opts.dt;
    traj.u_final = u;
    traj.norms = acc.summary();
    if traj.status == Status::Running && traj.tracked && n == total_steps && converged(&traj.points, opts.escape_threshold) {
        traj.status = Status::Converged;
    }
    Ok(traj)
}

/// Tracked run that reached its horizon inside the escape threshold with
/// `|omega(T) - omega(T/2)| < 1e-3 omega(T)`.
pub(crate) fn converged(points: &[TrackPoint], escape_threshold: Option<f64>) -> bool {
    let Some(last) = points.last() else { return false };
    let mid = points.iter().find(|q| q.t >= 0.5 * last.t).unwrap_or(last);
    let inside = escape_threshold.is_none_or(|thr| points.iter().all(|q| q.z_plus.abs() <= thr));
    inside && (last.omega - mid.omega).abs() < 1e-3 * last.omega
}

#[allow(clippy::too_many_arguments)]
fn sample(
    traj: &mut Trajectory,
    tracker: &mut Option<Tracker>,
    acc: &mut NormAccumulator,
    u: &[C64],
    t: f64,
    opts: &EvolveOptions,
    omega0: Option<f64>,
    grid: &Grid,
    p: f64,
) -> Option<Status> {
    let interval = traj.points.last().map_or(0.0, |q| t - q.t);
    let Some(tr) = tracker.as_mut() else {
        traj.points.push(TrackPoint { t, mass: grid.mass(u), energy: energy(grid, u, p), ..Default::default() });
        return None;
    };
    match tr.sample(u, t) {
        Ok((mut q, s, r)) => {
            q.energy = energy(grid, u, p);
            acc.add(grid, &r, q.fc_weighted, interval);
            tr.guess = (q.omega, q.theta + q.omega * opts.track_interval);
            tr.last = Some(q);
            traj.points.push(q);
            if opts.keep_states {
                traj.states.push(s);
            }
            if let (Some(eps), Some(w0), None) = (opts.tube_radius, omega0, traj.tube_exit) {
                if q.z_plus.abs() > eps || (q.omega - w0).abs() > eps {
                    traj.tube_exit = Some(t);
                    traj.exit_z_plus = Some(q.z_plus);
                }
            }
            let drift = omega0.map_or(0.0, |w0| (q.omega - w0).abs());
            match opts.escape_threshold {
                Some(thr) if q.z_plus.abs() > thr || drift > thr => {
                    traj.note = Some(format!("|z_+| = {:.3e}, |omega - omega_0| = {drift:.3e}, threshold {thr:.3e}", q.z_plus.abs()));
                    Some(Status::escape(traj.exit_z_plus.unwrap_or(q.z_plus)))
                }
                _ => None,
            }
        }
        Err(e) => {
            let z = traj.exit_z_plus.or(tr.last.map(|q| q.z_plus)).unwrap_or(0.0);
            traj.note = Some(format!("decomposition failed: {e}"));
            Some(Status::escape(z))
        }
    }
}
