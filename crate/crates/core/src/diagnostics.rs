//! Empirical counterparts of the dispersive estimates and of the asymptotic
//! statements: space-time norm constants of the linearized semigroup, Duhamel
//! map ratios, remainder norm accounting along trajectories, the scattering
//! fit and aggregation of run logs.
//!
//! All weighted norms use `<x>^{-2}`. Sample fields are band-limited even bumps
//! `(u, conj u)` drawn from a seeded generator, so every measurement is
//! reproducible.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{NormSummary, Status, Trajectory};
use crate::grid::{Grid, VecField, C64};
use crate::linop::{interval_weights, ContinuousSpectrum};
use crate::modulation::Frame;

/// Relative size of `P_d f` tolerated in a sample field.
const PROJECTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeOptions {
    pub samples: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { samples: 8, horizon: 50.0, dt: 0.02, seed: 7 }
    }
}

/// Even band-limited fields `(u, conj u)`, `u` a sum of modulated Gaussians
/// with widths in `[0.5, 2]` and wavenumbers below 2.5.
pub fn sample_fields(grid: &Grid, count: usize, seed: u64) -> Vec<VecField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terms: Vec<(f64, f64, C64)> = (0..4)
                .map(|_| {
                    let amp = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    (rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.5), amp)
                })
                .collect();
            let u: Vec<C64> = grid
                .x()
                .iter()
                .map(|&x| terms.iter().map(|&(w, k, a)| a * (-(x / w).powi(2)).exp() * (k * x).cos()).sum())
                .collect();
            VecField::from_scalar(grid, &u)
        })
        .collect()
}

/// Norm ratios of `t -> e^{-itH} f` over `[0, horizon]` for one field.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DispersiveRatios {
    /// `||u||_{L^4_t L^inf_x} / ||f||_{H^1}`
    pub strichartz: f64,
    /// `||u||_{L^4_t W^{1,inf}_x} / ||f||_{H^1}`
    pub strichartz_w1: f64,
    /// `||u||_{L^inf_t H^1} / ||f||_{H^1}`
    pub energy: f64,
    /// `||<x>^{-2} u||_{L^2_t L^2_x} / ||f||_{L^2}`
    pub local_decay: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DispersiveConstants {
    pub omega: f64,
    pub strichartz: f64,
    pub local_decay: f64,
    pub ratios: Vec<DispersiveRatios>,
}

fn trapezoid_weights(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|j| if j == 0 || j + 1 == n { 0.5 * dt } else { dt }).collect()
}

fn time_nodes(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0 && dt > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon}, dt {dt}")));
    }
    Ok((horizon / dt).round() as usize + 1)
}

fn decay_weight(grid: &Grid) -> Vec<f64> {
    grid.x().iter().map(|x| 1.0 / (1.0 + x * x)).collect()
}

/// Ratios for each field, which must lie in `range P_c` of `cs`.
pub fn dispersive_ratios(cs: &ContinuousSpectrum, fields: &[VecField], opts: &ProbeOptions) -> Result<Vec<DispersiveRatios>> {
    let nt = time_nodes(opts.horizon, opts.dt)?;
    let grid = cs.grid();
    let wt = trapezoid_weights(nt, opts.dt);
    let weight = decay_weight(grid);
    let freq = cs.frequencies();
    let (plus, minus) = cs.coefficients_many(fields)?;
    let mut out = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        let scale = f.norm_l2();
        if scale == 0.0 {
            return Err(Error::Precondition("zero sample field".into()));
        }
        let pc = cs.synthesize_many(&plus.columns(i, 1).into(), &minus.columns(i, 1).into());
        if (&pc[0] - f).norm_l2() > PROJECTION_TOL * scale {
            return Err(Error::Precondition("sample field is not in the continuous subspace".into()));
        }
        let m = freq.len();
        let mut cp = DMatrix::zeros(m, nt);
        let mut cm = DMatrix::zeros(m, nt);
        for (k, &s) in freq.iter().enumerate() {
            for j in 0..nt {
                let ph = C64::from_polar(1.0, -s * opts.dt * j as f64);
                cp[(k, j)] = plus[(k, i)] * ph;
                cm[(k, j)] = minus[(k, i)] * ph.conj();
            }
        }
        let (mut l4, mut l4w, mut sup_h1, mut ld) = (0.0, 0.0, 0.0f64, 0.0);
        for (j, u) in cs.synthesize_many(&cp, &cm).iter().enumerate() {
            let a = u.a();
            let linf = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let dlinf = grid.derivative(a, 1).iter().map(|v| v.norm()).fold(0.0, f64::max);
            l4 += wt[j] * linf.powi(4);
            l4w += wt[j] * (linf + dlinf).powi(4);
            sup_h1 = sup_h1.max(grid.sobolev_sq(a, 1).sqrt());
            ld += wt[j] * grid.integrate(&a.iter().zip(&weight).map(|(v, w)| (v * w).norm_sqr()).collect::<Vec<_>>());
        }
        let h1 = grid.sobolev_sq(f.a(), 1).sqrt();
        let l2 = grid.mass(f.a()).sqrt();
        out.push(DispersiveRatios {
            strichartz: l4.powf(0.25) / h1,
            strichartz_w1: l4w.powf(0.25) / h1,
            energy: sup_h1 / h1,
            local_decay: ld.sqrt() / l2,
        });
    }
    Ok(out)
}

/// Largest Strichartz and local-decay ratios over `opts.samples` projected sample fields.
pub fn dispersive_constants(cs: &ContinuousSpectrum, opts: &ProbeOptions) -> Result<DispersiveConstants> {
    let fields = sample_fields(cs.grid(), opts.samples, opts.seed)
        .iter()
        .map(|f| cs.project_c(f))
        .collect::<Result<Vec<_>>>()?;
    let ratios = dispersive_ratios(cs, &fields, opts)?;
    Ok(DispersiveConstants {
        omega: cs.omega(),
        strichartz: ratios.iter().map(|r| r.strichartz).fold(0.0, f64::max),
        local_decay: ratios.iter().map(|r| r.local_decay).fold(0.0, f64::max),
        ratios,
    })
}

pub fn strichartz_constant(cs: &ContinuousSpectrum, opts: &ProbeOptions) -> Result<f64> {
    Ok(dispersive_constants(cs, opts)?.strichartz)
}

pub fn local_decay_constant(cs: &ContinuousSpectrum, opts: &ProbeOptions) -> Result<f64> {
    Ok(dispersive_constants(cs, opts)?.local_decay)
}

/// Smooth, localized forcing `(g, conj g)` with
/// `g(t, x) = sum_j a_j cos(nu_j t) e^{-((t - t_j)/tau_j)^2} e^{-x^2/w_j^2} cos(k_j x)`
/// sampled on `[0, horizon]`.
pub fn random_forcing(grid: &Grid, horizon: f64, dt: f64, seed: u64) -> Result<Vec<VecField>> {
    let nt = time_nodes(horizon, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<[f64; 7]> = (0..4)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.2..0.8) * horizon,
                rng.gen_range(0.05..0.2) * horizon,
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.0..2.5),
            ]
        })
        .collect();
    Ok((0..nt)
        .map(|j| {
            let t = j as f64 * dt;
            let u: Vec<C64> = grid
                .x()
                .iter()
                .map(|&x| {
                    terms
                        .iter()
                        .map(|&[re, im, nu, tc, tau, w, k]| {
                            C64::new(re, im)
                                * ((nu * t).cos() * (-((t - tc) / tau).powi(2)).exp() * (-(x / w).powi(2)).exp() * (k * x).cos())
                        })
                        .sum()
                })
                .collect();
            VecField::from_scalar(grid, &u)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DuhamelReport {
    /// `||<x>^2 g||_{L^2_t L^2_x}` of the input.
    pub input: f64,
    /// `||<x>^{-2} int_0^t e^{-i(t-s)H} P_c g(s) ds||_{L^2_t L^2_x} / input`.
    pub retarded: f64,
    /// Same with `int_t^T`.
    pub advanced: f64,
}

/// Retarded and advanced Duhamel maps of the forcing samples `g(j dt)` in
/// `range P_c`, each interval integrated exactly for a linear interpolant.
pub fn duhamel_norm_check(cs: &ContinuousSpectrum, forcing: &[VecField], dt: f64) -> Result<DuhamelReport> {
    let nt = forcing.len();
    if nt < 2 || !(dt > 0.0) {
        return Err(Error::InvalidParameter("need at least two forcing samples and dt > 0".into()));
    }
    let grid = cs.grid();
    let wt = trapezoid_weights(nt, dt);
    let weight = decay_weight(grid);
    let weighted_sq = |f: &VecField, power: f64| {
        grid.integrate(&f.a().iter().zip(&weight).map(|(v, w)| (v * w.powf(power)).norm_sqr()).collect::<Vec<_>>())
    };
    let input: f64 = forcing.iter().zip(&wt).map(|(g, w)| w * weighted_sq(g, -1.0)).sum::<f64>().sqrt();
    let (gp, gm) = cs.coefficients_many(forcing)?;
    let freq = cs.frequencies();
    let m = freq.len();
    let mut rp = DMatrix::zeros(m, nt);
    let mut rm = DMatrix::zeros(m, nt);
    let mut ap = DMatrix::zeros(m, nt);
    let mut am = DMatrix::zeros(m, nt);
    for (k, &s) in freq.iter().enumerate() {
        for (sign, g, ret, adv) in [(1.0, &gp, &mut rp, &mut ap), (-1.0, &gm, &mut rm, &mut am)] {
            // d/dt D = -i sign s D + g
            let w = C64::new(0.0, -sign * s * dt);
            let (a, b) = interval_weights(w);
            let e = w.exp();
            let mut acc = C64::default();
            for j in 1..nt {
                acc = e * acc + dt * (b * g[(k, j - 1)] + a * g[(k, j)]);
                ret[(k, j)] = acc;
            }
            let (a, b) = interval_weights(-w);
            let e = (-w).exp();
            let mut acc = C64::default();
            for j in (0..nt - 1).rev() {
                acc = e * acc + dt * (a * g[(k, j)] + b * g[(k, j + 1)]);
                adv[(k, j)] = acc;
            }
        }
    }
    let norm = |p: &DMatrix<C64>, q: &DMatrix<C64>| -> f64 {
        cs.synthesize_many(p, q).iter().zip(&wt).map(|(f, w)| w * weighted_sq(f, 1.0)).sum::<f64>().sqrt()
    };
    let (ret, adv) = (norm(&rp, &rm), norm(&ap, &am));
    let ratio = |v: f64| if input > 0.0 { v / input } else { 0.0 };
    Ok(DuhamelReport { input, retarded: ratio(ret), advanced: ratio(adv) })
}

/// Remainder norms of one trajectory with their ratios to `eps`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormReport {
    pub eps: f64,
    pub norms: NormSummary,
    /// `||f_c(0)||_{H^1}`; the Strichartz-type ratios below divide by it.
    pub initial_h1: f64,
    pub l4_linf_ratio: f64,
    pub lq_w_ratio: f64,
    /// Norms over `eps`.
    pub c_linf_h1: f64,
    pub c_l4_linf: f64,
    pub c_lq_w: f64,
    pub c_weighted: f64,
}

impl NormReport {
    pub fn new(traj: &Trajectory, eps: f64) -> Result<Self> {
        if !traj.tracked || traj.points.is_empty() {
            return Err(Error::Precondition("norm report needs a tracked trajectory".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps}")));
        }
        let n = traj.norms;
        let initial_h1 = traj.points[0].fc_h1;
        let ratio = |v: f64| if initial_h1 > 0.0 { v / initial_h1 } else { f64::NAN };
        Ok(Self {
            eps,
            norms: n,
            initial_h1,
            l4_linf_ratio: ratio(n.l4_linf),
            lq_w_ratio: ratio(n.lq_w1_2p),
            c_linf_h1: n.linf_h1 / eps,
            c_l4_linf: n.l4_linf / eps,
            c_lq_w: n.lq_w1_2p / eps,
            c_weighted: n.weighted_fc / eps,
        })
    }

    pub fn is_finite(&self) -> bool {
        [self.c_linf_h1, self.c_l4_linf, self.c_lq_w, self.c_weighted].iter().all(|v| v.is_finite())
    }
}

/// Smallest constant `C` with `norm <= C eps` across a sweep, per norm.
pub fn fitted_constants(reports: &[NormReport]) -> [f64; 4] {
    reports.iter().fold([0.0; 4], |c, r| {
        [c[0].max(r.c_linf_h1), c[1].max(r.c_l4_linf), c[2].max(r.c_lq_w), c[3].max(r.c_weighted)]
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatterFit {
    pub omega_inf: f64,
    pub gamma_inf: f64,
    /// `|omega(T) - omega(T/2)|` and the same for the modulation phase.
    pub omega_cauchy: f64,
    pub gamma_cauchy: f64,
    pub times: Vec<f64>,
    /// `||e^{i theta} r - e^{i t d_xx} r_inf||` in `L^2` and `H^1`.
    pub error_l2: Vec<f64>,
    pub error_h1: Vec<f64>,
    #[serde(skip)]
    pub r_inf: Vec<C64>,
    pub r_inf_l2: f64,
    pub r_inf_h1: f64,
    /// `||r_inf||_{H^1} / eps` when `eps` was given.
    pub r_inf_over_eps: Option<f64>,
    pub decreasing_l2: bool,
    pub decreasing_h1: bool,
}

/// Non-increasing up to `slack`: every value is at most `(1 + slack)` times
/// the smallest earlier one.
pub fn decreasing_trend(values: &[f64], slack: f64) -> bool {
    let mut low = f64::INFINITY;
    values.iter().all(|&v| {
        let ok = v <= (1.0 + slack) * low || low == f64::INFINITY;
        low = low.min(v);
        ok
    })
}

/// Fits the free asymptotic state of a converged trajectory over the snapshots
/// in `[t1, t2]`.
///
/// With `w(t) = e^{i theta} r = u - e^{i theta} phi_omega`, `r_inf` minimizes
/// `sum_t ||e^{-i t d_xx} w(t) - r_inf||^2` over the snapshots of the last
/// quarter of the window, i.e. it is the mean of their back-propagated
/// remainders. A fit over the whole window would put the minimum of `e(t)`
/// inside the window by construction.
pub fn scattering_fit(frame: &Frame, traj: &Trajectory, window: (f64, f64), eps: Option<f64>) -> Result<ScatterFit> {
    let (t1, t2) = window;
    if traj.status != Status::Converged {
        return Err(Error::Precondition(format!("trajectory status is {:?}, not Converged", traj.status)));
    }
    if !traj.tracked || traj.grid != *frame.grid() {
        return Err(Error::Precondition("scattering fit needs a tracked trajectory on the frame grid".into()));
    }
    if !(t2 <= traj.t_end + 1e-9 && t1 >= 0.0) {
        return Err(Error::Precondition(format!("window [{t1}, {t2}] outside [0, {}]", traj.t_end)));
    }
    if t2 - t1 < 5.0 / frame.omega0() {
        return Err(Error::Precondition(format!("window length {} below 5/omega_0", t2 - t1)));
    }
    let grid = frame.grid();
    let snaps: Vec<_> = traj.snapshots.iter().filter(|s| s.t >= t1 - 1e-9 && s.t <= t2 + 1e-9).collect();
    if snaps.len() < 2 {
        return Err(Error::Precondition("fewer than two snapshots in the fit window".into()));
    }
    let nearest = |t: f64| {
        traj.points
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .copied()
            .unwrap_or_default()
    };
    let mut remainders = Vec::with_capacity(snaps.len());
    for s in &snaps {
        let q = nearest(s.t);
        let guess = (q.omega, q.theta + q.omega * (s.t - q.t));
        let st = frame.decompose(&s.u, guess)?;
        let phi = frame.profiles(st.omega).phi;
        let rot = C64::from_polar(1.0, st.gamma);
        remainders.push(s.u.iter().zip(&phi).map(|(v, f)| v - rot * f).collect::<Vec<C64>>());
    }
    let fit_from = t2 - 0.25 * (t2 - t1) - 1e-9;
    let fit: Vec<_> = snaps.iter().zip(&remainders).filter(|(s, _)| s.t >= fit_from).collect();
    let mut r_inf = vec![C64::default(); grid.len()];
    for (s, w) in &fit {
        let mut b = (*w).clone();
        grid.free_flow(&mut b, -s.t);
        for (acc, v) in r_inf.iter_mut().zip(&b) {
            *acc += v / fit.len() as f64;
        }
    }
    let (mut error_l2, mut error_h1) = (Vec::new(), Vec::new());
    for (s, w) in snaps.iter().zip(&remainders) {
        let mut free = r_inf.clone();
        grid.free_flow(&mut free, s.t);
        let d: Vec<C64> = w.iter().zip(&free).map(|(a, b)| a - b).collect();
        error_l2.push(grid.mass(&d).sqrt());
        error_h1.push(grid.sobolev_sq(&d, 1).sqrt());
    }
    let last = traj.points.last().copied().unwrap_or_default();
    let mid = nearest(0.5 * last.t);
    let tail: Vec<_> = traj.points.iter().filter(|q| q.t >= t1 - 1e-9 && q.t <= t2 + 1e-9).collect();
    let mean = |f: fn(&crate::evolve::TrackPoint) -> f64| tail.iter().map(|q| f(q)).sum::<f64>() / tail.len().max(1) as f64;
    let r_inf_h1 = grid.sobolev_sq(&r_inf, 1).sqrt();
    Ok(ScatterFit {
        omega_inf: mean(|q| q.omega),
        gamma_inf: mean(|q| q.gamma),
        omega_cauchy: (last.omega - mid.omega).abs(),
        gamma_cauchy: (last.gamma - mid.gamma).abs(),
        times: snaps.iter().map(|s| s.t).collect(),
        decreasing_l2: decreasing_trend(&error_l2, 0.1),
        decreasing_h1: decreasing_trend(&error_h1, 0.1),
        error_l2,
        error_h1,
        r_inf_l2: grid.mass(&r_inf).sqrt(),
        r_inf_h1,
        r_inf_over_eps: eps.map(|e| r_inf_h1 / e),
        r_inf,
    })
}

/// One row of the aggregated run table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: String,
    pub samples: usize,
    pub t_end: f64,
    pub omega_final: f64,
    pub sup_omega_deviation: f64,
    pub sup_z_plus: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
}

const TRAJECTORY_HEADER: [&str; 5] = ["t", "omega", "gamma", "z_plus", "z_minus"];

/// Summary row of a trajectory CSV, or `None` if the file is not one.
pub fn summarize_csv(path: &Path) -> Result<Option<RunRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.len() < 9 || header.iter().take(5).ne(TRAJECTORY_HEADER) {
        return Ok(None);
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(im), Some(ie)) = (col("mass"), col("energy")) else { return Ok(None) };
    let mut rows: Vec<[f64; 5]> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let v = |i: usize| -> Result<f64> {
            rec.get(i).unwrap_or("").trim().parse().map_err(|_| Error::Format(format!("{}: bad number", path.display())))
        };
        rows.push([v(0)?, v(1)?, v(3)?, v(im)?, v(ie)?]);
    }
    let Some(first) = rows.first().copied() else { return Ok(None) };
    let last = rows.last().copied().unwrap_or(first);
    let drift = |k: usize| rows.iter().map(|r| (r[k] - first[k]).abs() / first[k].abs().max(1e-300)).fold(0.0, f64::max);
    let run = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Some(RunRow {
        run,
        samples: rows.len(),
        t_end: last[0],
        omega_final: last[1],
        sup_omega_deviation: rows.iter().map(|r| (r[1] - first[1]).abs()).fold(0.0, f64::max),
        sup_z_plus: rows.iter().map(|r| r[2].abs()).fold(0.0, f64::max),
        mass_drift: drift(3),
        energy_drift: drift(4),
    }))
}

/// Summary table of every trajectory CSV among `paths` (directories are
/// searched one level deep), sorted by run name. Files that are not
/// trajectory logs, including earlier summary tables, are skipped.
pub fn aggregate(paths: &[PathBuf]) -> Result<Vec<RunRow>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for e in std::fs::read_dir(p)? {
                let f = e?.path();
                if f.extension().is_some_and(|x| x == "csv") {
                    files.push(f);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    let mut table = BTreeMap::new();
    for f in files {
        if let Some(row) = summarize_csv(&f)? {
            let key = (row.run.clone(), f.clone());
            table.insert(key, row);
        }
    }
    Ok(table.into_values().collect())
}

pub fn write_table<W: std::io::Write>(rows: &[RunRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
