//! `nls-lab`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 refused precondition, 3 numerical
//! failure (an `error.json` is written to the output directory).

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nls_core::diagnostics::{self, NormReport};
use nls_core::evolve::{evolve_and_track, EvolveOptions, Scheme};
use nls_core::linop::{self, ContinuousSpectrum};
use nls_core::manifold::{self, picard_solve, shoot, ShootOptions};
use nls_core::{Error, Result, C64};
use serde::Serialize;

use config::Config;

#[derive(Parser, Debug)]
#[command(name = "nls-lab", version, about = "Ground states of the supercritical 1D NLS and their center-stable set")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true, visible_alias = "omega")]
    omega0: Option<f64>,
    #[arg(long, global = true)]
    gamma0: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Half length of the box.
    #[arg(long = "L", global = true)]
    half_length: Option<f64>,
    /// Number of grid points.
    #[arg(long = "N", global = true)]
    points: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    scheme: Option<SchemeArg>,
    /// RNG seed for random fields.
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Strang,
    Yoshida4,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discrete spectrum of the linearization at the ground state.
    Spectrum,
    /// Evolve the seed's initial datum and log the modulation coordinates.
    Evolve,
    /// Decompose a field (CSV `x,re,im`) or the seed's initial datum.
    Decompose {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Bisection for the graph value and an on-manifold trajectory.
    Shoot,
    /// Fixed point of the integral form of the modulation system.
    Picard,
    /// Strichartz, local-decay and Duhamel constants of the semigroup.
    Strichartz,
    /// On-manifold run followed by a fit of the free asymptotic state.
    Scatter,
    /// Summary table of trajectory CSVs.
    Report {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = cli.common.out.clone();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_precondition() { 2 } else { 3 };
            let _ = write_json(&out, "error.json", &ErrorReport { kind: if code == 2 { "precondition" } else { "numerical" }, message: e.to_string() });
            ExitCode::from(code)
        }
    }
}

#[derive(Serialize)]
struct ErrorReport {
    kind: &'static str,
    message: String,
}

fn config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    macro_rules! set {
        ($($field:ident => $target:ident),*) => {$(if let Some(v) = c.$field { cfg.$target = v; })*};
    }
    set!(p => p, omega0 => omega0, gamma0 => gamma0, eps => eps, half_length => half_length,
         points => points, dt => dt, horizon => horizon, rng_seed => rng_seed);
    if let Some(s) = c.scheme {
        cfg.scheme = match s {
            SchemeArg::Strang => Scheme::Strang,
            SchemeArg::Yoshida4 => Scheme::Yoshida4,
        };
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn evolve_options(cfg: &Config) -> EvolveOptions {
    EvolveOptions { dt: cfg.dt, scheme: cfg.scheme, track_interval: cfg.track_interval, ..Default::default() }
}

fn shoot_options(cfg: &Config, snapshot_times: Vec<f64>) -> ShootOptions {
    let s = &cfg.shoot;
    ShootOptions {
        evolve: EvolveOptions { snapshot_times, ..evolve_options(cfg) },
        tol: s.tol,
        segment: s.segment,
        lookahead: s.lookahead,
        escape_factor: s.escape_factor,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.common.out.clone();
    if let Command::Report { inputs } = &cli.command {
        let rows = diagnostics::aggregate(inputs)?;
        diagnostics::write_table(&rows, create(&out, "summary.csv")?)?;
        diagnostics::write_table(&rows, std::io::stdout().lock())?;
        return Ok(());
    }
    let cfg = config(&cli.common)?;
    write_json(&out, "config.json", &cfg)?;
    match cli.command {
        Command::Spectrum => spectrum(&cfg, &out),
        Command::Evolve => {
            let frame = cfg.frame()?;
            let seed = cfg.seed_data(&frame)?;
            let u0 = manifold::initial_field(&frame, &seed, cfg.seed.z_plus0)?;
            let opts = EvolveOptions { guess: Some((cfg.omega0 + seed.delta_omega, cfg.gamma0)), ..evolve_options(&cfg) };
            let tr = evolve_and_track(frame.grid(), cfg.p, &u0, cfg.horizon, Some(&frame), &opts)?;
            tr.write_csv(create(&out, "trajectory.csv")?)?;
            write_json(&out, "evolve.json", &tr.summary())
        }
        Command::Decompose { input } => {
            let frame = cfg.frame()?;
            let (u, guess) = match input {
                Some(path) => (read_field(&path, frame.grid().len())?, (cfg.omega0, cfg.gamma0)),
                None => {
                    let seed = cfg.seed_data(&frame)?;
                    let u = manifold::initial_field(&frame, &seed, cfg.seed.z_plus0)?;
                    (u, (cfg.omega0 + seed.delta_omega, cfg.gamma0))
                }
            };
            let s = frame.decompose(&u, guess)?;
            write_json(
                &out,
                "decompose.json",
                &serde_json::json!({
                    "omega": s.omega, "theta": s.gamma, "z_plus": s.z_plus, "z_minus": s.z_minus,
                    "fc_l2": s.f_c.norm_l2(), "fc_h1": s.f_c.norm_h1(), "fd_l2": s.f_d.norm_l2(),
                }),
            )
        }
        Command::Shoot => {
            let frame = cfg.frame()?;
            let seed = cfg.seed_data(&frame)?;
            seed.validate(&frame, cfg.picard.c_h1)?;
            let range = cfg.shoot.range * cfg.eps;
            let r = shoot(&frame, &seed, (-range, range), cfg.horizon, &shoot_options(&cfg, Vec::new()))?;
            r.trajectory.write_csv(create(&out, "trajectory.csv")?)?;
            let norms = NormReport::new(&r.trajectory, cfg.eps).ok();
            write_json(&out, "shoot.json", &serde_json::json!({ "shoot": r.summary(), "norms": norms }))
        }
        Command::Picard => {
            let frame = cfg.frame()?;
            let seed = cfg.seed_data(&frame)?;
            let cs = ContinuousSpectrum::compute(cfg.omega0, cfg.p, frame.grid())?;
            let r = picard_solve(&frame, &cs, &seed, cfg.horizon, &cfg.picard)?;
            r.system.write_csv(create(&out, "picard.csv")?)?;
            write_json(&out, "picard.json", &r.report)?;
            if !r.report.converged {
                return Err(Error::Inconclusive("outer frequency iteration did not converge; see picard.json".into()));
            }
            Ok(())
        }
        Command::Strichartz => {
            let grid = cfg.grid()?;
            let cs = ContinuousSpectrum::compute(cfg.omega0, cfg.p, &grid)?;
            let constants = diagnostics::dispersive_constants(&cs, &cfg.probe)?;
            let forcing: Vec<_> = diagnostics::random_forcing(&grid, cfg.probe.horizon, cfg.probe.dt, cfg.rng_seed)?
                .iter()
                .map(|g| cs.project_c(g))
                .collect::<Result<_>>()?;
            let duhamel = diagnostics::duhamel_norm_check(&cs, &forcing, cfg.probe.dt)?;
            write_json(&out, "strichartz.json", &serde_json::json!({ "constants": constants, "duhamel": duhamel }))
        }
        Command::Scatter => {
            let frame = cfg.frame()?;
            let seed = cfg.seed_data(&frame)?;
            seed.validate(&frame, cfg.picard.c_h1)?;
            let t = cfg.horizon;
            let step = cfg.shoot.snapshot_interval;
            let snaps: Vec<f64> = (0..).map(|j| 0.5 * t + j as f64 * step).take_while(|s| *s <= t + 1e-9).collect();
            let range = cfg.shoot.range * cfg.eps;
            let r = shoot(&frame, &seed, (-range, range), t, &shoot_options(&cfg, snaps))?;
            r.trajectory.write_csv(create(&out, "trajectory.csv")?)?;
            let fit = diagnostics::scattering_fit(&frame, &r.trajectory, (0.5 * t, t), Some(cfg.eps))?;
            let mut w = create(&out, "scatter_error.csv")?;
            use std::io::Write;
            writeln!(w, "t,error_l2,error_h1")?;
            for ((t, a), b) in fit.times.iter().zip(&fit.error_l2).zip(&fit.error_h1) {
                writeln!(w, "{t:.17e},{a:.17e},{b:.17e}")?;
            }
            write_json(&out, "scatter.json", &serde_json::json!({ "shoot": r.summary(), "fit": fit }))
        }
        Command::Report { .. } => unreachable!(),
    }
}

fn spectrum(cfg: &Config, out: &Path) -> Result<()> {
    let grid = cfg.grid()?;
    let sd = linop::discrete_spectrum(cfg.omega0, cfg.p, &grid)?;
    let summary = sd.summary()?;
    let mu_shooting = linop::shooting_mu(cfg.omega0, cfg.p, 0.8 * sd.mu, 1.2 * sd.mu)?;
    write_json(
        out,
        "spectrum.json",
        &serde_json::json!({
            "summary": summary,
            "mu_shooting": mu_shooting,
            "mu_relative_difference": (mu_shooting - sd.mu).abs() / sd.mu,
        }),
    )?;
    println!("{}", serde_json::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?);
    Ok(())
}

/// Scalar field from a CSV with columns `x, re, im`.
fn read_field(path: &Path, n: usize) -> Result<Vec<C64>> {
    let text = std::fs::read_to_string(path)?;
    let mut u = Vec::with_capacity(n);
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Format(format!("{}: bad number in {line:?}", path.display()))))
            .collect::<Result<_>>()?;
        if cols.len() != 3 {
            return Err(Error::Format(format!("{}: expected x,re,im", path.display())));
        }
        u.push(C64::new(cols[1], cols[2]));
    }
    if u.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: u.len() });
    }
    Ok(u)
}
