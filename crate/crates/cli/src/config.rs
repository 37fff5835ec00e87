//! Run configuration: a TOML or JSON file, then command-line overrides.

use std::path::Path;

use nls_core::diagnostics::{sample_fields, ProbeOptions};
use nls_core::evolve::Scheme;
use nls_core::manifold::{PicardOptions, SeedData};
use nls_core::modulation::Frame;
use nls_core::{Error, Grid, Result, VecField, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub p: f64,
    pub omega0: f64,
    pub gamma0: f64,
    pub eps: f64,
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub scheme: Scheme,
    pub track_interval: f64,
    pub rng_seed: u64,
    pub seed: SeedConfig,
    pub shoot: ShootConfig,
    pub picard: PicardOptions,
    pub probe: ProbeOptions,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            p: 7.0,
            omega0: 1.0,
            gamma0: 0.0,
            eps: 0.02,
            half_length: 30.0,
            points: 1024,
            dt: 2e-3,
            horizon: 40.0,
            scheme: Scheme::Yoshida4,
            track_interval: 0.1,
            rng_seed: 7,
            seed: SeedConfig::default(),
            shoot: ShootConfig::default(),
            picard: PicardOptions::default(),
            probe: ProbeOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Zero,
    Bump,
    Random,
}

/// Hyperplane point `(omega(0), gamma_0, z_-(0), h_0)` and the unstable coordinate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub shape: Shape,
    /// `||h_0||_{H^1}`; half of `eps` when absent.
    pub h1_norm: Option<f64>,
    pub width: f64,
    pub k0: f64,
    pub phase: f64,
    pub z_minus0: f64,
    pub delta_omega: f64,
    /// `z_+(0)` for `evolve` and `decompose`.
    pub z_plus0: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { shape: Shape::Zero, h1_norm: None, width: 1.5, k0: 1.0, phase: 0.0, z_minus0: 0.0, delta_omega: 0.0, z_plus0: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootConfig {
    /// Bisection interval as a multiple of `eps`.
    pub range: f64,
    pub tol: f64,
    pub segment: f64,
    pub lookahead: f64,
    pub escape_factor: f64,
    /// Snapshot spacing for the scattering fit.
    pub snapshot_interval: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { range: 1.0, tol: 1e-13, segment: 4.0, lookahead: 10.0, escape_factor: 10.0, snapshot_interval: 1.0 }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let cfg = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::spatial(self.half_length, self.points)
    }

    pub fn frame(&self) -> Result<Frame> {
        Frame::new(self.p, self.omega0, &self.grid()?)
    }

    pub fn seed_data(&self, frame: &Frame) -> Result<SeedData> {
        let s = &self.seed;
        let norm = s.h1_norm.unwrap_or(0.5 * self.eps);
        let h0 = match s.shape {
            Shape::Zero => VecField::zeros(frame.grid()),
            Shape::Bump => SeedData::bump(frame, norm, s.width, s.k0, s.phase)?,
            Shape::Random => {
                let f = &sample_fields(frame.grid(), 1, self.rng_seed)[0];
                let h = frame.projector0().project_c(f)?.symmetrize_sigma1_conj();
                let n = h.norm_h1();
                h.scaled(C64::new(norm / n, 0.0))
            }
        };
        Ok(SeedData {
            omega0: self.omega0,
            gamma0: self.gamma0,
            delta_omega: s.delta_omega,
            z_minus0: s.z_minus0,
            h0,
            eps: self.eps,
        })
    }
}
