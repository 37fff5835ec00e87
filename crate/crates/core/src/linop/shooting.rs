//! Independent determination of `mu(omega)` by shooting on the eigenvalue ODE.
//!
//! Writing the unstable mode as `(a, i b)` with `a, b` real and even, the
//! eigenvalue problem becomes
//!
//! ```text
//! a'' = (omega - p phi^{p-1}) a + mu b
//! b'' = (omega -   phi^{p-1}) b - mu a
//! ```
//!
//! Beyond the potential `w = a + i b` solves `w'' = (omega - i mu) w`, so a
//! decaying solution satisfies `w' + k w = 0` with `k = sqrt(omega - i mu)`.
//! The two even fundamental solutions give complex defects `g_1, g_2`; a real
//! combination cancels both exactly when `Im(g_1 conj(g_2)) = 0`.

use super::modes::potential;
use crate::error::{Error, Result};
use crate::grid::C64;

const STEP: f64 = 2e-3;

fn integrate(omega: f64, p: f64, mu: f64, x_max: f64, init: [f64; 4]) -> [f64; 4] {
    let rhs = |x: f64, y: &[f64; 4]| -> [f64; 4] {
        let v = potential(omega, p, x);
        [y[1], (omega - p * v) * y[0] + mu * y[2], y[3], (omega - v) * y[2] - mu * y[0]]
    };
    let steps = (x_max / STEP).ceil() as usize;
    let h = x_max / steps as f64;
    let mut y = init;
    let add = |y: &[f64; 4], k: &[f64; 4], s: f64| -> [f64; 4] {
        [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2], y[3] + s * k[3]]
    };
    for i in 0..steps {
        let x = i as f64 * h;
        let k1 = rhs(x, &y);
        let k2 = rhs(x + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = rhs(x + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = rhs(x + h, &add(&y, &k3, h));
        for j in 0..4 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

/// Normalized matching function; its zeros are the eigenvalues `i mu`.
pub fn matching_function(omega: f64, p: f64, mu: f64) -> f64 {
    let x_max = 14.0 / omega.sqrt();
    let k = C64::new(omega, -mu).sqrt();
    let defect = |y: [f64; 4]| C64::new(y[1], y[3]) + k * C64::new(y[0], y[2]);
    let g1 = defect(integrate(omega, p, mu, x_max, [1.0, 0.0, 0.0, 0.0]));
    let g2 = defect(integrate(omega, p, mu, x_max, [0.0, 0.0, 1.0, 0.0]));
    (g1 * g2.conj()).im / (g1.norm() * g2.norm())
}

/// Root of the matching function in `(lo, hi)`, located by a uniform scan
/// followed by bisection. More than one root is reported as inconclusive.
pub fn shooting_mu(omega: f64, p: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::BadBracket(format!("search interval ({lo}, {hi})")));
    }
    let samples = 200;
    let pts: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
    let vals: Vec<f64> = pts.iter().map(|&m| matching_function(omega, p, m)).collect();
    let mut roots = Vec::new();
    for i in 0..samples {
        if vals[i] == 0.0 || vals[i].signum() != vals[i + 1].signum() {
            let (mut a, mut b, mut fa) = (pts[i], pts[i + 1], vals[i]);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = matching_function(omega, p, m);
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    match roots.len() {
        1 => Ok(roots[0]),
        0 => Err(Error::Inconclusive(format!("no eigenvalue i*mu with mu in ({lo}, {hi})"))),
        _ => Err(Error::Inconclusive(format!("several candidate roots {roots:?}"))),
    }
}
