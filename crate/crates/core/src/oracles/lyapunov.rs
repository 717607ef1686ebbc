//! Tangent-map estimates of the Lyapunov coefficient of the kick map.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Kicks used to classify an initial condition as chaotic.
pub const SEA_TEST_KICKS: usize = 200;

/// Minimum position variance over [`SEA_TEST_KICKS`] for a chaotic orbit.
pub const SEA_TEST_VARIANCE: f64 = 1.0;

/// Relative change of the running estimate over the final tenth of the run
/// above which the estimate is reported as unconverged.
pub const DRIFT_TOL: f64 = 0.05;

const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovKind {
    /// `ln[(K/2) sin ντ]`, averaged over the chaotic sea.
    Ensemble,
    /// `ln[K sin ντ]`, the stretching rate at the origin.
    Origin,
}

/// Closed-form Lyapunov coefficient with the dissipative shift `−Γτ/2`.
pub fn lyapunov_formula(k: f64, nu_tau: f64, gamma_tau: f64, which: LyapunovKind) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("K = {k} must be > 0")));
    }
    let arg = match which {
        LyapunovKind::Ensemble => 0.5 * k * nu_tau.sin(),
        LyapunovKind::Origin => k * nu_tau.sin(),
    };
    if !(arg > 0.0) {
        return Err(Error::Domain(format!("logarithm argument {arg} is not positive")));
    }
    Ok(arg.ln() - 0.5 * gamma_tau)
}

struct Map {
    k: f64,
    sin_t: f64,
    cos_t: f64,
    /// Contraction applied to tangent vectors.
    shrink: f64,
    /// Contraction applied to the orbit itself.
    orbit_shrink: f64,
}

impl Map {
    fn apply(&self, (q, p): (f64, f64)) -> (f64, f64) {
        let p = p + self.k * q.sin();
        (
            self.orbit_shrink * (q * self.cos_t + p * self.sin_t),
            self.orbit_shrink * (-q * self.sin_t + p * self.cos_t),
        )
    }

    /// Pushes tangent vector `v` at `x` and returns its image.
    fn tangent(&self, (q, _): (f64, f64), (vq, vp): (f64, f64)) -> (f64, f64) {
        let vp = vp + self.k * q.cos() * vq;
        (
            self.shrink * (vq * self.cos_t + vp * self.sin_t),
            self.shrink * (-vq * self.sin_t + vp * self.cos_t),
        )
    }
}

fn chaotic_start(map: &Map, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    for _ in 0..MAX_ATTEMPTS {
        let start = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let mut x = start;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..SEA_TEST_KICKS {
            x = map.apply(x);
            sum += x.0;
            sum_sq += x.0 * x.0;
        }
        let n = SEA_TEST_KICKS as f64;
        let var = sum_sq / n - (sum / n).powi(2);
        if var >= SEA_TEST_VARIANCE {
            return Ok(start);
        }
    }
    Err(Error::Domain(format!(
        "no chaotic initial condition found in {MAX_ATTEMPTS} attempts"
    )))
}

/// Log growth per kick of a renormalized tangent vector along one orbit,
/// recorded at every kick.
fn orbit_growth(map: &Map, mut x: (f64, f64), n_kicks: usize) -> Vec<f64> {
    let mut v = (1.0, 0.0);
    let mut total = 0.0;
    let mut running = Vec::with_capacity(n_kicks);
    for _ in 0..n_kicks {
        v = map.tangent(x, v);
        x = map.apply(x);
        let len = v.0.hypot(v.1);
        total += len.ln();
        v = (v.0 / len, v.1 / len);
        running.push(total);
    }
    running
}

/// Benettin estimate of the Lyapunov coefficient, averaged over `n_orbits`
/// orbits started in the chaotic sea. With `gamma_tau > 0` the tangent map
/// `D(R∘K)` is multiplied by `e^{−Γτ/2}` on both quadratures while the orbit
/// follows `R∘K`.
///
/// Orbit `i` draws its initial condition from ChaCha8 stream `i` of `seed`.
/// An orbit counts as chaotic when its position variance over 200 kicks
/// reaches 1. Fails with [`Error::NotConverged`] when the ensemble average at
/// 90% of the run differs from the final one by more than 5%.
pub fn lyapunov_numeric(params: &SystemParams, gamma_tau: f64, n_kicks: usize, n_orbits: usize, seed: u64) -> Result<f64> {
    benettin(params, gamma_tau, false, n_kicks, n_orbits, seed)
}

/// As [`lyapunov_numeric`], but the orbits themselves are contracted by
/// `e^{−Γτ/2}` each kick, so the average is taken over the damped map's
/// attractor rather than the conservative chaotic sea.
pub fn lyapunov_damped_orbits(
    params: &SystemParams,
    gamma_tau: f64,
    n_kicks: usize,
    n_orbits: usize,
    seed: u64,
) -> Result<f64> {
    benettin(params, gamma_tau, true, n_kicks, n_orbits, seed)
}

fn benettin(params: &SystemParams, gamma_tau: f64, damp_orbit: bool, n_kicks: usize, n_orbits: usize, seed: u64) -> Result<f64> {
    params.validate()?;
    if !(gamma_tau >= 0.0 && gamma_tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma_tau = {gamma_tau} must be >= 0")));
    }
    if n_kicks < 1000 || n_orbits < 100 {
        return Err(Error::InvalidParameter(format!(
            "need n_kicks >= 1000 and n_orbits >= 100, got {n_kicks} and {n_orbits}"
        )));
    }
    let (sin_t, cos_t) = params.nu_tau.sin_cos();
    let shrink = (-0.5 * gamma_tau).exp();
    let map = Map {
        k: params.k,
        sin_t,
        cos_t,
        shrink,
        orbit_shrink: if damp_orbit { shrink } else { 1.0 },
    };
    let checkpoint = n_kicks * 9 / 10;

    let per_orbit: Vec<(f64, f64)> = (0..n_orbits)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let start = if params.k == 0.0 {
                (rng.random_range(-PI..PI), rng.random_range(-PI..PI))
            } else {
                chaotic_start(&map, &mut rng)?
            };
            let running = orbit_growth(&map, start, n_kicks);
            Ok((
                running[checkpoint - 1] / checkpoint as f64,
                running[n_kicks - 1] / n_kicks as f64,
            ))
        })
        .collect::<Result<_>>()?;

    let n = n_orbits as f64;
    let early = per_orbit.iter().map(|r| r.0).sum::<f64>() / n;
    let estimate = per_orbit.iter().map(|r| r.1).sum::<f64>() / n;
    let drift = (estimate - early).abs() / estimate.abs().max(DRIFT_TOL);
    if drift > DRIFT_TOL {
        return Err(Error::NotConverged { estimate, drift });
    }
    Ok(estimate)
}
