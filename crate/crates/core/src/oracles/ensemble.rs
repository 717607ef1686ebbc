//! Classical trajectory ensembles pushed through the stochastic kick map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Label, PhaseSpaceGrid};
use crate::params::SystemParams;

/// Smallest ensemble accepted by [`TrajectoryEnsemble`].
pub const MIN_TRAJECTORIES: usize = 10_000;

/// A set of classical phase-space points sharing one random stream family.
///
/// Trajectory `i` draws its noise for step `n` from the ChaCha8 stream `i`
/// of the seed, positioned at block `(n + 1)·2³²`, so every draw is a pure
/// function of `(seed, i, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    points: Vec<(f64, f64)>,
    seed: u64,
    steps: u64,
}

fn stream(seed: u64, index: usize, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.set_word_pos(u128::from(block) << 36);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

impl TrajectoryEnsemble {
    /// `m` samples of the Gaussian of variance `η²` per quadrature around `center`.
    pub fn coherent(center: (f64, f64), eta: f64, m: usize, seed: u64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta = {eta} must be > 0")));
        }
        let points = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i, 0);
                (center.0 + eta * normal(&mut rng), center.1 + eta * normal(&mut rng))
            })
            .collect();
        Self::from_points(points, seed)
    }

    pub fn from_points(points: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        if points.len() < MIN_TRAJECTORIES {
            return Err(Error::InvalidParameter(format!(
                "{} trajectories; at least {MIN_TRAJECTORIES} required",
                points.len()
            )));
        }
        if points.iter().any(|(q, p)| !q.is_finite() || !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite trajectory coordinate".into()));
        }
        Ok(TrajectoryEnsemble { points, seed, steps: 0 })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of [`mc_step`] applications so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Pushes every trajectory through one period: kick, rotation, diffusion
/// noise of variance `2D`, then the exact Ornstein-Uhlenbeck update when
/// `gamma_tau > 0`.
pub fn mc_step(ens: &TrajectoryEnsemble, params: &SystemParams, deco: &DecoherenceParams) -> Result<TrajectoryEnsemble> {
    params.validate()?;
    deco.validate()?;
    let (sin_t, cos_t) = params.nu_tau.sin_cos();
    let k = params.k;
    let diffusion_sd = (2.0 * deco.d).sqrt();
    let shrink = (-0.5 * deco.gamma_tau).exp();
    let ou_sd = (2.0 * (deco.nbar + 0.5) * params.eta * params.eta * -(-deco.gamma_tau).exp_m1()).sqrt();
    let block = ens.steps + 1;
    let seed = ens.seed;

    let points: Vec<(f64, f64)> = ens
        .points
        .par_iter()
        .enumerate()
        .map(|(i, &(q, p))| {
            let p = p + k * q.sin();
            let (mut q, mut p) = (q * cos_t + p * sin_t, -q * sin_t + p * cos_t);
            if deco.d > 0.0 || deco.gamma_tau > 0.0 {
                let mut rng = stream(seed, i, block);
                if deco.d > 0.0 {
                    q += diffusion_sd * normal(&mut rng);
                    p += diffusion_sd * normal(&mut rng);
                }
                if deco.gamma_tau > 0.0 {
                    q = shrink * q + ou_sd * normal(&mut rng);
                    p = shrink * p + ou_sd * normal(&mut rng);
                }
            }
            (q, p)
        })
        .collect();
    if points.iter().any(|(q, p)| !q.is_finite() || !p.is_finite()) {
        return Err(Error::Domain("trajectory left the finite reals".into()));
    }
    Ok(TrajectoryEnsemble {
        points,
        seed,
        steps: ens.steps + 1,
    })
}

/// Density histogram on the cells of `spec`: each point is assigned to its
/// nearest grid node and contributes `1/(M·Δq·Δp)`. Points outside the
/// window are dropped, so the norm falls short by the escaped fraction.
pub fn histogram(ens: &TrajectoryEnsemble, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    let weight = 1.0 / (ens.len() as f64 * spec.cell_area());
    let (dq, dp) = (spec.dq(), spec.dp());
    let counts = ens
        .points
        .par_chunks(4096)
        .fold(
            || vec![0u32; spec.len()],
            |mut acc, chunk| {
                for &(q, p) in chunk {
                    let iq = ((q - spec.q_min) / dq).round();
                    let ip = ((p - spec.p_min) / dp).round();
                    if iq >= 0.0 && ip >= 0.0 && (iq as usize) < spec.n_q && (ip as usize) < spec.n_p {
                        acc[spec.index(iq as usize, ip as usize)] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; spec.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let values = counts.into_iter().map(|c| c as f64 * weight).collect();
    PhaseSpaceGrid::from_values(*spec, values, Label::Classical)
}

/// Sampling band `3·√(N_occ/M)` for the L1 distance between a histogram of
/// `m` points with `N_occ` occupied cells and the density it samples.
pub fn sampling_band(hist: &PhaseSpaceGrid, m: usize) -> f64 {
    let occupied = hist.values().iter().filter(|&&v| v > 0.0).count();
    3.0 * (occupied as f64 / m as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn six_rotations_restore_points() {
        let ens = TrajectoryEnsemble::coherent((1.0, -0.5), 0.3, 10_000, 7).unwrap();
        let params = SystemParams::new(0.0, 0.3);
        let mut cur = ens.clone();
        for _ in 0..6 {
            cur = mc_step(&cur, &params, &DecoherenceParams::none()).unwrap();
        }
        let err = ens
            .points()
            .iter()
            .zip(cur.points())
            .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert_eq!(cur.steps(), 6);
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let params = SystemParams::new(2.0, 0.1);
        let deco = DecoherenceParams {
            d: 1e-3,
            gamma_tau: 0.1,
            nbar: 0.5,
        };
        let run = |seed| {
            let mut e = TrajectoryEnsemble::coherent((0.0, 0.0), 0.1, 20_000, seed).unwrap();
            for _ in 0..3 {
                e = mc_step(&e, &params, &deco).unwrap();
            }
            e
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn too_small_ensemble_is_rejected() {
        assert!(TrajectoryEnsemble::coherent((0.0, 0.0), 0.1, 100, 0).is_err());
    }

    #[test]
    fn diffusion_noise_has_variance_2d() {
        let d = 0.01;
        let m = 200_000;
        let ens = TrajectoryEnsemble::from_points(vec![(0.0, 0.0); m], 3).unwrap();
        let params = SystemParams::new(0.0, 0.1).with_rotation(0.0);
        let out = mc_step(&ens, &params, &DecoherenceParams::diffusive(d)).unwrap();
        let var_q = out.points().iter().map(|p| p.0 * p.0).sum::<f64>() / m as f64;
        let var_p = out.points().iter().map(|p| p.1 * p.1).sum::<f64>() / m as f64;
        let tol = 5.0 * 2.0 * d * (2.0 / m as f64).sqrt();
        assert!((var_q - 2.0 * d).abs() < tol, "{var_q}");
        assert!((var_p - 2.0 * d).abs() < tol, "{var_p}");
    }

    #[test]
    fn histogram_of_gaussian_is_within_band() {
        let spec = GridSpec::square(128, PI).unwrap();
        let m = 400_000;
        let ens = TrajectoryEnsemble::coherent((0.3, -0.2), 0.4, m, 5).unwrap();
        let hist = histogram(&ens, &spec).unwrap();
        let exact = crate::grid::new_coherent_state(spec, (0.3, -0.2), 0.4).unwrap();
        let l1: f64 = hist
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * spec.cell_area();
        let band = sampling_band(&hist, m);
        assert!(l1 < band, "{l1} vs {band}");
        assert!((hist.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dissipation_relaxes_to_thermal_variance() {
        let m = 100_000;
        let (eta, nbar) = (0.1, 1.0);
        let params = SystemParams::new(0.0, eta);
        let deco = DecoherenceParams::dissipative(0.5, nbar);
        let mut e = TrajectoryEnsemble::coherent((1.0, 0.0), eta, m, 9).unwrap();
        for _ in 0..40 {
            e = mc_step(&e, &params, &deco).unwrap();
        }
        let var_q = e.points().iter().map(|p| p.0 * p.0).sum::<f64>() / m as f64;
        let expect = 2.0 * (nbar + 0.5) * eta * eta;
        assert!((var_q - expect).abs() < 0.03 * expect, "{var_q} vs {expect}");
    }
}
