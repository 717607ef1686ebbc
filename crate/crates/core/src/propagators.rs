//! One-period evolution: kick, harmonic rotation, reservoir.
//!
//! Both kicks are Fourier multipliers along `p` whose phase depends on the
//! row coordinate `q`. The classical kick `p → p + K sin q` is the shift
//! `e^{iμK sin q}`. The quantum Wigner kick replaces `μ` by `sin(η²μ)/η²`,
//! which is the exact kick kernel for `ħ_eff = 2η²`. The rotation is three
//! shears, each a phase ramp along one axis.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decoherence::{diffusion_step, dissipative_step, DecoherenceParams};
use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec, Label, PhaseSpaceGrid};
use crate::params::SystemParams;
use crate::spectral::apply_fourier_multiplier;

/// Relative norm change tolerated across one [`step`].
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// Guard-band mass above which a run is aborted.
pub const LEAKAGE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    Quantum,
    Classical,
}

impl StepMode {
    pub fn label(self) -> Label {
        match self {
            StepMode::Quantum => Label::Quantum,
            StepMode::Classical => Label::Classical,
        }
    }
}

fn expect_label(grid: &PhaseSpaceGrid, expected: Label) -> Result<()> {
    if grid.label() != expected {
        return Err(Error::LabelMismatch {
            expected: expected.to_string(),
            found: grid.label().to_string(),
        });
    }
    Ok(())
}

/// Quantum kick on a Wigner function.
pub fn kick_quantum(grid: &PhaseSpaceGrid, params: &SystemParams) -> Result<PhaseSpaceGrid> {
    expect_label(grid, Label::Quantum)?;
    params.validate()?;
    if params.k == 0.0 {
        return Ok(grid.clone());
    }
    let eta2 = params.eta * params.eta;
    let k = params.k;
    apply_fourier_multiplier(grid, Axis::P, move |mu, q| {
        Complex64::from_polar(1.0, k * q.sin() * (eta2 * mu).sin() / eta2)
    })
}

/// Classical kick `p → p + K sin q` on a Liouville density.
pub fn kick_classical(grid: &PhaseSpaceGrid, params: &SystemParams) -> Result<PhaseSpaceGrid> {
    expect_label(grid, Label::Classical)?;
    params.validate()?;
    if params.k == 0.0 {
        return Ok(grid.clone());
    }
    let k = params.k;
    apply_fourier_multiplier(grid, Axis::P, move |mu, q| Complex64::from_polar(1.0, k * q.sin() * mu))
}

/// Pushes the distribution forward under `q → q + a·p`.
fn shear_q(grid: &PhaseSpaceGrid, a: f64) -> Result<PhaseSpaceGrid> {
    apply_fourier_multiplier(grid, Axis::Q, move |mu, p| Complex64::from_polar(1.0, mu * a * p))
}

/// Pushes the distribution forward under `p → p + b·q`.
fn shear_p(grid: &PhaseSpaceGrid, b: f64) -> Result<PhaseSpaceGrid> {
    apply_fourier_multiplier(grid, Axis::P, move |mu, q| Complex64::from_polar(1.0, mu * b * q))
}

/// `W′(x) = W(R⁻¹x)` for the clockwise rotation
/// `q′ = q cos θ + p sin θ`, `p′ = −q sin θ + p cos θ`, with `|θ| ≤ π/2`.
///
/// `R = S_q(tan θ/2) ∘ S_p(−sin θ) ∘ S_q(tan θ/2)` where `S_q(a)` shears `q`
/// by `a·p` and `S_p(b)` shears `p` by `b·q`.
pub fn rotate(grid: &PhaseSpaceGrid, angle: f64) -> Result<PhaseSpaceGrid> {
    if !(angle.abs() <= FRAC_PI_2 * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "rotation angle {angle} outside [-π/2, π/2]"
        )));
    }
    if angle == 0.0 {
        return Ok(grid.clone());
    }
    let t = (0.5 * angle).tan();
    let s = angle.sin();
    let g = shear_q(grid, t)?;
    let g = shear_p(&g, -s)?;
    shear_q(&g, t)
}

/// Rotation by an arbitrary angle, split into equal legal pieces.
pub fn rotate_by(grid: &PhaseSpaceGrid, angle: f64) -> Result<PhaseSpaceGrid> {
    if !angle.is_finite() {
        return Err(Error::InvalidParameter("rotation angle must be finite".into()));
    }
    let pieces = (angle.abs() / FRAC_PI_2).ceil().max(1.0) as usize;
    let piece = angle / pieces as f64;
    let mut out = rotate(grid, piece)?;
    for _ in 1..pieces {
        out = rotate(&out, piece)?;
    }
    Ok(out)
}

/// Applies only the reservoir part of a period.
pub fn decohere(grid: &PhaseSpaceGrid, params: &SystemParams, deco: &DecoherenceParams) -> Result<PhaseSpaceGrid> {
    deco.validate()?;
    let g = diffusion_step(grid, deco.d)?;
    dissipative_step(&g, deco.gamma_tau, deco.nbar, params.eta)
}

/// One full period: kick, rotation by `ντ`, then the reservoir. Input is the
/// distribution immediately before kick `n`, output the one before kick
/// `n + 1`. Fails on norm drift beyond [`NORM_DRIFT_TOL`] (relative) or
/// guard-band mass beyond [`LEAKAGE_TOL`].
pub fn step(
    grid: &PhaseSpaceGrid,
    params: &SystemParams,
    mode: StepMode,
    deco: &DecoherenceParams,
) -> Result<PhaseSpaceGrid> {
    expect_label(grid, mode.label())?;
    let kicked = match mode {
        StepMode::Quantum => kick_quantum(grid, params)?,
        StepMode::Classical => kick_classical(grid, params)?,
    };
    let rotated = rotate_by(&kicked, params.nu_tau)?;
    let out = decohere(&rotated, params, deco)?;

    let before = grid.norm();
    let after = out.norm();
    if (after - before).abs() > NORM_DRIFT_TOL * before.abs().max(1.0) {
        return Err(Error::NormDrift { before, after });
    }
    let leakage = out.guard_band_mass();
    if leakage > LEAKAGE_TOL {
        return Err(Error::Leakage {
            leakage,
            limit: LEAKAGE_TOL,
        });
    }
    Ok(out)
}

/// Liouville density after `n` unitary periods, sampled exactly on `spec`
/// by following every grid point backwards along its characteristic:
/// `W_n(x) = W_0(M^{−n}(x))` with `M` the kick-then-rotate map.
///
/// Without diffusion the classical density develops filaments that thin
/// exponentially, so spectral stepping eventually under-resolves them;
/// this evaluation never does.
pub fn liouville_pullback<F>(spec: GridSpec, initial: F, params: &SystemParams, n: usize) -> Result<PhaseSpaceGrid>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    spec.validate()?;
    params.validate()?;
    let (sin_t, cos_t) = params.nu_tau.sin_cos();
    let k = params.k;
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let (mut q, mut p) = (spec.q(idx / spec.n_p), spec.p(idx % spec.n_p));
            for _ in 0..n {
                let q0 = q * cos_t - p * sin_t;
                let p0 = q * sin_t + p * cos_t;
                q = q0;
                p = p0 - k * q0.sin();
            }
            initial(q, p)
        })
        .collect();
    PhaseSpaceGrid::from_values(spec, values, Label::Classical)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::{new_coherent_state, GridSpec};

    fn l1(a: &PhaseSpaceGrid, b: &PhaseSpaceGrid) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            * a.spec().cell_area()
    }

    fn spec() -> GridSpec {
        GridSpec::square(256, 2.0 * PI).unwrap()
    }

    #[test]
    fn zero_kick_is_identity() {
        let g = new_coherent_state(spec(), (0.5, 0.0), 0.3).unwrap();
        let params = SystemParams::new(0.0, 0.3);
        assert!(l1(&kick_quantum(&g, &params).unwrap(), &g) < 1e-12);
        let c = g.clone().with_label(Label::Classical);
        assert!(l1(&kick_classical(&c, &params).unwrap(), &c) < 1e-12);
    }

    #[test]
    fn classical_kick_moves_centroid() {
        let s = GridSpec::new(1024, 1024, (FRAC_PI_2 - 1.0, FRAC_PI_2 + 1.0), (-1.0, 3.0)).unwrap();
        let sigma = 0.01;
        let g = new_coherent_state(s, (FRAC_PI_2, 0.0), sigma)
            .unwrap()
            .with_label(Label::Classical);
        let out = kick_classical(&g, &SystemParams::new(2.0, sigma)).unwrap();
        let m = out.moments();
        // E[sin q] = e^{−σ²/2} at the crest of the sine.
        let expected = 2.0 * (-0.5 * sigma * sigma).exp();
        assert!((m.mean_p - expected).abs() < 1e-8, "{}", m.mean_p);
        assert!((m.mean_p - 2.0).abs() < s.dp() / 10.0);
        assert!((m.mean_q - FRAC_PI_2).abs() < 1e-10);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kicks_check_labels() {
        let g = new_coherent_state(spec(), (0.0, 0.0), 0.3).unwrap();
        let params = SystemParams::new(1.0, 0.3);
        assert!(matches!(kick_classical(&g, &params), Err(Error::LabelMismatch { .. })));
        let c = g.with_label(Label::Classical);
        assert!(matches!(kick_quantum(&c, &params), Err(Error::LabelMismatch { .. })));
    }

    #[test]
    fn rotation_moves_centroid_clockwise() {
        let s = spec();
        let g = new_coherent_state(s, (2.0, 0.0), 0.3).unwrap();
        let out = rotate(&g, PI / 3.0).unwrap();
        let m = out.moments();
        assert!((m.mean_q - 1.0).abs() < s.dq() / 10.0, "{}", m.mean_q);
        assert!((m.mean_p + 3f64.sqrt()).abs() < s.dp() / 10.0, "{}", m.mean_p);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_sixth_turns_are_identity() {
        let g = new_coherent_state(spec(), (1.2, -0.4), 0.3).unwrap();
        let mut out = g.clone();
        for _ in 0..6 {
            out = rotate(&out, PI / 3.0).unwrap();
        }
        assert!(l1(&out, &g) < 1e-8, "{}", l1(&out, &g));
    }

    #[test]
    fn rotation_inverse() {
        let g = new_coherent_state(spec(), (0.7, 0.9), 0.25).unwrap();
        let back = rotate(&rotate(&g, 0.8).unwrap(), -0.8).unwrap();
        assert!(l1(&back, &g) < 1e-10);
        assert_eq!(rotate(&g, 0.0).unwrap(), g);
        assert!(rotate(&g, 2.0).is_err());
    }

    #[test]
    fn large_rotations_compose() {
        let g = new_coherent_state(spec(), (2.0, 0.0), 0.3).unwrap();
        let out = rotate_by(&g, PI).unwrap();
        let m = out.moments();
        assert!((m.mean_q + 2.0).abs() < 1e-8);
        assert!(m.mean_p.abs() < 1e-8);
    }

    #[test]
    fn unitary_steps_return_after_one_period() {
        let g = new_coherent_state(spec(), (0.0, 0.0), 0.3).unwrap();
        let params = SystemParams::new(0.0, 0.3);
        let mut out = g.clone();
        for _ in 0..6 {
            out = step(&out, &params, StepMode::Quantum, &DecoherenceParams::none()).unwrap();
        }
        assert!(l1(&out, &g) < 1e-8);
    }

    #[test]
    fn modes_coincide_without_kick() {
        let g = new_coherent_state(spec(), (0.5, 0.5), 0.3).unwrap();
        let params = SystemParams::new(0.0, 0.3);
        let deco = DecoherenceParams::diffusive(1e-3);
        let q = step(&g, &params, StepMode::Quantum, &deco).unwrap();
        let c = step(&g.clone().with_label(Label::Classical), &params, StepMode::Classical, &deco).unwrap();
        assert!(l1(&q, &c) < 1e-12);
    }

    #[test]
    fn step_is_deterministic() {
        let g = new_coherent_state(spec(), (0.0, 0.0), 0.3).unwrap();
        let params = SystemParams::new(2.0, 0.3);
        let deco = DecoherenceParams::diffusive(1e-3);
        let a = step(&g, &params, StepMode::Quantum, &deco).unwrap();
        let b = step(&g, &params, StepMode::Quantum, &deco).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn step_detects_leakage() {
        // The kick throws the packet to p ≈ 2, and the rotation carries it
        // to q ≈ 2.5, inside the guard band of a [-3, 3) window.
        let s = GridSpec::square(128, 3.0).unwrap();
        let g = new_coherent_state(s, (FRAC_PI_2, 0.0), 0.2).unwrap();
        let err = step(&g, &SystemParams::new(2.0, 0.2), StepMode::Quantum, &DecoherenceParams::none()).unwrap_err();
        assert!(matches!(err, Error::Leakage { .. }), "{err}");
    }

    #[test]
    fn kick_multipliers_converge_as_eta_shrinks() {
        let (k, q, mu) = (2.0f64, 0.9f64, 7.0f64);
        let classical = Complex64::from_polar(1.0, k * q.sin() * mu);
        let mut last = f64::INFINITY;
        for eta in [0.3f64, 0.1, 0.03, 0.01] {
            let e2 = eta * eta;
            let quantum = Complex64::from_polar(1.0, k * q.sin() * (e2 * mu).sin() / e2);
            let gap = (quantum - classical).norm();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn pullback_matches_spectral_while_resolved() {
        let s = GridSpec::square(1024, 4.0 * PI).unwrap();
        let eta = 0.3;
        let params = SystemParams::new(2.0, eta);
        let mut g = new_coherent_state(s, (0.0, 0.0), eta).unwrap().with_label(Label::Classical);
        for n in 1..=2 {
            g = step(&g, &params, StepMode::Classical, &DecoherenceParams::none()).unwrap();
            let exact = liouville_pullback(
                s,
                |q, p| (-(q * q + p * p) / (2.0 * eta * eta)).exp() / (2.0 * PI * eta * eta),
                &params,
                n,
            )
            .unwrap();
            assert!(l1(&g, &exact) < 1e-8, "n = {n}: {}", l1(&g, &exact));
        }
    }
}
