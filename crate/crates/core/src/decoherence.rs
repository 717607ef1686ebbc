//! Reservoir effects on phase-space distributions and the analytical
//! smoothed kernels used to check them.
//!
//! Two limits of the thermal Fokker-Planck reservoir are exposed. The
//! diffusive limit is a Gaussian smoothing of variance `2D` per quadrature
//! applied once per kick period, identically to quantum and classical
//! distributions. The dissipative step is the exact Ornstein-Uhlenbeck
//! Green function over one period: a contraction by `e^{−Γτ/2}` followed by
//! a Gaussian of variance `2(n̄+½)η²(1 − e^{−Γτ})`.
//!
//! [`smoothed_propagator`] evaluates the closed-form classical kernel and its
//! first-order quantum correction `χ·sin(q′)·f(y)`. The engine never uses
//! these kernels; they exist to be checked against direct quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::params::SystemParams;
use crate::spectral::{contract_axis, gaussian_convolve};

/// Bound on `|f(y)·e^{−y²}|` over the real line.
pub const CORRECTION_BOUND: f64 = 0.081;

/// Largest χ for which [`smoothed_propagator`] still evaluates the
/// approximate quantum kernel.
pub const CHI_EVALUATION_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceParams {
    /// Diffusion parameter per kick; the smoothing variance is `2D`.
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(default)]
    pub gamma_tau: f64,
    #[serde(default)]
    pub nbar: f64,
}

impl DecoherenceParams {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn diffusive(d: f64) -> Self {
        DecoherenceParams {
            d,
            ..Self::default()
        }
    }

    pub fn dissipative(gamma_tau: f64, nbar: f64) -> Self {
        DecoherenceParams {
            d: 0.0,
            gamma_tau,
            nbar,
        }
    }

    pub fn is_unitary(&self) -> bool {
        self.d == 0.0 && self.gamma_tau == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("D", self.d), ("gamma_tau", self.gamma_tau), ("nbar", self.nbar)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Per-kick diffusion parameter of the high-temperature limit, using the
/// convention `D = n̄·Γ·η²·τ`.
pub fn diffusion_from_reservoir(nbar: f64, gamma: f64, eta: f64, tau: f64) -> f64 {
    nbar * gamma * eta * eta * tau
}

/// Gaussian smoothing of variance `2D` per quadrature.
pub fn diffusion_step(grid: &PhaseSpaceGrid, d: f64) -> Result<PhaseSpaceGrid> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("D = {d} must be >= 0")));
    }
    if d == 0.0 {
        return Ok(grid.clone());
    }
    gaussian_convolve(grid, 2.0 * d, 2.0 * d)
}

/// Exact damped-diffusive step over one kick period.
pub fn dissipative_step(grid: &PhaseSpaceGrid, gamma_tau: f64, nbar: f64, eta: f64) -> Result<PhaseSpaceGrid> {
    if !(gamma_tau >= 0.0 && gamma_tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma_tau = {gamma_tau} must be >= 0")));
    }
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("nbar = {nbar} must be >= 0")));
    }
    if gamma_tau == 0.0 {
        return Ok(grid.clone());
    }
    let factor = (0.5 * gamma_tau).exp();
    let contracted = contract_axis(&contract_axis(grid, Axis::Q, factor)?, Axis::P, factor)?;
    let var = 2.0 * (nbar + 0.5) * eta * eta * (-(-gamma_tau).exp_m1());
    gaussian_convolve(&contracted, var, var)
}

/// Per-quadrature variance after one dissipative step from variance `var0`.
pub fn ornstein_uhlenbeck_variance(var0: f64, gamma_tau: f64, nbar: f64, eta: f64) -> f64 {
    let decay = (-gamma_tau).exp();
    var0 * decay + 2.0 * (nbar + 0.5) * eta * eta * (1.0 - decay)
}

/// The scaling parameter `χ = K·η⁴ / D^{3/2}`.
pub fn chi(k: f64, eta: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("chi needs D > 0, got {d}")));
    }
    Ok(k * eta.powi(4) / d.powf(1.5))
}

/// Correction profile `f(y) = (y − 2y³/3)/4`.
pub fn f_correction(y: f64) -> f64 {
    0.25 * (y - 2.0 * y * y * y / 3.0)
}

/// Whether the first-order quantum kernel is inside its validity range `χ ≲ 1`.
pub fn approximation_valid(chi: f64) -> bool {
    chi <= 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Classical,
    QuantumApprox,
}

/// Smoothed one-kick kernel `L̃(x^R, x′)`, with `x^R` the inversely rotated
/// target point and `x′` the source point.
///
/// Classical: `e^{−(x² + y²)}/4πD` with `x = (q′ − q^R)/2√D` and
/// `y = (p′ − p^R + K sin q′)/2√D`. The approximate quantum kernel multiplies
/// this by `1 + χ·sin(q′)·f(y)`.
pub fn smoothed_propagator(
    x_r: (f64, f64),
    x_prime: (f64, f64),
    params: &SystemParams,
    d: f64,
    which: KernelKind,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("smoothed kernels need D > 0, got {d}")));
    }
    let (q_r, p_r) = x_r;
    let (q1, p1) = x_prime;
    let width = 2.0 * d.sqrt();
    let x = (q1 - q_r) / width;
    let y = (p1 - p_r + params.k * q1.sin()) / width;
    let classical = (-(x * x + y * y)).exp() / (4.0 * PI * d);
    match which {
        KernelKind::Classical => Ok(classical),
        KernelKind::QuantumApprox => {
            let chi = chi(params.k, params.eta, d)?;
            if chi > CHI_EVALUATION_LIMIT {
                return Err(Error::Domain(format!(
                    "chi = {chi} exceeds {CHI_EVALUATION_LIMIT}; the first-order kernel is meaningless there"
                )));
            }
            Ok(classical * (1.0 + chi * q1.sin() * f_correction(y)))
        }
    }
}

#[cfg(test)]
mod tests {
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

    #[test]
    fn chi_examples() {
        assert!((chi(2.0, 0.04, 4.5e-3).unwrap() - 0.017).abs() < 0.0005);
        assert!((chi(2.0, 0.1, 5.13e-2).unwrap() - 0.017).abs() < 0.0005);
        assert_eq!(chi(2.0, 0.0, 1e-3).unwrap(), 0.0);
        assert!(matches!(chi(2.0, 0.1, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn chi_matches_hbar_form() {
        let (k, eta, d): (f64, f64, f64) = (2.3, 0.07, 3e-4);
        let hbar: f64 = 2.0 * eta * eta;
        let alt = k * hbar * hbar / (4.0 * d.powf(1.5));
        assert!((chi(k, eta, d).unwrap() - alt).abs() < 1e-12 * alt);
    }

    #[test]
    fn f_is_odd_and_vanishes_at_zero() {
        assert_eq!(f_correction(0.0), 0.0);
        for i in 0..50 {
            let y = -3.0 + 0.13 * i as f64;
            assert!((f_correction(-y) + f_correction(y)).abs() < 1e-15);
        }
    }

    #[test]
    fn diffusion_variance_and_identity() {
        let s = GridSpec::square(512, 2.0).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), 0.1).unwrap();
        assert_eq!(diffusion_step(&g, 0.0).unwrap(), g);
        let out = diffusion_step(&g, 4.5e-3).unwrap();
        let m = out.moments();
        assert!((m.var_q - 0.019).abs() < 1e-5);
        assert!((m.var_p - 0.019).abs() < 1e-5);
        assert!((out.norm() - g.norm()).abs() < 1e-12);
    }

    #[test]
    fn diffusion_semigroup() {
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let g = new_coherent_state(s, (0.5, 0.2), 0.3).unwrap();
        let d = 0.01;
        let halves = diffusion_step(&diffusion_step(&g, d / 2.0).unwrap(), d / 2.0).unwrap();
        let whole = diffusion_step(&g, d).unwrap();
        assert!(l1(&halves, &whole) < 1e-10);
    }

    #[test]
    fn coherent_state_is_dissipative_fixed_point() {
        let eta = 0.3;
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), eta).unwrap();
        for gamma_tau in [0.05, 0.2, 1.0] {
            let out = dissipative_step(&g, gamma_tau, 0.0, eta).unwrap();
            let m = out.moments();
            assert!((m.var_q - eta * eta).abs() < 1e-6, "{gamma_tau}: {}", m.var_q);
            assert!((m.var_p - eta * eta).abs() < 1e-6);
            assert!((out.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dissipation_matches_ornstein_uhlenbeck_moments() {
        let eta = 0.2;
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let g = new_coherent_state(s, (1.0, -0.5), 0.5).unwrap();
        let (gamma_tau, nbar) = (0.3, 0.7);
        let out = dissipative_step(&g, gamma_tau, nbar, eta).unwrap();
        let m = out.moments();
        let decay = (-gamma_tau / 2.0_f64).exp();
        assert!((m.mean_q - decay).abs() < 1e-6);
        assert!((m.mean_p + 0.5 * decay).abs() < 1e-6);
        let expected = ornstein_uhlenbeck_variance(0.25, gamma_tau, nbar, eta);
        assert!((m.var_q - expected).abs() < 1e-6, "{} vs {expected}", m.var_q);
        assert!((m.var_p - expected).abs() < 1e-6);
    }

    #[test]
    fn strong_dissipation_reaches_thermal_variance() {
        let eta = 0.2;
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), 0.3).unwrap();
        // A single huge contraction would undersample; forty steps of 0.5
        // give the same e^{−20} decay.
        let mut out = g;
        for _ in 0..40 {
            out = dissipative_step(&out, 0.5, 1.0, eta).unwrap();
        }
        let m = out.moments();
        assert!((m.var_q - 3.0 * eta * eta).abs() < 1e-6, "{}", m.var_q);
    }

    #[test]
    fn dissipation_relaxes_monotonically() {
        let eta = 0.15;
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let mut g = new_coherent_state(s, (0.0, 0.0), 0.6).unwrap();
        let mut last = g.moments().var_q;
        for _ in 0..8 {
            g = dissipative_step(&g, 0.25, 0.0, eta).unwrap();
            let v = g.moments().var_q;
            assert!(v < last && v > eta * eta);
            last = v;
        }
    }

    #[test]
    fn oversized_contraction_is_refused() {
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), 0.3).unwrap();
        assert!(matches!(
            dissipative_step(&g, 20.0, 1.0, 0.2).unwrap_err(),
            Error::Undersampled(_)
        ));
    }

    #[test]
    fn zero_gamma_is_identity() {
        let s = GridSpec::square(64, 2.0 * PI).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), 0.5).unwrap();
        assert_eq!(dissipative_step(&g, 0.0, 3.0, 0.5).unwrap(), g);
    }

    #[test]
    fn ridge_value_of_both_kernels() {
        let params = SystemParams::new(2.0, 0.04);
        let d = 4.5e-3;
        let q1: f64 = 0.7;
        let p_r = 0.3;
        // x = 0, y = 0: q^R = q', p' = p^R − K sin q'.
        let source = (q1, p_r - params.k * q1.sin());
        let expected = 1.0 / (4.0 * PI * d);
        for kind in [KernelKind::Classical, KernelKind::QuantumApprox] {
            let v = smoothed_propagator((q1, p_r), source, &params, d, kind).unwrap();
            assert!((v - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn quantum_kernel_tends_to_classical() {
        let d = 4.5e-3;
        let x_r = (0.3, -0.2);
        let x1 = (1.1, 0.05);
        let classical = smoothed_propagator(x_r, x1, &SystemParams::new(2.0, 0.04), d, KernelKind::Classical).unwrap();
        let mut last = f64::INFINITY;
        for eta in [0.04, 0.02, 0.01, 0.001] {
            let q = smoothed_propagator(x_r, x1, &SystemParams::new(2.0, eta), d, KernelKind::QuantumApprox).unwrap();
            let gap = (q - classical).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-10 * classical.max(1e-300) + 1e-12);
    }

    #[test]
    fn kernel_domain_errors() {
        let params = SystemParams::new(2.0, 0.5);
        assert!(smoothed_propagator((0.0, 0.0), (0.0, 0.0), &params, 0.0, KernelKind::Classical).is_err());
        assert!(smoothed_propagator((0.0, 0.0), (1.0, 0.0), &params, 1e-3, KernelKind::QuantumApprox).is_err());
    }

    #[test]
    fn reservoir_conversion() {
        assert!((diffusion_from_reservoir(100.0, 1e-3, 0.1, 1.0) - 1e-3).abs() < 1e-15);
    }
}
