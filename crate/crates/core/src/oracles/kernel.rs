//! Direct quadrature of the smoothed one-kick quantum kernel.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Gaussian damping exponent at which the frequency integral is truncated.
const TAIL_EXPONENT: f64 = 40.0;

/// Simpson panels per unit of the largest phase velocity.
const PANELS_PER_RADIAN: f64 = 16.0;

/// Smoothed quantum kernel `L̃(x^R, x′)` by numerical integration over the
/// momentum-conjugate frequency `u`:
///
/// `L̃ = e^{−x²}/√(4πD) · (1/π) ∫₀^∞ cos(K s sin(η²u)/η² + u(Y − K s)) e^{−Du²} du`
///
/// with `s = sin q′`, `Y = p′ − p^R + K s` and `x = (q′ − q^R)/2√D`. The
/// integrand is the exact kick phase with the diffusion factor applied, so
/// no expansion in `η` is made.
pub fn smoothed_kernel_quadrature(x_r: (f64, f64), x_prime: (f64, f64), params: &SystemParams, d: f64) -> Result<f64> {
    params.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("smoothed kernels need D > 0, got {d}")));
    }
    let (q_r, p_r) = x_r;
    let (q1, p1) = x_prime;
    let eta2 = params.eta * params.eta;
    let s = q1.sin();
    let ks = params.k * s;
    let big_y = p1 - p_r + ks;
    let x = (q1 - q_r) / (2.0 * d.sqrt());

    let u_max = (TAIL_EXPONENT / d).sqrt();
    let rate = big_y.abs() + 2.0 * ks.abs() + 1.0;
    let mut panels = (u_max * rate * PANELS_PER_RADIAN).ceil() as usize;
    panels += panels % 2;
    let h = u_max / panels as f64;
    let integrand = |u: f64| (ks * (eta2 * u).sin() / eta2 + u * (big_y - ks)).cos() * (-d * u * u).exp();
    let mut sum = integrand(0.0) + integrand(u_max);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(i as f64 * h);
    }
    let integral = sum * h / 3.0;
    Ok((-x * x).exp() / (4.0 * PI * d).sqrt() * integral / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoherence::{smoothed_propagator, KernelKind};

    #[test]
    fn classical_limit_is_gaussian() {
        let params = SystemParams::new(2.0, 1e-4);
        let d = 0.01;
        for &(xr, xp) in &[((0.1, 0.2), (0.15, 0.1)), ((1.0, -0.5), (1.02, -2.1))] {
            let quad = smoothed_kernel_quadrature(xr, xp, &params, d).unwrap();
            let exact = smoothed_propagator(xr, xp, &params, d, KernelKind::Classical).unwrap();
            assert!((quad - exact).abs() < 1e-6 * exact.max(1.0), "{quad} vs {exact}");
        }
    }

    #[test]
    fn zero_kick_is_gaussian() {
        let params = SystemParams::new(0.0, 0.3);
        let d = 0.02;
        let quad = smoothed_kernel_quadrature((0.0, 0.0), (0.1, -0.05), &params, d).unwrap();
        let exact = smoothed_propagator((0.0, 0.0), (0.1, -0.05), &params, d, KernelKind::Classical).unwrap();
        assert!((quad - exact).abs() < 1e-8 * exact, "{quad} vs {exact}");
    }

    #[test]
    fn rejects_zero_diffusion() {
        assert!(smoothed_kernel_quadrature((0.0, 0.0), (0.0, 0.0), &SystemParams::new(2.0, 0.1), 0.0).is_err());
    }
}
