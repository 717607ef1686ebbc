//! Pure-state reference evolution on the `q` axis.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Label, PhaseSpaceGrid};
use crate::params::SystemParams;
use crate::spectral::{signed_bin, ChirpZ};

/// Probability allowed within `6η` of either window edge.
pub const EDGE_PROBABILITY_TOL: f64 = 1e-10;

/// State sampled at `q_i = q_min + i·Δq`, `i < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    n: usize,
    q_min: f64,
    q_max: f64,
    eta: f64,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    /// Wraps amplitudes sampled on the `q` axis of `spec`.
    pub fn from_amplitudes(spec: &GridSpec, eta: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        spec.validate()?;
        if amplitudes.len() != spec.n_q {
            return Err(Error::SpecMismatch(format!(
                "{} amplitudes for {} q samples",
                amplitudes.len(),
                spec.n_q
            )));
        }
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {eta} must be > 0")));
        }
        Ok(WaveFunction {
            n: spec.n_q,
            q_min: spec.q_min,
            q_max: spec.q_max,
            eta,
            amplitudes,
        })
    }

    /// Coherent state `|q₀, p₀⟩` of the oscillator, whose Wigner function is
    /// the Gaussian of width `η` per quadrature.
    pub fn coherent(spec: &GridSpec, center: (f64, f64), eta: f64) -> Result<Self> {
        let (q0, p0) = center;
        let hbar = 2.0 * eta * eta;
        let amp = (2.0 * PI * eta * eta).powf(-0.25);
        let amplitudes = (0..spec.n_q)
            .map(|i| {
                let q = spec.q(i);
                let envelope = amp * (-(q - q0).powi(2) / (4.0 * eta * eta)).exp();
                Complex64::from_polar(envelope, p0 * (q - 0.5 * q0) / hbar)
            })
            .collect();
        Self::from_amplitudes(spec, eta, amplitudes)
    }

    /// Even superposition of the coherent states at `(±q0, 0)`, normalized.
    pub fn cat(spec: &GridSpec, q0: f64, eta: f64) -> Result<Self> {
        let a = Self::coherent(spec, (q0, 0.0), eta)?;
        let b = Self::coherent(spec, (-q0, 0.0), eta)?;
        let mut amplitudes: Vec<Complex64> = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x + y).collect();
        let norm = (amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * a.dq()).sqrt();
        amplitudes.iter_mut().for_each(|c| *c /= norm);
        Self::from_amplitudes(spec, eta, amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn hbar_eff(&self) -> f64 {
        2.0 * self.eta * self.eta
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.n as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q_min + i as f64 * self.dq()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dq()
    }

    pub fn position_density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn expectation_q(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm_sqr() * self.q(i))
            .sum::<f64>()
            * self.dq()
    }

    /// `⟨p⟩ = Σ ħk |ψ̂(k)|² / Σ |ψ̂(k)|²` on the FFT momentum lattice.
    pub fn expectation_p(&self) -> f64 {
        let mut spectrum = self.amplitudes.clone();
        FftPlanner::new().plan_fft_forward(self.n).process(&mut spectrum);
        let width = self.q_max - self.q_min;
        let hbar = self.hbar_eff();
        let (mut num, mut den) = (0.0, 0.0);
        for (j, c) in spectrum.iter().enumerate() {
            let k = 2.0 * PI * signed_bin(j, self.n) as f64 / width;
            num += hbar * k * c.norm_sqr();
            den += c.norm_sqr();
        }
        num / den
    }

    /// `|⟨self|other⟩|`.
    pub fn fidelity(&self, other: &WaveFunction) -> f64 {
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        overlap.norm() * self.dq()
    }

    fn same_axis(&self, spec: &GridSpec) -> bool {
        spec.n_q == self.n && spec.q_min == self.q_min && spec.q_max == self.q_max
    }

    fn check_margin(&self) -> Result<()> {
        let margin = 6.0 * self.eta;
        let dq = self.dq();
        let edge: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|&(i, _)| {
                let q = self.q(i);
                q - self.q_min < margin || self.q_max - q <= margin
            })
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>()
            * dq;
        if edge > EDGE_PROBABILITY_TOL {
            return Err(Error::WindowTooSmall(format!(
                "state carries probability {edge:e} within 6·eta of the window edge"
            )));
        }
        Ok(())
    }

    /// Momentum density `|φ(p)|²` at the `p` samples of `spec`, with
    /// `φ(p) = (2πħ)^{−1/2} ∫ ψ(q) e^{−ipq/ħ} dq`.
    pub fn momentum_density(&self, spec: &GridSpec) -> Vec<f64> {
        let hbar = self.hbar_eff();
        let dq = self.dq();
        let omega = -spec.dp() * dq / hbar;
        let input: Vec<Complex64> = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(1.0, -spec.p_min * i as f64 * dq / hbar))
            .collect();
        let czt = ChirpZ::new(self.n, spec.n_p, omega);
        let scale = dq * dq / (2.0 * PI * hbar);
        czt.transform(&input).iter().map(|c| c.norm_sqr() * scale).collect()
    }
}

/// One period of the unitary dynamics: the kick `exp(−iK cos q/ħ)` and then
/// the harmonic rotation by `ντ`, realized as a fractional Fourier transform
/// through the chirp factorization
/// `e^{−iθ(q²+p²)/2ħ} = e^{−i tan(θ/2) q²/2ħ} e^{−i sin θ p²/2ħ} e^{−i tan(θ/2) q²/2ħ}`.
pub fn evolve_state_one_kick(psi: &WaveFunction, params: &SystemParams) -> Result<WaveFunction> {
    params.validate()?;
    if (params.eta - psi.eta).abs() > 1e-15 * psi.eta {
        return Err(Error::InvalidParameter(format!(
            "state prepared for eta = {} evolved with eta = {}",
            psi.eta, params.eta
        )));
    }
    psi.check_margin()?;
    let hbar = psi.hbar_eff();
    let mut out = psi.clone();
    for (i, c) in out.amplitudes.iter_mut().enumerate() {
        let q = psi.q(i);
        *c *= Complex64::from_polar(1.0, -params.k * q.cos() / hbar);
    }
    let pieces = (params.nu_tau.abs() / (0.5 * PI)).ceil().max(1.0) as usize;
    let piece = params.nu_tau / pieces as f64;
    for _ in 0..pieces {
        rotate_state(&mut out, piece);
    }
    Ok(out)
}

fn rotate_state(psi: &mut WaveFunction, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let hbar = psi.hbar_eff();
    let t = (0.5 * theta).tan();
    let s = theta.sin();
    let n = psi.n;
    let width = psi.q_max - psi.q_min;
    let q_chirp: Vec<Complex64> = (0..n)
        .map(|i| {
            let q = psi.q(i);
            Complex64::from_polar(1.0, -t * q * q / (2.0 * hbar))
        })
        .collect();
    for (c, m) in psi.amplitudes.iter_mut().zip(&q_chirp) {
        *c *= m;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut psi.amplitudes);
    for (j, c) in psi.amplitudes.iter_mut().enumerate() {
        let k = 2.0 * PI * signed_bin(j, n) as f64 / width;
        *c *= Complex64::from_polar(1.0 / n as f64, -s * hbar * k * k / 2.0);
    }
    planner.plan_fft_inverse(n).process(&mut psi.amplitudes);
    for (c, m) in psi.amplitudes.iter_mut().zip(&q_chirp) {
        *c *= m;
    }
}

/// Band-limited interpolation of the amplitudes onto the half-step lattice
/// `q_min + f·Δq/2`, `f < 2n`.
fn upsample_twice(psi: &WaveFunction) -> Vec<Complex64> {
    let n = psi.n;
    let mut planner = FftPlanner::new();
    let mut spectrum = psi.amplitudes.clone();
    planner.plan_fft_forward(n).process(&mut spectrum);
    let mut fine = vec![Complex64::new(0.0, 0.0); 2 * n];
    let half = n / 2;
    for (j, c) in spectrum.iter().enumerate() {
        let s = signed_bin(j, n);
        if j == half {
            fine[2 * n - half] += 0.5 * c;
            fine[half] += 0.5 * c;
        } else {
            fine[s.rem_euclid(2 * n as i64) as usize] = *c;
        }
    }
    planner.plan_fft_inverse(2 * n).process(&mut fine);
    let scale = 1.0 / n as f64;
    fine.iter_mut().for_each(|c| *c *= scale);
    fine
}

/// Wigner function `W(q,p) = (1/πħ) ∫ ψ*(q+s) ψ(q−s) e^{2ips/ħ} ds` on the
/// grid `spec`, whose `q` axis must be the state's sampling axis.
///
/// The state is first interpolated to half steps so that `s` runs over
/// multiples of `Δq/2`; samples outside the window count as zero. The `p`
/// transform of every row is a chirp-z transform onto the `p` samples.
pub fn wigner_of_state(psi: &WaveFunction, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    if !psi.same_axis(spec) {
        return Err(Error::SpecMismatch(format!(
            "state sampled on {} points over [{}, {}) but grid is {spec}",
            psi.n, psi.q_min, psi.q_max
        )));
    }
    let n = psi.n;
    let hbar = psi.hbar_eff();
    let half_step = 0.5 * psi.dq();
    let fine = upsample_twice(psi);
    let dp = spec.dp();
    // e^{2ips/ħ} with s = jδ; ω is the phase increment per unit of j·m.
    let omega = 2.0 * half_step * dp / hbar;
    let czt = ChirpZ::new(2 * n, spec.n_p, omega);
    let prefactor = half_step / (PI * hbar);

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let center = 2 * i;
            let reach = center.min(2 * n - 1 - center);
            let input: Vec<Complex64> = (0..=2 * reach)
                .map(|jj| {
                    let j = jj as i64 - reach as i64;
                    let plus = (center as i64 + j) as usize;
                    let minus = (center as i64 - j) as usize;
                    let c = fine[plus].conj() * fine[minus];
                    c * Complex64::from_polar(1.0, 2.0 * spec.p_min * jj as f64 * half_step / hbar)
                })
                .collect();
            let sums = czt.transform(&input);
            sums.iter()
                .enumerate()
                .map(|(m, v)| {
                    let p = spec.p(m);
                    let shift = Complex64::from_polar(1.0, -2.0 * p * reach as f64 * half_step / hbar);
                    prefactor * (v * shift).re
                })
                .collect()
        })
        .collect();

    let values: Vec<f64> = rows.into_iter().flatten().collect();
    PhaseSpaceGrid::from_values(*spec, values, Label::Quantum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::new_coherent_state;

    fn spec() -> GridSpec {
        GridSpec::square(256, 2.0 * PI).unwrap()
    }

    fn l1(a: &PhaseSpaceGrid, b: &PhaseSpaceGrid) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            * a.spec().cell_area()
    }

    #[test]
    fn coherent_state_is_normalized() {
        let psi = WaveFunction::coherent(&spec(), (0.5, 1.0), 0.3).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
        assert!((psi.expectation_q() - 0.5).abs() < 1e-10);
        assert!((psi.expectation_p() - 1.0).abs() < 1e-8, "{}", psi.expectation_p());
    }

    #[test]
    fn full_period_returns_state() {
        let s = spec();
        let psi0 = WaveFunction::coherent(&s, (1.0, 0.5), 0.3).unwrap();
        let params = SystemParams::new(0.0, 0.3);
        let mut psi = psi0.clone();
        for _ in 0..6 {
            psi = evolve_state_one_kick(&psi, &params).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-10);
        }
        assert!(psi.fidelity(&psi0) > 1.0 - 1e-8, "{}", psi.fidelity(&psi0));
    }

    #[test]
    fn centroid_rotates_clockwise() {
        let s = spec();
        let q0 = 1.5;
        let params = SystemParams::new(0.0, 0.3);
        let mut psi = WaveFunction::coherent(&s, (q0, 0.0), 0.3).unwrap();
        for n in 1..=3 {
            psi = evolve_state_one_kick(&psi, &params).unwrap();
            let angle = n as f64 * params.nu_tau;
            assert!((psi.expectation_q() - q0 * angle.cos()).abs() < 1e-8);
            assert!((psi.expectation_p() + q0 * angle.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn kicked_norm_is_preserved() {
        let s = spec();
        let mut psi = WaveFunction::coherent(&s, (0.0, 0.0), 0.3).unwrap();
        let params = SystemParams::new(2.0, 0.3);
        for _ in 0..3 {
            psi = evolve_state_one_kick(&psi, &params).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn margin_violation_is_reported() {
        let s = GridSpec::square(256, 2.0).unwrap();
        let psi = WaveFunction::coherent(&s, (1.2, 0.0), 0.3).unwrap();
        assert!(evolve_state_one_kick(&psi, &SystemParams::new(0.0, 0.3)).is_err());
    }

    #[test]
    fn ground_state_wigner_is_gaussian() {
        let s = spec();
        let eta = 0.3;
        let w = wigner_of_state(&WaveFunction::coherent(&s, (0.0, 0.0), eta).unwrap(), &s).unwrap();
        let exact = new_coherent_state(s, (0.0, 0.0), eta).unwrap();
        assert!(l1(&w, &exact) < 1e-6, "{}", l1(&w, &exact));
        assert!((w.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn displaced_state_wigner() {
        let s = spec();
        let w = wigner_of_state(&WaveFunction::coherent(&s, (1.0, -0.7), 0.25).unwrap(), &s).unwrap();
        let exact = new_coherent_state(s, (1.0, -0.7), 0.25).unwrap();
        assert!(l1(&w, &exact) < 1e-6, "{}", l1(&w, &exact));
    }

    #[test]
    fn cat_state_has_fringes() {
        let s = spec();
        let eta = 0.3;
        let psi = WaveFunction::cat(&s, 4.0 * eta, eta).unwrap();
        let w = wigner_of_state(&psi, &s).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-6);
        assert!(w.negativity_volume() > 0.05, "{}", w.negativity_volume());
    }

    #[test]
    fn wigner_marginals() {
        let s = spec();
        let params = SystemParams::new(1.5, 0.3);
        let mut psi = WaveFunction::coherent(&s, (0.3, 0.0), 0.3).unwrap();
        psi = evolve_state_one_kick(&psi, &params).unwrap();
        let w = wigner_of_state(&psi, &s).unwrap();
        let q_marginal = w.marginal_q();
        let q_err: f64 = q_marginal
            .iter()
            .zip(psi.position_density())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * s.dq();
        assert!(q_err < 1e-4, "{q_err}");
        let p_err: f64 = w
            .marginal_p()
            .iter()
            .zip(psi.momentum_density(&s))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * s.dp();
        assert!(p_err < 1e-4, "{p_err}");
    }

    #[test]
    fn wigner_requires_matching_axis() {
        let psi = WaveFunction::coherent(&spec(), (0.0, 0.0), 0.3).unwrap();
        let other = GridSpec::square(128, 2.0 * PI).unwrap();
        assert!(matches!(wigner_of_state(&psi, &other), Err(Error::SpecMismatch(_))));
    }
}
