//! Line-by-line spectral transforms on phase-space grids.
//!
//! Conventions: along an axis of `N` samples spanning width `L`, the
//! transform of a line is `F(μ) = Σ W(c) e^{iμc}` over the sample
//! coordinates `c`, so that multiplying by `e^{iμa}` shifts the line by
//! `+a`. Conjugate frequencies are `μ_j = −2π s_j / L` with `s_j` the signed
//! FFT bin index. The Nyquist bin stands for both `±μ_N` and receives the
//! real part of the multiplier, which keeps real input real.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};

/// Largest tolerated `||m| − 1|` for a unit-modulus multiplier.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Largest spectral energy fraction a contraction may push past Nyquist.
pub const UNDERSAMPLING_TOL: f64 = 1e-12;

/// Largest tolerated imaginary L1 mass discarded after an inverse transform.
pub const IMAGINARY_TOL: f64 = 1e-8;

/// Signed FFT bin index for bin `j` of `n`.
#[inline]
pub fn signed_bin(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Conjugate frequency of bin `j` along an axis of `n` samples and width `width`.
#[inline]
pub fn conjugate_frequency(j: usize, n: usize, width: f64) -> f64 {
    -2.0 * PI * signed_bin(j, n) as f64 / width
}

struct LineStats {
    max_deviation: f64,
    worst_frequency: f64,
    imaginary: f64,
}

/// Applies `multiplier(μ, transverse)` along every line of `axis`.
///
/// The multiplier must have unit modulus at every sampled frequency and be
/// 1 at zero frequency; violations beyond [`UNIT_MODULUS_TOL`] are rejected.
pub fn apply_fourier_multiplier<F>(
    grid: &PhaseSpaceGrid,
    axis: Axis,
    multiplier: F,
) -> Result<PhaseSpaceGrid>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let (out, stats) = filter_lines(grid, axis, &multiplier, true)?;
    if stats.max_deviation > UNIT_MODULUS_TOL {
        return Err(Error::NonUnitMultiplier {
            frequency: stats.worst_frequency,
            deviation: stats.max_deviation,
        });
    }
    check_imaginary(&stats)?;
    Ok(out)
}

/// Convolution with a separable Gaussian of variances `var_q`, `var_p`,
/// applied as the spectral multipliers `e^{−μ²·var/2}`.
pub fn gaussian_convolve(grid: &PhaseSpaceGrid, var_q: f64, var_p: f64) -> Result<PhaseSpaceGrid> {
    let spec = grid.spec();
    for (axis, var) in [(Axis::Q, var_q), (Axis::P, var_p)] {
        if !(var >= 0.0 && var.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "convolution variance {var} must be finite and non-negative"
            )));
        }
        let sigma = var.sqrt();
        if 12.0 * sigma > spec.width(axis) {
            return Err(Error::WindowTooSmall(format!(
                "Gaussian kernel of sigma {sigma} along {axis:?} wraps a window of width {}",
                spec.width(axis)
            )));
        }
    }
    let mut out = grid.clone();
    for (axis, var) in [(Axis::Q, var_q), (Axis::P, var_p)] {
        if var > 0.0 {
            let half = 0.5 * var;
            let filter = |mu: f64, _| Complex64::new((-mu * mu * half).exp(), 0.0);
            let (next, stats) = filter_lines(&out, axis, &filter, false)?;
            check_imaginary(&stats)?;
            out = next;
        }
    }
    Ok(out)
}

fn check_imaginary(stats: &LineStats) -> Result<()> {
    if stats.imaginary > IMAGINARY_TOL {
        return Err(Error::ImaginaryResidue(stats.imaginary));
    }
    Ok(())
}

/// Shared line engine: forward FFT, multiply, inverse FFT, real projection.
fn filter_lines<F>(
    grid: &PhaseSpaceGrid,
    axis: Axis,
    multiplier: &F,
    track_modulus: bool,
) -> Result<(PhaseSpaceGrid, LineStats)>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let spec = *grid.spec();
    let n = spec.samples(axis);
    let width = spec.width(axis);
    let transverse_axis = match axis {
        Axis::Q => Axis::P,
        Axis::P => Axis::Q,
    };

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let scratch_len = forward
        .get_inplace_scratch_len()
        .max(inverse.get_inplace_scratch_len());

    // Lines along p are rows already; lines along q go through a transpose.
    let mut lines: Vec<Complex64> = match axis {
        Axis::P => grid.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        Axis::Q => transpose(grid.values(), spec.n_q, spec.n_p)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect(),
    };

    let frequencies: Vec<f64> = (0..n).map(|j| conjugate_frequency(j, n, width)).collect();
    let nyquist = n / 2;
    let scale = 1.0 / n as f64;

    let stats: Vec<LineStats> = lines
        .par_chunks_mut(n)
        .enumerate()
        .map_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, (line_index, line)| {
                let transverse = spec.coord(transverse_axis, line_index);
                forward.process_with_scratch(line, scratch);
                let mut stats = LineStats {
                    max_deviation: 0.0,
                    worst_frequency: 0.0,
                    imaginary: 0.0,
                };
                for (j, value) in line.iter_mut().enumerate() {
                    let mu = frequencies[j];
                    let mut m = multiplier(mu, transverse);
                    if track_modulus {
                        let mut deviation = (m.norm() - 1.0).abs();
                        if j == 0 {
                            deviation = deviation.max((m - Complex64::new(1.0, 0.0)).norm());
                        }
                        if deviation > stats.max_deviation || deviation.is_nan() {
                            stats.max_deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
                            stats.worst_frequency = mu;
                        }
                    }
                    if j == nyquist {
                        m = Complex64::new(m.re, 0.0);
                    }
                    *value *= m;
                }
                inverse.process_with_scratch(line, scratch);
                for value in line.iter_mut() {
                    *value *= scale;
                    stats.imaginary += value.im.abs();
                }
                stats
            },
        )
        .collect();

    let mut total = LineStats {
        max_deviation: 0.0,
        worst_frequency: 0.0,
        imaginary: 0.0,
    };
    for s in &stats {
        if s.max_deviation > total.max_deviation {
            total.max_deviation = s.max_deviation;
            total.worst_frequency = s.worst_frequency;
        }
        total.imaginary += s.imaginary;
    }
    total.imaginary *= spec.cell_area();

    let real: Vec<f64> = lines.iter().map(|c| c.re).collect();
    let values = match axis {
        Axis::P => real,
        Axis::Q => transpose(&real, spec.n_p, spec.n_q),
    };
    Ok((PhaseSpaceGrid::from_parts(spec, values, grid.label()), total))
}

/// Transpose of a `rows × cols` row-major matrix.
pub(crate) fn transpose<T: Copy + Send + Sync>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    debug_assert_eq!(src.len(), rows * cols);
    if src.is_empty() {
        return Vec::new();
    }
    let mut dst = vec![src[0]; src.len()];
    dst.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = src[r * cols + c];
        }
    });
    dst
}

/// Chirp-z transform `X_m = Σ_j x_j e^{iωjm}` for `m < n_out`, evaluated
/// with Bluestein's convolution identity on power-of-two FFTs.
pub struct ChirpZ {
    n_in: usize,
    n_out: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel: Vec<Complex64>,
}

impl ChirpZ {
    pub fn new(n_in: usize, n_out: usize, omega: f64) -> Self {
        let fft_len = (n_in + n_out - 1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let chirp = |k: usize, sign: f64| {
            let kk = (k as f64) * (k as f64);
            Complex64::from_polar(1.0, sign * 0.5 * omega * kk)
        };
        let pre: Vec<Complex64> = (0..n_in).map(|j| chirp(j, 1.0)).collect();
        let post: Vec<Complex64> = (0..n_out).map(|m| chirp(m, 1.0)).collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); fft_len];
        for (t, k) in kernel.iter_mut().enumerate().take(n_out) {
            *k = chirp(t, -1.0);
        }
        for t in 1..n_in {
            kernel[fft_len - t] = chirp(t, -1.0);
        }
        forward.process(&mut kernel);
        ChirpZ {
            n_in,
            n_out,
            fft_len,
            forward,
            inverse,
            pre,
            post,
            kernel,
        }
    }

    pub fn input_len(&self) -> usize {
        self.n_in
    }

    pub fn output_len(&self) -> usize {
        self.n_out
    }

    /// Evaluates the transform of `input` (at most `input_len` samples; the
    /// rest are taken as zero).
    pub fn transform(&self, input: &[Complex64]) -> Vec<Complex64> {
        assert!(input.len() <= self.n_in, "chirp-z input too long");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for ((b, x), c) in buf.iter_mut().zip(input).zip(&self.pre) {
            *b = x * c;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf.truncate(self.n_out);
        for (b, c) in buf.iter_mut().zip(&self.post) {
            *b *= c * scale;
        }
        buf
    }
}

/// Resamples every line along `axis` as `w'(c) = s·w(s·c)`: a mass-preserving
/// contraction about the coordinate origin by the factor `s ≥ 1`. The
/// band-limited interpolant is evaluated through its spectrum on the dilated
/// frequency lattice. Fails when the line carries spectral content the
/// contracted grid cannot represent.
pub fn contract_axis(grid: &PhaseSpaceGrid, axis: Axis, factor: f64) -> Result<PhaseSpaceGrid> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "contraction factor {factor} must be >= 1"
        )));
    }
    if factor == 1.0 {
        return Ok(grid.clone());
    }
    let spec = *grid.spec();
    let n = spec.samples(axis);
    let lower = spec.lower(axis);
    let width = spec.width(axis);
    let half = n / 2;

    let lines: Vec<f64> = match axis {
        Axis::P => grid.values().to_vec(),
        Axis::Q => transpose(grid.values(), spec.n_q, spec.n_p),
    };

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    // Inputs ordered by signed bin s = −N/2 ..= N/2, the Nyquist bin split
    // evenly between both ends.
    let czt = ChirpZ::new(n + 1, n, 2.0 * PI * factor / n as f64);
    // Spectral content above N/(2·factor) would land beyond Nyquist.
    let cutoff = (half as f64 / factor).floor() as i64;

    let results: Vec<(Vec<f64>, f64, f64)> = lines
        .par_chunks(n)
        .map(|line| {
            let mut spectrum: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            forward.process(&mut spectrum);
            let mut lost = 0.0;
            let mut kept = 0.0;
            let mut ordered = vec![Complex64::new(0.0, 0.0); n + 1];
            for (j, x) in spectrum.iter().enumerate() {
                let s = signed_bin(j, n);
                let energy = x.norm_sqr();
                if s.abs() > cutoff {
                    lost += energy;
                } else {
                    kept += energy;
                }
                let k = 2.0 * PI * s as f64 / width;
                let phase = Complex64::from_polar(1.0, k * (factor - 1.0) * lower);
                if j == half {
                    // s = −N/2 and its mirror +N/2.
                    let k_pos = -k;
                    ordered[0] = 0.5 * x * phase;
                    ordered[n] = 0.5 * x * Complex64::from_polar(1.0, k_pos * (factor - 1.0) * lower);
                } else {
                    ordered[(s + half as i64) as usize] = x * phase;
                }
            }
            let evaluated = czt.transform(&ordered);
            let out: Vec<f64> = evaluated
                .iter()
                .enumerate()
                .map(|(m, v)| {
                    let shift = Complex64::from_polar(1.0, -PI * factor * m as f64);
                    factor * (v * shift).re / n as f64
                })
                .collect();
            (out, lost, kept)
        })
        .collect();

    let mut values = Vec::with_capacity(spec.len());
    let (mut lost, mut kept) = (0.0, 0.0);
    for (line, l, k) in results {
        values.extend(line);
        lost += l;
        kept += k;
    }
    if kept > 0.0 && lost / kept > UNDERSAMPLING_TOL {
        return Err(Error::Undersampled(format!(
            "contracting by {factor} along {axis:?} drops a spectral energy fraction {:e}",
            lost / kept
        )));
    }
    let values = match axis {
        Axis::P => values,
        Axis::Q => transpose(&values, spec.n_p, spec.n_q),
    };
    Ok(PhaseSpaceGrid::from_parts(spec, values, grid.label()))
}
