//! Discretized phase-space distributions.
//!
//! A [`PhaseSpaceGrid`] stores samples `W(q_i, p_j)` at `q_i = q_min + i·Δq`
//! and `p_j = p_min + j·Δp`, row-major with `q` as the slow index. Every
//! sample stands for the cell of area `Δq·Δp` around it, so integrals are
//! Riemann sums. The window is periodic as far as the spectral transforms
//! are concerned.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted number of samples per axis.
pub const MIN_SAMPLES: usize = 64;

/// Fraction of the window width, at each edge, that is monitored for leakage.
pub const GUARD_BAND_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Q,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_q: usize,
    pub n_p: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl GridSpec {
    pub fn new(n_q: usize, n_p: usize, q: (f64, f64), p: (f64, f64)) -> Result<Self> {
        let spec = GridSpec {
            n_q,
            n_p,
            q_min: q.0,
            q_max: q.1,
            p_min: p.0,
            p_max: p.1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n × n` samples on `[-half_width, half_width)²`.
    pub fn square(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, n, (-half_width, half_width), (-half_width, half_width))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_q", self.n_q), ("n_p", self.n_p)] {
            if n < MIN_SAMPLES || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= {MIN_SAMPLES}"
                )));
            }
        }
        let bounds = [self.q_min, self.q_max, self.p_min, self.p_max];
        if bounds.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidGrid("window bounds must be finite".into()));
        }
        if self.q_max <= self.q_min || self.p_max <= self.p_min {
            return Err(Error::InvalidGrid(format!(
                "empty window q [{}, {}) p [{}, {})",
                self.q_min, self.q_max, self.p_min, self.p_max
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_q * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_q as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dq() * self.dp()
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q_min + i as f64 * self.dq()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn samples(&self, axis: Axis) -> usize {
        match axis {
            Axis::Q => self.n_q,
            Axis::P => self.n_p,
        }
    }

    pub fn width(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Q => self.q_max - self.q_min,
            Axis::P => self.p_max - self.p_min,
        }
    }

    pub fn step(&self, axis: Axis) -> f64 {
        self.width(axis) / self.samples(axis) as f64
    }

    pub fn lower(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Q => self.q_min,
            Axis::P => self.p_min,
        }
    }

    pub fn upper(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Q => self.q_max,
            Axis::P => self.p_max,
        }
    }

    pub fn coord(&self, axis: Axis, i: usize) -> f64 {
        self.lower(axis) + i as f64 * self.step(axis)
    }

    pub fn area(&self) -> f64 {
        self.width(Axis::Q) * self.width(Axis::P)
    }

    /// Row-major index of sample `(iq, ip)`.
    #[inline]
    pub fn index(&self, iq: usize, ip: usize) -> usize {
        iq * self.n_p + ip
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} on q [{}, {}) p [{}, {})",
            self.n_q, self.n_p, self.q_min, self.q_max, self.p_min, self.p_max
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Quantum,
    Classical,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Quantum => "quantum",
            Label::Classical => "classical",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Label::Quantum),
            "classical" => Ok(Label::Classical),
            other => Err(Error::Format(format!("unknown label {other:?}"))),
        }
    }
}

/// First and second moments of a distribution, normalized by its norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub norm: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    spec: GridSpec,
    values: Vec<f64>,
    label: Label,
}

impl PhaseSpaceGrid {
    pub fn zeros(spec: GridSpec, label: Label) -> Self {
        PhaseSpaceGrid {
            spec,
            values: vec![0.0; spec.len()],
            label,
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>, label: Label) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.n_q,
                spec.n_p
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        Ok(PhaseSpaceGrid {
            spec,
            values,
            label,
        })
    }

    /// Samples `f(q, p)` at every grid point.
    pub fn from_fn(spec: GridSpec, label: Label, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for iq in 0..spec.n_q {
            let q = spec.q(iq);
            for ip in 0..spec.n_p {
                values.push(f(q, spec.p(ip)));
            }
        }
        PhaseSpaceGrid {
            spec,
            values,
            label,
        }
    }

    pub(crate) fn from_parts(spec: GridSpec, values: Vec<f64>, label: Label) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        PhaseSpaceGrid {
            spec,
            values,
            label,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn get(&self, iq: usize, ip: usize) -> f64 {
        self.values[self.spec.index(iq, ip)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann sum `Σ W·Δq·Δp`.
    pub fn norm(&self) -> f64 {
        ordered_sum(&self.values, self.spec.n_p, |v| v) * self.spec.cell_area()
    }

    /// Volume of the negative part, `−Σ min(W, 0)·Δq·Δp`.
    pub fn negativity_volume(&self) -> f64 {
        ordered_sum(&self.values, self.spec.n_p, |v| (-v).max(0.0)) * self.spec.cell_area()
    }

    pub fn moments(&self) -> Moments {
        let s = &self.spec;
        let n_p = s.n_p;
        let weighted = |g: &dyn Fn(f64, f64) -> f64| -> f64 {
            let rows: Vec<f64> = (0..s.n_q)
                .map(|iq| {
                    let q = s.q(iq);
                    let row = &self.values[iq * n_p..(iq + 1) * n_p];
                    row.iter()
                        .enumerate()
                        .map(|(ip, &w)| w * g(q, s.p(ip)))
                        .sum()
                })
                .collect();
            pairwise(&rows)
        };
        let mass = weighted(&|_, _| 1.0);
        let mean_q = weighted(&|q, _| q) / mass;
        let mean_p = weighted(&|_, p| p) / mass;
        let var_q = weighted(&|q, _| (q - mean_q).powi(2)) / mass;
        let var_p = weighted(&|_, p| (p - mean_p).powi(2)) / mass;
        Moments {
            norm: mass * s.cell_area(),
            mean_q,
            mean_p,
            var_q,
            var_p,
        }
    }

    /// Absolute mass `Σ|W|·Δq·Δp` inside the edge bands of width
    /// `GUARD_BAND_FRACTION` of the window on all four sides.
    pub fn guard_band_mass(&self) -> f64 {
        let s = &self.spec;
        let band_q = ((s.n_q as f64 * GUARD_BAND_FRACTION).ceil() as usize).max(1);
        let band_p = ((s.n_p as f64 * GUARD_BAND_FRACTION).ceil() as usize).max(1);
        let mut rows = Vec::with_capacity(s.n_q);
        for iq in 0..s.n_q {
            let row = &self.values[iq * s.n_p..(iq + 1) * s.n_p];
            let in_q_band = iq < band_q || iq >= s.n_q - band_q;
            let sum: f64 = row
                .iter()
                .enumerate()
                .filter(|&(ip, _)| in_q_band || ip < band_p || ip >= s.n_p - band_p)
                .map(|(_, v)| v.abs())
                .sum();
            rows.push(sum);
        }
        pairwise(&rows) * s.cell_area()
    }

    /// Marginal density along `q`, `∫ W dp`.
    pub fn marginal_q(&self) -> Vec<f64> {
        let dp = self.spec.dp();
        self.values
            .chunks(self.spec.n_p)
            .map(|row| row.iter().sum::<f64>() * dp)
            .collect()
    }

    /// Marginal density along `p`, `∫ W dq`.
    pub fn marginal_p(&self) -> Vec<f64> {
        let dq = self.spec.dq();
        let mut out = vec![0.0; self.spec.n_p];
        for row in self.values.chunks(self.spec.n_p) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o *= dq);
        out
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: f64, other: &PhaseSpaceGrid, b: f64) -> Result<PhaseSpaceGrid> {
        ensure_same_spec(&self.spec, &other.spec)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(PhaseSpaceGrid::from_parts(self.spec, values, self.label))
    }
}

/// Riemann norm of a grid.
pub fn riemann_norm(grid: &PhaseSpaceGrid) -> f64 {
    grid.norm()
}

/// Negativity volume of a grid.
pub fn negativity_volume(grid: &PhaseSpaceGrid) -> f64 {
    grid.negativity_volume()
}

/// Wigner function of the coherent state of width `eta` centered at
/// `center`, which is also the matching classical Gaussian ensemble:
/// `W = exp(−|x − x₀|²/2η²) / 2πη²`. Labeled quantum; use
/// [`PhaseSpaceGrid::with_label`] for the classical twin.
pub fn new_coherent_state(spec: GridSpec, center: (f64, f64), eta: f64) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be positive")));
    }
    let margin = 6.0 * eta;
    let (q0, p0) = center;
    if q0 - margin < spec.q_min
        || q0 + margin > spec.q_max
        || p0 - margin < spec.p_min
        || p0 + margin > spec.p_max
    {
        return Err(Error::WindowTooSmall(format!(
            "coherent state at ({q0}, {p0}) with eta = {eta} needs a 6·eta margin inside {spec}"
        )));
    }
    let two_var = 2.0 * eta * eta;
    let peak = 1.0 / (PI * two_var);
    Ok(PhaseSpaceGrid::from_fn(spec, Label::Quantum, |q, p| {
        peak * (-((q - q0).powi(2) + (p - p0).powi(2)) / two_var).exp()
    }))
}

pub(crate) fn ensure_same_spec(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::SpecMismatch(format!("{a} vs {b}")));
    }
    Ok(())
}

/// Row sums in order, then a pairwise reduction over the row totals. The
/// order depends only on the grid shape.
pub(crate) fn ordered_sum(values: &[f64], row_len: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rows: Vec<f64> = values
        .chunks(row_len)
        .map(|row| row.iter().map(|&v| f(v)).sum())
        .collect();
    pairwise(&rows)
}

pub(crate) fn pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::square(256, 4.0 * PI).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::square(100, 1.0).is_err());
        assert!(GridSpec::square(32, 1.0).is_err());
        assert!(GridSpec::new(64, 64, (1.0, 1.0), (0.0, 1.0)).is_err());
        assert!(GridSpec::new(64, 64, (0.0, 1.0), (0.0, f64::NAN)).is_err());
    }

    #[test]
    fn coherent_state_peak_and_norm() {
        let g = new_coherent_state(spec(), (0.0, 0.0), 0.3).unwrap();
        let peak = 1.0 / (2.0 * PI * 0.09);
        assert!((g.get(128, 128) - peak).abs() < 1e-12);
        assert!((peak - 1.7684).abs() < 1e-4);
        assert!((g.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_state_variance_from_marginal() {
        // Second moment of the q-marginal by direct quadrature.
        let s = GridSpec::square(1024, 2.0).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), 0.1).unwrap();
        let marginal = g.marginal_q();
        let var: f64 = marginal
            .iter()
            .enumerate()
            .map(|(i, m)| m * s.q(i).powi(2) * s.dq())
            .sum();
        assert!((var - 0.01).abs() < 0.01 * 1e-3, "{var}");
    }

    #[test]
    fn coherent_state_off_center_norm() {
        let g = new_coherent_state(spec(), (1.3, -2.1), 0.2).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-10);
        let m = g.moments();
        assert!((m.mean_q - 1.3).abs() < 1e-10);
        assert!((m.var_p / 0.04 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn coherent_state_window_check() {
        let err = new_coherent_state(spec(), (4.0 * PI - 1.0, 0.0), 0.3).unwrap_err();
        assert!(matches!(err, Error::WindowTooSmall(_)));
        assert!(new_coherent_state(spec(), (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn norm_of_zeros_and_constants() {
        let s = spec();
        assert_eq!(PhaseSpaceGrid::zeros(s, Label::Quantum).norm(), 0.0);
        let c = 0.25;
        let g = PhaseSpaceGrid::from_fn(s, Label::Classical, |_, _| c);
        assert!((g.norm() - c * s.area()).abs() < 1e-10);
    }

    #[test]
    fn negativity_of_gaussian_is_zero() {
        let g = new_coherent_state(spec(), (0.0, 0.0), 0.5).unwrap();
        assert_eq!(g.negativity_volume(), 0.0);
        let neg = g.combine(-1.0, &g, 0.0).unwrap();
        assert!((neg.negativity_volume() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn from_values_rejects_nan() {
        let s = GridSpec::square(64, 1.0).unwrap();
        let mut v = vec![0.0; s.len()];
        v[7] = f64::INFINITY;
        assert!(PhaseSpaceGrid::from_values(s, v, Label::Quantum).is_err());
        assert!(PhaseSpaceGrid::from_values(s, vec![0.0; 3], Label::Quantum).is_err());
    }

    #[test]
    fn guard_band_sees_edge_mass() {
        let s = spec();
        let centered = new_coherent_state(s, (0.0, 0.0), 0.3).unwrap();
        assert!(centered.guard_band_mass() < 1e-100);
        let edge = new_coherent_state(s, (4.0 * PI - 2.0, 0.0), 0.3).unwrap();
        assert!(edge.guard_band_mass() > 1e-3);
    }
}
