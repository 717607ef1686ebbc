//! Quantum-classical distance series and the quantities derived from them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoherence::{chi, DecoherenceParams};
use crate::error::{Error, Result};
use crate::grid::{ensure_same_spec, new_coherent_state, ordered_sum, GridSpec, Label, PhaseSpaceGrid};
use crate::params::SystemParams;
use crate::propagators::{liouville_pullback, step, StepMode};

/// Multiple of the baseline a peak must exceed in [`detect_first_peak`].
pub const PEAK_BASELINE_FACTOR: f64 = 3.0;

/// Pointwise tolerance of the rescaled-curve collapse.
pub const COLLAPSE_TOL: f64 = 0.25;

/// `Σ|a − b|·Δq·Δp`, summed in an order fixed by the grid shape.
pub fn l1_distance(a: &PhaseSpaceGrid, b: &PhaseSpaceGrid) -> Result<f64> {
    ensure_same_spec(a.spec(), b.spec())?;
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    Ok(ordered_sum(&diff, a.spec().n_p, f64::abs) * a.spec().cell_area())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub n: usize,
    pub distance: f64,
    pub norm_q: f64,
    pub norm_cl: f64,
    pub negativity: f64,
}

/// Distances `D_n` sampled immediately before kick `n = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub records: Vec<DistanceRecord>,
    pub params: SystemParams,
    pub deco: DecoherenceParams,
    /// `χ = Kη⁴/D^{3/2}`; absent when `D = 0`.
    pub chi: Option<f64>,
}

impl DistanceSeries {
    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.distance).collect()
    }

    pub fn max_distance(&self) -> f64 {
        self.records.iter().map(|r| r.distance).fold(0.0, f64::max)
    }

    /// `D_n/χ`, optionally divided further by the height of the first peak.
    pub fn rescaled(&self, normalize_peak: bool) -> Result<Vec<f64>> {
        let chi = self
            .chi
            .ok_or_else(|| Error::Domain("rescaling by chi needs D > 0".into()))?;
        let mut out: Vec<f64> = self.records.iter().map(|r| r.distance / chi).collect();
        if normalize_peak {
            let (_, height) = detect_first_peak(self)?;
            out.iter_mut().for_each(|v| *v *= chi / height);
        }
        Ok(out)
    }

    /// CSV with a `#` comment block of parameters, then
    /// `n,D_n,norm_q,norm_cl,negativity`.
    pub fn to_csv(&self) -> String {
        self.to_csv_with_comments("")
    }

    /// As [`to_csv`](Self::to_csv), with every line of `extra` added to the
    /// comment block.
    pub fn to_csv_with_comments(&self, extra: &str) -> String {
        let mut s = String::new();
        for line in extra.lines() {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "# K = {}", self.params.k);
        let _ = writeln!(s, "# eta = {}", self.params.eta);
        let _ = writeln!(s, "# nu_tau = {}", self.params.nu_tau);
        let _ = writeln!(s, "# tau = {}", self.params.tau);
        let _ = writeln!(s, "# D = {}", self.deco.d);
        let _ = writeln!(s, "# gamma_tau = {}", self.deco.gamma_tau);
        let _ = writeln!(s, "# nbar = {}", self.deco.nbar);
        match self.chi {
            Some(c) => {
                let _ = writeln!(s, "# chi = {c}");
            }
            None => s.push_str("# chi = none\n"),
        }
        s.push_str("n,D_n,norm_q,norm_cl,negativity\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{},{}", r.n, r.distance, r.norm_q, r.norm_cl, r.negativity);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn record(n: usize, q: &PhaseSpaceGrid, cl: &PhaseSpaceGrid) -> Result<DistanceRecord> {
    Ok(DistanceRecord {
        n,
        distance: l1_distance(q, cl)?,
        norm_q: q.norm(),
        norm_cl: cl.norm(),
        negativity: q.negativity_volume(),
    })
}

/// Evolves a quantum and a classical grid side by side for `n_kicks` kicks,
/// recording `D_n` for `n = 0..=n_kicks`. `observer` sees both grids at
/// every recorded `n`.
pub fn evolve_pair_with<F>(
    quantum: PhaseSpaceGrid,
    classical: PhaseSpaceGrid,
    params: &SystemParams,
    deco: &DecoherenceParams,
    n_kicks: usize,
    mut observer: F,
) -> Result<DistanceSeries>
where
    F: FnMut(usize, &PhaseSpaceGrid, &PhaseSpaceGrid),
{
    if quantum.label() != Label::Quantum || classical.label() != Label::Classical {
        return Err(Error::LabelMismatch {
            expected: "quantum and classical".into(),
            found: format!("{} and {}", quantum.label(), classical.label()),
        });
    }
    ensure_same_spec(quantum.spec(), classical.spec())?;
    params.validate()?;
    deco.validate()?;
    let chi = if deco.d > 0.0 { Some(chi(params.k, params.eta, deco.d)?) } else { None };

    let (mut q, mut cl) = (quantum, classical);
    let mut records = Vec::with_capacity(n_kicks + 1);
    records.push(record(0, &q, &cl)?);
    observer(0, &q, &cl);
    for n in 1..=n_kicks {
        let (nq, ncl) = rayon::join(
            || step(&q, params, StepMode::Quantum, deco),
            || step(&cl, params, StepMode::Classical, deco),
        );
        q = nq?;
        cl = ncl?;
        records.push(record(n, &q, &cl)?);
        observer(n, &q, &cl);
    }
    Ok(DistanceSeries {
        records,
        params: *params,
        deco: *deco,
        chi,
    })
}

/// [`evolve_pair_with`] without an observer.
pub fn evolve_pair(
    quantum: PhaseSpaceGrid,
    classical: PhaseSpaceGrid,
    params: &SystemParams,
    deco: &DecoherenceParams,
    n_kicks: usize,
) -> Result<DistanceSeries> {
    evolve_pair_with(quantum, classical, params, deco, n_kicks, |_, _, _| {})
}

/// Unitary (`D = 0`, no damping) evolution of a coherent state and its
/// classical twin. The quantum grid is stepped spectrally; the classical
/// density is the exact [`liouville_pullback`] of the initial Gaussian,
/// which stays nonnegative and unaliased however thin its filaments get.
pub fn evolve_coherent_pair_unitary<F>(
    spec: GridSpec,
    center: (f64, f64),
    params: &SystemParams,
    n_kicks: usize,
    mut observer: F,
) -> Result<DistanceSeries>
where
    F: FnMut(usize, &PhaseSpaceGrid, &PhaseSpaceGrid),
{
    params.validate()?;
    let eta = params.eta;
    let mut q = new_coherent_state(spec, center, eta)?;
    let two_var = 2.0 * eta * eta;
    let gaussian = |x: f64, y: f64| (-((x - center.0).powi(2) + (y - center.1).powi(2)) / two_var).exp() / (PI * two_var);
    let deco = DecoherenceParams::none();
    let mut records = Vec::with_capacity(n_kicks + 1);
    for n in 0..=n_kicks {
        if n > 0 {
            q = step(&q, params, StepMode::Quantum, &deco)?;
        }
        let cl = liouville_pullback(spec, gaussian, params, n)?;
        records.push(record(n, &q, &cl)?);
        observer(n, &q, &cl);
    }
    Ok(DistanceSeries {
        records,
        params: *params,
        deco,
        chi: None,
    })
}

/// First local maximum of a distance series rising above the baseline.
pub fn detect_first_peak(series: &DistanceSeries) -> Result<(usize, f64)> {
    first_peak(&series.distances())
}

/// First `n` with `d[n−1] < d[n] ≥ d[n+1]` and `d[n]` above three times the
/// median of `d[0..3]`.
pub fn first_peak(d: &[f64]) -> Result<(usize, f64)> {
    if d.len() < 5 {
        return Err(Error::NoPeak { len: d.len() });
    }
    let mut head = [d[0], d[1], d[2]];
    head.sort_by(f64::total_cmp);
    let threshold = PEAK_BASELINE_FACTOR * head[1];
    (1..d.len() - 1)
        .find(|&n| d[n - 1] < d[n] && d[n] >= d[n + 1] && d[n] > threshold)
        .map(|n| (n, d[n]))
        .ok_or(Error::NoPeak { len: d.len() })
}

/// Least-squares line `n_peak = slope·ln(1/η) + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// `(ln(1/η), n_peak)` pairs.
    pub points: Vec<(f64, f64)>,
}

/// Fits `n_peak` against `ln(1/η)` over `(η, n_peak)` pairs.
pub fn fit_peak_scaling(points: &[(f64, f64)]) -> Result<PeakFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} points; at least 3 required", points.len())));
    }
    if points.iter().any(|&(eta, _)| !(eta > 0.0)) {
        return Err(Error::DegenerateFit("eta must be positive".into()));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(eta, n)| ((1.0 / eta).ln(), n)).collect();
    let (slope, intercept) = least_squares(&xy)?;
    let residual = (xy
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / xy.len() as f64)
        .sqrt();
    Ok(PeakFit {
        slope,
        intercept,
        residual,
        points: xy,
    })
}

/// Ordinary least squares `y = a·x + b`.
pub fn least_squares(xy: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-12 * (1.0 + mx * mx) * n) {
        return Err(Error::DegenerateFit("abscissas do not span an interval".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Separation time `t_S = (τ/λ) ln(1/η)`, clamped at 0 for `η ≥ 1`.
pub fn separation_time(tau: f64, lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda = {lambda} must be > 0")));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta = {eta} must be > 0")));
    }
    Ok((tau / lambda * (1.0 / eta).ln()).max(0.0))
}

/// Pointwise agreement of rescaled curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    /// Inclusive range of the abscissa compared (`n`, or `n/n_peak`).
    pub range: (f64, f64),
    /// Largest `|c_i − c̄|/c̄` over curves `i` and abscissas in range.
    pub spread: f64,
    /// Abscissa at which the spread is attained.
    pub worst_at: f64,
}

impl CollapseReport {
    pub fn collapsed(&self) -> bool {
        self.spread <= COLLAPSE_TOL
    }
}

fn relative_spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean.abs()
}

/// Spread of several curves about their pointwise mean over `n ∈ [lo, hi]`.
pub fn collapse_spread(curves: &[Vec<f64>], lo: usize, hi: usize) -> Result<CollapseReport> {
    if curves.len() < 2 {
        return Err(Error::InvalidParameter("collapse needs at least two curves".into()));
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    if lo > hi || hi >= len {
        return Err(Error::InvalidParameter(format!(
            "range [{lo}, {hi}] outside curves of length {len}"
        )));
    }
    let mut spread = 0.0;
    let mut worst_at = lo as f64;
    for n in lo..=hi {
        let values: Vec<f64> = curves.iter().map(|c| c[n]).collect();
        let dev = relative_spread(&values);
        if dev > spread {
            spread = dev;
            worst_at = n as f64;
        }
    }
    Ok(CollapseReport {
        range: (lo as f64, hi as f64),
        spread,
        worst_at,
    })
}

fn interpolate(curve: &[f64], x: f64) -> f64 {
    let i = (x.floor() as usize).min(curve.len() - 2);
    let f = x - i as f64;
    curve[i] * (1.0 - f) + curve[i + 1] * f
}

/// Spread of curves plotted against `t = n/n_peak`, curve `i` having its
/// first peak at `peaks[i]`. Every sample of every curve with
/// `t ∈ [max_i 1/n_peak_i, t_max]` is compared with the other curves,
/// which are interpolated linearly in `n`.
pub fn collapse_spread_scaled(curves: &[Vec<f64>], peaks: &[usize], t_max: f64) -> Result<CollapseReport> {
    if curves.len() < 2 || curves.len() != peaks.len() {
        return Err(Error::InvalidParameter(
            "collapse needs at least two curves, one peak per curve".into(),
        ));
    }
    if peaks.contains(&0) {
        return Err(Error::InvalidParameter("peak positions must be positive".into()));
    }
    for (c, &p) in curves.iter().zip(peaks) {
        if c.len() < 2 || ((c.len() - 1) as f64) < t_max * p as f64 {
            return Err(Error::InvalidParameter(format!(
                "curve of length {} with peak {p} does not reach t = {t_max}",
                c.len()
            )));
        }
    }
    let t_lo = peaks.iter().map(|&p| 1.0 / p as f64).fold(0.0, f64::max);
    if t_lo > t_max {
        return Err(Error::InvalidParameter(format!("empty range [{t_lo}, {t_max}]")));
    }
    let mut spread = 0.0;
    let mut worst_at = t_lo;
    for &p in peaks {
        let first = (t_lo * p as f64 - 1e-9).ceil() as usize;
        let last = (t_max * p as f64 + 1e-9).floor() as usize;
        for n in first..=last {
            let t = n as f64 / p as f64;
            let values: Vec<f64> = curves
                .iter()
                .zip(peaks)
                .map(|(c, &pj)| interpolate(c, t * pj as f64))
                .collect();
            let dev = relative_spread(&values);
            if dev > spread {
                spread = dev;
                worst_at = t;
            }
        }
    }
    Ok(CollapseReport {
        range: (t_lo, t_max),
        spread,
        worst_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(d: &[f64]) -> DistanceSeries {
        DistanceSeries {
            records: d
                .iter()
                .enumerate()
                .map(|(n, &distance)| DistanceRecord {
                    n,
                    distance,
                    norm_q: 1.0,
                    norm_cl: 1.0,
                    negativity: 0.0,
                })
                .collect(),
            params: SystemParams::new(2.0, 0.1),
            deco: DecoherenceParams::diffusive(0.01),
            chi: Some(0.5),
        }
    }

    #[test]
    fn distance_of_identical_and_disjoint() {
        let s = GridSpec::square(256, 2.0 * PI).unwrap();
        let a = new_coherent_state(s, (-2.0, 0.0), 0.1).unwrap();
        let b = new_coherent_state(s, (2.0, 0.0), 0.1).unwrap();
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        assert!((l1_distance(&a, &b).unwrap() - 2.0).abs() < 1e-9);
        let other = new_coherent_state(GridSpec::square(128, 2.0 * PI).unwrap(), (0.0, 0.0), 0.3).unwrap();
        assert!(l1_distance(&a, &other).is_err());
    }

    #[test]
    fn first_local_maximum_wins() {
        assert_eq!(first_peak(&[0.0, 0.1, 0.5, 1.2, 0.9, 1.5, 1.1]).unwrap(), (3, 1.2));
        assert!(matches!(first_peak(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]), Err(Error::NoPeak { .. })));
        assert!(first_peak(&[0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn gaussian_bump_peak() {
        let d: Vec<f64> = (0..15).map(|n| 0.8 * (-((n as f64 - 7.0) / 2.0).powi(2)).exp()).collect();
        assert_eq!(detect_first_peak(&series(&d)).unwrap(), (7, 0.8));
    }

    #[test]
    fn ripple_below_baseline_is_skipped() {
        let d = [0.1, 0.2, 0.15, 0.3, 0.25, 1.0, 0.5];
        assert_eq!(first_peak(&d).unwrap(), (5, 1.0));
    }

    #[test]
    fn exact_fit() {
        let pts: Vec<(f64, f64)> = [0.1, 0.04, 0.02]
            .iter()
            .map(|&e: &f64| (e, 1.45 * (1.0 / e).ln() + 0.54))
            .collect();
        let fit = fit_peak_scaling(&pts).unwrap();
        assert!((fit.slope - 1.45).abs() < 1e-12);
        assert!((fit.intercept - 0.54).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn duplicate_point_fit_interpolates() {
        let fit = fit_peak_scaling(&[(0.1, 4.0), (0.01, 7.0), (0.1, 4.0)]).unwrap();
        let ln10 = 10f64.ln();
        assert!((fit.slope - 3.0 / ln10).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit_peak_scaling(&[(0.1, 4.0), (0.1, 5.0), (0.1, 6.0)]).is_err());
        assert!(fit_peak_scaling(&[(0.1, 4.0), (0.2, 5.0)]).is_err());
    }

    #[test]
    fn separation_time_examples() {
        assert!((separation_time(1.0, 0.5493, 0.1).unwrap() - 4.19).abs() < 0.01);
        assert_eq!(separation_time(1.0, 0.5, 1.0).unwrap(), 0.0);
        assert!((separation_time(1.0, 0.4493, 0.1).unwrap() - 5.12).abs() < 0.01);
        assert!(separation_time(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn rescaling_and_peak_normalization() {
        let s = series(&[0.0, 0.1, 0.4, 1.0, 0.6, 0.7]);
        assert_eq!(s.rescaled(false).unwrap()[3], 2.0);
        assert_eq!(s.rescaled(true).unwrap()[3], 1.0);
    }

    #[test]
    fn collapse_spread_measures_worst_point() {
        let a = vec![0.0, 1.0, 2.0, 3.0];
        let b = vec![0.0, 1.0, 2.0, 5.0];
        let r = collapse_spread(&[a.clone(), b], 1, 3).unwrap();
        assert_eq!(r.worst_at, 3.0);
        assert!((r.spread - 0.25).abs() < 1e-15);
        assert!(collapse_spread(&[a], 1, 2).is_err());
    }

    #[test]
    fn scaled_collapse_of_self_similar_curves() {
        // c(n) = g(n/p) with g(t) = t·e^{1−t}, sampled at peaks 4 and 6.
        let g = |t: f64| t * (1.0 - t).exp();
        let a: Vec<f64> = (0..=10).map(|n| g(n as f64 / 4.0)).collect();
        let b: Vec<f64> = (0..=14).map(|n| g(n as f64 / 6.0)).collect();
        let r = collapse_spread_scaled(&[a.clone(), b.clone()], &[4, 6], 2.0).unwrap();
        assert_eq!(r.range, (0.25, 2.0));
        // Only linear interpolation error remains.
        assert!(r.spread < 0.02, "{r:?}");
        let doubled: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
        let r = collapse_spread_scaled(&[a.clone(), doubled], &[4, 6], 2.0).unwrap();
        assert!((r.spread - 1.0 / 3.0).abs() < 0.02 && !r.collapsed());
        assert!(collapse_spread_scaled(&[a.clone(), b.clone()], &[4, 8], 2.0).is_err());
        assert!(collapse_spread_scaled(&[a, b], &[4], 2.0).is_err());
    }

    #[test]
    fn zero_kick_pair_stays_together() {
        let s = GridSpec::square(128, 2.0 * PI).unwrap();
        let q = new_coherent_state(s, (0.0, 0.0), 0.3).unwrap();
        let cl = q.clone().with_label(Label::Classical);
        let series = evolve_pair(q, cl, &SystemParams::new(0.0, 0.3), &DecoherenceParams::diffusive(1e-3), 6).unwrap();
        assert_eq!(series.records.len(), 7);
        assert!(series.records.iter().all(|r| r.distance < 1e-10));
    }

    #[test]
    fn csv_has_comment_header() {
        let csv = series(&[0.0, 0.1]).to_csv();
        assert!(csv.starts_with("# K = 2"));
        assert!(csv.contains("# chi = 0.5"));
        assert!(csv.contains("n,D_n,norm_q,norm_cl,negativity\n0,0,1,1,0\n"));
    }

    #[test]
    fn unitary_pair_at_zero_kick_stays_together() {
        let s = GridSpec::square(128, 2.0 * PI).unwrap();
        let series = evolve_coherent_pair_unitary(s, (0.5, 0.0), &SystemParams::new(0.0, 0.3), 6, |_, _, _| {}).unwrap();
        assert!(series.records.iter().all(|r| r.distance < 1e-10), "{:?}", series.distances());
    }
}
