//! The canned scenarios and the single-point runner they share.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GridConfig, Scenario, CHI_FLAG_TOL, DEFAULT_GRID_N};
use super::plan::{plan_grid, trajectory_extent, window_half_width, GridPlan};
use crate::decoherence::{chi, DecoherenceParams};
use crate::error::{Error, Result};
use crate::grid::{new_coherent_state, GridSpec, Label, PhaseSpaceGrid};
use crate::observables::{
    collapse_spread, collapse_spread_scaled, evolve_coherent_pair_unitary, evolve_pair_with, first_peak,
    fit_peak_scaling, l1_distance, least_squares, CollapseReport, DistanceSeries, PeakFit,
};
use crate::oracles::{histogram, mc_step, TrajectoryEnsemble};
use crate::params::SystemParams;
use crate::propagators::{step, StepMode};

/// Trajectories used when a classical snapshot is too fine for the grid.
pub const SNAPSHOT_TRAJECTORIES: usize = 1_000_000;

/// Classical spatial variance must exceed this multiple of the accumulated
/// diffusion variance for a snapshot to count as dynamics-dominated.
pub const DIFFUSION_DOMINANCE_FACTOR: f64 = 20.0;

/// Upper end of the scaled abscissa `n/n_peak` in the collapse test.
pub const COLLAPSE_T_MAX: f64 = 2.0;

/// `max_n D_n` at or below which a χ-scan point belongs to the linear region.
pub const LINEAR_REGION_MAX: f64 = 1.0;

/// Factor by which an automatically sized window grows after a leakage
/// failure.
pub const WINDOW_GROWTH: f64 = 1.25;

/// Leakage retries allowed for automatically sized windows.
pub const MAX_WINDOW_RETRIES: usize = 2;

/// Quantum and classical grids recorded immediately before kick `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub n: usize,
    pub quantum: PhaseSpaceGrid,
    pub classical: PhaseSpaceGrid,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Capture {
    /// Keep the grids at the first peak of `D_n`.
    pub peak: bool,
    /// Keep the grids after the last kick.
    pub last: bool,
}

#[derive(Debug, Clone)]
pub struct PointRun {
    pub series: DistanceSeries,
    pub peak: Option<(usize, f64)>,
    pub peak_snapshots: Option<Snapshots>,
    pub last_snapshots: Option<Snapshots>,
}

/// Evolves a coherent state at `center` and its classical twin on `spec`.
/// Unitary runs use the exact classical pullback; all others step both
/// grids spectrally.
pub fn run_point(
    params: &SystemParams,
    deco: &DecoherenceParams,
    center: (f64, f64),
    n_kicks: usize,
    spec: GridSpec,
    capture: Capture,
) -> Result<PointRun> {
    let mut distances = Vec::with_capacity(n_kicks + 1);
    let mut recent: VecDeque<Snapshots> = VecDeque::with_capacity(5);
    let mut peak_snapshots = None;
    let mut last_snapshots = None;
    let observer = |n: usize, q: &PhaseSpaceGrid, cl: &PhaseSpaceGrid| {
        let keep = || Snapshots {
            n,
            quantum: q.clone(),
            classical: cl.clone(),
        };
        if capture.peak && peak_snapshots.is_none() {
            distances.push(l1_distance(q, cl).expect("pair shares one spec"));
            // A first peak at m is confirmed no later than kick max(m + 1, 4).
            recent.push_back(keep());
            if recent.len() > 4 {
                recent.pop_front();
            }
            if let Ok((m, _)) = first_peak(&distances) {
                peak_snapshots = recent.drain(..).find(|s| s.n == m);
            }
        }
        if capture.last && n == n_kicks {
            last_snapshots = Some(keep());
        }
    };
    let series = if deco.is_unitary() {
        evolve_coherent_pair_unitary(spec, center, params, n_kicks, observer)?
    } else {
        let q = new_coherent_state(spec, center, params.eta)?;
        let cl = q.clone().with_label(Label::Classical);
        evolve_pair_with(q, cl, params, deco, n_kicks, observer)?
    };
    let peak = first_peak(&series.distances()).ok();
    Ok(PointRun {
        series,
        peak,
        peak_snapshots,
        last_snapshots,
    })
}

/// Plans a grid and runs one point on it. When the window was sized
/// automatically and the run leaks into the guard bands, the window is
/// widened by [`WINDOW_GROWTH`] (re-planning the point count) up to
/// [`MAX_WINDOW_RETRIES`] times; quantum tails can outrun the classical
/// trajectories that sized it.
pub fn plan_and_run(
    params: &SystemParams,
    deco: &DecoherenceParams,
    cfg: &ExperimentConfig,
    capture: Capture,
) -> Result<(GridPlan, PointRun)> {
    let center = cfg.center();
    let mut plan = plan_grid(params, deco, center, cfg.n_kicks, &cfg.grid, cfg.seed)?;
    let mut retries = 0;
    loop {
        match run_point(params, deco, center, cfg.n_kicks, plan.spec, capture) {
            Err(Error::Leakage { .. }) if cfg.grid.half_width.is_none() && retries < MAX_WINDOW_RETRIES => {
                retries += 1;
                let wider = GridConfig {
                    half_width: Some(plan.spec.q_max * WINDOW_GROWTH),
                    ..cfg.grid.clone()
                };
                let extent = plan.extent;
                plan = plan_grid(params, deco, center, cfg.n_kicks, &wider, cfg.seed)?;
                plan.extent = extent;
            }
            other => return other.map(|run| (plan, run)),
        }
    }
}

fn with_eta(cfg: &ExperimentConfig, eta: f64) -> SystemParams {
    SystemParams { eta, ..cfg.system }
}

fn with_d(cfg: &ExperimentConfig, d: f64) -> DecoherenceParams {
    DecoherenceParams { d, ..cfg.deco }
}

fn expect_scenario(cfg: &ExperimentConfig, scenario: Scenario) -> Result<()> {
    cfg.validate()?;
    if cfg.scenario != scenario {
        return Err(Error::Config(format!("expected a {scenario} config, got {}", cfg.scenario)));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Fig1Result {
    pub plan: GridPlan,
    pub run: PointRun,
}

/// Unitary evolution with snapshots at the first peak of `D_n`.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Fig1Result> {
    expect_scenario(cfg, Scenario::Fig1Unitary)?;
    let capture = Capture { peak: true, last: false };
    let (plan, run) = plan_and_run(&cfg.system, &cfg.deco, cfg, capture)?;
    Ok(Fig1Result { plan, run })
}

#[derive(Debug, Clone)]
pub struct Fig2Point {
    pub eta: f64,
    pub d: f64,
    pub chi: f64,
    /// Relative deviation of `chi` from the configured target.
    pub chi_deviation: Option<f64>,
    /// Deviation beyond [`CHI_FLAG_TOL`].
    pub flagged: bool,
    pub plan: GridPlan,
    pub run: PointRun,
}

impl Fig2Point {
    /// `D_n/χ`.
    pub fn rescaled(&self) -> Vec<f64> {
        self.run.series.distances().iter().map(|v| v / self.chi).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Fig2Result {
    pub points: Vec<Fig2Point>,
    /// `n_peak` against `ln(1/η)`, when three or more curves peaked.
    pub fit: Option<PeakFit>,
    /// Spread of `D_n/χ` against `n/n_peak` over `[max 1/n_peak, 2]`.
    pub collapse: Option<CollapseReport>,
    /// Spread of `D_n/χ` against raw `n` over `[1, 2·max n_peak]`.
    pub collapse_raw: Option<CollapseReport>,
    /// Relative spread of the peak heights of `D_n/χ`.
    pub peak_height_spread: Option<f64>,
    pub notes: Vec<String>,
}

/// Fixed-χ sweep: distance curves, their collapse and the peak-time fit.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Fig2Result> {
    expect_scenario(cfg, Scenario::Fig2Collapse)?;
    let points: Vec<Fig2Point> = cfg
        .pairs()
        .into_par_iter()
        .map(|(eta, d)| {
            let params = with_eta(cfg, eta);
            let deco = with_d(cfg, d);
            let chi = chi(params.k, eta, d)?;
            let chi_deviation = cfg.sweep.chi_target.map(|t| chi / t - 1.0);
            let (plan, run) = plan_and_run(&params, &deco, cfg, Capture::default())?;
            Ok(Fig2Point {
                eta,
                d,
                chi,
                chi_deviation,
                flagged: chi_deviation.is_some_and(|x| x.abs() > CHI_FLAG_TOL),
                plan,
                run,
            })
        })
        .collect::<Result<_>>()?;

    let mut notes = Vec::new();
    for p in &points {
        if p.flagged {
            notes.push(format!(
                "eta = {}, D = {}: chi = {:.5} deviates {:+.1}% from the target",
                p.eta,
                p.d,
                p.chi,
                100.0 * p.chi_deviation.unwrap_or(0.0)
            ));
        }
        if p.run.peak.is_none() {
            notes.push(format!("eta = {}, D = {}: no peak in D_n", p.eta, p.d));
        }
    }
    let peaked: Vec<&Fig2Point> = points.iter().filter(|p| p.run.peak.is_some()).collect();
    let fit = if peaked.len() >= 3 {
        let pts: Vec<(f64, f64)> = peaked.iter().map(|p| (p.eta, p.run.peak.unwrap().0 as f64)).collect();
        match fit_peak_scaling(&pts) {
            Ok(f) => Some(f),
            Err(e) => {
                notes.push(format!("peak fit: {e}"));
                None
            }
        }
    } else {
        notes.push(format!("peak fit needs three peaked curves, have {}", peaked.len()));
        None
    };
    let (mut collapse, mut collapse_raw, mut peak_height_spread) = (None, None, None);
    if peaked.len() >= 2 {
        let curves: Vec<Vec<f64>> = peaked.iter().map(|p| p.rescaled()).collect();
        let peaks: Vec<usize> = peaked.iter().map(|p| p.run.peak.unwrap().0).collect();
        match collapse_spread_scaled(&curves, &peaks, COLLAPSE_T_MAX) {
            Ok(c) => collapse = Some(c),
            Err(e) => notes.push(format!("collapse: {e}")),
        }
        let hi = (2 * peaks.iter().max().unwrap()).min(cfg.n_kicks);
        collapse_raw = collapse_spread(&curves, 1, hi).ok();
        let heights: Vec<f64> = peaked.iter().map(|p| p.run.peak.unwrap().1 / p.chi).collect();
        let mean = heights.iter().sum::<f64>() / heights.len() as f64;
        peak_height_spread = Some(heights.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max) / mean);
    }
    Ok(Fig2Result {
        points,
        fit,
        collapse,
        collapse_raw,
        peak_height_spread,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalMethod {
    /// Spectral grid evolution.
    Grid,
    /// Histogram of a trajectory ensemble.
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct Fig3Point {
    pub eta: f64,
    pub d: f64,
    pub chi: Option<f64>,
    pub method: ClassicalMethod,
    /// Grid size needed for spectral evolution, when refused.
    pub refusal: Option<String>,
    pub classical: PhaseSpaceGrid,
    pub ensemble: Option<TrajectoryEnsemble>,
    pub var_q: f64,
    pub var_p: f64,
    /// `2D·n_kicks`.
    pub diffusion_variance: f64,
}

impl Fig3Point {
    pub fn diffusion_dominated(&self) -> bool {
        self.var_q <= DIFFUSION_DOMINANCE_FACTOR * self.diffusion_variance
    }
}

#[derive(Debug, Clone)]
pub struct Fig3Quantum {
    pub eta: f64,
    pub d: f64,
    pub plan: GridPlan,
    pub snapshots: Snapshots,
    /// L1 distance between the two snapshots.
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct Fig3Result {
    pub points: Vec<Fig3Point>,
    /// Both distributions at the smallest `η` the grid can resolve.
    pub quantum: Option<Fig3Quantum>,
}

fn evolve_classical(spec: GridSpec, params: &SystemParams, deco: &DecoherenceParams, center: (f64, f64), n: usize) -> Result<PhaseSpaceGrid> {
    let mut g = new_coherent_state(spec, center, params.eta)?.with_label(Label::Classical);
    for _ in 0..n {
        g = step(&g, params, StepMode::Classical, deco)?;
    }
    Ok(g)
}

fn sample_variances(ens: &TrajectoryEnsemble) -> (f64, f64) {
    let m = ens.len() as f64;
    let (sq, sp) = ens.points().iter().fold((0.0, 0.0), |a, &(q, p)| (a.0 + q, a.1 + p));
    let (mq, mp) = (sq / m, sp / m);
    let (vq, vp) = ens
        .points()
        .iter()
        .fold((0.0, 0.0), |a, &(q, p)| (a.0 + (q - mq).powi(2), a.1 + (p - mp).powi(2)));
    (vq / m, vp / m)
}

/// Distributions immediately before kick `n_kicks` for each `(η, D)` pair.
/// Pairs the grid cannot resolve fall back to a trajectory histogram.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Fig3Result> {
    expect_scenario(cfg, Scenario::Fig3Snapshots)?;
    let center = cfg.center();
    let pairs = cfg.pairs();
    let planned: Vec<Result<GridPlan>> = pairs
        .par_iter()
        .map(|&(eta, d)| plan_grid(&with_eta(cfg, eta), &with_d(cfg, d), center, cfg.n_kicks, &cfg.grid, cfg.seed))
        .collect();
    // Refusals select the trajectory fallback; anything else is fatal.
    let mut plans: Vec<std::result::Result<GridPlan, String>> = Vec::with_capacity(planned.len());
    for p in planned {
        match p {
            Ok(plan) => plans.push(Ok(plan)),
            Err(Error::Config(msg)) => plans.push(Err(msg)),
            Err(e) => return Err(e),
        }
    }
    let quantum_index = (0..pairs.len())
        .filter(|&i| plans[i].is_ok())
        .min_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));

    let outcomes: Vec<(Fig3Point, Option<Fig3Quantum>)> = (0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let (eta, d) = pairs[i];
            let params = with_eta(cfg, eta);
            let deco = with_d(cfg, d);
            let chi = if d > 0.0 { chi(params.k, eta, d).ok() } else { None };
            let diffusion_variance = 2.0 * d * cfg.n_kicks as f64;
            let mut quantum = None;
            let point = match &plans[i] {
                Ok(plan) => {
                    let classical = if Some(i) == quantum_index {
                        let capture = Capture { peak: false, last: true };
                        let run = run_point(&params, &deco, center, cfg.n_kicks, plan.spec, capture)?;
                        let snapshots = run.last_snapshots.expect("last kick captured");
                        let distance = l1_distance(&snapshots.quantum, &snapshots.classical)?;
                        let classical = snapshots.classical.clone();
                        quantum = Some(Fig3Quantum {
                            eta,
                            d,
                            plan: *plan,
                            snapshots,
                            distance,
                        });
                        classical
                    } else {
                        evolve_classical(plan.spec, &params, &deco, center, cfg.n_kicks)?
                    };
                    let m = classical.moments();
                    Fig3Point {
                        eta,
                        d,
                        chi,
                        method: ClassicalMethod::Grid,
                        refusal: None,
                        var_q: m.var_q,
                        var_p: m.var_p,
                        classical,
                        ensemble: None,
                        diffusion_variance,
                    }
                }
                Err(refusal) => {
                    let half_width = match cfg.grid.half_width {
                        Some(h) => h,
                        None => window_half_width(trajectory_extent(&params, &deco, center, cfg.n_kicks, cfg.seed)?, eta),
                    };
                    let spec = GridSpec::square(cfg.grid.n.unwrap_or(DEFAULT_GRID_N), half_width)?;
                    let mut ens = TrajectoryEnsemble::coherent(center, eta, SNAPSHOT_TRAJECTORIES, cfg.seed)?;
                    for _ in 0..cfg.n_kicks {
                        ens = mc_step(&ens, &params, &deco)?;
                    }
                    let (var_q, var_p) = sample_variances(&ens);
                    Fig3Point {
                        eta,
                        d,
                        chi,
                        method: ClassicalMethod::MonteCarlo,
                        refusal: Some(refusal.clone()),
                        classical: histogram(&ens, &spec)?,
                        ensemble: Some(ens),
                        var_q,
                        var_p,
                        diffusion_variance,
                    }
                }
            };
            Ok((point, quantum))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(outcomes.len());
    let mut quantum = None;
    for (p, q) in outcomes {
        points.push(p);
        quantum = quantum.or(q);
    }
    Ok(Fig3Result { points, quantum })
}

#[derive(Debug, Clone)]
pub struct Fig4Point {
    pub chi: f64,
    pub eta: f64,
    pub d: f64,
    pub plan: GridPlan,
    pub series: DistanceSeries,
    pub max_distance: f64,
}

#[derive(Debug, Clone)]
pub struct Fig4Result {
    pub points: Vec<Fig4Point>,
    /// Slope and intercept of `ln max D_n` against `ln χ` over the points
    /// with `max D_n ≤ 1`.
    pub fit: Option<(f64, f64)>,
    pub linear_points: usize,
}

/// Maximum distance as a function of χ at fixed `D`, varying `η`.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<Fig4Result> {
    expect_scenario(cfg, Scenario::Fig4ChiScan)?;
    let d = cfg.deco.d;
    let points: Vec<Fig4Point> = cfg
        .scan_etas()
        .into_par_iter()
        .map(|eta| {
            let params = with_eta(cfg, eta);
            let (plan, run) = plan_and_run(&params, &cfg.deco, cfg, Capture::default())?;
            Ok(Fig4Point {
                chi: chi(params.k, eta, d)?,
                eta,
                d,
                plan,
                max_distance: run.series.max_distance(),
                series: run.series,
            })
        })
        .collect::<Result<_>>()?;
    let linear: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.max_distance <= LINEAR_REGION_MAX && p.max_distance > 0.0)
        .map(|p| (p.chi.ln(), p.max_distance.ln()))
        .collect();
    let fit = if linear.len() >= 2 { least_squares(&linear).ok() } else { None };
    Ok(Fig4Result {
        linear_points: linear.len(),
        points,
        fit,
    })
}

#[derive(Debug, Clone)]
pub struct CustomResult {
    pub plan: GridPlan,
    pub run: PointRun,
}

/// One pair evolution with the configured system and reservoir.
pub fn run_custom(cfg: &ExperimentConfig) -> Result<CustomResult> {
    expect_scenario(cfg, Scenario::Custom)?;
    let capture = Capture { peak: true, last: true };
    let (plan, run) = plan_and_run(&cfg.system, &cfg.deco, cfg, capture)?;
    Ok(CustomResult { plan, run })
}
