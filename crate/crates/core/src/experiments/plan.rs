//! Grid planning: window size from a trajectory pre-run, resolution from
//! the narrowest physical scale.

use serde::{Deserialize, Serialize};

use super::config::{GridConfig, DEFAULT_GRID_N};
use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::oracles::{mc_step, TrajectoryEnsemble};
use crate::params::SystemParams;

/// Minimum grid cells across the narrowest Gaussian width of the run.
pub const MIN_CELLS_PER_WIDTH: f64 = 2.0;

/// Trajectories of the window-sizing pre-run.
pub const PLAN_TRAJECTORIES: usize = 100_000;

/// Clearance added to the pre-run extent, on top of `6η`.
pub const WINDOW_CLEARANCE: f64 = 0.5;

/// Fraction of the half-width inside the guard bands.
const INTERIOR_FRACTION: f64 = 0.9;

/// Half-widths are rounded up to a multiple of this.
const WINDOW_QUANTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPlan {
    pub spec: GridSpec,
    /// Largest `|q|` or `|p|` reached by the pre-run, when one was made.
    pub extent: Option<f64>,
    /// Cells across `min(η, √(2D))`.
    pub cells_per_width: f64,
}

/// Narrowest Gaussian width a run must resolve: the coherent-state width
/// `η` and, with diffusion, the per-kick smoothing width `√(2D)`.
pub fn resolution_width(eta: f64, d: f64) -> f64 {
    if d > 0.0 {
        eta.min((2.0 * d).sqrt())
    } else {
        eta
    }
}

/// Largest `|q|` or `|p|` over `n_kicks` of a seeded classical ensemble
/// started in the coherent state.
pub fn trajectory_extent(
    params: &SystemParams,
    deco: &DecoherenceParams,
    center: (f64, f64),
    n_kicks: usize,
    seed: u64,
) -> Result<f64> {
    let extent = |e: &TrajectoryEnsemble| {
        e.points()
            .iter()
            .map(|&(q, p)| q.abs().max(p.abs()))
            .fold(0.0, f64::max)
    };
    let mut ens = TrajectoryEnsemble::coherent(center, params.eta, PLAN_TRAJECTORIES, seed)?;
    let mut r = extent(&ens);
    for _ in 0..n_kicks {
        ens = mc_step(&ens, params, deco)?;
        r = r.max(extent(&ens));
    }
    Ok(r)
}

/// Half-width keeping the pre-run extent plus clearance out of the guard bands.
pub fn window_half_width(extent: f64, eta: f64) -> f64 {
    let raw = (extent + WINDOW_CLEARANCE + 6.0 * eta) / INTERIOR_FRACTION;
    (raw / WINDOW_QUANTUM).ceil() * WINDOW_QUANTUM
}

/// Chooses a square grid for one run.
///
/// A missing `half_width` is sized from a [`PLAN_TRAJECTORIES`]-trajectory
/// pre-run; a missing `n` starts at 1024 and doubles up to `max_n` until
/// `min(η, √(2D))` spans [`MIN_CELLS_PER_WIDTH`] cells. Fails with
/// [`Error::Config`] when no admissible size exists.
pub fn plan_grid(
    params: &SystemParams,
    deco: &DecoherenceParams,
    center: (f64, f64),
    n_kicks: usize,
    grid: &GridConfig,
    seed: u64,
) -> Result<GridPlan> {
    params.validate()?;
    deco.validate()?;
    let (half_width, extent) = match grid.half_width {
        Some(h) => (h, None),
        None => {
            let r = trajectory_extent(params, deco, center, n_kicks, seed)?;
            (window_half_width(r, params.eta), Some(r))
        }
    };
    let width = resolution_width(params.eta, deco.d);
    let cells = |n: usize| width * n as f64 / (2.0 * half_width);
    let n = match grid.n {
        Some(n) => n,
        None => {
            let mut n = DEFAULT_GRID_N.min(grid.max_n);
            while cells(n) < MIN_CELLS_PER_WIDTH && n * 2 <= grid.max_n {
                n *= 2;
            }
            n
        }
    };
    if cells(n) < MIN_CELLS_PER_WIDTH {
        let needed = (MIN_CELLS_PER_WIDTH * 2.0 * half_width / width).ceil();
        return Err(Error::Config(format!(
            "eta = {}, D = {} on half-width {half_width} needs {needed} points per axis \
             ({MIN_CELLS_PER_WIDTH} cells across {width:.3e}); n = {n} gives {:.2} cells \
             (raise grid.max_n or shrink the window)",
            params.eta,
            deco.d,
            cells(n)
        )));
    }
    Ok(GridPlan {
        spec: GridSpec::square(n, half_width)?,
        extent,
        cells_per_width: cells(n),
    })
}
