//! Scenario runner: declarative configs, grid planning, sweeps and
//! artifact emission.

mod config;
mod emit;
mod plan;
mod scenarios;
mod validate;

pub use config::{
    eta_for_chi, resolve_output_dir, ExperimentConfig, GridConfig, Scenario, SweepConfig, CHI_FLAG_TOL,
    DEFAULT_GRID_N, DEFAULT_MAX_GRID_N, DEFAULT_N_KICKS, FIG2_ALL_PAIRS, FIG2_CHI_TARGET, FIG2_DESK_PAIRS, FIG3_PAIRS,
    FIG4_D,
};
pub use emit::{execute, RunOutput};
pub use plan::{
    plan_grid, resolution_width, trajectory_extent, window_half_width, GridPlan, MIN_CELLS_PER_WIDTH,
    PLAN_TRAJECTORIES, WINDOW_CLEARANCE,
};
pub use scenarios::{
    plan_and_run, run_custom, run_fig1, run_fig2, run_fig3, run_fig4, run_point, Capture, ClassicalMethod, CustomResult, Fig1Result,
    Fig2Point, Fig2Result, Fig3Point, Fig3Quantum, Fig3Result, Fig4Point, Fig4Result, PointRun, Snapshots,
    COLLAPSE_T_MAX, DIFFUSION_DOMINANCE_FACTOR, LINEAR_REGION_MAX, MAX_WINDOW_RETRIES, SNAPSHOT_TRAJECTORIES, WINDOW_GROWTH,
};
pub use validate::{oracle_suite, OracleCheck, SuiteLevel};
