//! Declarative run configuration.
//!
//! A config file names a scenario and overrides any subset of that
//! scenario's canned defaults:
//!
//! ```toml
//! scenario = "fig2_collapse"
//! n_kicks = 20
//! seed = 7
//!
//! [system]
//! K = 2.0
//!
//! [sweep]
//! eta_list = [0.1, 0.04, 0.02, 0.015]
//! D_list = [5.13e-2, 4.5e-3, 7e-4, 3.25e-4]
//! chi_target = 0.017
//!
//! [grid]
//! max_n = 4096
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::grid::MIN_SAMPLES;
use crate::params::SystemParams;

/// Kicks per run unless configured otherwise.
pub const DEFAULT_N_KICKS: usize = 20;

/// Grid size tried first by the planner.
pub const DEFAULT_GRID_N: usize = 1024;

/// Largest grid size the planner will choose on its own.
pub const DEFAULT_MAX_GRID_N: usize = 2048;

/// `(η, D)` pairs at `χ = 0.017`, `K = 2`, from small to large `ħ`-scale
/// separation. Only the first three fit a desk-scale grid.
pub const FIG2_ALL_PAIRS: [(f64, f64); 7] = [
    (0.1, 5.13e-2),
    (0.04, 4.5e-3),
    (0.02, 7e-4),
    (0.015, 3.25e-4),
    (0.007, 4.5e-5),
    (0.005, 1.74e-5),
    (0.003, 4.5e-6),
];

pub const FIG2_DESK_PAIRS: usize = 3;

pub const FIG2_CHI_TARGET: f64 = 0.017;

/// Relative deviation from the χ target above which a pair is flagged.
pub const CHI_FLAG_TOL: f64 = 0.05;

pub const FIG3_PAIRS: [(f64, f64); 3] = [(0.04, 4.5e-3), (0.007, 4.5e-5), (0.003, 4.5e-6)];

pub const FIG4_D: f64 = 4.5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Fig1Unitary,
    Fig2Collapse,
    Fig3Snapshots,
    Fig4ChiScan,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1Unitary => "fig1_unitary",
            Scenario::Fig2Collapse => "fig2_collapse",
            Scenario::Fig3Snapshots => "fig3_snapshots",
            Scenario::Fig4ChiScan => "fig4_chi_scan",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Scenario::Fig1Unitary,
            Scenario::Fig2Collapse,
            Scenario::Fig3Snapshots,
            Scenario::Fig4ChiScan,
            Scenario::Custom,
        ]
        .into_iter()
        .find(|sc| sc.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

/// Grid selection. With `n` and `half_width` both set the grid is fixed;
/// otherwise the missing parts are planned (see [`plan_grid`](super::plan_grid)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points per axis. When unset the planner starts at 1024 and doubles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Half-width of the square window centered on the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub max_n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: None,
            half_width: None,
            max_n: DEFAULT_MAX_GRID_N,
        }
    }
}

/// Sweep descriptors. `eta_list` and `D_list` are paired element-wise;
/// the χ scan may give `chi_list` instead of `eta_list`, each χ being
/// converted to `η = (χ·D^{3/2}/K)^{1/4}` at the fixed `deco.D`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta_list: Vec<f64>,
    #[serde(rename = "D_list", default, skip_serializing_if = "Vec::is_empty")]
    pub d_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chi_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_target: Option<f64>,
}

/// A fully resolved run description.
///
/// Sweep scenarios take `η` (and, for the collapse and snapshot scenarios,
/// `D`) from `sweep`; `system.eta` and `deco.D` are then ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_kicks: usize,
    pub seed: u64,
    /// Center of the initial coherent state.
    pub center: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub system: SystemParams,
    pub deco: DecoherenceParams,
    pub sweep: SweepConfig,
    pub grid: GridConfig,
}

impl ExperimentConfig {
    /// The canned configuration of `scenario`.
    pub fn canned(scenario: Scenario) -> Self {
        let mut cfg = ExperimentConfig {
            scenario,
            n_kicks: DEFAULT_N_KICKS,
            seed: 0,
            center: [0.0, 0.0],
            output_dir: None,
            system: SystemParams::new(2.0, 0.3),
            deco: DecoherenceParams::none(),
            sweep: SweepConfig::default(),
            grid: GridConfig::default(),
        };
        let pairs = |list: &[(f64, f64)]| SweepConfig {
            eta_list: list.iter().map(|p| p.0).collect(),
            d_list: list.iter().map(|p| p.1).collect(),
            ..SweepConfig::default()
        };
        match scenario {
            Scenario::Fig1Unitary | Scenario::Custom => {}
            Scenario::Fig2Collapse => {
                cfg.sweep = SweepConfig {
                    chi_target: Some(FIG2_CHI_TARGET),
                    ..pairs(&FIG2_ALL_PAIRS[..FIG2_DESK_PAIRS])
                };
            }
            Scenario::Fig3Snapshots => cfg.sweep = pairs(&FIG3_PAIRS),
            Scenario::Fig4ChiScan => {
                cfg.deco = DecoherenceParams::diffusive(FIG4_D);
                cfg.sweep.chi_list = (0..6).map(|i| 10f64.powf(-2.0 + 0.4 * i as f64)).collect();
            }
        }
        cfg
    }

    /// Parses a config file body: the scenario's canned defaults overlaid
    /// with every key present in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scenario = match user.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("`scenario` must be a string".into())),
            None => return Err(Error::Config("missing `scenario`".into())),
        };
        Self::overlay(Self::canned(scenario), user)
    }

    /// Overlays the keys of `user` on `self`.
    pub fn overlay(self, user: toml::Table) -> Result<Self> {
        let mut base = toml::Table::try_from(&self).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, user);
        let cfg: ExperimentConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The config as embedded in artifacts, without the output location so
    /// that identical runs produce identical files wherever they are written.
    pub fn artifact_json(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_value(&c).expect("config serializes")
    }

    pub fn center(&self) -> (f64, f64) {
        (self.center[0], self.center[1])
    }

    /// `(η, D)` points of a paired sweep.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.sweep.eta_list.iter().copied().zip(self.sweep.d_list.iter().copied()).collect()
    }

    /// `η` values of the χ scan.
    pub fn scan_etas(&self) -> Vec<f64> {
        if !self.sweep.eta_list.is_empty() {
            return self.sweep.eta_list.clone();
        }
        self.sweep
            .chi_list
            .iter()
            .map(|&c| eta_for_chi(self.system.k, c, self.deco.d))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.system.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.deco.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.n_kicks == 0 {
            return bad("n_kicks must be >= 1".into());
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return bad("center must be finite".into());
        }
        if let Some(n) = self.grid.n {
            if n < MIN_SAMPLES || !n.is_power_of_two() {
                return bad(format!("grid.n = {n} must be a power of two >= {MIN_SAMPLES}"));
            }
        }
        if let Some(h) = self.grid.half_width {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("grid.half_width = {h} must be > 0"));
            }
        }
        if self.grid.max_n < MIN_SAMPLES {
            return bad(format!("grid.max_n = {} is too small", self.grid.max_n));
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
                Ok(())
            } else {
                Err(Error::Config(format!("sweep.{name} entries must be > 0")))
            }
        };
        positive("eta_list", &self.sweep.eta_list)?;
        positive("D_list", &self.sweep.d_list)?;
        positive("chi_list", &self.sweep.chi_list)?;
        match self.scenario {
            Scenario::Fig1Unitary => {
                if !self.deco.is_unitary() {
                    return bad("fig1_unitary needs D = 0 and gamma_tau = 0".into());
                }
            }
            Scenario::Fig2Collapse | Scenario::Fig3Snapshots => {
                if self.sweep.eta_list.is_empty() {
                    return bad(format!("{} needs a nonempty sweep.eta_list", self.scenario));
                }
                if self.sweep.eta_list.len() != self.sweep.d_list.len() {
                    return bad(format!(
                        "sweep.eta_list has {} entries but sweep.D_list has {}",
                        self.sweep.eta_list.len(),
                        self.sweep.d_list.len()
                    ));
                }
                if self.scenario == Scenario::Fig2Collapse && self.n_kicks < 4 {
                    return bad("fig2_collapse needs n_kicks >= 4 to locate peaks".into());
                }
            }
            Scenario::Fig4ChiScan => {
                if self.sweep.eta_list.is_empty() && self.sweep.chi_list.is_empty() {
                    return bad("fig4_chi_scan needs sweep.chi_list or sweep.eta_list".into());
                }
                if !(self.deco.d > 0.0) {
                    return bad("fig4_chi_scan needs D > 0".into());
                }
                if !(self.system.k > 0.0) && self.sweep.eta_list.is_empty() {
                    return bad("converting chi_list to eta needs K > 0".into());
                }
            }
            Scenario::Custom => {}
        }
        if let Some(t) = self.sweep.chi_target {
            if !(t > 0.0) {
                return bad(format!("sweep.chi_target = {t} must be > 0"));
            }
        }
        Ok(())
    }
}

/// `η` at which `χ(K, η, D)` equals `chi`.
pub fn eta_for_chi(k: f64, chi: f64, d: f64) -> f64 {
    (chi * d.powf(1.5) / k).powf(0.25)
}

/// Recursive table merge; scalars and arrays in `over` replace those in `base`.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Output directory: an explicit choice, else the config's, else
/// `$KHO_OUTPUT_DIR`, else `kho-out/<scenario>`.
pub fn resolve_output_dir(explicit: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    match std::env::var_os(crate::io::OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(cfg.scenario.name()),
        _ => PathBuf::from("kho-out").join(cfg.scenario.name()),
    }
}
