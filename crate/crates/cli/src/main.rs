//! `kho`: command-line driver for the kicked-oscillator phase-space runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use kho_core::decoherence::chi;
use kho_core::error::Error as CoreError;
use kho_core::experiments::{execute, oracle_suite, resolve_output_dir, ExperimentConfig, Scenario, SuiteLevel};
use kho_core::io::{read_grid, write_heatmap, Palette};
use kho_core::oracles::{lyapunov_formula, lyapunov_numeric, LyapunovKind};
use kho_core::params::SystemParams;

#[derive(Parser)]
#[command(name = "kho", version, about = "Quantum and classical phase-space dynamics of the kicked harmonic oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file (any scenario).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unitary separation of a coherent state (eta = 0.3, K = 2).
    Fig1(FigArgs),
    /// Distance curves at fixed chi and the peak-time fit.
    Fig2(FigArgs),
    /// Distributions immediately before kick 20.
    Fig3(FigArgs),
    /// Maximum distance against chi.
    Fig4(FigArgs),
    /// Print chi = K eta^4 / D^(3/2).
    Chi {
        #[arg(long = "K")]
        k: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long = "D")]
        d: f64,
        /// Print all digits instead of two significant figures.
        #[arg(long)]
        precise: bool,
    },
    /// Print closed-form and tangent-map Lyapunov coefficients.
    Lyapunov {
        #[arg(long = "K")]
        k: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
        nu_tau: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma_tau: f64,
        #[arg(long, default_value_t = 10_000)]
        n_kicks: usize,
        #[arg(long, default_value_t = 100)]
        n_orbits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a grid snapshot to a PPM heatmap.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// signed or unsigned; defaults to signed for quantum grids.
        #[arg(long)]
        palette: Option<Palette>,
    },
    /// Run the oracle-equivalence suite.
    Validate {
        /// Reduced sizes (seconds instead of minutes).
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
struct FigArgs {
    /// Config file overriding the canned scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_kicks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest grid size the planner may choose.
    #[arg(long)]
    max_grid: Option<usize>,
}

fn two_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{:.*}", (1 - exp).max(0) as usize, x)
    } else {
        format!("{x:.1e}")
    }
}

fn run_scenario(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let dir = resolve_output_dir(out, cfg);
    eprintln!("running {} into {}", cfg.scenario, dir.display());
    let output = execute(cfg, &dir)?;
    for line in &output.summary {
        println!("{line}");
    }
    println!(
        "wrote {} artifacts to {} (manifest.json)",
        output.manifest.artifacts.len(),
        output.dir.display()
    );
    Ok(())
}

fn fig(scenario: Scenario, args: FigArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.scenario != scenario {
                return Err(CoreError::Config(format!(
                    "{} describes {}, not {scenario}",
                    path.display(),
                    cfg.scenario
                ))
                .into());
            }
            cfg
        }
        None => ExperimentConfig::canned(scenario),
    };
    if let Some(n) = args.n_kicks {
        cfg.n_kicks = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.max_grid {
        cfg.grid.max_n = m;
    }
    cfg.validate()?;
    run_scenario(&cfg, args.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            run_scenario(&cfg, out.as_deref())
        }
        Command::Fig1(a) => fig(Scenario::Fig1Unitary, a),
        Command::Fig2(a) => fig(Scenario::Fig2Collapse, a),
        Command::Fig3(a) => fig(Scenario::Fig3Snapshots, a),
        Command::Fig4(a) => fig(Scenario::Fig4ChiScan, a),
        Command::Chi { k, eta, d, precise } => {
            let c = chi(k, eta, d)?;
            println!("{}", if precise { c.to_string() } else { two_significant(c) });
            Ok(())
        }
        Command::Lyapunov {
            k,
            nu_tau,
            gamma_tau,
            n_kicks,
            n_orbits,
            seed,
        } => {
            let ens = lyapunov_formula(k, nu_tau, gamma_tau, LyapunovKind::Ensemble)?;
            let origin = lyapunov_formula(k, nu_tau, gamma_tau, LyapunovKind::Origin)?;
            println!("formula ln[(K/2) sin nu_tau] - gamma_tau/2 = {ens:.4}");
            println!("formula ln[K sin nu_tau] - gamma_tau/2     = {origin:.4}");
            // The map does not depend on eta; any admissible value will do.
            let params = SystemParams::new(k, 1.0).with_rotation(nu_tau);
            let est = lyapunov_numeric(&params, gamma_tau, n_kicks, n_orbits, seed)?;
            println!("tangent map ({n_orbits} orbits, {n_kicks} kicks)      = {est:.4}");
            Ok(())
        }
        Command::Render { input, out, palette } => {
            let (grid, meta) = read_grid(&input)?;
            let palette = palette.unwrap_or(match grid.label() {
                kho_core::grid::Label::Quantum => Palette::Signed,
                kho_core::grid::Label::Classical => Palette::Unsigned,
            });
            let comments: Vec<String> = meta.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            write_heatmap(&grid, &out, palette, &comments)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Validate { quick } => {
            let level = if quick { SuiteLevel::Quick } else { SuiteLevel::Full };
            let checks = oracle_suite(level)?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {:.3e} (limit {:.1e}; {})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!(ChecksFailed(failed));
            }
            Ok(())
        }
    }
}

#[derive(Debug)]
struct ChecksFailed(usize);

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} oracle check(s) failed", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

/// 2 for numerical-guard failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ChecksFailed>().is_some() {
        return 2;
    }
    match err.chain().find_map(|e| e.downcast_ref::<CoreError>()) {
        Some(e) if e.is_numerical_guard() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_figures() {
        assert_eq!(two_significant(0.017_014), "0.017");
        assert_eq!(two_significant(1.466), "1.5");
        assert_eq!(two_significant(23.4), "23");
        assert_eq!(two_significant(1.2e-7), "1.2e-7");
    }
}
