//! Writing scenario results to disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{ExperimentConfig, Scenario};
use super::plan::GridPlan;
use super::scenarios::{run_custom, run_fig1, run_fig2, run_fig3, run_fig4, ClassicalMethod, PointRun, Snapshots};
use crate::error::{Error, Result};
use crate::grid::{Label, PhaseSpaceGrid};
use crate::io::{write_ensemble, write_grid, write_heatmap, Manifest, Metadata, Palette};
use crate::observables::DistanceSeries;
use crate::oracles::TrajectoryEnsemble;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Human-readable result lines.
    pub summary: Vec<String>,
}

struct Emitter {
    dir: PathBuf,
    config: Value,
    config_line: String,
    manifest: Manifest,
}

fn plan_json(plan: &GridPlan) -> Value {
    json!({
        "n": plan.spec.n_q,
        "half_width": plan.spec.q_max,
        "extent": plan.extent,
        "cells_per_width": plan.cells_per_width,
    })
}

fn flatten(params: &Value) -> Vec<(String, String)> {
    match params {
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string().trim_matches('"').to_string()))
            .collect(),
        _ => Vec::new(),
    }
}

impl Emitter {
    fn new(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = cfg.artifact_json();
        Ok(Emitter {
            dir: dir.to_path_buf(),
            config_line: config.to_string(),
            manifest: Manifest::new(cfg.scenario.name(), config.clone()),
            config,
        })
    }

    fn comments(&self, params: &Value) -> Vec<String> {
        let mut out = vec![
            format!("scenario = {}", self.manifest.scenario),
            format!("config = {}", self.config_line),
        ];
        out.extend(flatten(params).into_iter().map(|(k, v)| format!("{k} = {v}")));
        out
    }

    fn series(&mut self, name: &str, series: &DistanceSeries, params: Value) -> Result<()> {
        let path = self.dir.join(name);
        let text = series.to_csv_with_comments(&self.comments(&params).join("\n"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.manifest.add(&self.dir, name, "csv", params)
    }

    fn table(&mut self, name: &str, header: &str, rows: &[String], params: Value) -> Result<()> {
        let mut text = String::new();
        for c in self.comments(&params) {
            let _ = writeln!(text, "# {c}");
        }
        let _ = writeln!(text, "{header}");
        for r in rows {
            let _ = writeln!(text, "{r}");
        }
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.manifest.add(&self.dir, name, "csv", params)
    }

    fn metadata(&self, params: &Value) -> Metadata {
        let mut meta = Metadata::new();
        meta.insert("scenario".into(), self.manifest.scenario.clone());
        meta.insert("config".into(), self.config_line.clone());
        meta.extend(flatten(params));
        meta
    }

    /// Writes `<stem>.bin` and `<stem>.ppm`.
    fn grid(&mut self, stem: &str, grid: &PhaseSpaceGrid, params: Value) -> Result<()> {
        let bin = format!("{stem}.bin");
        write_grid(grid, &self.dir.join(&bin), &self.metadata(&params))?;
        self.manifest.add(&self.dir, bin, "snapshot", params.clone())?;
        let palette = match grid.label() {
            Label::Quantum => Palette::Signed,
            Label::Classical => Palette::Unsigned,
        };
        let ppm = format!("{stem}.ppm");
        write_heatmap(grid, &self.dir.join(&ppm), palette, &self.comments(&params))?;
        self.manifest.add(&self.dir, ppm, "heatmap", params)
    }

    fn snapshots(&mut self, tag: &str, s: &Snapshots, params: &Value) -> Result<()> {
        let mut p = params.clone();
        p["kick"] = json!(s.n);
        p["negativity"] = json!(s.quantum.negativity_volume());
        self.grid(&format!("quantum_{tag}"), &s.quantum, p.clone())?;
        p["negativity"] = json!(s.classical.negativity_volume());
        self.grid(&format!("classical_{tag}"), &s.classical, p)
    }

    fn ensemble(&mut self, name: &str, ens: &TrajectoryEnsemble, params: Value) -> Result<()> {
        write_ensemble(ens, &self.dir.join(name), &self.metadata(&params))?;
        self.manifest.add(&self.dir, name, "ensemble", params)
    }

    fn report(&mut self, mut report: Value) -> Result<()> {
        report["config"] = self.config.clone();
        let name = "report.json";
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        self.manifest.add(&self.dir, name, "report", json!({}))
    }

    fn finish(self) -> Result<Manifest> {
        self.manifest.write(&self.dir)?;
        Ok(self.manifest)
    }
}

fn tag(eta: f64, d: f64) -> String {
    format!("eta{eta}_D{d}")
}

fn point_json(run: &PointRun, plan: &GridPlan) -> Value {
    json!({
        "peak": run.peak.map(|(n, d)| json!({"n": n, "D": d})),
        "max_distance": run.series.max_distance(),
        "chi": run.series.chi,
        "grid": plan_json(plan),
    })
}

fn peak_line(run: &PointRun) -> String {
    match run.peak {
        Some((n, d)) if d >= 0.01 => format!("first peak D_{n} = {d:.4}"),
        Some((n, d)) => format!("first peak D_{n} = {d:.3e}"),
        None => "no peak".to_string(),
    }
}

/// Runs `cfg` and writes its artifacts and manifest into `dir`.
pub fn execute(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let mut em = Emitter::new(dir, cfg)?;
    let mut summary = Vec::new();
    match cfg.scenario {
        Scenario::Fig1Unitary | Scenario::Custom => {
            let (plan, run) = if cfg.scenario == Scenario::Fig1Unitary {
                let r = run_fig1(cfg)?;
                (r.plan, r.run)
            } else {
                let r = run_custom(cfg)?;
                (r.plan, r.run)
            };
            let params = json!({"K": cfg.system.k, "eta": cfg.system.eta, "D": cfg.deco.d, "grid_n": plan.spec.n_q, "half_width": plan.spec.q_max});
            em.series("series.csv", &run.series, params.clone())?;
            summary.push(format!("grid {}, {}", plan.spec, peak_line(&run)));
            if let Some(s) = &run.peak_snapshots {
                em.snapshots("peak", s, &params)?;
                summary.push(format!(
                    "at the peak: quantum negativity {:.3e}, classical negativity {:.3e}",
                    s.quantum.negativity_volume(),
                    s.classical.negativity_volume()
                ));
            }
            if let Some(s) = &run.last_snapshots {
                em.snapshots("final", s, &params)?;
            }
            let mut report = point_json(&run, &plan);
            if let Some(s) = &run.peak_snapshots {
                report["peak_negativity"] = json!({
                    "quantum": s.quantum.negativity_volume(),
                    "classical": s.classical.negativity_volume(),
                });
            }
            em.report(report)?;
        }
        Scenario::Fig2Collapse => {
            let r = run_fig2(cfg)?;
            let mut points = Vec::new();
            let mut rows = Vec::new();
            for p in &r.points {
                let params = json!({"K": cfg.system.k, "eta": p.eta, "D": p.d, "chi": p.chi, "grid_n": p.plan.spec.n_q, "half_width": p.plan.spec.q_max});
                em.series(&format!("series_{}.csv", tag(p.eta, p.d)), &p.run.series, params)?;
                let mut j = point_json(&p.run, &p.plan);
                j["eta"] = json!(p.eta);
                j["D"] = json!(p.d);
                j["chi_deviation"] = json!(p.chi_deviation);
                j["flagged"] = json!(p.flagged);
                points.push(j);
                summary.push(format!(
                    "eta = {}, D = {}: chi = {:.4}, grid {}, {}",
                    p.eta,
                    p.d,
                    p.chi,
                    p.plan.spec.n_q,
                    peak_line(&p.run)
                ));
                for (n, v) in p.rescaled().iter().enumerate() {
                    let t = p.run.peak.map(|(np, _)| n as f64 / np as f64);
                    rows.push(format!(
                        "{},{},{n},{},{v}",
                        p.eta,
                        p.d,
                        t.map_or("".to_string(), |t| t.to_string())
                    ));
                }
            }
            em.table("collapse.csv", "eta,D,n,n_over_n_peak,D_n_over_chi", &rows, json!({"K": cfg.system.k}))?;
            if let Some(f) = &r.fit {
                summary.push(format!(
                    "n_peak = {:.3} ln(1/eta) + {:.3} (rms residual {:.3})",
                    f.slope, f.intercept, f.residual
                ));
            }
            if let Some(c) = &r.collapse {
                summary.push(format!(
                    "collapse over n/n_peak in [{:.3}, {}]: spread {:.1}% (worst at {:.3})",
                    c.range.0,
                    c.range.1,
                    100.0 * c.spread,
                    c.worst_at
                ));
            }
            if let Some(c) = &r.collapse_raw {
                summary.push(format!(
                    "collapse over raw n in [1, {}]: spread {:.1}%",
                    c.range.1,
                    100.0 * c.spread
                ));
            }
            if let Some(h) = r.peak_height_spread {
                summary.push(format!("peak heights of D_n/chi spread {:.1}%", 100.0 * h));
            }
            summary.extend(r.notes.iter().map(|n| format!("note: {n}")));
            em.report(json!({
                "points": points,
                "fit": r.fit,
                "collapse": r.collapse,
                "collapse_raw": r.collapse_raw,
                "peak_height_spread": r.peak_height_spread,
                "notes": r.notes,
            }))?;
        }
        Scenario::Fig3Snapshots => {
            let r = run_fig3(cfg)?;
            let mut points = Vec::new();
            for p in &r.points {
                let method = match p.method {
                    ClassicalMethod::Grid => "grid",
                    ClassicalMethod::MonteCarlo => "monte_carlo",
                };
                let params = json!({
                    "K": cfg.system.k, "eta": p.eta, "D": p.d, "kick": cfg.n_kicks, "method": method,
                    "grid_n": p.classical.spec().n_q, "half_width": p.classical.spec().q_max,
                });
                em.grid(&format!("classical_{}", tag(p.eta, p.d)), &p.classical, params.clone())?;
                if let Some(ens) = &p.ensemble {
                    em.ensemble(&format!("ensemble_{}.bin", tag(p.eta, p.d)), ens, params)?;
                }
                summary.push(format!(
                    "eta = {}, D = {}: {method}, var_q = {:.4}, 20 x diffusion variance = {:.4}{}",
                    p.eta,
                    p.d,
                    p.var_q,
                    20.0 * p.diffusion_variance,
                    if p.diffusion_dominated() { " (diffusion dominated)" } else { "" }
                ));
                points.push(json!({
                    "eta": p.eta, "D": p.d, "chi": p.chi, "method": method, "refusal": p.refusal,
                    "var_q": p.var_q, "var_p": p.var_p, "diffusion_variance": p.diffusion_variance,
                    "diffusion_dominated": p.diffusion_dominated(),
                }));
            }
            let quantum = match &r.quantum {
                Some(q) => {
                    let params = json!({"K": cfg.system.k, "eta": q.eta, "D": q.d, "grid_n": q.plan.spec.n_q, "half_width": q.plan.spec.q_max});
                    em.grid(&format!("quantum_{}", tag(q.eta, q.d)), &q.snapshots.quantum, {
                        let mut p = params.clone();
                        p["kick"] = json!(q.snapshots.n);
                        p
                    })?;
                    summary.push(format!(
                        "quantum snapshot at eta = {}: L1 to classical {:.4e}",
                        q.eta, q.distance
                    ));
                    json!({"eta": q.eta, "D": q.d, "distance": q.distance, "grid": plan_json(&q.plan)})
                }
                None => {
                    summary.push("no pair is resolvable for a quantum snapshot".into());
                    Value::Null
                }
            };
            em.report(json!({"points": points, "quantum": quantum}))?;
        }
        Scenario::Fig4ChiScan => {
            let r = run_fig4(cfg)?;
            let mut rows = Vec::new();
            let mut points = Vec::new();
            for p in &r.points {
                let params = json!({"K": cfg.system.k, "eta": p.eta, "D": p.d, "chi": p.chi, "grid_n": p.plan.spec.n_q, "half_width": p.plan.spec.q_max});
                em.series(&format!("series_chi{:.4e}.csv", p.chi), &p.series, params)?;
                rows.push(format!("{},{},{},{}", p.chi, p.eta, p.d, p.max_distance));
                points.push(json!({"chi": p.chi, "eta": p.eta, "D": p.d, "max_distance": p.max_distance, "grid": plan_json(&p.plan)}));
                summary.push(format!(
                    "chi = {:.4e} (eta = {:.5}): max D_n = {:.4e}, grid {}",
                    p.chi, p.eta, p.max_distance, p.plan.spec.n_q
                ));
            }
            em.table("chi_scan.csv", "chi,eta,D,max_D_n", &rows, json!({"K": cfg.system.k, "D": cfg.deco.d}))?;
            match r.fit {
                Some((slope, _)) => summary.push(format!(
                    "log-log slope {:.4} over {} points with max D_n <= 1",
                    slope, r.linear_points
                )),
                None => summary.push("fewer than two points in the linear region".into()),
            }
            em.report(json!({
                "points": points,
                "slope": r.fit.map(|f| f.0),
                "intercept": r.fit.map(|f| f.1),
                "linear_points": r.linear_points,
            }))?;
        }
    }
    let manifest = em.finish()?;
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        manifest,
        summary,
    })
}
