//! Batch orchestration: enumerate, estimate, prune, solve, verify, report.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::ddp::{build_baseline, build_bundles, evaluate_bundles, save_bundle, DdpConfig, TrajectoryBundle};
use crate::decomp::{
    enumerate_pure, estimate_compute_time, pareto_front, Decomposition, SolverBudget,
};
use crate::gps::{evaluate_policy_value, solve_decomposition, value_error, ComposedPolicy, GpsConfig, PolicyValue};
use crate::grid::{save_with_sidecar, ValueGrid};
use crate::lqr::{lqr_saturated_error, LqrAnalysis, SampleConfig};
use crate::report::{RankingReport, ReportRow};
use crate::sim::{rollout, RolloutConfig};
use crate::systems::{load_benchmark, BenchmarkId, ControlSystem};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    None,
    Lqr,
    Ddp,
    Both,
}

impl Estimator {
    pub fn lqr(self) -> bool {
        matches!(self, Estimator::Lqr | Estimator::Both)
    }

    pub fn ddp(self) -> bool {
        matches!(self, Estimator::Ddp | Estimator::Both)
    }
}

impl FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Estimator::None),
            "lqr" => Ok(Estimator::Lqr),
            "ddp" => Ok(Estimator::Ddp),
            "both" => Ok(Estimator::Both),
            _ => Err(format!("unknown estimator {s:?} (expected lqr, ddp or both)")),
        }
    }
}

/// Which decompositions survive the LQR screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prune {
    None,
    /// Non-dominated in `(err_lqr, time_est)`.
    Pareto,
    /// The `N` smallest `err_lqr`, ties by id.
    Top(usize),
}

impl fmt::Display for Prune {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prune::None => f.write_str("none"),
            Prune::Pareto => f.write_str("pareto"),
            Prune::Top(n) => write!(f, "top:{n}"),
        }
    }
}

impl FromStr for Prune {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Prune::None),
            "pareto" => Ok(Prune::Pareto),
            _ => s
                .strip_prefix("top:")
                .and_then(|n| n.parse().ok())
                .map(Prune::Top)
                .ok_or_else(|| format!("unknown pruning rule {s:?} (expected none, pareto or top:<N>)")),
        }
    }
}

impl Serialize for Prune {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prune {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One batch run. Every run is deterministic; there is no seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Benchmark id or path to a system definition (JSON).
    pub system: String,
    /// Decomposition files; `None` enumerates every pure decomposition.
    pub decompositions: Option<Vec<PathBuf>>,
    pub estimator: Estimator,
    pub prune: Prune,
    /// Solve the survivors (or `select`) with policy iteration.
    pub solve: bool,
    /// Also solve the undecomposed system and report `err` for solved rows.
    pub verify: bool,
    /// Ids to solve instead of the pruning survivors.
    pub select: Option<Vec<usize>>,
    pub grid_scale: Option<f64>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub gps: GpsConfig,
    pub ddp: DdpConfig,
    pub budget: SolverBudget,
    /// Output directory for the report and artifacts; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub enumeration_cap: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: "cartpole".into(),
            decompositions: None,
            estimator: Estimator::Both,
            prune: Prune::Pareto,
            solve: false,
            verify: false,
            select: None,
            grid_scale: None,
            horizon: None,
            dt: None,
            gps: GpsConfig::default(),
            ddp: DdpConfig::default(),
            budget: SolverBudget::default(),
            out: None,
            enumeration_cap: Some(1_000_000),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text).map_err(|e| io_err(path, e))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if let Some(files) = &self.decompositions {
            if let Some(f) = files.iter().find(|f| !f.exists()) {
                return bad(format!("decomposition file {} does not exist", f.display()));
            }
        }
        if self.system.parse::<BenchmarkId>().is_err() && !Path::new(&self.system).exists() {
            return bad(format!("{:?} is neither a benchmark nor an existing file", self.system));
        }
        for (name, v) in [("grid_scale", self.grid_scale), ("horizon", self.horizon), ("dt", self.dt)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("{name} must be positive"));
                }
            }
        }
        if self.gps.actions_per_input < 2 || self.gps.max_sweeps == 0 || self.gps.max_improvements == 0 {
            return bad("policy iteration budgets must be positive (at least 2 actions per input)".into());
        }
        if self.ddp.max_iterations == 0 || self.ddp.line_search_steps == 0 {
            return bad("DDP budgets must be positive".into());
        }
        if self.budget.actions_per_input == 0 || self.budget.iterations == 0 {
            return bad("complexity budget must be positive".into());
        }
        if self.prune == Prune::Top(0) {
            return bad("top:N needs N > 0".into());
        }
        if self.verify && !self.solve {
            return bad("verify requires solve".into());
        }
        Ok(())
    }

    /// The configured system with grid, horizon and step overrides applied.
    pub fn load_system(&self) -> Result<ControlSystem, PipelineError> {
        let mut sys = match self.system.parse::<BenchmarkId>() {
            Ok(id) => load_benchmark(id),
            Err(_) => {
                let path = Path::new(&self.system);
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                ControlSystem::from_json(&text).map_err(|e| io_err(path, e))?
            }
        };
        if let Some(s) = self.grid_scale {
            sys = sys.with_grid_scale(s);
        }
        if let Some(h) = self.horizon {
            sys.horizon = h;
        }
        if let Some(dt) = self.dt {
            sys.dt = dt;
        }
        sys.check().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(sys)
    }

    /// Enumerated or file-supplied decompositions in report order (ids 1..).
    pub fn load_decompositions(&self, sys: &ControlSystem) -> Result<Vec<Decomposition>, PipelineError> {
        match &self.decompositions {
            None => enumerate_pure(sys, self.enumeration_cap).map_err(|e| PipelineError::Config(e.to_string())),
            Some(files) => files
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                    Decomposition::from_json(text.trim()).map_err(|e| io_err(p, e))
                })
                .collect(),
        }
    }
}

/// Caps the global thread pool at `POLYDEC_THREADS` when set. Call before
/// any parallel work; later calls are ignored.
pub fn configure_threads() {
    if let Some(n) = std::env::var("POLYDEC_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Where one decomposition's files go, relative to the output directory.
struct ArtifactDir {
    root: Option<PathBuf>,
    rel: PathBuf,
}

impl ArtifactDir {
    fn new(out: Option<&Path>, id: usize) -> Self {
        ArtifactDir { root: out.map(Path::to_path_buf), rel: PathBuf::from("artifacts").join(format!("{id:04}")) }
    }

    /// Creates the directory and returns `(absolute, relative)` paths of `name`.
    fn file(&self, name: &str) -> Result<Option<(PathBuf, String)>, String> {
        let Some(root) = &self.root else { return Ok(None) };
        let dir = root.join(&self.rel);
        fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let rel = self.rel.join(name);
        Ok(Some((root.join(&rel), rel.to_string_lossy().replace('\\', "/"))))
    }
}

fn node_file(path: &str, suffix: &str) -> String {
    format!("{}.{suffix}", path.replace('/', "-"))
}

fn save_value(path: &Path, sys: &ControlSystem, node: &str, v: &ValueGrid) -> Result<(), String> {
    let meta = json!({ "system": sys.name, "node": node, "channels": ["V"] });
    save_with_sidecar(path, &v.grid, 1, &v.values, &meta).map_err(|e| format!("{}: {e}", path.display()))
}

fn save_policy(path: &Path, sys: &ControlSystem, p: &ComposedPolicy, k: usize) -> Result<(), String> {
    let node = &p.nodes[k];
    let names = sys.input_names();
    let meta = json!({
        "system": sys.name,
        "node": node.plan.path,
        "states": node.plan.states,
        "inputs": node.policy.inputs,
        "channels": node.policy.inputs.iter().map(|&a| names[a].clone()).collect::<Vec<_>>(),
        "dt": node.stats.dt,
        "improvements": node.stats.improvements,
        "sweeps": node.stats.sweeps,
        "residual": node.stats.residual,
        "max_value_increase": node.stats.max_value_increase,
        "value_tolerance": node.stats.value_tolerance,
    });
    save_with_sidecar(path, &node.policy.grid, node.policy.inputs.len(), &node.policy.controls, &meta)
        .map_err(|e| format!("{}: {e}", path.display()))
}

/// Fixed-policy value of the undecomposed policy, the reference of every `err`.
fn save_reference(dir: &ArtifactDir, sys: &ControlSystem, v: &PolicyValue) -> Result<Vec<String>, String> {
    let Some((abs, rel)) = dir.file("reference.value.pdg")? else { return Ok(Vec::new()) };
    let meta = json!({
        "system": sys.name,
        "node": "full",
        "channels": ["V"],
        "dt": v.dt,
        "sweeps": v.sweeps,
        "residual": v.residual,
        "value_tolerance": v.value_tolerance,
        "diverged_cells": v.diverged_cells,
    });
    save_with_sidecar(&abs, &v.value.grid, 1, &v.value.values, &meta).map_err(|e| format!("{}: {e}", abs.display()))?;
    Ok(vec![rel])
}

/// Convergence record of a decomposition's fixed-policy evaluation.
fn save_evaluation(dir: &ArtifactDir, v: &PolicyValue) -> Result<Vec<String>, String> {
    let Some((abs, rel)) = dir.file("evaluation.json")? else { return Ok(Vec::new()) };
    let meta = json!({
        "dt": v.dt,
        "sweeps": v.sweeps,
        "residual": v.residual,
        "value_tolerance": v.value_tolerance,
        "diverged_cells": v.diverged_cells,
    });
    fs::write(&abs, format!("{meta:#}\n")).map_err(|e| format!("{}: {e}", abs.display()))?;
    Ok(vec![rel])
}

/// Closed-loop rollout of a solved policy from the first corner of `S_eval`.
fn save_rollout(path: &Path, sys: &ControlSystem, p: &ComposedPolicy) -> Result<(), String> {
    let pol = |x: &[f64], u: &mut [f64]| crate::gps::eval_composed_into(sys, p, x, u);
    let x0 = sys.s_eval.corners().remove(0);
    let r = rollout(sys, &pol, &x0, &RolloutConfig::for_system(sys)).map_err(|e| e.to_string())?;
    let f = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    r.write_csv(std::io::BufWriter::new(f)).map_err(|e| format!("{}: {e}", path.display()))
}

/// Writes every node's value and policy grid plus a rollout; returns the
/// relative paths.
fn persist_solution(dir: &ArtifactDir, sys: &ControlSystem, p: &ComposedPolicy) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (k, node) in p.nodes.iter().enumerate() {
        if let Some((abs, rel)) = dir.file(&node_file(&node.plan.path, "value.pdg"))? {
            save_value(&abs, sys, &node.plan.path, &node.value)?;
            out.push(rel);
        }
        if let Some((abs, rel)) = dir.file(&node_file(&node.plan.path, "policy.pdg"))? {
            save_policy(&abs, sys, p, k)?;
            out.push(rel);
        }
    }
    if let Some((abs, rel)) = dir.file("rollout.csv")? {
        save_rollout(&abs, sys, p)?;
        out.push(rel);
    }
    Ok(out)
}

fn persist_bundles(dir: &ArtifactDir, sys: &ControlSystem, bundles: &[TrajectoryBundle]) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for b in bundles {
        if let Some((abs, rel)) = dir.file(&node_file(&b.path, "bundle.pdg"))? {
            save_bundle(&abs, sys, b).map_err(|e| format!("{}: {e}", abs.display()))?;
            out.push(rel);
        }
    }
    Ok(out)
}

/// Indices (into `rows[1..]`) kept by the pruning rule.
fn survivors(rows: &[ReportRow], prune: Prune) -> Vec<usize> {
    let key = |r: &ReportRow| r.err_lqr.filter(|v| !v.is_nan()).unwrap_or(f64::INFINITY);
    let ids: Vec<usize> = (1..rows.len()).collect();
    match prune {
        Prune::None => ids,
        Prune::Pareto => {
            let pts: Vec<(f64, f64)> =
                ids.iter().map(|&i| (key(&rows[i]), rows[i].time_est.unwrap_or(f64::INFINITY))).collect();
            pareto_front(&pts).into_iter().map(|k| ids[k]).collect()
        }
        Prune::Top(n) => {
            let mut sorted = ids;
            sorted.sort_by(|&a, &b| key(&rows[a]).total_cmp(&key(&rows[b])).then(a.cmp(&b)));
            sorted.truncate(n);
            sorted.sort_unstable();
            sorted
        }
    }
}

/// Runs the enabled stages over the configured decompositions. Stage
/// failures are recorded on the affected rows; only configuration and
/// report-writing errors abort.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RankingReport, PipelineError> {
    cfg.validate()?;
    let sys = cfg.load_system()?;
    let decomps = cfg.load_decompositions(&sys)?;
    log::info!("{}: {} decompositions, grid {:?}", sys.name, decomps.len(), sys.grid_shape);
    let out = cfg.out.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }

    let full = Decomposition::undecomposed(&sys);
    let mut rows = vec![ReportRow::new(0, full.to_json(), full.describe(&sys))];
    rows[0].time_est = Some(1.0);
    for (k, d) in decomps.iter().enumerate() {
        let mut row = ReportRow::new(k + 1, d.to_json(), d.describe(&sys));
        match d.validate(&sys) {
            Ok(()) => row.time_est = Some(estimate_compute_time(&sys, d, &cfg.budget).relative_cost),
            Err(v) => row.errors.push(format!(
                "invalid: {}",
                v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            )),
        }
        rows.push(row);
    }
    let valid = |r: &ReportRow| r.errors.is_empty();

    if cfg.estimator.lqr() || cfg.prune != Prune::None {
        log::info!("LQR estimates");
        match LqrAnalysis::new(&sys) {
            Ok(analysis) => {
                let optimal = analysis.optimal_gain();
                let samples = SampleConfig::for_system(&sys);
                rows[0].err_lqr = Some(0.0);
                match lqr_saturated_error(&sys, &optimal, &optimal, &samples) {
                    Ok(s) => rows[0].lqr_bar = Some(s.value),
                    Err(e) => rows[0].errors.push(format!("lqr_bar: {e}")),
                }
                let results: Vec<_> = rows[1..]
                    .par_iter()
                    .zip(&decomps)
                    .map(|(row, d)| {
                        if !valid(row) {
                            return None;
                        }
                        Some(analysis.estimate(&sys, d).and_then(|est| {
                            let bar = match &est.gain {
                                Some(g) if est.err.is_finite() => {
                                    Some(lqr_saturated_error(&sys, g, &optimal, &samples)?.value)
                                }
                                _ => None,
                            };
                            Ok((est.err, bar))
                        }))
                    })
                    .collect();
                for (row, res) in rows[1..].iter_mut().zip(results) {
                    match res {
                        Some(Ok((err, bar))) => {
                            row.err_lqr = Some(err);
                            row.lqr_bar = bar;
                        }
                        Some(Err(e)) => row.errors.push(format!("lqr: {e}")),
                        None => {}
                    }
                }
            }
            Err(e) => rows[0].errors.push(format!("lqr: {e}")),
        }
    }

    let kept: Vec<usize> = survivors(&rows, cfg.prune).into_iter().filter(|&i| valid(&rows[i])).collect();
    log::info!("{} decompositions survive pruning ({})", kept.len(), cfg.prune);

    if cfg.estimator.ddp() {
        log::info!("DDP baseline");
        let baseline = build_baseline(&sys, &cfg.ddp).and_then(|b| {
            let (err, _) = evaluate_bundles(&sys, std::slice::from_ref(&b), &b, &cfg.ddp)?;
            Ok((b, err))
        });
        match baseline {
            Ok((baseline, err0)) => {
                rows[0].err_ddp = Some(err0);
                let dir = ArtifactDir::new(out, 0);
                match persist_bundles(&dir, &sys, std::slice::from_ref(&baseline)) {
                    Ok(a) => rows[0].artifacts.extend(a),
                    Err(e) => rows[0].errors.push(format!("artifact: {e}")),
                }
                for &i in &kept {
                    log::info!("DDP #{i} {}", rows[i].description);
                    let d = &decomps[i - 1];
                    let res = build_bundles(&sys, d, &cfg.ddp)
                        .and_then(|b| evaluate_bundles(&sys, &b, &baseline, &cfg.ddp).map(|(err, _)| (err, b)));
                    match res {
                        Ok((err, bundles)) => {
                            rows[i].err_ddp = Some(err);
                            match persist_bundles(&ArtifactDir::new(out, i), &sys, &bundles) {
                                Ok(a) => rows[i].artifacts.extend(a),
                                Err(e) => rows[i].errors.push(format!("artifact: {e}")),
                            }
                        }
                        Err(e) => rows[i].errors.push(format!("ddp: {e}")),
                    }
                }
            }
            Err(e) => rows[0].errors.push(format!("ddp baseline: {e}")),
        }
    }

    if cfg.solve {
        let targets: Vec<usize> = match &cfg.select {
            Some(ids) => {
                let mut t = Vec::new();
                for &i in ids {
                    if i == 0 || i >= rows.len() {
                        return Err(PipelineError::Config(format!("selected id {i} is not a decomposition")));
                    }
                    if valid(&rows[i]) && !t.contains(&i) {
                        t.push(i);
                    }
                }
                t.sort_unstable();
                t
            }
            None => kept.clone(),
        };
        let baseline = if cfg.verify {
            log::info!("policy iteration: undecomposed");
            match solve_decomposition(&sys, &full, &cfg.gps) {
                Ok(p) => {
                    let dt = p.nodes[0].stats.dt;
                    rows[0].time_meas = Some(p.solve_seconds());
                    match evaluate_policy_value(&sys, &p, dt, &cfg.gps) {
                        Ok(v) => {
                            rows[0].err = Some(value_error(&sys, &v.value, &v.value));
                            let dir = ArtifactDir::new(out, 0);
                            match persist_solution(&dir, &sys, &p).and_then(|mut a| {
                                a.extend(save_reference(&dir, &sys, &v)?);
                                Ok(a)
                            }) {
                                Ok(a) => rows[0].artifacts.extend(a),
                                Err(e) => rows[0].errors.push(format!("artifact: {e}")),
                            }
                            Some((dt, v.value))
                        }
                        Err(e) => {
                            rows[0].errors.push(format!("verify: {e}"));
                            None
                        }
                    }
                }
                Err(e) => {
                    rows[0].errors.push(format!("solve: {e}"));
                    None
                }
            }
        } else {
            None
        };
        for &i in &targets {
            log::info!("policy iteration #{i} {}", rows[i].description);
            let started = Instant::now();
            let p = match solve_decomposition(&sys, &decomps[i - 1], &cfg.gps) {
                Ok(p) => p,
                Err(e) => {
                    rows[i].errors.push(format!("solve: {e}"));
                    continue;
                }
            };
            rows[i].time_meas = Some(p.solve_seconds());
            log::debug!("#{i} solved in {:.2}s", started.elapsed().as_secs_f64());
            match persist_solution(&ArtifactDir::new(out, i), &sys, &p) {
                Ok(a) => rows[i].artifacts.extend(a),
                Err(e) => rows[i].errors.push(format!("artifact: {e}")),
            }
            if cfg.verify {
                let Some((dt, v_star)) = &baseline else {
                    rows[i].errors.push("verify: no undecomposed value".into());
                    continue;
                };
                match evaluate_policy_value(&sys, &p, *dt, &cfg.gps) {
                    Ok(v) => {
                        rows[i].err = Some(value_error(&sys, &v.value, v_star));
                        match save_evaluation(&ArtifactDir::new(out, i), &v) {
                            Ok(a) => rows[i].artifacts.extend(a),
                            Err(e) => rows[i].errors.push(format!("artifact: {e}")),
                        }
                    }
                    Err(e) => rows[i].errors.push(format!("verify: {e}")),
                }
            }
        }
    }

    let mut report = RankingReport { system: sys.name.clone(), rows };
    report.rerank();
    if let Some(dir) = out {
        report.write(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(report)
}
