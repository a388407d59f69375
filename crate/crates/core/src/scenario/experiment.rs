//! Monte Carlo comparison of the sensor controllers.

use super::config::{Controller, ScenarioConfig};
use super::ospa::{ospa, OspaResult};
use super::sim::{simulate_measurements, simulate_truth, Truth};
use crate::control::{feasible, random_action, select_action, Decision, Platform};
use crate::density::GlmbDensity;
use crate::error::{GlmbError, Result};
use crate::filter::{estimate_state, predict, update, BirthModel};
use crate::label::Label;
use crate::par;
use crate::rng::{combine, stream};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub ospa: OspaResult,
    pub truth_count: usize,
    pub estimate_count: usize,
    pub sensor: [f64; 2],
    /// `(label, x, y)` of each estimated target.
    pub estimates: Vec<(Label, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub step: usize,
    pub time: f64,
    pub position: [f64; 2],
    pub course_change: f64,
    pub heading: f64,
    pub constraint_relaxed: bool,
    pub feasible_actions: usize,
    /// Smallest horizon void probability reported by the controller.
    pub min_void: f64,
    /// The same quantity recomputed from scratch for the chosen action.
    pub audit_void_probabilities: Vec<f64>,
    pub reward_mean: Option<f64>,
    pub reward_standard_error: Option<f64>,
}

impl DecisionRecord {
    pub fn audit_min_void(&self) -> f64 {
        self.audit_void_probabilities.iter().copied().fold(1.0, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replicate {
    pub controller: Controller,
    pub run: usize,
    pub steps: Vec<StepRecord>,
    pub decisions: Vec<DecisionRecord>,
    /// Set when the replicate stopped early; its records are partial.
    pub aborted: Option<String>,
}

impl Replicate {
    pub fn time_averaged_ospa(&self) -> f64 {
        let d: Vec<f64> = self.steps.iter().map(|s| s.ospa.distance).collect();
        par::pairwise_sum(&d) / d.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerSummary {
    pub controller: Controller,
    pub runs: usize,
    pub aborted: usize,
    /// Mean over runs of the time-averaged OSPA.
    pub mean_ospa: f64,
    pub standard_error: f64,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub truth: Vec<Truth>,
    pub replicates: Vec<Replicate>,
}

impl Experiment {
    pub fn completed(&self, controller: Controller) -> impl Iterator<Item = &Replicate> {
        self.replicates.iter().filter(move |r| r.controller == controller && r.aborted.is_none())
    }

    pub fn summary(&self, controller: Controller) -> ControllerSummary {
        let avgs: Vec<f64> = self.completed(controller).map(Replicate::time_averaged_ospa).collect();
        let n = avgs.len() as f64;
        let mean = par::pairwise_sum(&avgs) / n;
        let sq: Vec<f64> = avgs.iter().map(|a| (a - mean) * (a - mean)).collect();
        let standard_error = if avgs.len() > 1 { (par::pairwise_sum(&sq) / (n - 1.0) / n).sqrt() } else { 0.0 };
        ControllerSummary {
            controller,
            runs: avgs.len(),
            aborted: self.replicates.iter().filter(|r| r.controller == controller && r.aborted.is_some()).count(),
            mean_ospa: mean,
            standard_error,
        }
    }

    /// Mean OSPA at each step over completed runs.
    pub fn mean_ospa_trace(&self, controller: Controller) -> Vec<f64> {
        let runs: Vec<&Replicate> = self.completed(controller).collect();
        (0..self.config.steps())
            .map(|k| {
                let d: Vec<f64> = runs.iter().map(|r| r.steps[k].ospa.distance).collect();
                par::pairwise_sum(&d) / d.len() as f64
            })
            .collect()
    }

    /// Sensor occupancy counts over the surveillance area, `[x_bin][y_bin]`.
    pub fn heatmap(&self, controller: Controller) -> Vec<Vec<u64>> {
        let [nx, ny] = self.config.heatmap.bins;
        let s = &self.config.surveillance;
        let mut grid = vec![vec![0u64; ny]; nx];
        for r in self.completed(controller) {
            for step in &r.steps {
                let fx = (step.sensor[0] - s.lower[0]) / (s.upper[0] - s.lower[0]);
                let fy = (step.sensor[1] - s.lower[1]) / (s.upper[1] - s.lower[1]);
                if (0.0..=1.0).contains(&fx) && (0.0..=1.0).contains(&fy) {
                    let i = ((fx * nx as f64) as usize).min(nx - 1);
                    let j = ((fy * ny as f64) as usize).min(ny - 1);
                    grid[i][j] += 1;
                }
            }
        }
        grid
    }

    /// Decisions taken without relaxation whose recomputed horizon void
    /// probabilities fall to `P_vmin` or below.
    pub fn constraint_violations(&self, slack: f64) -> Vec<(Controller, usize, usize)> {
        let threshold = self.config.control.void_threshold;
        self.replicates
            .iter()
            .flat_map(|r| {
                r.decisions
                    .iter()
                    .filter(move |d| !d.constraint_relaxed && d.audit_min_void() <= threshold - slack)
                    .map(move |d| (r.controller, r.run, d.step))
            })
            .collect()
    }

    pub fn decision_count(&self) -> usize {
        self.replicates.iter().map(|r| r.decisions.len()).sum()
    }
}

/// Runs every `(controller, run)` replicate. Controllers share the truth and
/// measurement noise streams of a run.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<Experiment> {
    run_experiment_with_progress(cfg, &|_| {})
}

pub fn run_experiment_with_progress(cfg: &ScenarioConfig, progress: &(dyn Fn(&Replicate) + Sync)) -> Result<Experiment> {
    cfg.validate()?;
    let truth = par::map_range(cfg.monte_carlo_runs, |run| simulate_truth(cfg, &mut stream(cfg.seed, &[1, run as u64])))
        .into_iter()
        .collect::<Result<Vec<Truth>>>()?;
    let jobs: Vec<(Controller, usize)> = cfg
        .controllers
        .iter()
        .flat_map(|&c| (0..cfg.monte_carlo_runs).map(move |r| (c, r)))
        .collect();
    let replicates = par::map(&jobs, |&(controller, run)| {
        let r = run_replicate(cfg, controller, run, &truth[run]);
        progress(&r);
        r
    });
    let aborted = replicates.iter().filter(|r| r.aborted.is_some()).count();
    if aborted as f64 > cfg.max_aborted_fraction * replicates.len() as f64 {
        let first = replicates.iter().find_map(|r| r.aborted.clone()).unwrap_or_default();
        return Err(GlmbError::ExperimentAborted(format!(
            "{aborted} of {} replicates aborted (first: {first})",
            replicates.len()
        )));
    }
    Ok(Experiment { config: cfg.clone(), truth, replicates })
}

fn run_replicate(cfg: &ScenarioConfig, controller: Controller, run: usize, truth: &Truth) -> Replicate {
    let mut rep = Replicate { controller, run, steps: Vec::new(), decisions: Vec::new(), aborted: None };
    if let Err(e) = replicate_steps(cfg, controller, run, truth, &mut rep) {
        rep.aborted = Some(e.to_string());
    }
    rep
}

fn replicate_steps(cfg: &ScenarioConfig, controller: Controller, run: usize, truth: &Truth, rep: &mut Replicate) -> Result<()> {
    let motion = cfg.motion_model()?;
    let sites = cfg.birth_sites()?;
    let base_sensor = cfg.sensor_model()?;
    let space = cfg.action_space()?;
    let decisions = cfg.decision_steps();
    let t = cfg.filter_interval;
    let (run_id, dims) = (run as u64, base_sensor.position_dims);

    let mut platform = Platform { position: cfg.sensor.initial_position, heading: cfg.sensor.initial_heading_deg.to_radians() };
    let mut moving = false;
    let mut density = GlmbDensity::certain_empty(4, 1.0);
    for k in 1..=cfg.steps() {
        if moving {
            platform = platform.advance(cfg.sensor.speed, t);
        }
        let sensor = base_sensor.at(platform.position);
        let targets = truth.states_at(k);
        let z = simulate_measurements(&targets, &sensor, &mut stream(cfg.seed, &[2, run_id, k as u64]));
        let birth = BirthModel::at_step(k as u32, &sites)?;
        let predicted = predict(&density, &motion, &birth, &cfg.filter)?.density;
        density = update(&predicted, &z, &sensor, &cfg.filter)?.density;

        let est = estimate_state(&density);
        let est_pos: Vec<Vec<f64>> = est.iter().map(|(_, x)| vec![x[dims[0]], x[dims[1]]]).collect();
        let truth_pos: Vec<Vec<f64>> = targets.iter().map(|x| vec![x[dims[0]], x[dims[1]]]).collect();
        rep.steps.push(StepRecord {
            step: k,
            time: k as f64 * t,
            ospa: ospa(&est_pos, &truth_pos, cfg.ospa.cutoff, cfg.ospa.order),
            truth_count: targets.len(),
            estimate_count: est.len(),
            sensor: platform.position,
            estimates: est.iter().map(|(l, x)| (*l, x[dims[0]], x[dims[1]])).collect(),
        });

        if controller == Controller::Stationary || !decisions.contains(&k) {
            continue;
        }
        let models = cfg.control_models(&sensor, k as u32)?;
        let control = cfg.control_config(combine(cfg.seed, &[3, run_id, k as u64]));
        let decision: Decision = match controller {
            Controller::Csd => select_action(&density, &platform, &models, &space, &control)?,
            Controller::Random => {
                random_action(&density, &platform, &models, &space, &control, &mut stream(cfg.seed, &[4, run_id, k as u64]))?
            }
            Controller::Stationary => unreachable!(),
        };
        let audit = feasible(decision.action, &density, &platform, &models, &space, &control)?;
        let chosen = &decision.actions[decision.action];
        rep.decisions.push(DecisionRecord {
            step: k,
            time: k as f64 * t,
            position: platform.position,
            course_change: decision.course_change,
            heading: decision.heading,
            constraint_relaxed: decision.constraint_relaxed,
            feasible_actions: decision.actions.iter().filter(|a| a.feasibility.feasible).count(),
            min_void: chosen.feasibility.min_void,
            audit_void_probabilities: audit.void_probabilities,
            reward_mean: chosen.reward.map(|r| r.mean),
            reward_standard_error: chosen.reward.map(|r| r.standard_error),
        });
        platform = Platform { position: platform.position, heading: decision.heading };
        moving = true;
    }
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Render the OSPA comparison and sensor heatmaps from this directory."""
import csv
import glob
import os
import sys

import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(sys.argv[0]))

series = {}
with open(os.path.join(here, "mean_ospa.csv")) as f:
    for row in csv.DictReader(f):
        series.setdefault(row["controller"], []).append((float(row["time"]), float(row["mean_ospa"])))
fig, ax = plt.subplots(figsize=(7, 4))
for name, points in series.items():
    t, d = zip(*points)
    ax.plot(t, d, label=name)
ax.set_xlabel("time (s)")
ax.set_ylabel("mean OSPA (m)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "ospa.png"), dpi=150)

for path in sorted(glob.glob(os.path.join(here, "heatmap_*.csv"))):
    name = os.path.basename(path)[len("heatmap_"):-len(".csv")]
    rows = list(csv.DictReader(open(path)))
    nx = max(int(r["x_bin"]) for r in rows) + 1
    ny = max(int(r["y_bin"]) for r in rows) + 1
    grid = np.zeros((ny, nx))
    for r in rows:
        grid[int(r["y_bin"]), int(r["x_bin"])] = float(r["count"])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(np.log1p(grid), origin="lower", cmap="hot")
    ax.set_title(f"sensor occupancy ({name})")
    fig.tight_layout()
    fig.savefig(os.path.join(here, f"heatmap_{name}.png"), dpi=150)
"#;

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(dir.join(name))?)
}

/// Writes the CSV outputs, the resolved configuration and the plot script.
pub fn write_outputs(exp: &Experiment, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("resolved_config.toml"), exp.config.to_toml_string())?;
    std::fs::write(dir.join("plot_figures.py"), PLOT_SCRIPT)?;

    let mut w = writer(dir, "ospa.csv")?;
    w.write_record(["step", "run", "controller", "ospa", "cardinality_truth", "cardinality_est"])?;
    for r in &exp.replicates {
        for s in &r.steps {
            w.write_record([
                s.step.to_string(),
                r.run.to_string(),
                r.controller.to_string(),
                format!("{}", s.ospa.distance),
                s.truth_count.to_string(),
                s.estimate_count.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "mean_ospa.csv")?;
    w.write_record(["step", "time", "controller", "mean_ospa"])?;
    for &c in &exp.config.controllers {
        for (k, d) in exp.mean_ospa_trace(c).iter().enumerate() {
            let step = k + 1;
            w.write_record([step.to_string(), format!("{}", step as f64 * exp.config.filter_interval), c.to_string(), format!("{d}")])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "summary.csv")?;
    w.write_record(["controller", "runs", "aborted", "time_averaged_ospa", "standard_error"])?;
    for &c in &exp.config.controllers {
        let s = exp.summary(c);
        w.write_record([c.to_string(), s.runs.to_string(), s.aborted.to_string(), format!("{}", s.mean_ospa), format!("{}", s.standard_error)])?;
    }
    w.flush()?;

    for &c in &exp.config.controllers {
        let mut w = writer(dir, &format!("heatmap_{c}.csv"))?;
        w.write_record(["x_bin", "y_bin", "count"])?;
        for (i, col) in exp.heatmap(c).iter().enumerate() {
            for (j, n) in col.iter().enumerate() {
                w.write_record([i.to_string(), j.to_string(), n.to_string()])?;
            }
        }
        w.flush()?;
    }

    let mut w = writer(dir, "control_log.csv")?;
    w.write_record([
        "run",
        "controller",
        "step",
        "time",
        "x",
        "y",
        "course_change_deg",
        "heading_deg",
        "constraint_relaxed",
        "feasible_actions",
        "min_void",
        "audit_min_void",
        "reward_mean",
        "reward_se",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in &exp.replicates {
        for d in &r.decisions {
            w.write_record([
                r.run.to_string(),
                r.controller.to_string(),
                d.step.to_string(),
                format!("{}", d.time),
                format!("{}", d.position[0]),
                format!("{}", d.position[1]),
                format!("{}", d.course_change.to_degrees()),
                format!("{}", d.heading.to_degrees()),
                d.constraint_relaxed.to_string(),
                d.feasible_actions.to_string(),
                format!("{}", d.min_void),
                format!("{}", d.audit_min_void()),
                opt(d.reward_mean),
                opt(d.reward_standard_error),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "tracks.csv")?;
    w.write_record(["run", "controller", "step", "kind", "id", "x", "y"])?;
    for r in &exp.replicates {
        let (c, run) = (r.controller.to_string(), r.run.to_string());
        for s in &r.steps {
            let step = s.step.to_string();
            w.write_record([&run, &c, &step, "sensor", "", &format!("{}", s.sensor[0]), &format!("{}", s.sensor[1])])?;
            for (l, x, y) in &s.estimates {
                w.write_record([&run, &c, &step, "estimate", &l.to_string(), &format!("{x}"), &format!("{y}")])?;
            }
        }
    }
    for (run, truth) in exp.truth.iter().enumerate() {
        for (k, states) in truth.steps.iter().enumerate() {
            for (id, x) in states {
                w.write_record([
                    run.to_string(),
                    String::new(),
                    (k + 1).to_string(),
                    "truth".into(),
                    id.to_string(),
                    format!("{}", x[0]),
                    format!("{}", x[2]),
                ])?;
            }
        }
    }
    w.flush()?;

    let aborted: Vec<&Replicate> = exp.replicates.iter().filter(|r| r.aborted.is_some()).collect();
    if !aborted.is_empty() {
        let mut w = writer(dir, "aborted.csv")?;
        w.write_record(["run", "controller", "step", "reason"])?;
        for r in aborted {
            w.write_record([r.run.to_string(), r.controller.to_string(), r.steps.len().to_string(), r.aborted.clone().unwrap()])?;
        }
        w.flush()?;
    }
    Ok(())
}
