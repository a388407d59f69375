//! Scenario files: TOML documents with a `format_version` header.

use crate::control::{ActionSpace, ControlConfig, ControlModels};
use crate::error::{GlmbError, Result};
use crate::filter::{BearingRangeSensor, FilterConfig, MotionModel, RangeNoiseProfile};
use crate::gaussian::{Gaussian, GaussianMixture};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Csd,
    Random,
    Stationary,
}

impl Controller {
    pub fn name(self) -> &'static str {
        match self {
            Controller::Csd => "csd",
            Controller::Random => "random",
            Controller::Stationary => "stationary",
        }
    }
}

impl std::fmt::Display for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surveillance {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    /// σ_v, m/s².
    pub accel_sd: f64,
    /// Per filter interval.
    pub survival_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthSection {
    /// r_B per site and filter step.
    pub existence: f64,
    pub position_sd: f64,
    pub velocity_sd: f64,
    /// Mean state `[x, vx, y, vy]` of each site.
    pub sites: Vec<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub initial_position: [f64; 2],
    pub initial_heading_deg: f64,
    /// m/s once the platform starts moving.
    pub speed: f64,
    pub bearing_sd_deg: f64,
    pub eta: f64,
    pub r1: f64,
    pub r2: f64,
    /// σ_D, metres.
    pub detection_sd: f64,
    /// Expected clutter count per scan.
    pub clutter_rate: f64,
    /// Outer range of the clutter window, metres.
    pub max_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Seconds; the platform stays put until the first decision.
    pub start_time: f64,
    pub decision_interval: f64,
    /// Seconds between lookahead steps.
    pub lookahead_interval: f64,
    pub horizon: usize,
    pub course_step_deg: f64,
    pub samples: usize,
    pub exclusion_radius: f64,
    pub void_threshold: f64,
    pub reward_clamp: f64,
    pub lookahead_birth: bool,
    pub lookahead_components: usize,
    pub max_failure_fraction: f64,
    pub lookahead_filter: FilterConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OspaSection {
    pub cutoff: f64,
    pub order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapSection {
    /// Bins along x and y over the surveillance area.
    pub bins: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Seconds.
    pub birth: f64,
    /// Seconds; the target exists while `birth ≤ t < death`. Defaults to the
    /// end of the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death: Option<f64>,
    /// `[x, vx, y, vy]` at the first step it exists.
    pub state: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format_version: u32,
    pub name: String,
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    /// T, seconds.
    pub filter_interval: f64,
    pub monte_carlo_runs: usize,
    pub controllers: Vec<Controller>,
    /// Fraction of aborted replicates above which the experiment fails.
    pub max_aborted_fraction: f64,
    pub surveillance: Surveillance,
    pub motion: MotionSection,
    pub birth: BirthSection,
    pub sensor: SensorSection,
    pub control: ControlSection,
    pub filter: FilterConfig,
    pub ospa: OspaSection,
    pub heatmap: HeatmapSection,
    pub targets: Vec<TargetSpec>,
}

fn multiple_of(x: f64, base: f64) -> bool {
    let r = x / base;
    (r - r.round()).abs() < 1e-9
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(GlmbError::Config(msg.into()))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| GlmbError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text`, applies `key.path=value` overrides in order, and
    /// validates the result.
    pub fn from_toml_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Value = toml::from_str(text).map_err(|e| GlmbError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ScenarioConfig = doc.try_into().map_err(|e: toml::de::Error| GlmbError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.format_version == FORMAT_VERSION,
            format!("format_version {} is not supported (expected {FORMAT_VERSION})", self.format_version),
        )?;
        check(self.duration > 0.0 && self.filter_interval > 0.0, "duration and filter_interval must be positive")?;
        check(multiple_of(self.duration, self.filter_interval), "filter_interval must divide duration")?;
        check(self.monte_carlo_runs >= 1, "monte_carlo_runs must be at least 1")?;
        check(!self.controllers.is_empty(), "at least one controller is required")?;
        check((0.0..=1.0).contains(&self.max_aborted_fraction), "max_aborted_fraction must be in [0, 1]")?;
        let s = &self.surveillance;
        check(s.lower[0] < s.upper[0] && s.lower[1] < s.upper[1], "surveillance lower must be below upper")?;
        check(self.motion.accel_sd >= 0.0, "motion.accel_sd must be non-negative")?;
        check(
            self.motion.survival_probability > 0.0 && self.motion.survival_probability <= 1.0,
            "motion.survival_probability must be in (0, 1]",
        )?;
        let b = &self.birth;
        check(b.existence > 0.0 && b.existence < 1.0, "birth.existence must be in (0, 1)")?;
        check(b.position_sd > 0.0 && b.velocity_sd > 0.0, "birth standard deviations must be positive")?;
        let c = &self.control;
        check(c.start_time >= 0.0 && multiple_of(c.start_time, self.filter_interval), "control.start_time must be a multiple of filter_interval")?;
        check(
            c.decision_interval > 0.0 && multiple_of(c.decision_interval, self.filter_interval),
            "control.decision_interval must be a positive multiple of filter_interval",
        )?;
        check(c.lookahead_interval > 0.0, "control.lookahead_interval must be positive")?;
        check(self.sensor.speed >= 0.0, "sensor.speed must be non-negative")?;
        check(self.ospa.cutoff > 0.0 && self.ospa.order >= 1.0, "ospa needs cutoff > 0 and order ≥ 1")?;
        check(self.heatmap.bins[0] > 0 && self.heatmap.bins[1] > 0, "heatmap bins must be positive")?;
        for (i, t) in self.targets.iter().enumerate() {
            check(t.birth >= 0.0, format!("target {i}: birth must be non-negative"))?;
            if let Some(d) = t.death {
                check(d > t.birth, format!("target {i}: death must come after birth"))?;
            }
            check(t.state.iter().all(|v| v.is_finite()), format!("target {i}: non-finite state"))?;
        }
        self.filter.validate()?;
        self.sensor_model()?;
        self.action_space()?;
        self.control_config(0).validate()?;
        self.motion_model()?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.filter_interval).round() as usize
    }

    /// Filter steps (1-based) at the end of which a decision is taken.
    pub fn decision_steps(&self) -> Vec<usize> {
        let t = self.filter_interval;
        let first = (self.control.start_time / t).round() as usize;
        let every = (self.control.decision_interval / t).round() as usize;
        (first.max(1)..self.steps()).step_by(every.max(1)).collect()
    }

    pub fn motion_model(&self) -> Result<MotionModel> {
        MotionModel::constant_velocity(self.filter_interval, self.motion.accel_sd, self.motion.survival_probability)
    }

    /// One lookahead step, with survival compounded over its length.
    pub fn lookahead_motion_model(&self) -> Result<MotionModel> {
        let ratio = self.control.lookahead_interval / self.filter_interval;
        MotionModel::constant_velocity(
            self.control.lookahead_interval,
            self.motion.accel_sd,
            self.motion.survival_probability.powf(ratio),
        )
    }

    pub fn sensor_model(&self) -> Result<BearingRangeSensor> {
        let s = &self.sensor;
        BearingRangeSensor::new(
            s.initial_position,
            s.bearing_sd_deg.to_radians(),
            RangeNoiseProfile { eta: s.eta, r1: s.r1, r2: s.r2 },
            s.detection_sd,
            s.clutter_rate,
            s.max_range,
        )
    }

    pub fn birth_sites(&self) -> Result<Vec<(f64, Arc<GaussianMixture>)>> {
        let b = &self.birth;
        let (p, v) = (b.position_sd * b.position_sd, b.velocity_sd * b.velocity_sd);
        let cov = [p, 0.0, 0.0, 0.0, 0.0, v, 0.0, 0.0, 0.0, 0.0, p, 0.0, 0.0, 0.0, 0.0, v];
        b.sites
            .iter()
            .map(|m| Ok((b.existence, Arc::new(GaussianMixture::single(Gaussian::from_slices(m, &cov)?)))))
            .collect()
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        let c = &self.control;
        ActionSpace::grid(c.course_step_deg, self.sensor.speed, c.lookahead_interval, c.horizon)
    }

    pub fn control_config(&self, seed: u64) -> ControlConfig {
        let c = &self.control;
        ControlConfig {
            samples: c.samples,
            exclusion_radius: c.exclusion_radius,
            void_threshold: c.void_threshold,
            seed,
            reward_clamp: c.reward_clamp,
            lookahead_birth: c.lookahead_birth,
            lookahead_components: c.lookahead_components,
            max_failure_fraction: c.max_failure_fraction,
            lookahead_filter: c.lookahead_filter.clone(),
        }
    }

    pub fn control_models(&self, sensor: &BearingRangeSensor, current_step: u32) -> Result<ControlModels> {
        Ok(ControlModels {
            motion: self.lookahead_motion_model()?,
            sensor: sensor.clone(),
            birth_sites: self.birth_sites()?,
            current_step,
        })
    }
}

/// Sets `path` (dot separated) in `doc` to `value`, parsed as a TOML value
/// when possible and as a bare string otherwise. Missing tables are created;
/// unknown keys are caught later by schema validation.
pub fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| GlmbError::Config(format!("override `{assignment}` is not of the form key.path=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        return Err(GlmbError::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| GlmbError::Config(format!("override `{path}`: `{key}` is not inside a table")))?;
        node = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| GlmbError::Config(format!("override `{path}` does not name a table entry")))?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
