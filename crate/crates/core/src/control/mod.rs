//! Constrained myopic sensor control.
//!
//! Each candidate course change is scored by the expected Cauchy-Schwarz
//! divergence between the measurement-free prediction of the current
//! posterior at the end of the horizon and the posterior obtained from
//! simulated measurements along the horizon. Candidates whose predicted void
//! probability over the exclusion disc around the sensor drops to `P_vmin` or
//! below at any horizon step are discarded.

use crate::cs_divergence::cs_divergence;
use crate::density::GlmbDensity;
use crate::error::{GlmbError, Result};
use crate::filter::{predict, update, wrap_angle, BearingRangeSensor, BirthModel, FilterConfig, MotionModel};
use crate::gaussian::{GaussianMixture, Vector};
use crate::par;
use crate::region::Region;
use crate::rng::{stream, Stream};
use crate::scenario::simulate_measurements;
use crate::void_prob::glmb_void_probability;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Candidate course changes and the lookahead geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpace {
    /// Radians, sorted, within `[-π, π]`.
    course_changes: Vec<f64>,
    /// m/s.
    pub speed: f64,
    /// Seconds between lookahead steps.
    pub step_interval: f64,
    pub horizon: usize,
}

impl ActionSpace {
    pub fn new(mut course_changes: Vec<f64>, speed: f64, step_interval: f64, horizon: usize) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if let Some(a) = course_changes.iter().find(|a| !(a.abs() <= PI + SLACK)) {
            return Err(GlmbError::Config(format!("course change {a} outside [-π, π]")));
        }
        if horizon == 0 || !(step_interval > 0.0) || !(speed >= 0.0) {
            return Err(GlmbError::Config("horizon, step interval and speed must be positive".into()));
        }
        course_changes.sort_by(f64::total_cmp);
        Ok(Self { course_changes, speed, step_interval, horizon })
    }

    /// `-180°, -180° + step, …, 180°`.
    pub fn grid(step_deg: f64, speed: f64, step_interval: f64, horizon: usize) -> Result<Self> {
        if !(step_deg > 0.0) {
            return Err(GlmbError::Config("course grid step must be positive".into()));
        }
        let n = (360.0 / step_deg).round() as i64;
        let angles = (0..=n).map(|i| (-180.0 + i as f64 * step_deg).min(180.0).to_radians()).collect();
        Self::new(angles, speed, step_interval, horizon)
    }

    pub fn course_changes(&self) -> &[f64] {
        &self.course_changes
    }

    pub fn len(&self) -> usize {
        self.course_changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.course_changes.is_empty()
    }

    /// Sensor positions at lookahead steps `1..=H` after taking `action`.
    pub fn sensor_path(&self, platform: &Platform, action: usize) -> Vec<[f64; 2]> {
        let turned = platform.turn(self.course_changes[action]);
        (1..=self.horizon)
            .map(|i| turned.advance(self.speed, i as f64 * self.step_interval).position)
            .collect()
    }
}

/// Sensor position and heading (radians, counter-clockwise from +x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub position: [f64; 2],
    pub heading: f64,
}

impl Platform {
    pub fn turn(&self, delta: f64) -> Platform {
        Platform { position: self.position, heading: wrap_angle(self.heading + delta) }
    }

    pub fn advance(&self, speed: f64, dt: f64) -> Platform {
        let d = speed * dt;
        Platform {
            position: [self.position[0] + d * self.heading.cos(), self.position[1] + d * self.heading.sin()],
            heading: self.heading,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Monte Carlo samples per action.
    pub samples: usize,
    /// Exclusion disc radius, metres.
    pub exclusion_radius: f64,
    /// `P_vmin`.
    pub void_threshold: f64,
    pub seed: u64,
    /// Infinite per-sample rewards are replaced by this value.
    pub reward_clamp: f64,
    /// Include births in the lookahead.
    pub lookahead_birth: bool,
    /// Posterior components kept for reward rollouts.
    pub lookahead_components: usize,
    /// Largest tolerated fraction of failed reward samples.
    pub max_failure_fraction: f64,
    /// Caps of the filter run inside the lookahead.
    pub lookahead_filter: FilterConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            samples: 50,
            exclusion_radius: 1000.0,
            void_threshold: 0.95,
            seed: 0,
            reward_clamp: 1e6,
            lookahead_birth: false,
            lookahead_components: 5,
            max_failure_fraction: 0.2,
            lookahead_filter: FilterConfig {
                max_components: 20,
                max_predict_hypotheses: 8,
                max_update_hypotheses: 8,
                hypothesis_log_ratio: (1e-4f64).ln(),
                ..FilterConfig::default()
            },
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.lookahead_components == 0 {
            return Err(GlmbError::Config("control.samples and control.lookahead_components must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.void_threshold) {
            return Err(GlmbError::Config("control.void_threshold must be in [0, 1)".into()));
        }
        if !(self.exclusion_radius > 0.0) || !(self.reward_clamp > 0.0) {
            return Err(GlmbError::Config("exclusion radius and reward clamp must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(GlmbError::Config("control.max_failure_fraction must be in [0, 1]".into()));
        }
        self.lookahead_filter.validate()
    }
}

/// Models used inside the lookahead. `motion` advances one lookahead step.
#[derive(Clone, Debug)]
pub struct ControlModels {
    pub motion: MotionModel,
    pub sensor: BearingRangeSensor,
    /// `(existence, density)` per birth site; used when births are enabled.
    pub birth_sites: Vec<(f64, Arc<GaussianMixture>)>,
    /// Filter step of the posterior; lookahead birth labels start after it.
    pub current_step: u32,
}

impl ControlModels {
    fn birth(&self, cfg: &ControlConfig, lookahead_step: usize) -> Result<BirthModel> {
        if cfg.lookahead_birth && !self.birth_sites.is_empty() {
            BirthModel::at_step(self.current_step + lookahead_step as u32, &self.birth_sites)
        } else {
            Ok(BirthModel::none())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    /// Void probability of the exclusion disc at each horizon step.
    pub void_probabilities: Vec<f64>,
    pub min_void: f64,
    pub feasible: bool,
}

/// Measurement-free predictions `π_{k+i|k}` for `i = 1..=H`, without births.
pub fn predict_horizon(
    posterior: &GlmbDensity,
    models: &ControlModels,
    space: &ActionSpace,
    cfg: &ControlConfig,
) -> Result<Vec<GlmbDensity>> {
    let mut out = Vec::with_capacity(space.horizon);
    let mut current = posterior.clone();
    for _ in 0..space.horizon {
        current = predict(&current, &models.motion, &BirthModel::none(), &cfg.lookahead_filter)?.density;
        out.push(current.clone());
    }
    Ok(out)
}

/// Void probabilities of the exclusion disc along a sensor path.
pub fn feasibility_along(
    predictions: &[GlmbDensity],
    path: &[[f64; 2]],
    position_dims: [usize; 2],
    cfg: &ControlConfig,
) -> Result<Feasibility> {
    let void_probabilities = predictions
        .iter()
        .zip(path)
        .map(|(d, &p)| glmb_void_probability(d, &Region::disc(p, cfg.exclusion_radius, position_dims)?))
        .collect::<Result<Vec<f64>>>()?;
    let min_void = void_probabilities.iter().copied().fold(1.0, f64::min);
    Ok(Feasibility { feasible: min_void > cfg.void_threshold, min_void, void_probabilities })
}

/// Whether `action` keeps the exclusion disc void with probability above
/// `P_vmin` at every horizon step.
pub fn feasible(
    action: usize,
    posterior: &GlmbDensity,
    platform: &Platform,
    models: &ControlModels,
    space: &ActionSpace,
    cfg: &ControlConfig,
) -> Result<Feasibility> {
    let predictions = predict_horizon(posterior, models, space, cfg)?;
    feasibility_along(&predictions, &space.sensor_path(platform, action), models.sensor.position_dims, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
    pub failures: usize,
}

const REFERENCE_COMPONENTS: usize = 5000;
const REFERENCE_HYPOTHESES: usize = 1024;

/// Shared state for reward rollouts: the truncated prior and its
/// measurement-free prediction at the end of the horizon.
struct Lookahead {
    prior: GlmbDensity,
    prediction: GlmbDensity,
}

fn lookahead(posterior: &GlmbDensity, models: &ControlModels, space: &ActionSpace, cfg: &ControlConfig) -> Result<Lookahead> {
    let (prior, _) = posterior.truncate(cfg.lookahead_components, 0.0)?;
    // The reference prediction is computed once, so it can afford a much
    // larger budget than the rollouts. A posterior label set missing from it
    // would make the divergence infinite.
    let reference = FilterConfig {
        max_predicted_components: cfg.lookahead_filter.max_predicted_components.max(REFERENCE_COMPONENTS),
        max_predict_hypotheses: cfg.lookahead_filter.max_predict_hypotheses.max(REFERENCE_HYPOTHESES),
        min_weight: 0.0,
        ..cfg.lookahead_filter.clone()
    };
    let mut prediction = prior.clone();
    for i in 1..=space.horizon {
        prediction = predict(&prediction, &models.motion, &models.birth(cfg, i)?, &reference)?.density;
    }
    Ok(Lookahead { prior, prediction })
}

/// One rollout: sample a multi-target trajectory from the prior, simulate
/// measurements along the sensor path and return the clamped divergence of
/// the resulting posterior from the measurement-free prediction.
fn rollout(
    look: &Lookahead,
    path: &[[f64; 2]],
    sample: usize,
    models: &ControlModels,
    cfg: &ControlConfig,
) -> Result<f64> {
    // Trajectories and measurement noise use separate streams that do not
    // depend on the action, so all actions see the same futures.
    let mut truth_rng: Stream = stream(cfg.seed, &[sample as u64, 0]);
    let mut targets: Vec<Vector> = look.prior.sample_realization(&mut truth_rng).into_iter().map(|(_, x)| x).collect();
    let ps = models.motion.survival_probability();
    let mut density = look.prior.clone();
    for (i, &position) in path.iter().enumerate() {
        targets = targets
            .into_iter()
            .filter_map(|x| {
                let survives = truth_rng.random::<f64>() < ps;
                let next = models.motion.sample_next(&x, &mut truth_rng);
                survives.then_some(next)
            })
            .collect();
        let predicted = predict(&density, &models.motion, &models.birth(cfg, i + 1)?, &cfg.lookahead_filter)?.density;
        let sensor = models.sensor.at(position);
        let mut meas_rng = stream(cfg.seed, &[sample as u64, 1, i as u64]);
        let z = simulate_measurements(&targets, &sensor, &mut meas_rng);
        density = update(&predicted, &z, &sensor, &cfg.lookahead_filter)?.density;
    }
    let d = cs_divergence(&look.prediction, &density)?;
    Ok(if d.is_finite() { d } else { cfg.reward_clamp })
}

fn summarize(rewards: Vec<Result<f64>>, cfg: &ControlConfig) -> Result<RewardEstimate> {
    let total = rewards.len();
    let ok: Vec<f64> = rewards.into_iter().filter_map(|r| r.ok()).collect();
    let failures = total - ok.len();
    if ok.is_empty() || failures as f64 > cfg.max_failure_fraction * total as f64 {
        return Err(GlmbError::SampleFailures { failed: failures, total });
    }
    let n = ok.len() as f64;
    let mean = par::pairwise_sum(&ok) / n;
    let sq: Vec<f64> = ok.iter().map(|r| (r - mean) * (r - mean)).collect();
    let standard_error = if ok.len() > 1 { (par::pairwise_sum(&sq) / (n - 1.0) / n).sqrt() } else { 0.0 };
    Ok(RewardEstimate { mean, standard_error, samples: ok.len(), failures })
}

/// Monte Carlo estimate of the expected reward of `action`.
pub fn expected_reward(
    action: usize,
    posterior: &GlmbDensity,
    platform: &Platform,
    models: &ControlModels,
    space: &ActionSpace,
    cfg: &ControlConfig,
) -> Result<RewardEstimate> {
    let look = lookahead(posterior, models, space, cfg)?;
    let path = space.sensor_path(platform, action);
    let rewards = par::map_range(cfg.samples, |s| rollout(&look, &path, s, models, cfg));
    summarize(rewards, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDiagnostics {
    pub course_change: f64,
    pub heading: f64,
    pub feasibility: Feasibility,
    /// Present for actions whose reward was evaluated.
    pub reward: Option<RewardEstimate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub course_change: f64,
    /// Heading after the course change.
    pub heading: f64,
    /// No action was feasible; the one with the largest minimum void
    /// probability was taken instead.
    pub constraint_relaxed: bool,
    pub actions: Vec<ActionDiagnostics>,
}

/// Tie-break order: smallest absolute course change first, positive before
/// negative.
fn preference_order(space: &ActionSpace) -> Vec<usize> {
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (space.course_changes[a], space.course_changes[b]);
        x.abs().total_cmp(&y.abs()).then(y.total_cmp(&x))
    });
    order
}

fn feasibility_all(
    posterior: &GlmbDensity,
    platform: &Platform,
    models: &ControlModels,
    space: &ActionSpace,
    cfg: &ControlConfig,
) -> Result<Vec<Feasibility>> {
    if space.is_empty() {
        return Err(GlmbError::NoActions);
    }
    let predictions = predict_horizon(posterior, models, space, cfg)?;
    par::map_range(space.len(), |a| {
        feasibility_along(&predictions, &space.sensor_path(platform, a), models.sensor.position_dims, cfg)
    })
    .into_iter()
    .collect()
}

fn relaxed_choice(feas: &[Feasibility], order: &[usize]) -> usize {
    let mut best = order[0];
    for &a in order {
        if feas[a].min_void > feas[best].min_void {
            best = a;
        }
    }
    best
}

fn decision(
    action: usize,
    relaxed: bool,
    platform: &Platform,
    space: &ActionSpace,
    feas: Vec<Feasibility>,
    rewards: Vec<Option<RewardEstimate>>,
) -> Decision {
    let actions = feas
        .into_iter()
        .zip(rewards)
        .enumerate()
        .map(|(a, (feasibility, reward))| ActionDiagnostics {
            course_change: space.course_changes[a],
            heading: platform.turn(space.course_changes[a]).heading,
            feasibility,
            reward,
        })
        .collect();
    Decision {
        action,
        course_change: space.course_changes[action],
        heading: platform.turn(space.course_changes[action]).heading,
        constraint_relaxed: relaxed,
        actions,
    }
}

/// Feasible action with the largest expected reward. Rewards within `1e-12`
/// count as tied and go to the preferred action.
pub fn select_action(
    posterior: &GlmbDensity,
    platform: &Platform,
    models: &ControlModels,
    space: &ActionSpace,
    cfg: &ControlConfig,
) -> Result<Decision> {
    let feas = feasibility_all(posterior, platform, models, space, cfg)?;
    let order = preference_order(space);
    let candidates: Vec<usize> = order.iter().copied().filter(|&a| feas[a].feasible).collect();
    let mut rewards = vec![None; space.len()];
    match candidates.len() {
        0 => {
            let a = relaxed_choice(&feas, &order);
            return Ok(decision(a, true, platform, space, feas, rewards));
        }
        1 => return Ok(decision(candidates[0], false, platform, space, feas, rewards)),
        _ => {}
    }

    // Actions that lead to the same heading share one evaluation.
    let mut unique: Vec<usize> = Vec::new();
    let mut alias = vec![0usize; space.len()];
    for &a in &candidates {
        let h = platform.turn(space.course_changes[a]).heading;
        match unique.iter().position(|&u| (platform.turn(space.course_changes[u]).heading - h).abs() < 1e-12) {
            Some(i) => alias[a] = i,
            None => {
                alias[a] = unique.len();
                unique.push(a);
            }
        }
    }
    let look = lookahead(posterior, models, space, cfg)?;
    let paths: Vec<Vec<[f64; 2]>> = unique.iter().map(|&a| space.sensor_path(platform, a)).collect();
    let jobs = unique.len() * cfg.samples;
    let flat = par::map_range(jobs, |j| rollout(&look, &paths[j / cfg.samples], j % cfg.samples, models, cfg));
    let mut flat = flat.into_iter();
    let mut estimates = Vec::with_capacity(unique.len());
    for _ in 0..unique.len() {
        let chunk: Vec<Result<f64>> = flat.by_ref().take(cfg.samples).collect();
        estimates.push(summarize(chunk, cfg)?);
    }
    for &a in &candidates {
        rewards[a] = Some(estimates[alias[a]]);
    }

    let mut best = candidates[0];
    for &a in &candidates[1..] {
        if estimates[alias[a]].mean > estimates[alias[best]].mean + 1e-12 {
            best = a;
        }
    }
    Ok(decision(best, false, platform, space, feas, rewards))
}

/// Uniformly random feasible action, with the same fallback as
/// [`select_action`] when nothing is feasible.
pub fn random_action(
    posterior: &GlmbDensity,
    platform: &Platform,
    models: &ControlModels,
    space: &ActionSpace,
    cfg: &ControlConfig,
    rng: &mut Stream,
) -> Result<Decision> {
    let feas = feasibility_all(posterior, platform, models, space, cfg)?;
    let candidates: Vec<usize> = (0..space.len()).filter(|&a| feas[a].feasible).collect();
    let rewards = vec![None; space.len()];
    if candidates.is_empty() {
        let a = relaxed_choice(&feas, &preference_order(space));
        return Ok(decision(a, true, platform, space, feas, rewards));
    }
    let a = candidates[rng.random_range(0..candidates.len())];
    Ok(decision(a, false, platform, space, feas, rewards))
}
