//! Ground truth and sensor simulation.

use super::config::ScenarioConfig;
use crate::error::Result;
use crate::filter::{wrap_angle, BearingRangeSensor};
use crate::gaussian::Vector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Per-step truth: `steps[k - 1]` holds `(target id, state)` at filter step
/// `k`, i.e. at time `k·T`, ordered by id.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub steps: Vec<Vec<(usize, Vector)>>,
}

impl Truth {
    pub fn at(&self, step: usize) -> &[(usize, Vector)] {
        &self.steps[step - 1]
    }

    pub fn states_at(&self, step: usize) -> Vec<Vector> {
        self.at(step).iter().map(|(_, x)| x.clone()).collect()
    }

    pub fn cardinality(&self) -> Vec<usize> {
        self.steps.iter().map(Vec::len).collect()
    }
}

/// Trajectories of the configured targets. A target exists at step `k` when
/// `birth ≤ k·T < death`; it starts from its configured state and then
/// follows the constant-velocity model with process noise.
pub fn simulate_truth<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Truth> {
    let motion = cfg.motion_model()?;
    let t = cfg.filter_interval;
    let mut current: Vec<Option<Vector>> = vec![None; cfg.targets.len()];
    let mut steps = Vec::with_capacity(cfg.steps());
    for k in 1..=cfg.steps() {
        let time = k as f64 * t;
        let mut alive = Vec::new();
        for (id, spec) in cfg.targets.iter().enumerate() {
            // Every target draws process noise at every step so that a
            // schedule change does not shift the other targets' streams.
            let base = current[id].clone().unwrap_or_else(|| Vector::zeros(4));
            let moved = motion.sample_next(&base, rng);
            let next = current[id].as_ref().map(|_| moved);
            let exists = spec.birth <= time + 1e-9 && spec.death.is_none_or(|d| time < d - 1e-9);
            if !exists {
                current[id] = None;
                continue;
            }
            let state = next.unwrap_or_else(|| Vector::from_row_slice(&spec.state));
            alive.push((id, state.clone()));
            current[id] = Some(state);
        }
        steps.push(alive);
    }
    Ok(Truth { steps })
}

/// Detections of `targets` plus Poisson clutter, shuffled.
///
/// Every target consumes one uniform and two normals whether or not it is
/// detected, so detection outcomes do not shift the noise of other targets.
pub fn simulate_measurements<R: Rng + ?Sized>(targets: &[Vector], sensor: &BearingRangeSensor, rng: &mut R) -> Vec<Vector> {
    let mut z = Vec::with_capacity(targets.len() + sensor.clutter_rate.ceil() as usize);
    for x in targets {
        let u: f64 = rng.random();
        let nb: f64 = StandardNormal.sample(rng);
        let nr: f64 = StandardNormal.sample(rng);
        let range = sensor.range_to(x);
        if u < sensor.detection_probability_at_range(range) {
            let h = sensor.measure(x);
            let bearing = wrap_angle(h[0] + sensor.bearing_sd * nb);
            z.push(Vector::from_vec(vec![bearing, h[1] + sensor.range_noise.sd(range) * nr]));
        }
    }
    if sensor.clutter_rate > 0.0 {
        let n = Poisson::new(sensor.clutter_rate).expect("positive rate").sample(rng) as usize;
        let (lo, hi) = sensor.clutter_bounds();
        for _ in 0..n {
            let b = rng.random_range(lo[0]..hi[0]);
            let r = rng.random_range(lo[1]..hi[1]);
            z.push(Vector::from_vec(vec![b, r]));
        }
    }
    z.shuffle(rng);
    z
}
