//! Motion, birth and observation models for the GLMB recursion.

use crate::error::{GlmbError, Result};
use crate::gaussian::{Gaussian, GaussianMixture, Matrix, Vector};
use crate::label::Label;
use crate::region::{Region, Shape};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::sync::Arc;

/// Affine-Gaussian transition `x' = F x + w`, `w ~ N(0, Q)`, with a constant
/// survival probability.
#[derive(Clone, Debug)]
pub struct MotionModel {
    transition: Matrix,
    process_noise: Matrix,
    noise_factor: Matrix,
    survival_probability: f64,
}

impl MotionModel {
    pub fn new(transition: Matrix, process_noise: Matrix, survival_probability: f64) -> Result<Self> {
        let d = transition.nrows();
        if transition.ncols() != d || process_noise.nrows() != d || process_noise.ncols() != d {
            return Err(GlmbError::DimensionMismatch { expected: d, found: process_noise.nrows() });
        }
        if !(survival_probability > 0.0 && survival_probability <= 1.0) {
            return Err(GlmbError::Config(format!("survival probability {survival_probability} outside (0, 1]")));
        }
        let process_noise = (&process_noise + process_noise.transpose()) * 0.5;
        let noise_factor = psd_factor(&process_noise)?;
        Ok(Self { transition, process_noise, noise_factor, survival_probability })
    }

    /// Discrete white-noise acceleration model in 2-D. State order is
    /// `[x, vx, y, vy]`; `Q = σ_v² Γ Γᵀ` with `Γ = [T²/2, T]ᵀ` per axis.
    pub fn constant_velocity(dt: f64, accel_sd: f64, survival_probability: f64) -> Result<Self> {
        let mut f = Matrix::identity(4, 4);
        f[(0, 1)] = dt;
        f[(2, 3)] = dt;
        let gamma = Matrix::from_row_slice(4, 2, &[dt * dt / 2.0, 0.0, dt, 0.0, 0.0, dt * dt / 2.0, 0.0, dt]);
        let q = &gamma * gamma.transpose() * (accel_sd * accel_sd);
        Self::new(f, q, survival_probability)
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn process_noise(&self) -> &Matrix {
        &self.process_noise
    }

    pub fn survival_probability(&self) -> f64 {
        self.survival_probability
    }

    pub fn propagate(&self, g: &Gaussian) -> Result<Gaussian> {
        let mean = &self.transition * g.mean();
        let cov = &self.transition * g.cov() * self.transition.transpose() + &self.process_noise;
        Gaussian::new(mean, cov)
    }

    pub fn propagate_mixture(&self, gm: &GaussianMixture) -> Result<GaussianMixture> {
        gm.map_components(|g| self.propagate(g))
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Vector {
        let d = self.dim();
        let z = Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.transition * x + &self.noise_factor * z
    }
}

/// Factor `A` with `A Aᵀ = Q` for a positive semidefinite `Q`.
fn psd_factor(q: &Matrix) -> Result<Matrix> {
    let eig = q.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-9 * scale) {
        return Err(GlmbError::NotPositiveDefinite);
    }
    let sqrt = Matrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * sqrt)
}

/// Labeled multi-Bernoulli birth: each entry appears independently with its
/// existence probability.
#[derive(Clone, Debug, Default)]
pub struct BirthModel {
    entries: Vec<BirthEntry>,
}

#[derive(Clone, Debug)]
pub struct BirthEntry {
    pub label: Label,
    pub existence: f64,
    pub density: Arc<GaussianMixture>,
}

impl BirthModel {
    pub fn new(entries: Vec<BirthEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.existence > 0.0 && e.existence < 1.0) {
                return Err(GlmbError::Config(format!("birth existence {} outside (0, 1)", e.existence)));
            }
        }
        let mut labels: Vec<Label> = entries.iter().map(|e| e.label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(GlmbError::Config("repeated birth label".into()));
        }
        Ok(Self { entries })
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// Birth entries for `step`, labeled `(step, i)` in site order.
    pub fn at_step(step: u32, sites: &[(f64, Arc<GaussianMixture>)]) -> Result<Self> {
        Self::new(
            sites
                .iter()
                .enumerate()
                .map(|(i, (r, d))| BirthEntry { label: Label::new(step, i as u32), existence: *r, density: Arc::clone(d) })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[BirthEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// First-order expansion of the measurement function about a state.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub predicted: Vector,
    pub jacobian: Matrix,
    pub noise: Matrix,
}

/// Single-sensor observation model used by the update.
pub trait ObservationModel: Sync {
    fn measurement_dim(&self) -> usize;
    fn detection_probability(&self, state: &Vector) -> f64;
    fn linearize(&self, state: &Vector) -> Linearization;
    /// `z - ẑ`, with any angular wrapping the model needs.
    fn residual(&self, z: &Vector, predicted: &Vector) -> Vector {
        z - predicted
    }
    /// Clutter intensity `κ(z)`.
    fn clutter_intensity(&self, z: &Vector) -> f64;
}

/// Linear-Gaussian sensor with constant detection probability and constant
/// clutter intensity.
#[derive(Clone, Debug)]
pub struct LinearGaussianSensor {
    pub observation: Matrix,
    pub noise: Matrix,
    pub detection_probability: f64,
    pub clutter_intensity: f64,
}

impl ObservationModel for LinearGaussianSensor {
    fn measurement_dim(&self) -> usize {
        self.observation.nrows()
    }

    fn detection_probability(&self, _state: &Vector) -> f64 {
        self.detection_probability
    }

    fn linearize(&self, state: &Vector) -> Linearization {
        Linearization { predicted: &self.observation * state, jacobian: self.observation.clone(), noise: self.noise.clone() }
    }

    fn clutter_intensity(&self, _z: &Vector) -> f64 {
        self.clutter_intensity
    }
}

/// Range noise standard deviation `η · clamp(D, R1, R2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeNoiseProfile {
    pub eta: f64,
    pub r1: f64,
    pub r2: f64,
}

impl RangeNoiseProfile {
    pub fn sd(&self, range: f64) -> f64 {
        self.eta * range.clamp(self.r1, self.r2)
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Bearing/range sensor at a known 2-D position. States are `[x, vx, y, vy]`
/// by default; `position_dims` says where the coordinates live.
#[derive(Clone, Debug)]
pub struct BearingRangeSensor {
    pub position: [f64; 2],
    pub position_dims: [usize; 2],
    pub bearing_sd: f64,
    pub range_noise: RangeNoiseProfile,
    /// `σ_D`: `p_D(D) = exp(-D² / 2σ_D²)`.
    pub detection_sd: f64,
    /// Expected clutter count per scan.
    pub clutter_rate: f64,
    /// Clutter window in measurement space, `[bearing, range]`.
    pub clutter_region: Region,
    /// When set, overrides the range-dependent detection profile.
    pub detection_override: Option<f64>,
}

impl BearingRangeSensor {
    pub fn new(
        position: [f64; 2],
        bearing_sd: f64,
        range_noise: RangeNoiseProfile,
        detection_sd: f64,
        clutter_rate: f64,
        max_range: f64,
    ) -> Result<Self> {
        if !(range_noise.eta > 0.0 && range_noise.r1 > 0.0 && range_noise.r1 < range_noise.r2) {
            return Err(GlmbError::Config("range noise requires eta > 0 and 0 < R1 < R2".into()));
        }
        if !(detection_sd > 0.0 && bearing_sd > 0.0 && clutter_rate >= 0.0 && max_range > 0.0) {
            return Err(GlmbError::Config("sensor parameters must be positive".into()));
        }
        Ok(Self {
            position,
            position_dims: [0, 2],
            bearing_sd,
            range_noise,
            detection_sd,
            clutter_rate,
            clutter_region: Region::axis_box(vec![-PI, 0.0], vec![PI, max_range], vec![0, 1])?,
            detection_override: None,
        })
    }

    pub fn at(&self, position: [f64; 2]) -> Self {
        Self { position, ..self.clone() }
    }

    pub fn range_to(&self, state: &Vector) -> f64 {
        let dx = state[self.position_dims[0]] - self.position[0];
        let dy = state[self.position_dims[1]] - self.position[1];
        dx.hypot(dy)
    }

    pub fn detection_probability_at_range(&self, range: f64) -> f64 {
        match self.detection_override {
            Some(p) => p,
            None => (-0.5 * (range / self.detection_sd).powi(2)).exp(),
        }
    }

    /// `h(x, u) = [atan2(dy, dx), |d|]`.
    pub fn measure(&self, state: &Vector) -> Vector {
        let dx = state[self.position_dims[0]] - self.position[0];
        let dy = state[self.position_dims[1]] - self.position[1];
        Vector::from_vec(vec![dy.atan2(dx), dx.hypot(dy)])
    }

    pub fn clutter_bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self.clutter_region.shape() {
            Shape::AxisBox { lower, upper } => ([lower[0], lower[1]], [upper[0], upper[1]]),
            _ => unreachable!("clutter region is always a box"),
        }
    }

    pub fn clutter_volume(&self) -> f64 {
        let (lo, hi) = self.clutter_bounds();
        (hi[0] - lo[0]) * (hi[1] - lo[1])
    }
}

impl ObservationModel for BearingRangeSensor {
    fn measurement_dim(&self) -> usize {
        2
    }

    fn detection_probability(&self, state: &Vector) -> f64 {
        self.detection_probability_at_range(self.range_to(state))
    }

    fn linearize(&self, state: &Vector) -> Linearization {
        let d = state.len();
        let [ix, iy] = self.position_dims;
        let dx = state[ix] - self.position[0];
        let dy = state[iy] - self.position[1];
        let range = dx.hypot(dy).max(1e-6);
        let r2 = range * range;
        let mut jacobian = Matrix::zeros(2, d);
        jacobian[(0, ix)] = -dy / r2;
        jacobian[(0, iy)] = dx / r2;
        jacobian[(1, ix)] = dx / range;
        jacobian[(1, iy)] = dy / range;
        let sr = self.range_noise.sd(range);
        let noise = Matrix::from_diagonal(&Vector::from_vec(vec![self.bearing_sd.powi(2), sr * sr]));
        Linearization { predicted: Vector::from_vec(vec![dy.atan2(dx), range]), jacobian, noise }
    }

    fn residual(&self, z: &Vector, predicted: &Vector) -> Vector {
        Vector::from_vec(vec![wrap_angle(z[0] - predicted[0]), z[1] - predicted[1]])
    }

    fn clutter_intensity(&self, _z: &Vector) -> f64 {
        self.clutter_rate / self.clutter_volume()
    }
}
