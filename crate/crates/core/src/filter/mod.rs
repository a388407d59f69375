//! GLMB Bayes recursion: prediction under survival and birth, update under
//! detection, clutter and measurement association, and state extraction.

mod merge;
mod models;

pub use merge::{merge_histories, reduce_mixture};
pub use models::{
    wrap_angle, BearingRangeSensor, BirthEntry, BirthModel, LinearGaussianSensor, Linearization, MotionModel,
    ObservationModel, RangeNoiseProfile,
};

use crate::assignment::{best_selections, Choice, EnumerationLimits};
use crate::density::{GlmbComponent, GlmbDensity};
use crate::error::{GlmbError, Result};
use crate::gaussian::{Gaussian, GaussianMixture, Matrix, Vector};
use crate::label::Label;
use crate::par;
use crate::par::log_sum_exp;
use crate::rng::combine;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Caps and thresholds of the recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Components kept after each update.
    pub max_components: usize,
    /// Components kept after each predict. Kept well above `max_components`
    /// so that birth hypotheses are not crowded out before the measurements
    /// can support them.
    pub max_predicted_components: usize,
    /// Components lighter than this are dropped.
    pub min_weight: f64,
    /// Survival/birth outcomes generated per prior component.
    pub max_predict_hypotheses: usize,
    /// Association maps generated per predicted component.
    pub max_update_hypotheses: usize,
    /// Per-component hypotheses lighter than `best · exp(hypothesis_log_ratio)` are skipped.
    pub hypothesis_log_ratio: f64,
    /// Mahalanobis gate, in standard deviations.
    pub gate_sigma: f64,
    /// Enumeration is exact (no gating) while `|L|·|Z|` stays at or below this.
    pub exact_limit: usize,
    /// Branch-and-bound node budget per component.
    pub max_search_nodes: usize,
    /// Collapse components with equal label sets after each step.
    pub merge_histories: bool,
    /// Gaussians kept per single-object density when collapsing.
    pub max_label_gaussians: usize,
    /// Squared Mahalanobis distance below which Gaussians are moment-merged
    /// when collapsing.
    pub merge_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_components: 200,
            max_predicted_components: 1000,
            min_weight: 1e-10,
            max_predict_hypotheses: 64,
            max_update_hypotheses: 64,
            hypothesis_log_ratio: (1e-8f64).ln(),
            gate_sigma: 6.0,
            exact_limit: 16,
            max_search_nodes: 200_000,
            merge_histories: false,
            max_label_gaussians: 4,
            merge_threshold: 4.0,
        }
    }
}

impl FilterConfig {
    /// No pruning anywhere.
    pub fn exact() -> Self {
        Self {
            max_components: usize::MAX,
            max_predicted_components: usize::MAX,
            min_weight: 0.0,
            max_predict_hypotheses: usize::MAX,
            max_update_hypotheses: usize::MAX,
            hypothesis_log_ratio: f64::NEG_INFINITY,
            gate_sigma: f64::INFINITY,
            exact_limit: usize::MAX,
            max_search_nodes: usize::MAX,
            merge_histories: false,
            max_label_gaussians: usize::MAX,
            merge_threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 || self.max_predicted_components == 0 || self.max_predict_hypotheses == 0 || self.max_update_hypotheses == 0 {
            return Err(GlmbError::Config("filter caps must be positive".into()));
        }
        if !(self.min_weight >= 0.0 && self.min_weight < 1.0) {
            return Err(GlmbError::Config("filter.min_weight must be in [0, 1)".into()));
        }
        if self.max_label_gaussians == 0 || !(self.merge_threshold >= 0.0) {
            return Err(GlmbError::Config("max_label_gaussians must be positive and merge_threshold non-negative".into()));
        }
        if !(self.gate_sigma > 0.0) || self.hypothesis_log_ratio > 0.0 {
            return Err(GlmbError::Config("gate_sigma must be positive and hypothesis_log_ratio ≤ 0".into()));
        }
        Ok(())
    }
}

/// Result of a predict or update step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub density: GlmbDensity,
    /// Total weight discarded by the final truncation.
    pub truncation_error: f64,
    /// Components whose hypothesis search hit its node budget.
    pub capped_components: usize,
}

fn keyed_ptr(d: &Arc<GaussianMixture>) -> usize {
    Arc::as_ptr(d) as usize
}

/// Unique single-object densities of `density`, in first-appearance order.
fn unique_densities(density: &GlmbDensity) -> Vec<Arc<GaussianMixture>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for c in density.components() {
        for d in c.densities() {
            if seen.insert(keyed_ptr(d)) {
                out.push(Arc::clone(d));
            }
        }
    }
    out
}

fn finish(
    components: Vec<GlmbComponent>,
    state_dim: usize,
    k: f64,
    max_components: usize,
    cfg: &FilterConfig,
    capped: usize,
) -> Result<StepOutcome> {
    let components = if cfg.merge_histories {
        merge_histories(components, cfg.merge_threshold, cfg.max_label_gaussians)?
    } else {
        components
    };
    let density = GlmbDensity::unnormalized(components, state_dim, k)?.normalize()?;
    let (density, truncation_error) = if density.len() > max_components || cfg.min_weight > 0.0 {
        density.truncate(max_components, cfg.min_weight)?
    } else {
        (density, 0.0)
    };
    Ok(StepOutcome { density, truncation_error, capped_components: capped })
}

/// Prediction: each prior label survives with `P_S` and is propagated through
/// the motion model; birth labels appear independently. Components from the
/// same history that reach the same label set are merged, which realizes the
/// sum over supersets in the survival weight.
pub fn predict(prior: &GlmbDensity, motion: &MotionModel, birth: &BirthModel, cfg: &FilterConfig) -> Result<StepOutcome> {
    if motion.dim() != prior.state_dim() {
        return Err(GlmbError::DimensionMismatch { expected: prior.state_dim(), found: motion.dim() });
    }
    let labels = prior.label_space();
    for e in birth.entries() {
        if labels.binary_search(&e.label).is_ok() {
            return Err(GlmbError::LabelClash(e.label));
        }
        if e.density.dim() != prior.state_dim() {
            return Err(GlmbError::DimensionMismatch { expected: prior.state_dim(), found: e.density.dim() });
        }
    }

    let unique = unique_densities(prior);
    let propagated = par::map(&unique, |d| motion.propagate_mixture(d).map(Arc::new));
    let mut survived: HashMap<usize, Arc<GaussianMixture>> = HashMap::with_capacity(unique.len());
    for (d, p) in unique.iter().zip(propagated) {
        survived.insert(keyed_ptr(d), p?);
    }

    let ps = motion.survival_probability();
    let (ln_survive, ln_die) = (ps.ln(), (1.0 - ps).ln());
    let birth_choices: Vec<Vec<Choice>> = birth
        .entries()
        .iter()
        .map(|e| vec![Choice::free(e.existence.ln()), Choice::free((1.0 - e.existence).ln())])
        .collect();
    let limits = EnumerationLimits {
        max_results: cfg.max_predict_hypotheses,
        min_log_ratio: cfg.hypothesis_log_ratio,
        max_nodes: cfg.max_search_nodes,
    };

    let per_component = par::map(prior.components(), |c| {
        let mut slots: Vec<Vec<Choice>> = c
            .labels()
            .iter()
            .map(|_| vec![Choice::free(ln_survive), Choice::free(ln_die)])
            .collect();
        slots.extend(birth_choices.iter().cloned());
        let found = best_selections(&slots, limits);
        let n_prior = c.cardinality();
        let out: Vec<(Vec<Label>, Vec<Arc<GaussianMixture>>, f64)> = found
            .selections
            .iter()
            .map(|sel| {
                let mut entries: Vec<(Label, Arc<GaussianMixture>)> = Vec::new();
                for (slot, &choice) in sel.choices.iter().enumerate() {
                    if choice != 0 {
                        continue;
                    }
                    if slot < n_prior {
                        let d = &c.densities()[slot];
                        entries.push((c.labels()[slot], Arc::clone(&survived[&keyed_ptr(d)])));
                    } else {
                        let e = &birth.entries()[slot - n_prior];
                        entries.push((e.label, Arc::clone(&e.density)));
                    }
                }
                entries.sort_by_key(|e| e.0);
                let (labels, densities) = entries.into_iter().unzip();
                (labels, densities, c.log_weight() + sel.log_weight)
            })
            .collect();
        (out, found.exhausted)
    });

    // Merge in component order so the output is independent of scheduling.
    let mut index: HashMap<(u64, Vec<Label>), usize> = HashMap::new();
    // (history, labels, densities, log-weight terms)
    type Partial = (u64, Vec<Label>, Vec<Arc<GaussianMixture>>, Vec<f64>);
    let mut merged: Vec<Partial> = Vec::new();
    let mut capped = 0;
    for (c, (outcomes, exhausted)) in prior.components().iter().zip(per_component) {
        capped += usize::from(exhausted);
        for (labels, densities, lw) in outcomes {
            let key = (c.history(), labels);
            match index.get(&key) {
                Some(&i) => merged[i].3.push(lw),
                None => {
                    index.insert(key.clone(), merged.len());
                    merged.push((key.0, key.1, densities, vec![lw]));
                }
            }
        }
    }
    let components = merged
        .into_iter()
        .map(|(h, labels, densities, lws)| GlmbComponent::from_sorted(h, labels, densities, log_sum_exp(&lws)))
        .filter(|c| c.log_weight().is_finite())
        .collect();
    finish(components, prior.state_dim(), prior.hypervolume_unit(), cfg.max_predicted_components, cfg, capped)
}

/// One association option for a single-object density.
#[derive(Clone, Debug)]
struct LabelOption {
    /// `None` for a missed detection, else the measurement index.
    measurement: Option<usize>,
    log_psi: f64,
    posterior: Arc<GaussianMixture>,
}

/// Per-Gaussian quantities reused across measurements.
struct Innovation {
    log_omega: f64,
    gaussian: Gaussian,
    lin: Linearization,
    innovation_cov: Gaussian,
}

fn label_options(
    prior: &Arc<GaussianMixture>,
    measurements: &[Vector],
    sensor: &dyn ObservationModel,
    gate2: Option<f64>,
) -> Result<Vec<LabelOption>> {
    let p_d = sensor.detection_probability(&prior.mean()).clamp(0.0, 1.0);
    let mut options = Vec::with_capacity(1 + measurements.len());
    if p_d < 1.0 {
        options.push(LabelOption { measurement: None, log_psi: (1.0 - p_d).ln(), posterior: Arc::clone(prior) });
    }
    if p_d <= 0.0 || measurements.is_empty() {
        return Ok(options);
    }
    let m_dim = sensor.measurement_dim();
    let innovations = prior
        .iter()
        .map(|(w, g)| {
            let lin = sensor.linearize(g.mean());
            let s = &lin.jacobian * g.cov() * lin.jacobian.transpose() + &lin.noise;
            let innovation_cov = Gaussian::new(Vector::zeros(m_dim), s)?;
            Ok(Innovation { log_omega: w.ln(), gaussian: g.clone(), lin, innovation_cov })
        })
        .collect::<Result<Vec<_>>>()?;

    for (j, z) in measurements.iter().enumerate() {
        if z.len() != m_dim {
            return Err(GlmbError::DimensionMismatch { expected: m_dim, found: z.len() });
        }
        let residuals: Vec<Vector> = innovations.iter().map(|inn| sensor.residual(z, &inn.lin.predicted)).collect();
        let maha: Vec<f64> = innovations
            .iter()
            .zip(&residuals)
            .map(|(inn, r)| inn.innovation_cov.mahalanobis2(r))
            .collect();
        if let Some(g2) = gate2 {
            if maha.iter().all(|&m| m > g2) {
                continue;
            }
        }
        let kappa = sensor.clutter_intensity(z).max(1e-300);
        let mut log_terms = Vec::with_capacity(innovations.len());
        let mut updated = Vec::with_capacity(innovations.len());
        for (inn, r) in innovations.iter().zip(&residuals) {
            let log_lik = inn.innovation_cov.log_pdf(r);
            log_terms.push(inn.log_omega + log_lik);
            updated.push(kalman_update(&inn.gaussian, &inn.lin, &inn.innovation_cov, r)?);
        }
        let log_total = log_sum_exp(&log_terms);
        if !log_total.is_finite() {
            continue;
        }
        let components = log_terms
            .iter()
            .zip(updated)
            .map(|(lt, g)| ((lt - log_total).exp(), g))
            .collect();
        let (_, posterior) = GaussianMixture::from_unnormalized(components)?;
        options.push(LabelOption {
            measurement: Some(j),
            log_psi: p_d.ln() + log_total - kappa.ln(),
            posterior: Arc::new(posterior),
        });
    }
    Ok(options)
}

/// Extended Kalman update of one Gaussian (Joseph form).
fn kalman_update(g: &Gaussian, lin: &Linearization, s: &Gaussian, residual: &Vector) -> Result<Gaussian> {
    let p = g.cov();
    let pht = p * lin.jacobian.transpose();
    // K = P Hᵀ S⁻¹ via the Cholesky factor of S.
    let l = s.chol_lower();
    let y = l
        .solve_lower_triangular(&pht.transpose())
        .ok_or(GlmbError::NotPositiveDefinite)?;
    let kt = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(GlmbError::NotPositiveDefinite)?;
    let gain = kt.transpose();
    let mean = g.mean() + &gain * residual;
    let i_kh = Matrix::identity(g.dim(), g.dim()) - &gain * &lin.jacobian;
    let cov = &i_kh * p * i_kh.transpose() + &gain * &lin.noise * gain.transpose();
    Gaussian::new(mean, cov)
}

/// Measurement update. Every predicted component is expanded over its
/// association maps (miss, or one measurement per label, injectively), with
/// the heaviest maps enumerated first; weights are normalized jointly and the
/// result truncated to the configured caps.
pub fn update(
    predicted: &GlmbDensity,
    measurements: &[Vector],
    sensor: &dyn ObservationModel,
    cfg: &FilterConfig,
) -> Result<StepOutcome> {
    let unique = unique_densities(predicted);
    let max_labels = predicted.components().iter().map(GlmbComponent::cardinality).max().unwrap_or(0);
    let gate2 = if max_labels * measurements.len() > cfg.exact_limit && cfg.gate_sigma.is_finite() {
        Some(cfg.gate_sigma * cfg.gate_sigma)
    } else {
        None
    };
    let options = par::map(&unique, |d| label_options(d, measurements, sensor, gate2));
    let mut table: HashMap<usize, Vec<LabelOption>> = HashMap::with_capacity(unique.len());
    for (d, o) in unique.iter().zip(options) {
        table.insert(keyed_ptr(d), o?);
    }

    let limits = EnumerationLimits {
        max_results: cfg.max_update_hypotheses,
        min_log_ratio: cfg.hypothesis_log_ratio,
        max_nodes: cfg.max_search_nodes,
    };
    let per_component = par::map(predicted.components(), |c| {
        let opts: Vec<&Vec<LabelOption>> = c.densities().iter().map(|d| &table[&keyed_ptr(d)]).collect();
        let slots: Vec<Vec<Choice>> = opts
            .iter()
            .map(|o| {
                o.iter()
                    .map(|opt| Choice { log_weight: opt.log_psi, resource: opt.measurement })
                    .collect()
            })
            .collect();
        let found = best_selections(&slots, limits);
        let out: Vec<GlmbComponent> = found
            .selections
            .iter()
            .map(|sel| {
                let theta: Vec<u64> = sel
                    .choices
                    .iter()
                    .enumerate()
                    .map(|(slot, &i)| opts[slot][i].measurement.map_or(0, |m| m as u64 + 1))
                    .collect();
                let densities = sel
                    .choices
                    .iter()
                    .enumerate()
                    .map(|(slot, &i)| Arc::clone(&opts[slot][i].posterior))
                    .collect();
                GlmbComponent::from_sorted(
                    combine(c.history(), &theta),
                    c.labels().to_vec(),
                    densities,
                    c.log_weight() + sel.log_weight,
                )
            })
            .filter(|c| c.log_weight().is_finite())
            .collect();
        (out, found.exhausted)
    });
    let mut capped = 0;
    let mut components = Vec::new();
    for (out, exhausted) in per_component {
        capped += usize::from(exhausted);
        components.extend(out);
    }
    if components.is_empty() {
        return Err(GlmbError::EmptyDensity);
    }
    finish(components, predicted.state_dim(), predicted.hypervolume_unit(), cfg.max_components, cfg, capped)
}

/// MAP-cardinality state extraction: the heaviest component with the most
/// probable cardinality (ties to the smaller count), reporting the mean of
/// each label's dominant Gaussian.
pub fn estimate_state(posterior: &GlmbDensity) -> Vec<(Label, Vector)> {
    let n = posterior.cardinality_distribution().map_estimate();
    let mut best: Option<&GlmbComponent> = None;
    for c in posterior.components().iter().filter(|c| c.cardinality() == n) {
        if best.is_none_or(|b| c.log_weight() > b.log_weight()) {
            best = Some(c);
        }
    }
    best.map(|c| c.iter().map(|(l, d)| (l, d.dominant().mean().clone())).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm(mean: &[f64], cov: &[f64]) -> Arc<GaussianMixture> {
        Arc::new(GaussianMixture::single(Gaussian::from_slices(mean, cov).unwrap()))
    }

    fn identity_motion(ps: f64) -> MotionModel {
        MotionModel::new(Matrix::identity(1, 1), Matrix::zeros(1, 1), ps).unwrap()
    }

    fn single(label: Label, d: Arc<GaussianMixture>) -> GlmbDensity {
        GlmbDensity::new(vec![GlmbComponent::new(0, vec![(label, d)], 0.0).unwrap()], 1, 1.0).unwrap()
    }

    #[test]
    fn predict_identity_keeps_everything() {
        let prior = single(Label::new(0, 0), gm(&[2.0], &[1.0]));
        let out = predict(&prior, &identity_motion(1.0), &BirthModel::none(), &FilterConfig::exact()).unwrap();
        assert_eq!(out.density.len(), 1);
        let c = &out.density.components()[0];
        assert_eq!(c.log_weight(), 0.0);
        assert_eq!(c.densities()[0].mean()[0], 2.0);
    }

    #[test]
    fn predict_bernoulli_survival() {
        let prior = single(Label::new(0, 0), gm(&[2.0], &[1.0]));
        let out = predict(&prior, &identity_motion(0.5), &BirthModel::none(), &FilterConfig::exact()).unwrap();
        let pmf = out.density.cardinality_distribution().pmf;
        assert_eq!(out.density.len(), 2);
        assert!((pmf[0] - 0.5).abs() < 1e-15 && (pmf[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn predict_rejects_label_clash() {
        let prior = single(Label::new(0, 0), gm(&[2.0], &[1.0]));
        let birth = BirthModel::at_step(0, &[(0.1, gm(&[0.0], &[1.0]))]).unwrap();
        assert!(matches!(
            predict(&prior, &identity_motion(0.9), &birth, &FilterConfig::exact()),
            Err(GlmbError::LabelClash(_))
        ));
    }

    #[test]
    fn update_without_detection_is_identity() {
        let prior = single(Label::new(0, 0), gm(&[2.0], &[1.0]));
        let sensor = LinearGaussianSensor {
            observation: Matrix::identity(1, 1),
            noise: Matrix::identity(1, 1),
            detection_probability: 0.0,
            clutter_intensity: 1.0,
        };
        let out = update(&prior, &[], &sensor, &FilterConfig::exact()).unwrap();
        assert_eq!(out.density.len(), 1);
        let c = &out.density.components()[0];
        assert_eq!(c.log_weight(), 0.0);
        assert!(Arc::ptr_eq(&c.densities()[0], &prior.components()[0].densities()[0]));
    }

    #[test]
    fn detection_at_predicted_measurement_raises_existence() {
        let l = Label::new(0, 0);
        let prior = GlmbDensity::new(
            vec![
                GlmbComponent::empty(0, 0.5f64.ln()).unwrap(),
                GlmbComponent::new(0, vec![(l, gm(&[2.0], &[1.0]))], 0.5f64.ln()).unwrap(),
            ],
            1,
            1.0,
        )
        .unwrap();
        let sensor = LinearGaussianSensor {
            observation: Matrix::identity(1, 1),
            noise: Matrix::identity(1, 1),
            detection_probability: 0.9,
            clutter_intensity: 1e-6,
        };
        let out = update(&prior, &[Vector::from_vec(vec![2.0])], &sensor, &FilterConfig::exact()).unwrap();
        assert!(out.density.existence_probability(l) > 0.5);
    }

    #[test]
    fn estimate_examples() {
        assert!(estimate_state(&GlmbDensity::certain_empty(1, 1.0)).is_empty());
        let l = Label::new(0, 0);
        let d = single(l, gm(&[4.0], &[1.0]));
        let est = estimate_state(&d);
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].0, l);
        assert_eq!(est[0].1[0], 4.0);
    }

    #[test]
    fn estimate_uses_map_cardinality() {
        let (l1, l2) = (Label::new(0, 0), Label::new(0, 1));
        let d = GlmbDensity::new(
            vec![
                GlmbComponent::empty(0, 0.1f64.ln()).unwrap(),
                GlmbComponent::new(0, vec![(l1, gm(&[1.0], &[1.0]))], 0.25f64.ln()).unwrap(),
                GlmbComponent::new(1, vec![(l2, gm(&[7.0], &[1.0]))], 0.35f64.ln()).unwrap(),
                GlmbComponent::new(0, vec![(l1, gm(&[1.0], &[1.0])), (l2, gm(&[7.0], &[1.0]))], 0.3f64.ln())
                    .unwrap(),
            ],
            1,
            1.0,
        )
        .unwrap();
        let est = estimate_state(&d);
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].0, l2);
    }
}
