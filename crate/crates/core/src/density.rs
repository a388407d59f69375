//! The GLMB density: a mixture over `(history, label set)` components, each
//! carrying a weight and one Gaussian-mixture density per label.
//!
//! Weights live in the log domain. Single-object densities are reference
//! counted so that components derived from a common ancestor share them,
//! which is what lets void probabilities and divergences integrate each unique
//! density only once.

use crate::error::{GlmbError, Result};
use crate::gaussian::{GaussianIntensity, GaussianMixture, Vector};
use crate::label::{format_label_set, Label};
use crate::par::log_sum_exp;
use crate::rng::mix64;
use rand::Rng;
use std::collections::HashSet;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct GlmbComponent {
    history: u64,
    labels: Vec<Label>,
    densities: Vec<Arc<GaussianMixture>>,
    log_weight: f64,
}

impl GlmbComponent {
    /// Entries are sorted by label; repeated labels are rejected.
    pub fn new(history: u64, mut entries: Vec<(Label, Arc<GaussianMixture>)>, log_weight: f64) -> Result<Self> {
        if !log_weight.is_finite() {
            return Err(GlmbError::InvalidMixture(format!("component log-weight {log_weight}")));
        }
        entries.sort_by_key(|e| e.0);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(GlmbError::InvalidMixture(format!("label {} repeated in a component", w[0].0)));
        }
        let (labels, densities) = entries.into_iter().unzip();
        Ok(Self { history, labels, densities, log_weight })
    }

    /// Caller guarantees `labels` is strictly increasing, aligned with
    /// `densities`, and `log_weight` is finite.
    pub(crate) fn from_sorted(
        history: u64,
        labels: Vec<Label>,
        densities: Vec<Arc<GaussianMixture>>,
        log_weight: f64,
    ) -> Self {
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(labels.len(), densities.len());
        debug_assert!(log_weight.is_finite());
        Self { history, labels, densities, log_weight }
    }

    pub fn empty(history: u64, log_weight: f64) -> Result<Self> {
        Self::new(history, Vec::new(), log_weight)
    }

    pub fn history(&self) -> u64 {
        self.history
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn densities(&self) -> &[Arc<GaussianMixture>] {
        &self.densities
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn density_of(&self, label: Label) -> Option<&Arc<GaussianMixture>> {
        self.labels.binary_search(&label).ok().map(|i| &self.densities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &Arc<GaussianMixture>)> {
        self.labels.iter().copied().zip(self.densities.iter())
    }

    pub(crate) fn with_log_weight(mut self, log_weight: f64) -> Self {
        self.log_weight = log_weight;
        self
    }
}

/// Cardinality distribution `Pr(|X| = n)` for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CardinalityDistribution {
    pub pmf: Vec<f64>,
}

impl CardinalityDistribution {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Most probable cardinality; ties go to the smaller count.
    pub fn map_estimate(&self) -> usize {
        let mut best = 0;
        for (n, &p) in self.pmf.iter().enumerate() {
            if p > self.pmf[best] {
                best = n;
            }
        }
        best
    }
}

#[derive(Clone, Debug)]
pub struct GlmbDensity {
    components: Vec<GlmbComponent>,
    state_dim: usize,
    hypervolume_unit: f64,
}

impl GlmbDensity {
    /// Validates and normalizes.
    pub fn new(components: Vec<GlmbComponent>, state_dim: usize, hypervolume_unit: f64) -> Result<Self> {
        Self::unnormalized(components, state_dim, hypervolume_unit)?.normalize()
    }

    /// Validates without touching the weights.
    pub fn unnormalized(components: Vec<GlmbComponent>, state_dim: usize, hypervolume_unit: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(GlmbError::EmptyDensity);
        }
        if state_dim == 0 {
            return Err(GlmbError::InvalidMixture("state_dim must be positive".into()));
        }
        if !(hypervolume_unit.is_finite() && hypervolume_unit > 0.0) {
            return Err(GlmbError::InvalidMixture(format!("hypervolume unit {hypervolume_unit}")));
        }
        let mut keys = HashSet::with_capacity(components.len());
        for c in &components {
            if let Some(d) = c.densities.iter().find(|d| d.dim() != state_dim) {
                return Err(GlmbError::DimensionMismatch { expected: state_dim, found: d.dim() });
            }
            if !keys.insert((c.history, c.labels.as_slice())) {
                return Err(GlmbError::DuplicateComponent {
                    history: c.history,
                    labels: format_label_set(&c.labels),
                });
            }
        }
        Ok(Self { components, state_dim, hypervolume_unit })
    }

    /// The density of the empty set with probability one.
    pub fn certain_empty(state_dim: usize, hypervolume_unit: f64) -> Self {
        let c = GlmbComponent::from_sorted(0, Vec::new(), Vec::new(), 0.0);
        Self { components: vec![c], state_dim, hypervolume_unit }
    }

    pub fn components(&self) -> &[GlmbComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn hypervolume_unit(&self) -> f64 {
        self.hypervolume_unit
    }

    pub fn with_hypervolume_unit(mut self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(GlmbError::InvalidMixture(format!("hypervolume unit {k}")));
        }
        self.hypervolume_unit = k;
        Ok(self)
    }

    pub fn log_total_weight(&self) -> f64 {
        let lw: Vec<f64> = self.components.iter().map(|c| c.log_weight).collect();
        log_sum_exp(&lw)
    }

    /// Rescales weights to sum to one, preserving component order.
    pub fn normalize(self) -> Result<Self> {
        if self.components.is_empty() {
            return Err(GlmbError::EmptyDensity);
        }
        let total = self.log_total_weight();
        if !total.is_finite() {
            return Err(GlmbError::EmptyDensity);
        }
        let components = self
            .components
            .into_iter()
            .map(|c| {
                let lw = c.log_weight - total;
                c.with_log_weight(lw)
            })
            .collect();
        Ok(Self { components, ..self })
    }

    pub fn cardinality_distribution(&self) -> CardinalityDistribution {
        let n_max = self.components.iter().map(|c| c.cardinality()).max().unwrap_or(0);
        let mut pmf = vec![0.0; n_max + 1];
        for c in &self.components {
            pmf[c.cardinality()] += c.weight();
        }
        CardinalityDistribution { pmf }
    }

    /// Sorted union of all labels appearing in any component.
    pub fn label_space(&self) -> Vec<Label> {
        let mut labels: Vec<Label> = self.components.iter().flat_map(|c| c.labels.iter().copied()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn existence_probability(&self, label: Label) -> f64 {
        self.components
            .iter()
            .filter(|c| c.labels.binary_search(&label).is_ok())
            .map(GlmbComponent::weight)
            .sum()
    }

    /// `v(·, ℓ) = Σ_c w_c [ℓ ∈ L_c] p_c(·, ℓ)`. The mass is the existence
    /// probability of `label`; an unknown label gives the zero intensity.
    pub fn intensity_function(&self, label: Label) -> GaussianIntensity {
        let mut out = GaussianIntensity::zero();
        for c in &self.components {
            if let Some(p) = c.density_of(label) {
                let w = c.weight();
                for (omega, g) in p.iter() {
                    out.push(w * omega, g.clone());
                }
            }
        }
        out
    }

    pub fn expected_cardinality(&self) -> f64 {
        self.components.iter().map(|c| c.cardinality() as f64 * c.weight()).sum()
    }

    /// Keeps the `max_components` heaviest components whose weight is at least
    /// `min_weight`, in descending weight order, and renormalizes.
    ///
    /// The returned L1 error is the total weight discarded, measured before
    /// renormalization. Assumes a normalized input.
    pub fn truncate(&self, max_components: usize, min_weight: f64) -> Result<(GlmbDensity, f64)> {
        let mut order: Vec<usize> = (0..self.components.len()).collect();
        order.sort_by(|&a, &b| {
            self.components[b]
                .log_weight
                .total_cmp(&self.components[a].log_weight)
                .then(a.cmp(&b))
        });
        let mut kept = Vec::with_capacity(max_components.min(order.len()));
        let mut discarded = Vec::new();
        for idx in order {
            let c = &self.components[idx];
            if kept.len() < max_components && c.weight() >= min_weight {
                kept.push(c.clone());
            } else {
                discarded.push(c.weight());
            }
        }
        if kept.is_empty() {
            return Err(GlmbError::EmptyDensity);
        }
        let l1_error = discarded.iter().sum();
        let out = Self { components: kept, ..self.clone() }.normalize()?;
        Ok((out, l1_error))
    }

    /// Draws one labeled realization: a component with probability equal to
    /// its weight, then one state per label from that label's mixture.
    pub fn sample_realization<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(Label, Vector)> {
        RealizationSampler::new(self).sample(rng)
    }

    /// Independent superposition of two densities with disjoint label spaces:
    /// components are crossed, label sets joined and weights multiplied.
    pub fn independent_union(&self, other: &GlmbDensity) -> Result<GlmbDensity> {
        if self.state_dim != other.state_dim {
            return Err(GlmbError::DimensionMismatch { expected: self.state_dim, found: other.state_dim });
        }
        if self.hypervolume_unit != other.hypervolume_unit {
            return Err(GlmbError::UnitMismatch(self.hypervolume_unit, other.hypervolume_unit));
        }
        let mine = self.label_space();
        if let Some(l) = other.label_space().into_iter().find(|l| mine.binary_search(l).is_ok()) {
            return Err(GlmbError::LabelClash(l));
        }
        let mut components = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                let entries = a
                    .iter()
                    .chain(b.iter())
                    .map(|(l, d)| (l, Arc::clone(d)))
                    .collect();
                let history = mix64(a.history ^ mix64(b.history).rotate_left(17));
                components.push(GlmbComponent::new(history, entries, a.log_weight + b.log_weight)?);
            }
        }
        GlmbDensity::new(components, self.state_dim, self.hypervolume_unit)
    }

    /// Rebuilds the density with every single-object mixture replaced by
    /// `f(mixture)`. Shared mixtures stay shared.
    pub fn map_densities<F>(&self, state_dim: usize, hypervolume_unit: f64, f: F) -> Result<GlmbDensity>
    where
        F: Fn(&GaussianMixture) -> Result<GaussianMixture>,
    {
        let mut cache: std::collections::HashMap<*const GaussianMixture, Arc<GaussianMixture>> = Default::default();
        let mut components = Vec::with_capacity(self.len());
        for c in &self.components {
            let mut densities = Vec::with_capacity(c.densities.len());
            for d in &c.densities {
                let key = Arc::as_ptr(d);
                let mapped = match cache.get(&key) {
                    Some(m) => Arc::clone(m),
                    None => {
                        let m = Arc::new(f(d)?);
                        cache.insert(key, Arc::clone(&m));
                        m
                    }
                };
                densities.push(mapped);
            }
            components.push(GlmbComponent::from_sorted(c.history, c.labels.clone(), densities, c.log_weight));
        }
        GlmbDensity::unnormalized(components, state_dim, hypervolume_unit)
    }
}

/// Precomputed cumulative weights for repeated realization draws.
#[derive(Clone, Debug)]
pub struct RealizationSampler<'a> {
    density: &'a GlmbDensity,
    cumulative: Vec<f64>,
}

impl<'a> RealizationSampler<'a> {
    pub fn new(density: &'a GlmbDensity) -> Self {
        let mut acc = 0.0;
        let cumulative = density
            .components
            .iter()
            .map(|c| {
                acc += c.weight();
                acc
            })
            .collect();
        Self { density, cumulative }
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> &'a GlmbComponent {
        let total = *self.cumulative.last().expect("density is non-empty");
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        &self.density.components[idx]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(Label, Vector)> {
        let c = self.sample_component(rng);
        c.iter().map(|(l, d)| (l, d.sample(rng))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use crate::rng::stream;

    fn gm1(mean: f64, var: f64) -> Arc<GaussianMixture> {
        Arc::new(GaussianMixture::single(Gaussian::from_slices(&[mean], &[var]).unwrap()))
    }

    fn comp(history: u64, labels: &[u32], w: f64) -> GlmbComponent {
        let entries = labels.iter().map(|&i| (Label::new(0, i), gm1(i as f64, 1.0))).collect();
        GlmbComponent::new(history, entries, w.ln()).unwrap()
    }

    #[test]
    fn normalize_single_component() {
        let c = GlmbComponent::empty(0, -3.0).unwrap();
        let d = GlmbDensity::new(vec![c], 1, 1.0).unwrap();
        assert_eq!(d.components()[0].log_weight(), 0.0);
    }

    #[test]
    fn normalize_proportional() {
        let d = GlmbDensity::new(vec![comp(0, &[], 0.2), comp(1, &[], 0.6)], 1, 1.0).unwrap();
        assert!((d.components()[0].weight() - 0.25).abs() < 1e-15);
        assert!((d.components()[1].weight() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn normalize_survives_subnormal_weights() {
        let d = GlmbDensity::new(vec![comp(0, &[], 1e-320), comp(1, &[], 1e-320)], 1, 1.0).unwrap();
        for c in d.components() {
            assert!((c.weight() - 0.5).abs() < 1e-12, "{}", c.weight());
        }
    }

    #[test]
    fn normalize_rejects_empty() {
        assert!(matches!(GlmbDensity::new(vec![], 1, 1.0), Err(GlmbError::EmptyDensity)));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let r = GlmbDensity::new(vec![comp(3, &[1], 0.5), comp(3, &[1], 0.5)], 1, 1.0);
        assert!(matches!(r, Err(GlmbError::DuplicateComponent { .. })));
        assert!(GlmbDensity::new(vec![comp(3, &[1], 0.5), comp(4, &[1], 0.5)], 1, 1.0).is_ok());
    }

    #[test]
    fn cardinality_examples() {
        let d = GlmbDensity::certain_empty(1, 1.0);
        assert_eq!(d.cardinality_distribution().pmf, vec![1.0]);

        let d = GlmbDensity::new(vec![comp(0, &[], 0.3), comp(0, &[1], 0.5), comp(0, &[1, 2], 0.2)], 1, 1.0).unwrap();
        let pmf = d.cardinality_distribution().pmf;
        for (a, b) in pmf.iter().zip([0.3, 0.5, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        let mass: f64 = d.label_space().iter().map(|&l| d.intensity_function(l).mass()).sum();
        assert!((mass - d.cardinality_distribution().mean()).abs() < 1e-12);
    }

    #[test]
    fn intensity_examples() {
        let d = GlmbDensity::new(vec![comp(0, &[1], 1.0)], 1, 1.0).unwrap();
        let v = d.intensity_function(Label::new(0, 1));
        assert!((v.mass() - 1.0).abs() < 1e-15);
        assert_eq!(v.terms()[0].1.mean()[0], 1.0);
        assert_eq!(d.intensity_function(Label::new(9, 9)).mass(), 0.0);
    }

    #[test]
    fn truncate_examples() {
        let d = GlmbDensity::new(vec![comp(0, &[], 0.5), comp(1, &[], 0.3), comp(2, &[], 0.2)], 1, 1.0).unwrap();
        let (same, err) = d.truncate(10, 0.0).unwrap();
        assert_eq!(same.len(), 3);
        assert_eq!(err, 0.0);

        let (t, err) = d.truncate(2, 0.0).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.components()[0].history(), 0);
        assert_eq!(t.components()[1].history(), 1);
        assert!((err - 0.2).abs() < 1e-15);
        assert!((t.components()[0].weight() - 0.625).abs() < 1e-15);

        assert!(matches!(d.truncate(2, 0.9), Err(GlmbError::EmptyDensity)));
    }

    #[test]
    fn sample_empty_and_point_mass() {
        let mut rng = stream(1, &[]);
        let d = GlmbDensity::certain_empty(2, 1.0);
        assert!(d.sample_realization(&mut rng).is_empty());

        let g = Gaussian::from_slices(&[3.0, -2.0], &[1e-12, 0.0, 0.0, 1e-12]).unwrap();
        let c = GlmbComponent::new(0, vec![(Label::new(0, 0), Arc::new(GaussianMixture::single(g)))], 0.0).unwrap();
        let d = GlmbDensity::new(vec![c], 2, 1.0).unwrap();
        for _ in 0..100 {
            let x = d.sample_realization(&mut rng);
            assert_eq!(x.len(), 1);
            assert!((x[0].1[0] - 3.0).abs() < 1e-4 && (x[0].1[1] + 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn union_rejects_shared_labels() {
        let a = GlmbDensity::new(vec![comp(0, &[1], 1.0)], 1, 1.0).unwrap();
        assert!(matches!(a.independent_union(&a), Err(GlmbError::LabelClash(_))));
    }
}
