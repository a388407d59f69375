//! Marginalization over association histories.
//!
//! Components with the same label set are collapsed into one whose weight is
//! their total and whose single-object densities are the weight-averaged
//! mixtures. Mixtures are then reduced by greedy moment matching. This gives
//! up the exact GLMB form in exchange for keeping the component budget on
//! distinct label sets, which is what track initiation in heavy clutter
//! needs.

use crate::density::GlmbComponent;
use crate::error::Result;
use crate::gaussian::{Gaussian, GaussianMixture, Matrix, Vector};
use crate::label::Label;
use crate::par::log_sum_exp;
use std::collections::HashMap;
use std::sync::Arc;

/// Greedy moment-matching reduction: take the heaviest remaining Gaussian,
/// fold in every other one within squared Mahalanobis distance `threshold`
/// of it, repeat, then keep the `max_terms` heaviest results.
pub fn reduce_mixture(terms: Vec<(f64, Gaussian)>, threshold: f64, max_terms: usize) -> Result<GaussianMixture> {
    let mut rest = terms;
    rest.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, Gaussian)> = Vec::new();
    while !rest.is_empty() && out.len() < max_terms {
        let head = rest.remove(0);
        let (close, far): (Vec<_>, Vec<_>) = rest
            .into_iter()
            .partition(|(_, g)| head.1.mahalanobis2(g.mean()) <= threshold);
        rest = far;
        if close.is_empty() {
            out.push(head);
            continue;
        }
        let group: Vec<&(f64, Gaussian)> = std::iter::once(&head).chain(close.iter()).collect();
        let w: f64 = group.iter().map(|t| t.0).sum();
        let d = head.1.dim();
        let mut mean = Vector::zeros(d);
        for (wi, g) in group.iter().map(|t| (t.0, &t.1)) {
            mean += g.mean() * (wi / w);
        }
        let mut cov = Matrix::zeros(d, d);
        for (wi, g) in group.iter().map(|t| (t.0, &t.1)) {
            let dm = g.mean() - &mean;
            cov += (g.cov() + &dm * dm.transpose()) * (wi / w);
        }
        out.push((w, Gaussian::new(mean, cov)?));
    }
    Ok(GaussianMixture::from_unnormalized(out)?.1)
}

/// Collapses components sharing a label set. The output keeps the order of
/// first appearance and the smallest history of each group.
pub fn merge_histories(components: Vec<GlmbComponent>, threshold: f64, max_terms: usize) -> Result<Vec<GlmbComponent>> {
    let mut index: HashMap<Vec<Label>, usize> = HashMap::new();
    let mut groups: Vec<Vec<GlmbComponent>> = Vec::new();
    for c in components {
        match index.get(c.labels()) {
            Some(&i) => groups[i].push(c),
            None => {
                index.insert(c.labels().to_vec(), groups.len());
                groups.push(vec![c]);
            }
        }
    }
    groups
        .into_iter()
        .map(|group| {
            if group.len() == 1 {
                return Ok(group.into_iter().next().expect("non-empty group"));
            }
            let lws: Vec<f64> = group.iter().map(GlmbComponent::log_weight).collect();
            let total = log_sum_exp(&lws);
            let history = group.iter().map(GlmbComponent::history).min().expect("non-empty group");
            let labels = group[0].labels().to_vec();
            let densities = (0..labels.len())
                .map(|slot| {
                    // Histories often share the same density; pool those first.
                    let mut pooled: Vec<(f64, &Arc<GaussianMixture>)> = Vec::new();
                    for (c, lw) in group.iter().zip(&lws) {
                        let d = &c.densities()[slot];
                        let r = (lw - total).exp();
                        match pooled.iter_mut().find(|p| Arc::ptr_eq(p.1, d)) {
                            Some(p) => p.0 += r,
                            None => pooled.push((r, d)),
                        }
                    }
                    if pooled.len() == 1 {
                        return Ok(Arc::clone(pooled[0].1));
                    }
                    let terms = pooled
                        .iter()
                        .flat_map(|(r, d)| d.iter().map(move |(w, g)| (r * w, g.clone())))
                        .collect();
                    Ok(Arc::new(reduce_mixture(terms, threshold, max_terms)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GlmbComponent::from_sorted(history, labels, densities, total))
        })
        .collect()
}
