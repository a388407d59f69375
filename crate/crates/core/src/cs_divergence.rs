//! Closed-form Cauchy-Schwarz divergence between GLMB densities with
//! Gaussian-mixture single-object densities.
//!
//! `⟨φ, ψ⟩_K = Σ_L Σ_{c,d} w_φ(c, L) w_ψ(d, L) Π_{ℓ∈L} γ(ℓ)`, with
//! `γ(ℓ) = K Σ_ij ωᵢ ωⱼ N(mᵢ; mⱼ, Pᵢ + Pⱼ)`. Only pairs of components with the
//! same label set contribute, so `ψ` is bucketed by label set first.

use crate::density::GlmbDensity;
use crate::error::{GlmbError, Result};
use crate::gaussian::{log_gaussian_overlap, GaussianMixture};
use crate::label::Label;
use crate::par::log_sum_exp;
use std::collections::HashMap;
use std::sync::Arc;

/// `ln(K ⟨a, b⟩)` for two Gaussian mixtures.
pub fn log_gaussian_mixture_inner_product(a: &GaussianMixture, b: &GaussianMixture, k: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GlmbError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for (wa, ga) in a.iter() {
        for (wb, gb) in b.iter() {
            terms.push(wa.ln() + wb.ln() + log_gaussian_overlap(ga, gb)?);
        }
    }
    Ok(k.ln() + log_sum_exp(&terms))
}

/// `K ⟨a, b⟩`, dimensionless. Underflows to zero for far-apart mixtures; use
/// [`log_gaussian_mixture_inner_product`] when that matters.
pub fn gaussian_mixture_inner_product(a: &GaussianMixture, b: &GaussianMixture, k: f64) -> Result<f64> {
    Ok(log_gaussian_mixture_inner_product(a, b, k)?.exp())
}

/// `⟨φ, ψ⟩_K` in log form. `is_zero` is set exactly when no component of
/// `φ` shares its label set with a component of `ψ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlmbInnerProduct {
    pub log_value: f64,
    pub is_zero: bool,
}

impl GlmbInnerProduct {
    pub fn value(&self) -> f64 {
        if self.is_zero {
            0.0
        } else {
            self.log_value.exp()
        }
    }
}

type PairKey = (*const GaussianMixture, *const GaussianMixture);

pub fn glmb_inner_product(phi: &GlmbDensity, psi: &GlmbDensity) -> Result<GlmbInnerProduct> {
    if phi.hypervolume_unit() != psi.hypervolume_unit() {
        return Err(GlmbError::UnitMismatch(phi.hypervolume_unit(), psi.hypervolume_unit()));
    }
    if phi.state_dim() != psi.state_dim() {
        return Err(GlmbError::DimensionMismatch { expected: phi.state_dim(), found: psi.state_dim() });
    }
    let k = phi.hypervolume_unit();
    let mut buckets: HashMap<&[Label], Vec<usize>> = HashMap::new();
    for (i, c) in psi.components().iter().enumerate() {
        buckets.entry(c.labels()).or_default().push(i);
    }
    let mut gamma: HashMap<PairKey, f64> = HashMap::new();
    let mut terms = Vec::new();
    for a in phi.components() {
        let Some(matches) = buckets.get(a.labels()) else { continue };
        for &j in matches {
            let b = &psi.components()[j];
            let mut log_term = a.log_weight() + b.log_weight();
            for (pa, pb) in a.densities().iter().zip(b.densities()) {
                let key = (Arc::as_ptr(pa), Arc::as_ptr(pb));
                let g = match gamma.get(&key) {
                    Some(&g) => g,
                    None => {
                        let g = log_gaussian_mixture_inner_product(pa, pb, k)?;
                        gamma.insert(key, g);
                        g
                    }
                };
                log_term += g;
            }
            terms.push(log_term);
        }
    }
    if terms.is_empty() {
        return Ok(GlmbInnerProduct { log_value: f64::NEG_INFINITY, is_zero: true });
    }
    Ok(GlmbInnerProduct { log_value: log_sum_exp(&terms), is_zero: false })
}

/// `D_CS(φ, ψ) = -ln(⟨φ,ψ⟩ / √(⟨φ,φ⟩⟨ψ,ψ⟩))`, evaluated in the log domain.
/// Returns `+∞` for orthogonal densities. Both inputs must be normalized.
pub fn cs_divergence(phi: &GlmbDensity, psi: &GlmbDensity) -> Result<f64> {
    let cross = glmb_inner_product(phi, psi)?;
    if cross.is_zero {
        return Ok(f64::INFINITY);
    }
    let pp = glmb_inner_product(phi, phi)?;
    let ss = glmb_inner_product(psi, psi)?;
    Ok(-(cross.log_value - 0.5 * pp.log_value - 0.5 * ss.log_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GlmbComponent;
    use crate::gaussian::Gaussian;
    use std::f64::consts::PI;

    fn gm(mean: f64, var: f64) -> Arc<GaussianMixture> {
        Arc::new(GaussianMixture::single(Gaussian::from_slices(&[mean], &[var]).unwrap()))
    }

    #[test]
    fn standard_normal_self_product() {
        let v = gaussian_mixture_inner_product(&gm(0.0, 1.0), &gm(0.0, 1.0), 1.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn far_apart_mixtures_stay_finite_in_log_domain() {
        let l = log_gaussian_mixture_inner_product(&gm(0.0, 1.0), &gm(100.0, 1.0), 1.0).unwrap();
        assert!(l.is_finite());
        assert!(l.exp() < 1e-300);
    }

    #[test]
    fn orthogonal_label_supports() {
        let a = GlmbDensity::new(
            vec![GlmbComponent::new(0, vec![(Label::new(0, 1), gm(0.0, 1.0))], 0.0).unwrap()],
            1,
            1.0,
        )
        .unwrap();
        let b = GlmbDensity::new(
            vec![GlmbComponent::new(0, vec![(Label::new(0, 2), gm(0.0, 1.0))], 0.0).unwrap()],
            1,
            1.0,
        )
        .unwrap();
        assert!(glmb_inner_product(&a, &b).unwrap().is_zero);
        assert_eq!(cs_divergence(&a, &b).unwrap(), f64::INFINITY);
        assert_eq!(cs_divergence(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn empty_densities_have_unit_product() {
        let e = GlmbDensity::certain_empty(1, 1.0);
        let ip = glmb_inner_product(&e, &e).unwrap();
        assert!(!ip.is_zero);
        assert_eq!(ip.value(), 1.0);
    }

    #[test]
    fn unit_mismatch() {
        let a = GlmbDensity::certain_empty(1, 1.0);
        let b = GlmbDensity::certain_empty(1, 2.0);
        assert!(matches!(cs_divergence(&a, &b), Err(GlmbError::UnitMismatch(..))));
    }
}
