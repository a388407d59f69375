//! Poisson point processes with Gaussian-mixture intensities, used as an
//! independent reference for void probabilities and CS divergence.

use crate::error::{GlmbError, Result};
use crate::gaussian::{log_gaussian_overlap, GaussianIntensity};
use crate::region::Region;
use crate::void_prob::{gaussian_region_probability, IntegrationSettings};

#[derive(Clone, Debug)]
pub struct PoissonProcess {
    intensity: GaussianIntensity,
}

impl PoissonProcess {
    pub fn new(intensity: GaussianIntensity) -> Result<Self> {
        let m = intensity.mass();
        if !(m.is_finite() && m >= 0.0) {
            return Err(GlmbError::InvalidMixture(format!("intensity mass {m}")));
        }
        Ok(Self { intensity })
    }

    pub fn intensity(&self) -> &GaussianIntensity {
        &self.intensity
    }

    pub fn expected_count(&self) -> f64 {
        self.intensity.mass()
    }

    pub fn superpose(&self, other: &PoissonProcess) -> PoissonProcess {
        PoissonProcess { intensity: self.intensity.superpose(&other.intensity) }
    }
}

/// `Q(S) = exp(-⟨1_S, v⟩)`.
pub fn poisson_void_probability(proc: &PoissonProcess, region: &Region) -> Result<f64> {
    if region.is_null() {
        return Ok(1.0);
    }
    let settings = IntegrationSettings::default();
    let mut expected_inside = 0.0;
    for (w, g) in proc.intensity.terms() {
        if *w > 0.0 {
            expected_inside += w * gaussian_region_probability(g, region, &settings)?;
        }
    }
    Ok((-expected_inside).exp().clamp(0.0, 1.0))
}

/// `⟨u, v⟩ = ∫ u(x) v(x) dx` for Gaussian-mixture intensities.
pub fn intensity_inner_product(u: &GaussianIntensity, v: &GaussianIntensity) -> Result<f64> {
    let mut acc = 0.0;
    for (wu, gu) in u.terms() {
        for (wv, gv) in v.terms() {
            acc += wu * wv * log_gaussian_overlap(gu, gv)?.exp();
        }
    }
    Ok(acc)
}

/// CS divergence between Poisson processes: `(K/2)·‖u - v‖²`.
pub fn poisson_cs_divergence(a: &PoissonProcess, b: &PoissonProcess, hypervolume_unit: f64) -> Result<f64> {
    let uu = intensity_inner_product(&a.intensity, &a.intensity)?;
    let vv = intensity_inner_product(&b.intensity, &b.intensity)?;
    let uv = intensity_inner_product(&a.intensity, &b.intensity)?;
    Ok((0.5 * hypervolume_unit * (uu + vv - 2.0 * uv)).max(0.0))
}
