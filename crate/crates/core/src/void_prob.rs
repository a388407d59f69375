//! Void probabilities: the probability that a region contains no points.
//!
//! For a GLMB, `Q(S) = Σ_c w_c Π_{ℓ∈L_c} ⟨1 - 1_S, p_c(·, ℓ)⟩`. The inner
//! factor is the escape probability of a single-object density; each unique
//! density is integrated once per call.

use crate::cubature::{self, Budget, DEFAULT_ABS_TOL, DEFAULT_MAX_EVALS, DEFAULT_REL_TOL};
use crate::density::GlmbDensity;
use crate::error::{GlmbError, Result};
use crate::gaussian::{Gaussian, GaussianMixture};
use crate::region::{Region, Shape};
use statrs::function::erf::erfc;
use std::collections::HashMap;
use std::sync::Arc;

/// Standard normal CDF.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Cubature settings for disc and correlated-box integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: usize,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self { rel_tol: DEFAULT_REL_TOL, abs_tol: DEFAULT_ABS_TOL, max_evaluations: DEFAULT_MAX_EVALS }
    }
}

/// Probability that a single Gaussian (full state) lands in `region`.
pub fn gaussian_region_probability(g: &Gaussian, region: &Region, settings: &IntegrationSettings) -> Result<f64> {
    region.check_state_dim(g.dim())?;
    if region.is_null() {
        return Ok(0.0);
    }
    let pos = g.marginal(region.position_dims())?;
    let p = match region.shape() {
        Shape::HalfSpace { normal, offset } => {
            let n = nalgebra::DVector::from_column_slice(normal);
            let mu = n.dot(pos.mean());
            let var = (pos.cov() * &n).dot(&n);
            if var <= 0.0 {
                if mu <= *offset {
                    1.0
                } else {
                    0.0
                }
            } else {
                normal_cdf((offset - mu) / var.sqrt())
            }
        }
        Shape::AxisBox { lower, upper } => box_probability(&pos, lower, upper, settings)?,
        Shape::Disc { center, radius } => {
            // Tighter internal tolerance than the contract so that products
            // over many labels stay within it.
            let budget = Budget::new(settings.max_evaluations);
            cubature::gaussian_disc_probability(&pos, *center, *radius, settings.rel_tol * 1e-3, settings.abs_tol, &budget)?
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

fn interval_probability(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    // Use the tail on the far side of the mean for accuracy.
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

fn box_probability(pos: &Gaussian, lower: &[f64], upper: &[f64], settings: &IntegrationSettings) -> Result<f64> {
    let d = pos.dim();
    let cov = pos.cov();
    let diagonal = (0..d).all(|r| (0..d).all(|c| r == c || cov[(r, c)] == 0.0));
    if diagonal {
        return Ok((0..d)
            .map(|i| interval_probability(pos.mean()[i], cov[(i, i)].sqrt(), lower[i], upper[i]))
            .product());
    }
    if d != 2 {
        return Err(GlmbError::InvalidRegion(
            "axis boxes over correlated positions are supported in two dimensions only".into(),
        ));
    }
    // P = ∫ N(x; μ₁, σ₁²) P(y ∈ [a₂, b₂] | x) dx over [a₁, b₁].
    let (m1, m2) = (pos.mean()[0], pos.mean()[1]);
    let (s11, s12, s22) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let sd1 = s11.sqrt();
    let cond_sd = (s22 - s12 * s12 / s11).max(0.0).sqrt();
    let lo = lower[0].max(m1 - 40.0 * sd1);
    let hi = upper[0].min(m1 + 40.0 * sd1);
    if lo >= hi {
        return Ok(0.0);
    }
    let integrand = |x: f64| {
        let z = (x - m1) / sd1;
        let density = (-0.5 * z * z).exp() / (sd1 * (2.0 * std::f64::consts::PI).sqrt());
        let cond_mean = m2 + s12 / s11 * (x - m1);
        let inner = if cond_sd > 0.0 {
            interval_probability(cond_mean, cond_sd, lower[1], upper[1])
        } else if (lower[1]..=upper[1]).contains(&cond_mean) {
            1.0
        } else {
            0.0
        };
        density * inner
    };
    let budget = Budget::new(settings.max_evaluations);
    cubature::integrate(integrand, lo, hi, settings.abs_tol, settings.rel_tol * 1e-3, &budget)
}

/// `⟨1 - 1_S, p⟩`: the probability mass of `gm` outside `region`, in `[0, 1]`.
pub fn escape_probability(gm: &GaussianMixture, region: &Region) -> Result<f64> {
    escape_probability_with(gm, region, &IntegrationSettings::default())
}

pub fn escape_probability_with(gm: &GaussianMixture, region: &Region, settings: &IntegrationSettings) -> Result<f64> {
    if region.is_null() {
        return Ok(1.0);
    }
    let mut inside = 0.0;
    for (w, g) in gm.iter() {
        inside += w * gaussian_region_probability(g, region, settings)?;
    }
    Ok((1.0 - inside).clamp(0.0, 1.0))
}

/// Closed-form GLMB void probability over `region`.
pub fn glmb_void_probability(density: &GlmbDensity, region: &Region) -> Result<f64> {
    glmb_void_probability_with(density, region, &IntegrationSettings::default())
}

pub fn glmb_void_probability_with(
    density: &GlmbDensity,
    region: &Region,
    settings: &IntegrationSettings,
) -> Result<f64> {
    region.check_state_dim(density.state_dim())?;
    if region.is_null() {
        return Ok(1.0);
    }
    // Per-call memo keyed by shared density identity.
    let mut escape: HashMap<*const GaussianMixture, f64> = HashMap::new();
    let mut q = 0.0;
    for c in density.components() {
        let mut prod = c.weight();
        for d in c.densities() {
            let key = Arc::as_ptr(d);
            let e = match escape.get(&key) {
                Some(&e) => e,
                None => {
                    let e = escape_probability_with(d, region, settings)?;
                    escape.insert(key, e);
                    e
                }
            };
            prod *= e;
            if prod == 0.0 {
                break;
            }
        }
        q += prod;
    }
    Ok(q.clamp(0.0, 1.0))
}
