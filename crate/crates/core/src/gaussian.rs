//! Gaussians, Gaussian mixtures and unnormalized Gaussian-mixture intensities.

use crate::error::{GlmbError, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A multivariate normal with its lower Cholesky factor cached.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: Vector,
    cov: Matrix,
    chol: Matrix,
}

/// Lower Cholesky factor, adding `1e-12·trace/d` to the diagonal once if the
/// first attempt fails.
fn cholesky_with_jitter(cov: &Matrix) -> Result<Matrix> {
    if let Some(c) = Cholesky::new(cov.clone()) {
        return Ok(c.l());
    }
    let d = cov.nrows() as f64;
    let jitter = (1e-12 * cov.trace() / d).max(f64::MIN_POSITIVE);
    let mut jittered = cov.clone();
    for i in 0..cov.nrows() {
        jittered[(i, i)] += jitter;
    }
    Cholesky::new(jittered)
        .map(|c| c.l())
        .ok_or(GlmbError::NotPositiveDefinite)
}

impl Gaussian {
    /// The covariance is symmetrized before factorization.
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(GlmbError::InvalidMixture("zero-dimensional state".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(GlmbError::DimensionMismatch { expected: d, found: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(GlmbError::InvalidMixture("non-finite mean or covariance".into()));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let chol = cholesky_with_jitter(&cov)?;
        Ok(Self { mean, cov, chol })
    }

    pub fn from_slices(mean: &[f64], cov_row_major: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov_row_major.len() != d * d {
            return Err(GlmbError::DimensionMismatch { expected: d * d, found: cov_row_major.len() });
        }
        Self::new(Vector::from_column_slice(mean), Matrix::from_row_slice(d, d, cov_row_major))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// Lower-triangular `L` with `L Lᵀ = cov`.
    pub fn chol_lower(&self) -> &Matrix {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis2(&self, x: &Vector) -> f64 {
        const STACK: usize = 8;
        let d = self.dim();
        if d <= STACK {
            // Forward substitution on the stack; this sits in the inner
            // loop of every association.
            let mut y = [0.0; STACK];
            let mut sum = 0.0;
            for i in 0..d {
                let mut v = x[i] - self.mean[i];
                for (j, yj) in y.iter().enumerate().take(i) {
                    v -= self.chol[(i, j)] * yj;
                }
                y[i] = v / self.chol[(i, i)];
                sum += y[i] * y[i];
            }
            return sum;
        }
        let diff = x - &self.mean;
        let y = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    pub fn log_pdf(&self, x: &Vector) -> f64 {
        let d = self.dim() as f64;
        -0.5 * (d * (2.0 * PI).ln() + self.log_det() + self.mahalanobis2(x))
    }

    pub fn pdf(&self, x: &Vector) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let z = Vector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample(StandardNormal)));
        &self.mean + &self.chol * z
    }

    /// Marginal over the coordinates in `idx`, in that order.
    pub fn marginal(&self, idx: &[usize]) -> Result<Gaussian> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.dim()) {
            return Err(GlmbError::DimensionMismatch { expected: self.dim(), found: bad + 1 });
        }
        let mean = Vector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = Matrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]);
        Gaussian::new(mean, cov)
    }
}

/// `ln N(a; b, A + B)`, which is `ln ∫ N(x; a, A) N(x; b, B) dx`.
pub fn log_gaussian_overlap(a: &Gaussian, b: &Gaussian) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GlmbError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let sum = Gaussian::new(b.mean.clone(), &a.cov + &b.cov)?;
    Ok(sum.log_pdf(&a.mean))
}

/// A normalized Gaussian mixture: positive weights summing to one.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    components: Vec<(f64, Gaussian)>,
}

impl GaussianMixture {
    pub fn new(components: Vec<(f64, Gaussian)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| GlmbError::InvalidMixture("no components".into()))?;
        let d = first.1.dim();
        let mut total = 0.0;
        for (w, g) in &components {
            if !(w.is_finite() && *w > 0.0) {
                return Err(GlmbError::InvalidMixture(format!("weight {w} is not positive")));
            }
            if g.dim() != d {
                return Err(GlmbError::DimensionMismatch { expected: d, found: g.dim() });
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GlmbError::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn single(g: Gaussian) -> Self {
        Self { components: vec![(1.0, g)] }
    }

    /// Normalizes non-negative weights, dropping zero-weight terms.
    /// Returns the total mass alongside the mixture.
    pub fn from_unnormalized(terms: Vec<(f64, Gaussian)>) -> Result<(f64, Self)> {
        let terms: Vec<_> = terms.into_iter().filter(|(w, _)| *w > 0.0).collect();
        let mass: f64 = terms.iter().map(|(w, _)| w).sum();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(GlmbError::InvalidMixture("zero or non-finite total mass".into()));
        }
        let components = terms.into_iter().map(|(w, g)| (w / mass, g)).collect();
        Ok((mass, Self::new(components)?))
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[(f64, Gaussian)] {
        &self.components
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, Gaussian)> {
        self.components.iter()
    }

    pub fn mean(&self) -> Vector {
        self.components
            .iter()
            .fold(Vector::zeros(self.dim()), |acc, (w, g)| acc + g.mean() * *w)
    }

    /// The highest-weight component (first on ties).
    pub fn dominant(&self) -> &Gaussian {
        let mut best = &self.components[0];
        for c in &self.components[1..] {
            if c.0 > best.0 {
                best = c;
            }
        }
        &best.1
    }

    pub fn pdf(&self, x: &Vector) -> f64 {
        self.components.iter().map(|(w, g)| w * g.pdf(x)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        if self.components.len() == 1 {
            return self.components[0].1.sample(rng);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, g) in &self.components {
            acc += w;
            if u < acc {
                return g.sample(rng);
            }
        }
        self.components.last().expect("non-empty").1.sample(rng)
    }

    pub fn marginal(&self, idx: &[usize]) -> Result<GaussianMixture> {
        let components = self
            .components
            .iter()
            .map(|(w, g)| Ok((*w, g.marginal(idx)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// Applies `f` to every component, keeping weights.
    pub fn map_components<F>(&self, f: F) -> Result<GaussianMixture>
    where
        F: Fn(&Gaussian) -> Result<Gaussian>,
    {
        let components = self
            .components
            .iter()
            .map(|(w, g)| Ok((*w, f(g)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }
}

/// An unnormalized Gaussian mixture `Σ wᵢ N(·; mᵢ, Pᵢ)` with `wᵢ ≥ 0`.
///
/// Used for intensity functions, whose total mass is an expected count.
#[derive(Clone, Debug, Default)]
pub struct GaussianIntensity {
    terms: Vec<(f64, Gaussian)>,
}

impl GaussianIntensity {
    pub fn new(terms: Vec<(f64, Gaussian)>) -> Result<Self> {
        if let Some((w, _)) = terms.iter().find(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(GlmbError::InvalidMixture(format!("intensity weight {w} is negative or non-finite")));
        }
        if let Some(d) = terms.first().map(|t| t.1.dim()) {
            if let Some((_, g)) = terms.iter().find(|(_, g)| g.dim() != d) {
                return Err(GlmbError::DimensionMismatch { expected: d, found: g.dim() });
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scaled(mixture: &GaussianMixture, mass: f64) -> Result<Self> {
        Self::new(mixture.iter().map(|(w, g)| (w * mass, g.clone())).collect())
    }

    pub fn terms(&self) -> &[(f64, Gaussian)] {
        &self.terms
    }

    pub fn mass(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w).sum()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.terms.iter().map(|(w, g)| w * g.pdf(x)).sum()
    }

    /// The normalized shape, or `None` when the mass is zero.
    pub fn shape(&self) -> Option<GaussianMixture> {
        GaussianMixture::from_unnormalized(self.terms.clone()).ok().map(|(_, m)| m)
    }

    pub(crate) fn push(&mut self, w: f64, g: Gaussian) {
        self.terms.push((w, g));
    }

    /// Superposition: intensities add.
    pub fn superpose(&self, other: &GaussianIntensity) -> GaussianIntensity {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        GaussianIntensity { terms }
    }
}
