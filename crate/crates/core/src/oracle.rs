//! Brute-force oracles and the randomized cross-check suites built on them.
//!
//! Everything here is slow by design: set integrals are evaluated by
//! enumerating label subsets and integrating the full set function on a
//! tensor grid, void probabilities by sampling realizations. The suites pit
//! the closed forms of the library against these.

use crate::cs_divergence::{cs_divergence, gaussian_mixture_inner_product};
use crate::density::{GlmbComponent, GlmbDensity, RealizationSampler};
use crate::error::{GlmbError, Result};
use crate::gaussian::{Gaussian, GaussianIntensity, GaussianMixture, Vector};
use crate::label::Label;
use crate::par;
use crate::poisson::{poisson_cs_divergence, PoissonProcess};
use crate::region::Region;
use crate::rng::{stream, Stream};
use crate::scenario::ospa::ospa;
use crate::void_prob::glmb_void_probability;
use rand::Rng;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[lo, hi]` with panels no wider than
/// `max_panel` and `order` nodes per panel.
pub fn composite_rule(lo: f64, hi: f64, max_panel: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
    let h = (hi - lo) / panels as f64;
    let (gx, gw) = gauss_legendre(order);
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

fn covering_rule<'a>(gaussians: impl Iterator<Item = &'a Gaussian>, axis: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi, mut sd_min) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for g in gaussians {
        let sd = g.cov()[(axis, axis)].sqrt();
        lo = lo.min(g.mean()[axis] - 12.0 * sd);
        hi = hi.max(g.mean()[axis] + 12.0 * sd);
        sd_min = sd_min.min(sd);
    }
    composite_rule(lo, hi, 0.5 * sd_min, 8)
}

fn label_subsets(labels: &[Label]) -> Vec<Vec<Label>> {
    (0..1usize << labels.len())
        .map(|mask| (0..labels.len()).filter(|i| mask >> i & 1 == 1).map(|i| labels[i]).collect())
        .collect()
}

/// `∫ K^{|X|} φ(X) ψ(X) δX` for one-dimensional states, by enumerating label
/// subsets and integrating the product of the two set functions over a tensor
/// grid in `|L|` dimensions. Exponential in the label count; at most three
/// labels are accepted.
pub fn set_integral_inner_product(phi: &GlmbDensity, psi: &GlmbDensity) -> Result<f64> {
    if phi.state_dim() != 1 || psi.state_dim() != 1 {
        return Err(GlmbError::TooLarge("set-integral oracle needs one-dimensional states".into()));
    }
    if phi.hypervolume_unit() != psi.hypervolume_unit() {
        return Err(GlmbError::UnitMismatch(phi.hypervolume_unit(), psi.hypervolume_unit()));
    }
    let k = phi.hypervolume_unit();
    let mut labels = phi.label_space();
    labels.extend(psi.label_space());
    labels.sort();
    labels.dedup();
    if labels.len() > 3 {
        return Err(GlmbError::TooLarge(format!("{} labels; the oracle handles at most 3", labels.len())));
    }
    let all = phi.components().iter().chain(psi.components());
    let gaussians: Vec<&Gaussian> = all.flat_map(|c| c.densities().iter().flat_map(|d| d.iter().map(|t| &t.1))).collect();
    if gaussians.is_empty() {
        // Only empty label sets: the integral is the product of their weights.
        return Ok(sum_weights(phi, &[]) * sum_weights(psi, &[]));
    }
    let (nodes, weights) = covering_rule(gaussians.into_iter(), 0);
    let n_nodes = nodes.len();

    // Tabulated single-object densities, per component and label.
    let tabulate = |d: &GlmbDensity| -> Vec<Vec<Vec<f64>>> {
        d.components()
            .iter()
            .map(|c| {
                c.densities()
                    .iter()
                    .map(|p| nodes.iter().map(|&x| p.pdf(&Vector::from_element(1, x))).collect())
                    .collect()
            })
            .collect()
    };
    let tab_phi = tabulate(phi);
    let tab_psi = tabulate(psi);

    let mut total = 0.0;
    for subset in label_subsets(&labels) {
        let pick = |d: &GlmbDensity| -> Vec<usize> {
            (0..d.len()).filter(|&i| d.components()[i].labels() == subset.as_slice()).collect()
        };
        let (cs, ds) = (pick(phi), pick(psi));
        if cs.is_empty() || ds.is_empty() {
            continue;
        }
        let n = subset.len();
        let mut idx = vec![0usize; n];
        let kn = k.powi(n as i32);
        let mut acc = 0.0;
        loop {
            let grid_weight: f64 = idx.iter().map(|&i| weights[i]).product();
            let eval = |d: &GlmbDensity, tab: &[Vec<Vec<f64>>], comps: &[usize]| -> f64 {
                comps
                    .iter()
                    .map(|&c| {
                        let w = d.components()[c].weight();
                        w * idx.iter().enumerate().map(|(slot, &i)| tab[c][slot][i]).product::<f64>()
                    })
                    .sum()
            };
            acc += grid_weight * eval(phi, &tab_phi, &cs) * eval(psi, &tab_psi, &ds);
            // Odometer over the n-dimensional grid.
            let mut slot = 0;
            while slot < n {
                idx[slot] += 1;
                if idx[slot] < n_nodes {
                    break;
                }
                idx[slot] = 0;
                slot += 1;
            }
            if slot == n {
                break;
            }
        }
        total += kn * acc;
    }
    Ok(total)
}

fn sum_weights(d: &GlmbDensity, labels: &[Label]) -> f64 {
    d.components().iter().filter(|c| c.labels() == labels).map(GlmbComponent::weight).sum()
}

/// CS divergence from three set-integral inner products.
pub fn set_integral_cs_divergence(phi: &GlmbDensity, psi: &GlmbDensity) -> Result<f64> {
    let cross = set_integral_inner_product(phi, psi)?;
    if cross == 0.0 {
        return Ok(f64::INFINITY);
    }
    let pp = set_integral_inner_product(phi, phi)?;
    let qq = set_integral_inner_product(psi, psi)?;
    Ok(-(cross.ln() - 0.5 * pp.ln() - 0.5 * qq.ln()))
}

/// `∫∫ f(x, y) dx dy` of a two-dimensional function on a tensor grid covering
/// every Gaussian in `gaussians`.
pub fn tensor_quadrature_2d<F: Fn(&Vector) -> f64>(gaussians: &[&Gaussian], f: F) -> f64 {
    let (xs, wx) = covering_rule(gaussians.iter().copied(), 0);
    let (ys, wy) = covering_rule(gaussians.iter().copied(), 1);
    let mut total = 0.0;
    let mut p = Vector::zeros(2);
    for (x, w1) in xs.iter().zip(&wx) {
        let mut row = 0.0;
        for (y, w2) in ys.iter().zip(&wy) {
            p[0] = *x;
            p[1] = *y;
            row += w2 * f(&p);
        }
        total += w1 * row;
    }
    total
}

/// Fraction of `samples` realizations with no point inside `region`, and its
/// binomial standard error.
pub fn monte_carlo_void_probability(density: &GlmbDensity, region: &Region, samples: usize, rng: &mut Stream) -> (f64, f64) {
    let sampler = RealizationSampler::new(density);
    let mut void = 0usize;
    for _ in 0..samples {
        let c = sampler.sample_component(rng);
        if c.densities().iter().all(|d| !region.contains(&d.sample(rng))) {
            void += 1;
        }
    }
    let q = void as f64 / samples as f64;
    (q, (q * (1.0 - q) / samples as f64).sqrt())
}

/// Shape of the random densities drawn by [`random_glmb`].
#[derive(Clone, Copy, Debug)]
pub struct RandomGlmb {
    pub state_dim: usize,
    pub labels: usize,
    pub max_components: usize,
    pub max_gaussians: usize,
    /// Means are uniform in `[-spread, spread]` per axis.
    pub spread: f64,
    /// Per-axis standard deviations are uniform in this range.
    pub sd_range: (f64, f64),
}

fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, spec: &RandomGlmb) -> Gaussian {
    let d = spec.state_dim;
    let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-spec.spread..=spec.spread)).collect();
    let sd: Vec<f64> = (0..d).map(|_| rng.random_range(spec.sd_range.0..=spec.sd_range.1)).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        cov[i * d + i] = sd[i] * sd[i];
    }
    if d == 2 {
        let rho = rng.random_range(-0.6..=0.6);
        cov[1] = rho * sd[0] * sd[1];
        cov[2] = cov[1];
    }
    Gaussian::from_slices(&mean, &cov).expect("random covariance is positive definite")
}

pub fn random_mixture<R: Rng + ?Sized>(rng: &mut R, spec: &RandomGlmb) -> GaussianMixture {
    let n = rng.random_range(1..=spec.max_gaussians);
    let terms = (0..n).map(|_| (rng.random_range(0.05..1.0), random_gaussian(rng, spec))).collect();
    GaussianMixture::from_unnormalized(terms).expect("positive weights").1
}

/// A random normalized GLMB over labels `(birth_time, 0..spec.labels)`.
pub fn random_glmb<R: Rng + ?Sized>(rng: &mut R, spec: &RandomGlmb, birth_time: u32) -> GlmbDensity {
    let n = rng.random_range(1..=spec.max_components);
    let components = (0..n)
        .map(|c| {
            let mask: usize = rng.random_range(0..1usize << spec.labels);
            let entries = (0..spec.labels)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| (Label::new(birth_time, i as u32), Arc::new(random_mixture(rng, spec))))
                .collect();
            GlmbComponent::new(c as u64, entries, rng.random_range(0.05f64..1.0).ln()).expect("distinct labels")
        })
        .collect();
    GlmbDensity::new(components, spec.state_dim, 1.0).expect("valid random density")
}

/// Re-expresses a density in a length unit scaled by `a` per axis: means
/// scale by `a`, covariances by `a²`, and the hypervolume unit by `a^d`, so
/// that `K·p` is unchanged.
pub fn rescale_units(density: &GlmbDensity, a: f64) -> Result<GlmbDensity> {
    let d = density.state_dim();
    let k = density.hypervolume_unit() * a.powi(d as i32);
    density.map_densities(d, k, |m| m.map_components(|g| Gaussian::new(g.mean() * a, g.cov() * (a * a))))
}

/// Minimum OSPA over all assignments by explicit permutation.
pub fn brute_force_ospa(x: &[Vec<f64>], y: &[Vec<f64>], c: f64, p: f64) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let n = large.len();
    if n == 0 {
        return 0.0;
    }
    let dist = |a: &Vec<f64>, b: &Vec<f64>| {
        let d = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        d.min(c).powf(p)
    };
    fn best(small: &[Vec<f64>], large: &[Vec<f64>], i: usize, used: &mut [bool], d: &dyn Fn(&Vec<f64>, &Vec<f64>) -> f64) -> f64 {
        if i == small.len() {
            return 0.0;
        }
        let mut out = f64::INFINITY;
        for j in 0..large.len() {
            if !used[j] {
                used[j] = true;
                out = out.min(d(&small[i], &large[j]) + best(small, large, i + 1, used, d));
                used[j] = false;
            }
        }
        out
    }
    let loc = best(small, large, 0, &mut vec![false; n], &dist);
    ((loc + c.powf(p) * (n - small.len()) as f64) / n as f64).powf(1.0 / p)
}

/// The randomized cross-check suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    CsDivergence,
    VoidProbability,
    KInvariance,
    ProductRule,
    Poisson,
    Truncation,
    Ospa,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::CsDivergence,
        Suite::VoidProbability,
        Suite::KInvariance,
        Suite::ProductRule,
        Suite::Poisson,
        Suite::Truncation,
        Suite::Ospa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CsDivergence => "cs-divergence",
            Suite::VoidProbability => "void-probability",
            Suite::KInvariance => "k-invariance",
            Suite::ProductRule => "product-rule",
            Suite::Poisson => "poisson",
            Suite::Truncation => "truncation",
            Suite::Ospa => "ospa",
        }
    }

    pub fn default_cases(self) -> usize {
        match self {
            Suite::CsDivergence => 100,
            Suite::VoidProbability => 200,
            Suite::KInvariance | Suite::ProductRule | Suite::Poisson => 20,
            Suite::Truncation => 50,
            Suite::Ospa => 200,
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = GlmbError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| GlmbError::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: usize,
    pub total: usize,
    /// Passes needed for the suite to succeed.
    pub required: usize,
    /// Largest discrepancy seen, in the suite's own measure.
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.passed >= self.required
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {}/{} within {:.1e} (worst {:.3e}, need {}) {}",
            self.suite,
            self.passed,
            self.total,
            self.tolerance,
            self.worst,
            self.required,
            if self.ok() { "PASS" } else { "FAIL" }
        )
    }
}

/// Realizations per void-probability case.
pub const VOID_SAMPLES: usize = 100_000;

/// Runs `cases` randomized instances of `suite`. Every case draws from its
/// own stream, so results do not depend on the worker count.
pub fn run_suite(suite: Suite, cases: usize, seed: u64) -> Result<SuiteReport> {
    let outcomes: Vec<Result<(bool, f64)>> =
        par::map_range(cases, |i| run_case(suite, &mut stream(seed, &[suite.tag(), i as u64])));
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for o in outcomes {
        let (ok, err) = o?;
        passed += usize::from(ok);
        worst = worst.max(err);
    }
    let (tolerance, required) = match suite {
        Suite::CsDivergence => (1e-6, cases),
        Suite::VoidProbability => (3.0, (0.95 * cases as f64).ceil() as usize),
        Suite::KInvariance => (1e-9, cases),
        Suite::ProductRule => (1e-10, cases),
        Suite::Poisson => (1e-9, cases),
        Suite::Truncation => (TRUNCATION_SLACK, cases),
        Suite::Ospa => (1e-12, cases),
    };
    Ok(SuiteReport { suite, passed, total: cases, required, worst, tolerance })
}

const TRUNCATION_SLACK: f64 = 64.0 * f64::EPSILON;

fn run_case(suite: Suite, rng: &mut Stream) -> Result<(bool, f64)> {
    match suite {
        Suite::CsDivergence => {
            let spec = RandomGlmb {
                state_dim: 1,
                labels: rng.random_range(1..=2),
                max_components: 3,
                max_gaussians: 2,
                spread: 2.0,
                sd_range: (0.4, 1.5),
            };
            let phi = random_glmb(rng, &spec, 0);
            let psi = random_glmb(rng, &spec, 0);
            let closed = cs_divergence(&phi, &psi)?;
            let oracle = set_integral_cs_divergence(&phi, &psi)?;
            if closed.is_infinite() || oracle.is_infinite() {
                return Ok((closed == oracle, 0.0));
            }
            let err = (closed - oracle).abs();
            Ok((err <= 1e-6, err))
        }
        Suite::VoidProbability => {
            let spec = RandomGlmb {
                state_dim: 2,
                labels: rng.random_range(1..=4),
                max_components: 4,
                max_gaussians: 2,
                spread: 3.0,
                sd_range: (0.3, 2.0),
            };
            let density = random_glmb(rng, &spec, 0);
            let center = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let region = Region::disc(center, rng.random_range(0.5..3.0), [0, 1])?;
            let q = glmb_void_probability(&density, &region)?;
            let (mc, _) = monte_carlo_void_probability(&density, &region, VOID_SAMPLES, rng);
            let se = (q * (1.0 - q) / VOID_SAMPLES as f64).sqrt();
            let z = (mc - q).abs() / se.max(1.0 / VOID_SAMPLES as f64);
            Ok((z <= 3.0, z))
        }
        Suite::KInvariance => {
            let spec = RandomGlmb {
                state_dim: 2,
                labels: rng.random_range(1..=3),
                max_components: 4,
                max_gaussians: 2,
                spread: 3.0,
                sd_range: (0.3, 2.0),
            };
            let phi = random_glmb(rng, &spec, 0);
            let psi = random_glmb(rng, &spec, 0);
            let base = cs_divergence(&phi, &psi)?;
            let mut worst: f64 = 0.0;
            for k in [1e-3, 1.0, 1e3] {
                let a = f64::powf(k, 1.0 / spec.state_dim as f64);
                let d = cs_divergence(&rescale_units(&phi, a)?, &rescale_units(&psi, a)?)?;
                let err = if base.is_infinite() && d.is_infinite() { 0.0 } else { (d - base).abs() };
                worst = worst.max(err);
            }
            Ok((worst < 1e-9, worst))
        }
        Suite::ProductRule => {
            let spec = RandomGlmb {
                state_dim: 2,
                labels: rng.random_range(1..=3),
                max_components: 4,
                max_gaussians: 2,
                spread: 3.0,
                sd_range: (0.3, 2.0),
            };
            let a = random_glmb(rng, &spec, 0);
            let b = random_glmb(rng, &spec, 1);
            let joint = a.independent_union(&b)?;
            let mut worst: f64 = 0.0;
            for region in random_regions(rng)? {
                let qa = glmb_void_probability(&a, &region)?;
                let qb = glmb_void_probability(&b, &region)?;
                let qj = glmb_void_probability(&joint, &region)?;
                worst = worst.max((qj - qa * qb).abs());
            }
            Ok((worst <= 1e-10, worst))
        }
        Suite::Poisson => {
            let spec = RandomGlmb {
                state_dim: 2,
                labels: 1,
                max_components: 1,
                max_gaussians: 2,
                spread: 2.0,
                sd_range: (0.4, 1.5),
            };
            let mut intensity = || -> Result<PoissonProcess> {
                let mass = rng.random_range(0.2..3.0);
                let mixture = random_mixture(rng, &spec);
                PoissonProcess::new(GaussianIntensity::scaled(&mixture, mass)?)
            };
            let (u, v) = (intensity()?, intensity()?);
            let closed = poisson_cs_divergence(&u, &v, 1.0)?;
            let gaussians: Vec<&Gaussian> = u.intensity().terms().iter().chain(v.intensity().terms()).map(|t| &t.1).collect();
            let l2 = tensor_quadrature_2d(&gaussians, |x| {
                let diff = u.intensity().value(x) - v.intensity().value(x);
                diff * diff
            });
            let err = (closed - 0.5 * l2).abs();
            Ok((err <= 1e-9, err))
        }
        Suite::Truncation => {
            let spec = RandomGlmb {
                state_dim: 1,
                labels: 5,
                max_components: 40,
                max_gaussians: 1,
                spread: 2.0,
                sd_range: (0.5, 1.0),
            };
            let density = random_glmb(rng, &spec, 0);
            let max = rng.random_range(1..=density.len());
            let min_weight = if rng.random_bool(0.5) { rng.random_range(0.0..0.05) } else { 0.0 };
            let (kept, l1) = match density.truncate(max, min_weight) {
                Ok(r) => r,
                Err(GlmbError::EmptyDensity) => return Ok((true, 0.0)),
                Err(e) => return Err(e),
            };
            let survivors: std::collections::HashSet<(u64, Vec<Label>)> =
                kept.components().iter().map(|c| (c.history(), c.labels().to_vec())).collect();
            let discarded: f64 = density
                .components()
                .iter()
                .filter(|c| !survivors.contains(&(c.history(), c.labels().to_vec())))
                .map(GlmbComponent::weight)
                .sum();
            let err = (l1 - discarded).abs();
            Ok((err <= TRUNCATION_SLACK, err))
        }
        Suite::Ospa => {
            let nx = rng.random_range(0..=5);
            let ny = rng.random_range(0..=5);
            let mut set = |n: usize| -> Vec<Vec<f64>> {
                (0..n).map(|_| vec![rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0)]).collect()
            };
            let (x, y) = (set(nx), set(ny));
            let p = if rng.random_bool(0.5) { 2.0 } else { 1.0 };
            let fast = ospa(&x, &y, 200.0, p).distance;
            let slow = brute_force_ospa(&x, &y, 200.0, p);
            let err = (fast - slow).abs();
            Ok((err <= 1e-12, err))
        }
    }
}

fn random_regions(rng: &mut Stream) -> Result<Vec<Region>> {
    let c = |rng: &mut Stream| rng.random_range(-3.0..3.0);
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Ok(vec![
        Region::disc([c(rng), c(rng)], rng.random_range(0.5..3.0), [0, 1])?,
        Region::disc([c(rng), c(rng)], rng.random_range(0.5..3.0), [0, 1])?,
        Region::half_space(vec![theta.cos(), theta.sin()], c(rng), vec![0, 1])?,
        {
            let (x, y) = (c(rng), c(rng));
            Region::axis_box(vec![x, y], vec![x + rng.random_range(0.5..3.0), y + rng.random_range(0.5..3.0)], vec![0, 1])?
        },
        Region::axis_box(vec![c(rng)], vec![f64::INFINITY], vec![1])?,
    ])
}

/// Importance-sampling estimate of `⟨φ, ψ⟩_K` for one-dimensional densities:
/// for each matching label set, states are drawn from the φ components and
/// weighted by the ψ set function. Returns the estimate and standard error.
pub fn importance_sampled_inner_product(phi: &GlmbDensity, psi: &GlmbDensity, samples: usize, rng: &mut Stream) -> (f64, f64) {
    let k = phi.hypervolume_unit();
    let mut estimate = 0.0;
    let mut variance = 0.0;
    let mut sets: Vec<Vec<Label>> = phi.components().iter().map(|c| c.labels().to_vec()).collect();
    sets.sort();
    sets.dedup();
    for labels in sets {
        let from: Vec<&GlmbComponent> = phi.components().iter().filter(|c| c.labels() == labels.as_slice()).collect();
        let to: Vec<&GlmbComponent> = psi.components().iter().filter(|c| c.labels() == labels.as_slice()).collect();
        if to.is_empty() {
            continue;
        }
        let mass: f64 = from.iter().map(|c| c.weight()).sum();
        let kn = k.powi(labels.len() as i32);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            // Draw a component of φ restricted to this label set, then states.
            let mut u = rng.random::<f64>() * mass;
            let mut pick = from[from.len() - 1];
            for c in &from {
                if u < c.weight() {
                    pick = c;
                    break;
                }
                u -= c.weight();
            }
            let xs: Vec<Vector> = pick.densities().iter().map(|d| d.sample(rng)).collect();
            let value: f64 = to
                .iter()
                .map(|c| c.weight() * c.densities().iter().zip(&xs).map(|(d, x)| d.pdf(x)).product::<f64>())
                .sum();
            let f = mass * kn * value;
            s += f;
            s2 += f * f;
        }
        let n = samples as f64;
        let mean = s / n;
        estimate += mean;
        variance += (s2 / n - mean * mean).max(0.0) / n;
    }
    (estimate, variance.sqrt())
}

/// Single-label inner product reduces to the mixture inner product times the
/// weight product; exposed for spot checks.
pub fn single_label_inner_product(a: &GaussianMixture, b: &GaussianMixture, wa: f64, wb: f64, k: f64) -> Result<f64> {
    Ok(wa * wb * gaussian_mixture_inner_product(a, b, k)?)
}
