//! Adaptive Gauss-Kronrod quadrature and the Gaussian-over-disc integral.

use crate::error::{GlmbError, Result};
use crate::gaussian::Gaussian;
use std::cell::Cell;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

/// Relative tolerance used for region integrals.
pub const DEFAULT_REL_TOL: f64 = 1e-6;
/// Absolute floor so that vanishing integrals terminate.
pub const DEFAULT_ABS_TOL: f64 = 1e-13;
/// Integrand evaluations allowed per integral.
pub const DEFAULT_MAX_EVALS: usize = 100_000;

// 15-point Kronrod nodes on [0, 1] (symmetric), with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Shared evaluation counter.
#[derive(Debug)]
pub struct Budget {
    used: Cell<usize>,
    max: usize,
}

impl Budget {
    pub fn new(max: usize) -> Self {
        Self { used: Cell::new(0), max }
    }

    pub fn used(&self) -> usize {
        self.used.get()
    }

    fn charge(&self, n: usize) -> Result<()> {
        let used = self.used.get() + n;
        self.used.set(used);
        if used > self.max {
            Err(GlmbError::IntegrationFailure { evaluations: used })
        } else {
            Ok(())
        }
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7-15) integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate drops below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    budget: &Budget,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    budget.charge(15)?;
    let (value, error) = kronrod15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    loop {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; accept what we have.
            heap.push(worst);
            return Ok(total);
        }
        budget.charge(30)?;
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        // Re-sum periodically to stop drift of the running totals.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Probability that a 2-D Gaussian falls inside the disc `|x - center| ≤ radius`.
///
/// The integral is taken in polar coordinates about the Gaussian mean after
/// whitening, where the disc becomes an ellipse. Along each ray the radial
/// integral of the standard normal is closed form, so only the angular
/// integral is adaptive; when the mean lies outside the disc the angular
/// range is restricted to the cone of rays that meet it.
pub fn gaussian_disc_probability(
    g: &Gaussian,
    center: [f64; 2],
    radius: f64,
    rel_tol: f64,
    abs_tol: f64,
    budget: &Budget,
) -> Result<f64> {
    if g.dim() != 2 {
        return Err(GlmbError::DimensionMismatch { expected: 2, found: g.dim() });
    }
    let l = g.chol_lower();
    let (l11, l21, l22) = (l[(0, 0)], l[(1, 0)], l[(1, 1)]);
    // δ = center - mean, in state units.
    let dx = center[0] - g.mean()[0];
    let dy = center[1] - g.mean()[1];
    let dist2 = dx * dx + dy * dy;
    let s = dist2 - radius * radius;

    // Quick reject: the closest disc point is at least `d` whitened units away,
    // and the standard bivariate normal puts exp(-d²/2) mass beyond radius d.
    let lambda_max = {
        let c = g.cov();
        let tr = c[(0, 0)] + c[(1, 1)];
        let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
        0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt()
    };
    let gap = dist2.sqrt() - radius;
    if gap > 0.0 {
        let d = gap / lambda_max.sqrt();
        if -0.5 * d * d < (abs_tol * 1e-3).ln() {
            return Ok(0.0);
        }
    }

    // Ray u = ρ e, state offset L u. |ρ L e - δ|² ≤ r² ⇔ a ρ² - 2 b ρ + s ≤ 0.
    let ray = |phi: f64| -> (f64, f64) {
        let (sn, cs) = phi.sin_cos();
        let lx = l11 * cs;
        let ly = l21 * cs + l22 * sn;
        (lx * lx + ly * ly, lx * dx + ly * dy)
    };
    let radial = |phi: f64| -> f64 {
        let (a, b) = ray(phi);
        let disc = b * b - a * s;
        if disc <= 0.0 {
            return 0.0;
        }
        let root = disc.sqrt();
        let hi = (b + root) / a;
        if hi <= 0.0 {
            return 0.0;
        }
        let lo = ((b - root) / a).max(0.0);
        // ∫_lo^hi ρ exp(-ρ²/2) dρ / 2π
        let e_lo = (-0.5 * lo * lo).exp();
        let e_hi = (-0.5 * hi * hi).exp();
        (e_lo - e_hi) / TAU
    };

    if s < 0.0 {
        // Mean inside the disc: every ray meets it.
        let p = integrate(radial, 0.0, TAU, abs_tol, rel_tol, budget)?;
        return Ok(p.clamp(0.0, 1.0));
    }

    // Mean outside: rays meeting the disc form a cone of width < π around the
    // direction of the whitened disc center.
    let (ux, uy) = {
        let ux = dx / l11;
        let uy = (dy - l21 * ux) / l22;
        (ux, uy)
    };
    let phi_c = uy.atan2(ux);
    let hits = |phi: f64| {
        let (a, b) = ray(phi);
        b > 0.0 && b * b - a * s > 0.0
    };
    let edge = |sign: f64| {
        let (mut inside, mut outside) = (0.0_f64, PI);
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if hits(phi_c + sign * mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        outside
    };
    let lo = phi_c - edge(-1.0);
    let hi = phi_c + edge(1.0);
    let p = integrate(radial, lo, hi, abs_tol, rel_tol, budget)?;
    Ok(p.clamp(0.0, 1.0))
}
