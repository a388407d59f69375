//! Optimal sub-pattern assignment (OSPA) distance.

use crate::assignment::solve_rectangular;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OspaResult {
    /// In `[0, c]`.
    pub distance: f64,
    pub localization: f64,
    pub cardinality: f64,
}

impl OspaResult {
    const ZERO: OspaResult = OspaResult { distance: 0.0, localization: 0.0, cardinality: 0.0 };
}

/// OSPA of order `p` with cutoff `c` between two point sets.
///
/// `d = ((min_π Σ d_c(xᵢ, y_π(i))^p + c^p (n - m)) / n)^{1/p}` with `m ≤ n`
/// and `d_c = min(c, ‖x - y‖)`. The localization and cardinality parts are
/// the two summands under the same root, so `dist^p = loc^p + card^p`.
pub fn ospa(estimates: &[Vec<f64>], truth: &[Vec<f64>], c: f64, p: f64) -> OspaResult {
    assert!(c > 0.0 && p >= 1.0, "OSPA needs c > 0 and p ≥ 1");
    let (small, large) = if estimates.len() <= truth.len() { (estimates, truth) } else { (truth, estimates) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return OspaResult::ZERO;
    }
    let cp = c.powf(p);
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|x| {
            large
                .iter()
                .map(|y| {
                    let d = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    d.min(c).powf(p)
                })
                .collect()
        })
        .collect();
    let (loc_sum, _) = solve_rectangular(&cost);
    let card_sum = cp * (n - m) as f64;
    let n = n as f64;
    let distance = ((loc_sum + card_sum) / n).powf(1.0 / p).min(c);
    OspaResult {
        distance,
        localization: (loc_sum / n).powf(1.0 / p),
        cardinality: (card_sum / n).powf(1.0 / p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_cases() {
        let a = vec![vec![1.0, 2.0], vec![-3.0, 4.0]];
        assert_eq!(ospa(&a, &a, 200.0, 2.0).distance, 0.0);
        assert_eq!(ospa(&[], &[vec![0.0, 0.0]], 200.0, 2.0).distance, 200.0);
        assert_eq!(ospa(&[], &[], 200.0, 2.0).distance, 0.0);
    }

    #[test]
    fn decomposition() {
        let a = vec![vec![0.0], vec![10.0]];
        let b = vec![vec![3.0]];
        let r = ospa(&a, &b, 5.0, 2.0);
        assert!((r.distance.powi(2) - r.localization.powi(2) - r.cardinality.powi(2)).abs() < 1e-12);
        assert!((r.distance - ((9.0 + 25.0) / 2.0f64).sqrt()).abs() < 1e-12);
    }
}
