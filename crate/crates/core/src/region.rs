//! Spatial regions acting on the positional coordinates of a state.

use crate::error::{GlmbError, Result};
use crate::gaussian::Vector;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `{p : normal·p ≤ offset}`
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{p : lower ≤ p ≤ upper}`; bounds may be infinite, and `lower == upper`
    /// gives a zero-volume box.
    AxisBox { lower: Vec<f64>, upper: Vec<f64> },
    /// `{p : |p - center| ≤ radius}` in two position dimensions.
    Disc { center: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    shape: Shape,
    position_dims: Vec<usize>,
}

impl Region {
    pub fn half_space(normal: Vec<f64>, offset: f64, position_dims: Vec<usize>) -> Result<Self> {
        if normal.len() != position_dims.len() {
            return Err(GlmbError::InvalidRegion("normal length differs from position_dims".into()));
        }
        if normal.iter().chain([&offset]).any(|v| !v.is_finite()) {
            return Err(GlmbError::InvalidRegion("non-finite half-space".into()));
        }
        Ok(Self { shape: Shape::HalfSpace { normal, offset }, position_dims })
    }

    pub fn axis_box(lower: Vec<f64>, upper: Vec<f64>, position_dims: Vec<usize>) -> Result<Self> {
        if lower.len() != position_dims.len() || upper.len() != position_dims.len() {
            return Err(GlmbError::InvalidRegion("box bounds differ from position_dims".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(GlmbError::InvalidRegion(format!("box bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { shape: Shape::AxisBox { lower, upper }, position_dims })
    }

    pub fn disc(center: [f64; 2], radius: f64, position_dims: [usize; 2]) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(GlmbError::InvalidRegion(format!("disc radius {radius}")));
        }
        Ok(Self { shape: Shape::Disc { center, radius }, position_dims: position_dims.to_vec() })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn position_dims(&self) -> &[usize] {
        &self.position_dims
    }

    /// True when the region has zero Lebesgue measure.
    pub fn is_null(&self) -> bool {
        match &self.shape {
            Shape::AxisBox { lower, upper } => lower.iter().zip(upper).any(|(l, u)| l == u),
            Shape::HalfSpace { normal, offset } => normal.iter().all(|&n| n == 0.0) && *offset < 0.0,
            Shape::Disc { .. } => false,
        }
    }

    pub fn contains(&self, state: &Vector) -> bool {
        let p: Vec<f64> = self.position_dims.iter().map(|&i| state[i]).collect();
        match &self.shape {
            Shape::HalfSpace { normal, offset } => normal.iter().zip(&p).map(|(n, x)| n * x).sum::<f64>() <= *offset,
            Shape::AxisBox { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi),
            Shape::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    pub(crate) fn check_state_dim(&self, state_dim: usize) -> Result<()> {
        match self.position_dims.iter().find(|&&i| i >= state_dim) {
            Some(&i) => Err(GlmbError::DimensionMismatch { expected: state_dim, found: i + 1 }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let d = Region::disc([0.0, 0.0], 1.0, [0, 2]).unwrap();
        assert!(d.contains(&Vector::from_vec(vec![0.5, 99.0, 0.5, -99.0])));
        assert!(!d.contains(&Vector::from_vec(vec![1.0, 0.0, 0.5, 0.0])));

        let h = Region::half_space(vec![1.0], 0.0, vec![0]).unwrap();
        assert!(h.contains(&Vector::from_vec(vec![0.0])));
        assert!(!h.contains(&Vector::from_vec(vec![1e-9])));

        let b = Region::axis_box(vec![0.0, f64::NEG_INFINITY], vec![1.0, 0.0], vec![0, 1]).unwrap();
        assert!(b.contains(&Vector::from_vec(vec![0.5, -1e300])));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Region::disc([0.0, 0.0], 0.0, [0, 1]).is_err());
        assert!(Region::axis_box(vec![1.0], vec![0.0], vec![0]).is_err());
        assert!(Region::half_space(vec![1.0, 0.0], 0.0, vec![0]).is_err());
    }

    #[test]
    fn degenerate_box_is_null() {
        assert!(Region::axis_box(vec![0.0, 0.0], vec![0.0, 1.0], vec![0, 1]).unwrap().is_null());
    }
}
