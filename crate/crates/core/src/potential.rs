//! Spherical wells and radial decaying potentials.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Potential `−v·1_{B_a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    pub a: f64,
    pub v: f64,
}

impl WellSpec {
    pub fn new(a: f64, v: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(domain(format!("well radius must be positive, got {a}")));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(domain(format!("well depth must be positive, got {v}")));
        }
        Ok(Self { a, v })
    }
}

/// Radial, non-increasing, non-negative profile `r ↦ v(r)` (the potential is `−v(|x|)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialPotential {
    /// `v·1_{r < a}`.
    Indicator(WellSpec),
    /// `amplitude·e^{−rate·r}`.
    Exponential { amplitude: f64, rate: f64 },
    /// Linear interpolation through `(r_i, v_i)`, zero beyond the last node.
    Table { r: Vec<f64>, v: Vec<f64> },
}

impl RadialPotential {
    pub fn exponential(amplitude: f64, rate: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !(rate > 0.0) {
            return Err(domain("exponential potential needs positive amplitude and rate"));
        }
        Ok(Self::Exponential { amplitude, rate })
    }

    pub fn table(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() != v.len() || r.len() < 2 {
            return Err(domain("potential table needs matching r and v columns of length >= 2"));
        }
        if r[0] != 0.0 {
            return Err(domain("potential table must start at r = 0"));
        }
        for i in 1..r.len() {
            if !(r[i] > r[i - 1]) {
                return Err(domain("potential table radii must increase"));
            }
            if v[i] > v[i - 1] {
                return Err(domain("potential table must be non-increasing"));
            }
        }
        if v.iter().any(|x| !(*x >= 0.0)) {
            return Err(domain("potential table must be non-negative"));
        }
        Ok(Self::Table { r, v })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Indicator(w) => {
                if r < w.a {
                    w.v
                } else {
                    0.0
                }
            }
            Self::Exponential { amplitude, rate } => amplitude * (-rate * r).exp(),
            Self::Table { r: rs, v } => {
                let last = rs.len() - 1;
                if r >= rs[last] {
                    return 0.0;
                }
                let i = rs.partition_point(|&x| x <= r).saturating_sub(1);
                let t = (r - rs[i]) / (rs[i + 1] - rs[i]);
                v[i] + t * (v[i + 1] - v[i])
            }
        }
    }

    /// `v(0)`, the supremum of the profile.
    pub fn peak(&self) -> f64 {
        self.eval(0.0)
    }

    /// Mean of `v(|x|)` over the one-dimensional cell `[lo, hi]`, `0 ≤ lo < hi`.
    pub fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Indicator(w) => w.v * ((w.a - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Exponential { amplitude, rate } => {
                amplitude * ((-rate * lo).exp() - (-rate * hi).exp()) / (rate * (hi - lo))
            }
            Self::Table { .. } => {
                // Simpson on the cell; tables are piecewise linear.
                (self.eval(lo) + 4.0 * self.eval(0.5 * (lo + hi)) + self.eval(hi)) / 6.0
            }
        }
    }
}

impl From<WellSpec> for RadialPotential {
    fn from(w: WellSpec) -> Self {
        Self::Indicator(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_validation() {
        assert!(WellSpec::new(0.0, 1.0).is_err());
        assert!(WellSpec::new(1.0, -1.0).is_err());
    }

    #[test]
    fn table_interpolates_and_validates() {
        let t = RadialPotential::table(vec![0.0, 1.0, 2.0], vec![4.0, 2.0, 0.0]).unwrap();
        assert_eq!(t.eval(0.5), 3.0);
        assert_eq!(t.eval(3.0), 0.0);
        assert!(RadialPotential::table(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn cell_average_of_indicator() {
        let p = RadialPotential::from(WellSpec::new(1.0, 5.0).unwrap());
        assert_eq!(p.cell_average(0.5, 0.9), 5.0);
        assert!((p.cell_average(0.8, 1.2) - 2.5).abs() < 1e-15);
        assert_eq!(p.cell_average(1.0, 1.5), 0.0);
    }
}
