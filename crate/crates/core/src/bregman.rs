//! Bregman geometries over boxes: squared Euclidean and shifted negative entropy.
//!
//! Both kernels are separable, which gives closed forms for the Bregman
//! diameter of a box and for the mirror step
//! `argmin_{z in X} <s - grad w(x), z> + w(z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::BoxSet;

/// Default entropy offset: the lowest corner of the box is mapped to this
/// value inside the logarithm.
pub const DEFAULT_ENTROPY_SHIFT: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    /// `w(x) = ||x||^2 / 2`.
    #[default]
    Euclidean,
    /// `w(x) = sum_i (x_i + shift) ln(x_i + shift)`.
    Entropy,
}

/// A distance-generating function with its strong-convexity modulus over a box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BregmanGeometry {
    pub kind: GeometryKind,
    /// Added to every coordinate inside the entropy kernel; 0 for Euclidean.
    pub shift: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    /// Bregman diameter `sup_{u,v in X} D(u, v)`.
    pub theta: f64,
    /// Euclidean diameter of the box.
    pub omega_diam: f64,
}

/// User-facing geometry selection, resolved against a box at run time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub geometry: GeometryKind,
    /// Entropy only: smallest value of `x_i + shift` over the box.
    pub entropy_shift: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            geometry: GeometryKind::Euclidean,
            entropy_shift: DEFAULT_ENTROPY_SHIFT,
        }
    }
}

impl GeometryConfig {
    pub fn resolve(&self, bounds: &BoxSet) -> Result<BregmanGeometry> {
        match self.geometry {
            GeometryKind::Euclidean => Ok(BregmanGeometry::euclidean()),
            GeometryKind::Entropy => BregmanGeometry::entropy_with_offset(self.entropy_shift, bounds),
        }
    }
}

impl BregmanGeometry {
    pub fn euclidean() -> Self {
        BregmanGeometry {
            kind: GeometryKind::Euclidean,
            shift: 0.0,
            alpha: 1.0,
        }
    }

    /// Entropy with an explicit shift. The modulus over the box is
    /// `1 / max_i (upper_i + shift)` since `w'' = 1 / (s + shift)`.
    pub fn entropy(shift: f64, bounds: &BoxSet) -> Result<Self> {
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::DomainViolation(format!("entropy shift must be >= 0, got {shift}")));
        }
        if let Some(l) = bounds.lower().iter().find(|&&l| !(l + shift > 0.0)) {
            return Err(Error::DomainViolation(format!(
                "entropy needs lower + shift > 0, got {l} + {shift}"
            )));
        }
        let top = bounds.upper().iter().fold(f64::NEG_INFINITY, |m, &u| m.max(u + shift));
        Ok(BregmanGeometry {
            kind: GeometryKind::Entropy,
            shift,
            alpha: 1.0 / top,
        })
    }

    /// Entropy whose shift maps the lowest box coordinate to `offset`
    /// (for boxes with nonnegative lower bounds this is `shift = offset`).
    pub fn entropy_with_offset(offset: f64, bounds: &BoxSet) -> Result<Self> {
        if !(offset > 0.0 && offset.is_finite()) {
            return Err(Error::DomainViolation(format!("entropy offset must be > 0, got {offset}")));
        }
        let lowest = bounds.lower().iter().copied().fold(f64::INFINITY, f64::min);
        Self::entropy(offset + (-lowest).max(0.0), bounds)
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if self.kind == GeometryKind::Entropy {
            if let Some(v) = x.iter().find(|&&v| !(v + self.shift > 0.0)) {
                return Err(Error::DomainViolation(format!(
                    "entropy kernel undefined at coordinate {v} (shift {})",
                    self.shift
                )));
            }
        }
        Ok(())
    }

    fn omega_1d(&self, s: f64) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => 0.5 * s * s,
            GeometryKind::Entropy => {
                let a = s + self.shift;
                a * a.ln()
            }
        }
    }

    fn grad_1d(&self, s: f64) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => s,
            GeometryKind::Entropy => 1.0 + (s + self.shift).ln(),
        }
    }

    fn distance_1d(&self, u: f64, v: f64) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => 0.5 * (u - v) * (u - v),
            GeometryKind::Entropy => {
                let (a, b) = (u + self.shift, v + self.shift);
                a * (a / b).ln() - (u - v)
            }
        }
    }

    pub fn omega(&self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(x.iter().map(|&s| self.omega_1d(s)).sum())
    }

    pub fn grad_omega(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(x.iter().map(|&s| self.grad_1d(s)).collect())
    }

    /// `D(u, v) = w(u) - w(v) - <grad w(v), u - v>`.
    pub fn distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        self.check_domain(u)?;
        self.check_domain(v)?;
        Ok(u.iter().zip(v).map(|(&a, &b)| self.distance_1d(a, b)).sum())
    }

    /// Per-coordinate endpoint supremum, checking both argument orders.
    pub fn diameters(&self, bounds: &BoxSet) -> Result<DiameterReport> {
        self.check_domain(bounds.lower())?;
        let theta = bounds
            .lower()
            .iter()
            .zip(bounds.upper())
            .map(|(&l, &u)| self.distance_1d(l, u).max(self.distance_1d(u, l)))
            .sum();
        Ok(DiameterReport {
            theta,
            omega_diam: bounds.diameter(),
        })
    }

    /// The unique minimizer over the box of `<step - grad w(x), z> + w(z)`,
    /// where `step = t * E`.
    pub fn mirror_step(&self, bounds: &BoxSet, x: &[f64], step: &[f64]) -> Result<Vec<f64>> {
        let m = bounds.dim();
        for len in [x.len(), step.len()] {
            if len != m {
                return Err(Error::DimensionMismatch { expected: m, got: len });
            }
        }
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("non-finite step".into()));
        }
        match self.kind {
            GeometryKind::Euclidean => {
                let moved: Vec<f64> = x.iter().zip(step).map(|(a, s)| a - s).collect();
                Ok(bounds.project(&moved))
            }
            GeometryKind::Entropy => {
                self.check_domain(x)?;
                self.check_domain(bounds.lower())?;
                Ok(x.iter()
                    .zip(step)
                    .zip(bounds.lower().iter().zip(bounds.upper()))
                    .map(|((&a, &s), (&l, &u))| ((a + self.shift) * (-s).exp() - self.shift).clamp(l, u))
                    .collect())
            }
        }
    }

    /// Objective of the mirror step at `z`, for brute-force checks.
    pub fn mirror_objective(&self, x: &[f64], step: &[f64], z: &[f64]) -> Result<f64> {
        let g = self.grad_omega(x)?;
        let lin: Vec<f64> = step.iter().zip(&g).map(|(s, g)| s - g).collect();
        Ok(linalg::dot(&lin, z) + self.omega(z)?)
    }
}
