use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::jb;

/// Which interval the problem lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaseKind {
    BoundedInterval { length: f64 },
    WholeLine { gamma: f64 },
    HalfLine { gamma: f64 },
}

/// Interval together with the growth cap κ and hypothesis constant K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainCase {
    pub kind: CaseKind,
    pub kappa: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

impl DomainCase {
    pub fn new(kind: CaseKind, kappa: f64, k: f64) -> Result<Self> {
        let c = DomainCase { kind, kappa, k };
        c.validate()?;
        Ok(c)
    }

    pub fn interval(length: f64, kappa: f64, k: f64) -> Result<Self> {
        Self::new(CaseKind::BoundedInterval { length }, kappa, k)
    }

    pub fn line(gamma: f64, kappa: f64, k: f64) -> Result<Self> {
        Self::new(CaseKind::WholeLine { gamma }, kappa, k)
    }

    pub fn half_line(gamma: f64, kappa: f64, k: f64) -> Result<Self> {
        Self::new(CaseKind::HalfLine { gamma }, kappa, k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidDomain(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(Error::InvalidDomain(format!("K must be >= 1, got {}", self.k)));
        }
        match self.kind {
            CaseKind::BoundedInterval { length } if !(length > 0.0 && length.is_finite()) => {
                Err(Error::InvalidDomain(format!("length must be positive, got {length}")))
            }
            CaseKind::WholeLine { gamma } | CaseKind::HalfLine { gamma } if !(0.0..=2.0).contains(&gamma) => {
                Err(Error::InvalidDomain(format!("gamma must lie in [0, 2], got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.kind {
            CaseKind::WholeLine { gamma } | CaseKind::HalfLine { gamma } => Some(gamma),
            CaseKind::BoundedInterval { .. } => None,
        }
    }

    /// True when the interval has a boundary point at x = 0.
    pub fn has_left_boundary(&self) -> bool {
        !matches!(self.kind, CaseKind::WholeLine { .. })
    }

    /// Whether the case has a finite existence horizon κ⁻¹ (quadratic growth
    /// or a boundary zero set).
    pub fn quadratic_horizon(&self) -> Option<f64> {
        match self.kind {
            CaseKind::WholeLine { gamma } if gamma < 2.0 => None,
            _ => Some(1.0 / self.kappa),
        }
    }

    /// Distance to the complement of I; `∞` on the whole line.
    pub fn dist(&self, x: f64) -> f64 {
        match self.kind {
            CaseKind::BoundedInterval { length } => x.min(length - x).max(0.0),
            CaseKind::HalfLine { .. } => x.max(0.0),
            CaseKind::WholeLine { .. } => f64::INFINITY,
        }
    }

    /// Growth envelope that H(κ,γ) compares u0 against from below:
    /// d² on the interval, ⟨x⟩^γ on the line, x² ∧ x^γ on the half-line.
    pub fn lower_envelope(&self, x: f64) -> f64 {
        match self.kind {
            CaseKind::BoundedInterval { .. } => {
                let d = self.dist(x);
                d * d
            }
            CaseKind::WholeLine { gamma } => jb(x).powf(gamma),
            CaseKind::HalfLine { gamma } => {
                let x = x.max(0.0);
                (x * x).min(x.powf(gamma))
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            CaseKind::BoundedInterval { .. } => "interval",
            CaseKind::WholeLine { .. } => "line",
            CaseKind::HalfLine { .. } => "half_line",
        }
    }
}
