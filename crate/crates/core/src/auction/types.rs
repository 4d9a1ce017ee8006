use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concave valuation `v(x) = a + b·x − c·x²` with `c ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Valuation {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Valuation {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Valuation { a, b, c }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.a + self.b * x - self.c * x * x
    }

    pub fn marginal(&self, x: f64) -> f64 {
        self.b - 2.0 * self.c * x
    }

    /// Unconstrained maximiser, if the valuation is strictly concave.
    pub fn peak(&self) -> Option<f64> {
        (self.c > 0.0).then(|| self.b / (2.0 * self.c))
    }

    /// Same curvature, re-centred so the peak sits at the reported demand.
    pub fn recentred(&self, demand: f64) -> Valuation {
        if self.c > 0.0 {
            Valuation {
                b: 2.0 * self.c * demand,
                ..*self
            }
        } else {
            *self
        }
    }

    /// Maximiser over `[lo, hi]`; a flat valuation picks `lo`.
    pub fn argmax_in(&self, lo: f64, hi: f64) -> f64 {
        match self.peak() {
            Some(p) => p.clamp(lo, hi),
            None if self.b > 0.0 => hi,
            None => lo,
        }
    }
}

/// Convex issuance cost `κ₀ + κ₂·y²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IssuanceCost {
    pub k0: f64,
    pub k2: f64,
}

impl IssuanceCost {
    pub fn value(&self, y: f64) -> f64 {
        self.k0 + self.k2 * y * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDemand {
    pub x_min: f64,
    pub x: f64,
    pub x_max: f64,
}

impl SlotDemand {
    pub fn new(x_min: f64, x: f64, x_max: f64) -> Self {
        SlotDemand { x_min, x, x_max }
    }
}

/// A user's `(x_min, x, x_max)` triple for every slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandReport {
    pub user: usize,
    pub slots: Vec<SlotDemand>,
}

impl DemandReport {
    pub fn validate(&self) -> Result<()> {
        for (t, s) in self.slots.iter().enumerate() {
            if !(0.0 <= s.x_min && s.x_min <= s.x && s.x <= s.x_max) {
                return Err(Error::BoundViolation(format!(
                    "user {} slot {t}: need 0 ≤ {} ≤ {} ≤ {}",
                    self.user, s.x_min, s.x, s.x_max
                )));
            }
        }
        Ok(())
    }
}

/// True valuations per user and slot plus the manager's per-slot cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationModel {
    pub users: Vec<Vec<Valuation>>,
    pub cost: Vec<IssuanceCost>,
}

impl ValuationModel {
    pub fn slots(&self) -> usize {
        self.cost.len()
    }

    /// Valuations as the manager sees them from the reports.
    pub fn reported(&self, reports: &[DemandReport]) -> ValuationModel {
        ValuationModel {
            users: self
                .users
                .iter()
                .zip(reports)
                .map(|(vs, r)| vs.iter().zip(&r.slots).map(|(v, s)| v.recentred(s.x)).collect())
                .collect(),
            cost: self.cost.clone(),
        }
    }
}

/// Per-slot issuance caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuanceBounds {
    pub y_max: Vec<f64>,
}

pub(crate) fn check_shapes(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
) -> Result<()> {
    let t = valuations.slots();
    if reports.is_empty() {
        return Err(Error::InvalidParameter("auction needs at least one user".into()));
    }
    if reports.len() != valuations.users.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reports but {} valuation rows",
            reports.len(),
            valuations.users.len()
        )));
    }
    if bounds.y_max.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "{} issuance caps for {t} slots",
            bounds.y_max.len()
        )));
    }
    for (i, (r, v)) in reports.iter().zip(&valuations.users).enumerate() {
        if r.user != i {
            return Err(Error::InvalidParameter(format!(
                "report {i} carries user id {}; ids must be 0..N in order",
                r.user
            )));
        }
        if r.slots.len() != t || v.len() != t {
            return Err(Error::DimensionMismatch(format!("user {i} does not cover {t} slots")));
        }
        if v.iter().any(|q| !(q.c >= 0.0)) {
            return Err(Error::InvalidParameter(format!("user {i} valuation is not concave")));
        }
        r.validate()?;
    }
    if valuations.cost.iter().any(|c| !(c.k0 >= 0.0 && c.k2 >= 0.0)) {
        return Err(Error::InvalidParameter("issuance cost must be non-negative and convex".into()));
    }
    Ok(())
}
