use serde::{Deserialize, Serialize};

use super::solve::{apply_penalty, run_auction, user_utility, AuctionOutcome};
use super::types::{DemandReport, IssuanceBounds, ValuationModel};
use crate::error::Result;

/// A complete auction instance with the users' true types.
///
/// The truthful demand `x` of each report is the peak of the true valuation, so
/// the valuations the manager reconstructs from truthful reports are the true
/// ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub reports: Vec<DemandReport>,
    pub valuations: ValuationModel,
    pub bounds: IssuanceBounds,
}

impl AuctionInstance {
    pub fn true_valuations(&self) -> ValuationModel {
        self.valuations.reported(&self.reports)
    }

    pub fn run(&self) -> Result<AuctionOutcome> {
        run_auction(&self.reports, &self.valuations, &self.bounds)
    }

    /// Outcome and user `i`'s true utility when `i` submits `report` and
    /// everybody else is truthful.
    pub fn utility_under(&self, i: usize, report: &DemandReport) -> Result<(AuctionOutcome, f64)> {
        let mut reports = self.reports.clone();
        reports[i] = DemandReport {
            user: i,
            slots: report.slots.clone(),
        };
        let mut outcome = run_auction(&reports, &self.valuations, &self.bounds)?;
        apply_penalty(&mut outcome, &reports, &self.reports);
        let u = user_utility(&self.true_valuations(), &outcome.allocation, &outcome.payments, i);
        Ok((outcome, u))
    }
}

/// Largest utility gain over the grid relative to truthful reporting. Reports
/// that make the instance infeasible are skipped.
pub fn strategyproofness_probe(instance: &AuctionInstance, i: usize, grid: &[DemandReport]) -> Result<f64> {
    let (_, truthful) = instance.utility_under(i, &instance.reports[i])?;
    let mut gain = f64::NEG_INFINITY;
    for r in grid {
        if r.validate().is_err() {
            continue;
        }
        match instance.utility_under(i, r) {
            Ok((_, u)) => gain = gain.max(u - truthful),
            Err(crate::Error::InfeasibleProblem(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(gain)
}

/// Misreports of the demanded amount spread evenly over `[x_min, x_max]`.
pub fn demand_grid(truthful: &DemandReport, points: usize) -> Vec<DemandReport> {
    (0..points)
        .map(|k| {
            let f = if points > 1 { k as f64 / (points - 1) as f64 } else { 0.5 };
            let mut r = truthful.clone();
            for s in r.slots.iter_mut() {
                s.x = s.x_min + f * (s.x_max - s.x_min);
            }
            r
        })
        .collect()
}

/// Misreports that inflate `x_max` (and the demand with it) by factors in
/// `(1, 1 + spread]`.
pub fn overstatement_grid(truthful: &DemandReport, points: usize, spread: f64) -> Vec<DemandReport> {
    (1..=points)
        .map(|k| {
            let f = 1.0 + spread * k as f64 / points as f64;
            let mut r = truthful.clone();
            for s in r.slots.iter_mut() {
                s.x_max *= f;
                s.x = s.x_max;
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::types::{IssuanceCost, SlotDemand, Valuation};

    fn two_users() -> AuctionInstance {
        AuctionInstance {
            reports: vec![
                DemandReport { user: 0, slots: vec![SlotDemand::new(0.0, 2.0, 4.0)] },
                DemandReport { user: 1, slots: vec![SlotDemand::new(0.0, 3.0, 5.0)] },
            ],
            valuations: ValuationModel {
                users: vec![vec![Valuation::new(0.0, 4.0, 1.0)], vec![Valuation::new(0.0, 3.0, 0.5)]],
                cost: vec![IssuanceCost { k0: 0.1, k2: 0.2 }],
            },
            bounds: IssuanceBounds { y_max: vec![4.0] },
        }
    }

    #[test]
    fn truthful_report_has_zero_gain() {
        let inst = two_users();
        let g = strategyproofness_probe(&inst, 0, &[inst.reports[0].clone()]).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn demand_misreports_do_not_pay() {
        let inst = two_users();
        for i in 0..2 {
            let g = strategyproofness_probe(&inst, i, &demand_grid(&inst.reports[i], 21)).unwrap();
            assert!(g <= 1e-6, "user {i} gains {g}");
        }
    }

    #[test]
    fn grids_have_requested_size() {
        let r = &two_users().reports[0];
        let g = demand_grid(r, 21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0].slots[0].x, 0.0);
        assert_eq!(g[20].slots[0].x, 4.0);
        assert!(overstatement_grid(r, 5, 1.0).iter().all(|m| m.slots[0].x_max > 4.0));
    }
}
