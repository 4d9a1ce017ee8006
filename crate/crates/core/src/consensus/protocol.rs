use nalgebra::DVector;

use super::network::NetworkModel;
use super::run::{build_users, run_dual_consensus_hooked, ConsensusResult, ConsensusSettings, Deviation, RoundHooks};
use crate::auction::{
    run_auction, user_utility, welfare_value, AuctionOutcome, DemandReport, IssuanceBounds, ValuationModel,
    WelfareSolution,
};
use crate::error::Result;

/// Tolerance of the manager's final checks on the consensus result.
pub const VERIFY_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub outcome: AuctionOutcome,
    pub consensus: ConsensusResult,
    /// Users whose final allocation is not a best response to the final price.
    pub flagged: Vec<usize>,
    /// The manager discarded the consensus result and cleared centrally.
    pub fallback: bool,
}

/// Decentralised auction: reports, local standalone optima for the exclusion
/// problems, dual consensus for the allocation, then VCG payments.
pub fn run_protocol_one(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    net: &NetworkModel,
    settings: &ConsensusSettings,
) -> Result<AuctionOutcome> {
    Ok(run_protocol_with(reports, valuations, bounds, net, settings, None)?.outcome)
}

/// As [`run_protocol_one`], optionally with one node deviating.
///
/// The manager accepts the consensus allocation when every user's allocation
/// is a best response to the mean price and the allocations add up to the
/// issuance. Otherwise it clears centrally from the reports and penalises the
/// flagged users: their allocation is voided and they pay twice.
pub fn run_protocol_with(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    net: &NetworkModel,
    settings: &ConsensusSettings,
    deviation: Option<Deviation>,
) -> Result<ProtocolRun> {
    let mut hooks = deviation;
    run_protocol_hooked(reports, valuations, bounds, net, settings, &mut hooks)
}

pub fn run_protocol_hooked(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    net: &NetworkModel,
    settings: &ConsensusSettings,
    hooks: &mut dyn RoundHooks,
) -> Result<ProtocolRun> {
    let reported = valuations.reported(reports);
    let n = reports.len();
    let slots = reported.slots();

    let standalone: Vec<Vec<f64>> = reports
        .iter()
        .zip(&reported.users)
        .map(|(r, vs)| r.slots.iter().zip(vs).map(|(s, v)| v.argmax_in(s.x_min, s.x_max)).collect())
        .collect();
    let exclusions: Vec<Vec<Vec<f64>>> = if n > 1 {
        (0..n)
            .map(|i| {
                let mut x = standalone.clone();
                x[i] = vec![0.0; slots];
                x
            })
            .collect()
    } else {
        Vec::new()
    };

    let consensus = run_dual_consensus_hooked(reports, &reported, bounds, net, settings, hooks)?.require_converged()?;
    let price = DVector::from_vec(consensus.lambda_bar());
    let users = build_users(reports, &reported, settings)?;
    let flagged: Vec<usize> = users
        .iter()
        .enumerate()
        .filter(|(i, u)| {
            u.best_response(&price).is_some_and(|br| {
                br.iter()
                    .zip(&consensus.allocation[*i])
                    .any(|(a, b)| (a - b).abs() > VERIFY_TOLERANCE)
            })
        })
        .map(|(i, _)| i)
        .collect();
    let coupled = (0..slots).all(|t| {
        let total: f64 = consensus.allocation.iter().map(|x| x[t]).sum();
        (total - consensus.issuance[t]).abs() <= VERIFY_TOLERANCE
    });

    if flagged.is_empty() && coupled {
        let allocation = consensus.allocation.clone();
        let issuance: Vec<f64> = (0..slots)
            .map(|t| allocation.iter().map(|x| x[t]).sum::<f64>().clamp(0.0, bounds.y_max[t]))
            .collect();
        let welfare = welfare_value(&reported, &allocation, &issuance);
        let sol = WelfareSolution {
            allocation,
            issuance,
            prices: price.iter().copied().collect(),
            welfare,
        };
        let outcome = crate::auction::solve::assemble_outcome(sol, exclusions, &reported)?;
        return Ok(ProtocolRun {
            outcome,
            consensus,
            flagged,
            fallback: false,
        });
    }

    let mut outcome = run_auction(reports, valuations, bounds)?;
    for &i in &flagged {
        outcome.voided[i] = true;
        outcome.allocation[i].iter_mut().for_each(|x| *x = 0.0);
        outcome.payments[i].iter_mut().for_each(|p| *p *= 2.0);
    }
    Ok(ProtocolRun {
        outcome,
        consensus,
        flagged,
        fallback: true,
    })
}

/// Largest utility gain of `node` from biasing its prices by each value in
/// `biases`, relative to compliant execution. A deviation that prevents
/// convergence counts as no gain.
pub fn faithfulness_probe(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    net: &NetworkModel,
    settings: &ConsensusSettings,
    node: usize,
    biases: &[f64],
) -> Result<f64> {
    let truth = valuations.reported(reports);
    let compliant = run_protocol_with(reports, valuations, bounds, net, settings, None)?;
    let base = user_utility(&truth, &compliant.outcome.allocation, &compliant.outcome.payments, node);
    let mut gain = f64::NEG_INFINITY;
    for &bias in biases {
        let dev = Some(Deviation::new(node, bias));
        match run_protocol_with(reports, valuations, bounds, net, settings, dev) {
            Ok(run) => {
                let u = user_utility(&truth, &run.outcome.allocation, &run.outcome.payments, node);
                gain = gain.max(u - base);
            }
            Err(crate::Error::IterationLimit { .. }) => gain = gain.max(0.0),
            Err(e) => return Err(e),
        }
    }
    Ok(gain)
}
