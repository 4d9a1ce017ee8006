use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{sample_active_sets, ActiveSets, NetworkModel};
use super::nodes::{exchange, manager_step, user_step, ManagerState, UserNodeState};
use crate::auction::{DemandReport, IssuanceBounds, ValuationModel};
use crate::error::{Error, Result};
use crate::scenario_mpc::AdmmDiagnostics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSettings {
    pub q: f64,
    pub sigma: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub max_iters: usize,
}

impl Default for ConsensusSettings {
    fn default() -> Self {
        ConsensusSettings {
            q: 1.0,
            sigma: 1.0,
            eps1: 1e-8,
            eps2: 1e-8,
            max_iters: 50_000,
        }
    }
}

/// A node that adds a constant to every price it computes and sends, starting
/// at `from_round`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub node: usize,
    pub bias: f64,
    pub from_round: usize,
}

impl Deviation {
    pub fn new(node: usize, bias: f64) -> Self {
        Deviation { node, bias, from_round: 1 }
    }
}

/// Callbacks into the round loop. `tamper` runs on each online user after its
/// update and before it sends; `observe` sees the state at the end of a round.
pub trait RoundHooks {
    fn tamper(&mut self, _round: usize, _user: usize, _state: &mut UserNodeState) {}
    fn observe(&mut self, _round: usize, _active: &ActiveSets, _manager: &ManagerState, _users: &[UserNodeState]) {}
}

impl RoundHooks for Option<Deviation> {
    fn tamper(&mut self, round: usize, user: usize, state: &mut UserNodeState) {
        if let Some(d) = self.filter(|d| d.node == user && round >= d.from_round) {
            state.lambda.add_scalar_mut(d.bias);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub active_users: usize,
    pub active_edges: usize,
}

#[derive(Debug, Clone)]
pub struct ConsensusResult {
    /// `allocation[i][t]`
    pub allocation: Vec<Vec<f64>>,
    pub issuance: Vec<f64>,
    pub lambda: Vec<f64>,
    pub user_lambdas: Vec<Vec<f64>>,
    pub diagnostics: AdmmDiagnostics,
    pub trace: Vec<RoundRecord>,
    pub converged: bool,
}

impl ConsensusResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::IterationLimit {
                iterations: self.diagnostics.iterations,
                primal: self.diagnostics.primal_residuals.last().copied().unwrap_or(f64::NAN),
                dual: self.diagnostics.dual_residuals.last().copied().unwrap_or(f64::NAN),
            })
        }
    }

    /// Average of the manager's and all users' prices.
    pub fn lambda_bar(&self) -> Vec<f64> {
        let n = self.user_lambdas.len() as f64 + 1.0;
        (0..self.lambda.len())
            .map(|t| (self.lambda[t] + self.user_lambdas.iter().map(|l| l[t]).sum::<f64>()) / n)
            .collect()
    }
}

fn lambda_bar(m: &ManagerState, users: &[UserNodeState]) -> DVector<f64> {
    let sum = users.iter().fold(m.lambda.clone(), |acc, u| acc + &u.lambda);
    sum / (users.len() as f64 + 1.0)
}

pub(crate) fn build_users(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    settings: &ConsensusSettings,
) -> Result<Vec<UserNodeState>> {
    reports
        .iter()
        .zip(&valuations.users)
        .map(|(r, v)| {
            let lo = DVector::from_iterator(r.slots.len(), r.slots.iter().map(|s| s.x_min));
            let hi = DVector::from_iterator(r.slots.len(), r.slots.iter().map(|s| s.x_max));
            UserNodeState::new(v.clone(), lo, hi, settings.q, settings.sigma)
        })
        .collect()
}

/// Dual consensus ADMM for the welfare problem under `valuations` as given
/// (callers pass the reported valuations).
///
/// Round `k`: the manager updates `(μ, y, λ)`; online users update in
/// parallel; every active manager edge then averages the two prices. The run
/// stops when the consensus spread and the change of the mean price are both
/// within tolerance.
pub fn run_dual_consensus(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    net: &NetworkModel,
    settings: &ConsensusSettings,
    deviation: Option<Deviation>,
) -> Result<ConsensusResult> {
    let mut hooks = deviation;
    run_dual_consensus_hooked(reports, valuations, bounds, net, settings, &mut hooks)
}

pub fn run_dual_consensus_hooked(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    net: &NetworkModel,
    settings: &ConsensusSettings,
    hooks: &mut dyn RoundHooks,
) -> Result<ConsensusResult> {
    crate::auction::solve_welfare(reports, valuations, bounds)?;
    net.validate()?;
    if net.users() != reports.len() {
        return Err(Error::DimensionMismatch(format!(
            "network has {} users, auction has {}",
            net.users(),
            reports.len()
        )));
    }
    let slots = valuations.slots();
    let mut manager = ManagerState::new(reports.len(), slots, settings.q, settings.eps1, settings.eps2)?;
    let mut users = build_users(reports, valuations, settings)?;
    let mut diag = AdmmDiagnostics {
        eps_primal: settings.eps1,
        eps_dual: settings.eps2,
        ..Default::default()
    };
    let mut trace = Vec::new();
    let mut bar_prev = lambda_bar(&manager, &users);
    let manager_node = net.manager();
    let mut converged = false;

    for k in 1..=settings.max_iters {
        let active = sample_active_sets(net, k as u64);
        manager = manager_step(&manager, &valuations.cost, &bounds.y_max)?;
        users = users
            .par_iter()
            .zip(active.users.par_iter())
            .map(|(u, &on)| user_step(u, on))
            .collect::<Result<_>>()?;
        for (i, u) in users.iter_mut().enumerate() {
            if active.users[i] {
                hooks.tamper(k, i, u);
            }
        }
        for (i, u) in users.iter_mut().enumerate() {
            if active.has_edge(i, manager_node) {
                let sent = u.lambda.clone();
                exchange(&mut manager, u, i, &sent);
            }
        }

        hooks.observe(k, &active, &manager, &users);
        let bar = lambda_bar(&manager, &users);
        let spread = (&manager.lambda - &bar).norm_squared()
            + users.iter().map(|u| (&u.lambda - &bar).norm_squared()).sum::<f64>();
        let drift = (&bar - &bar_prev).norm_squared();
        bar_prev = bar;
        diag.record(spread, drift);
        trace.push(RoundRecord {
            iteration: k,
            primal: spread,
            dual: drift,
            active_users: active.active_count(),
            active_edges: active.edges.len(),
        });
        if k > 1 && spread <= settings.eps1 && drift <= settings.eps2 {
            converged = true;
            break;
        }
    }

    Ok(ConsensusResult {
        allocation: users.iter().map(|u| u.x.iter().copied().collect()).collect(),
        issuance: manager.y.iter().copied().collect(),
        lambda: manager.lambda.iter().copied().collect(),
        user_lambdas: users.iter().map(|u| u.lambda.iter().copied().collect()).collect(),
        diagnostics: diag,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{solve_welfare, IssuanceCost, SlotDemand, Valuation};

    fn instance() -> (Vec<DemandReport>, ValuationModel, IssuanceBounds) {
        let reports = vec![
            DemandReport { user: 0, slots: vec![SlotDemand::new(0.0, 2.0, 3.0), SlotDemand::new(0.5, 1.0, 2.0)] },
            DemandReport { user: 1, slots: vec![SlotDemand::new(0.0, 1.5, 3.0), SlotDemand::new(0.0, 2.0, 4.0)] },
            DemandReport { user: 2, slots: vec![SlotDemand::new(0.2, 1.0, 1.5), SlotDemand::new(0.0, 0.5, 1.0)] },
        ];
        let vals = ValuationModel {
            users: vec![
                vec![Valuation::new(0.0, 4.0, 1.0), Valuation::new(0.0, 2.0, 1.0)],
                vec![Valuation::new(0.0, 3.0, 1.0), Valuation::new(0.0, 2.0, 0.5)],
                vec![Valuation::new(0.0, 2.0, 1.0), Valuation::new(0.0, 1.0, 1.0)],
            ],
            cost: vec![IssuanceCost { k0: 0.1, k2: 0.25 }, IssuanceCost { k0: 0.0, k2: 0.5 }],
        };
        (reports, vals, IssuanceBounds { y_max: vec![3.0, 10.0] })
    }

    #[test]
    fn reliable_run_matches_centralised_allocation() {
        let (r, v, b) = instance();
        let res = run_dual_consensus(&r, &v, &b, &NetworkModel::reliable(3), &ConsensusSettings::default(), None)
            .unwrap()
            .require_converged()
            .unwrap();
        let sol = solve_welfare(&r, &v, &b).unwrap();
        for i in 0..3 {
            for t in 0..2 {
                assert!((res.allocation[i][t] - sol.allocation[i][t]).abs() < 1e-3);
            }
        }
        for t in 0..2 {
            assert!((res.issuance[t] - sol.issuance[t]).abs() < 1e-3);
            assert!((res.lambda[t] - sol.prices[t]).abs() < 1e-3);
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let (r, v, b) = instance();
        let net = NetworkModel::uniform(3, 0.7, 0.1, 5);
        let s = ConsensusSettings { max_iters: 300, ..Default::default() };
        let a = run_dual_consensus(&r, &v, &b, &net, &s, None).unwrap();
        let c = run_dual_consensus(&r, &v, &b, &net, &s, None).unwrap();
        assert_eq!(a.trace, c.trace);
        assert_eq!(a.allocation, c.allocation);
    }

    #[test]
    fn offline_forever_hits_the_limit() {
        let (r, v, b) = instance();
        let mut net = NetworkModel::reliable(3);
        net.alpha[1] = 0.0;
        let s = ConsensusSettings { max_iters: 200, ..Default::default() };
        let res = run_dual_consensus(&r, &v, &b, &net, &s, None).unwrap();
        assert!(!res.converged);
        assert!(matches!(res.require_converged(), Err(Error::IterationLimit { .. })));
    }
}
