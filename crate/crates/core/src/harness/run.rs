use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::artifacts::{EpochRow, RunArtifacts, Verification};
use super::config::{ExperimentConfig, ModelKind};
use crate::auction::{
    run_auction, AuctionInstance, AuctionOutcome, DemandReport, IssuanceBounds, IssuanceCost, SlotDemand,
    Valuation, ValuationModel,
};
use crate::consensus::{run_protocol_with, NetworkModel};
use crate::deep_predict::ReturnPredictor;
use crate::econ::{
    adjust_controls, gbm_step, taylor_mpc_objective, taylor_mpc_solve, Bid, SupplyState, TaylorHorizon,
};
use crate::error::{Error, Result, Stage};
use crate::scenario_mpc::{solve_ocp_admm, LinearSystem, ScenarioOcp};
use crate::secure::{execute_committed, CommittedInputs};
use crate::seed::{derive_seed, stream};

/// Smallest auctioned pool worth clearing, in coins.
const MIN_POOL: f64 = 1e-9;

/// Random single-slot auction with quantities measured as fractions of the pool.
pub fn sample_auction(cfg: &ExperimentConfig, rng: &mut impl Rng) -> AuctionInstance {
    let a = &cfg.auction;
    let mut reports = Vec::with_capacity(a.users);
    let mut users = Vec::with_capacity(a.users);
    for user in 0..a.users {
        let c = if a.curvature_max > a.curvature_min {
            rng.random_range(a.curvature_min..a.curvature_max)
        } else {
            a.curvature_min
        };
        let spread = a.demand_spread;
        let demand = a.demand_mean * (1.0 + spread * rng.random_range(-1.0..=1.0));
        users.push(vec![Valuation::new(0.0, 2.0 * c * demand, c)]);
        reports.push(DemandReport {
            user,
            slots: vec![SlotDemand::new(0.0, demand, a.cap_factor * demand)],
        });
    }
    AuctionInstance {
        reports,
        valuations: ValuationModel {
            users,
            cost: vec![IssuanceCost {
                k0: a.cost_k0,
                k2: a.cost_k2,
            }],
        },
        bounds: IssuanceBounds { y_max: vec![1.0] },
    }
}

struct Cleared {
    outcome: AuctionOutcome,
    iterations: usize,
    verification: Verification,
}

fn clear_auction(cfg: &ExperimentConfig, inst: &AuctionInstance, epoch: usize) -> Result<Cleared> {
    if !cfg.network.decentralised {
        let outcome = run_auction(&inst.reports, &inst.valuations, &inst.bounds)
            .map_err(|e| e.at_epoch(epoch, Stage::Auction))?;
        return Ok(Cleared {
            outcome,
            iterations: 0,
            verification: Verification::Central,
        });
    }
    let n = &cfg.network;
    let seed = derive_seed(cfg.seed, &format!("network/{epoch}"));
    let net = NetworkModel::uniform(inst.reports.len(), n.alpha, n.p_e, seed);
    let settings = n.settings();
    if cfg.secure.enabled {
        let inputs = CommittedInputs {
            instance: inst.clone(),
            net,
            settings,
            seed: derive_seed(cfg.seed, &format!("secure/{epoch}")),
        };
        let run = execute_committed(&inputs, &[]).map_err(|e| e.at_epoch(epoch, Stage::Secure))?;
        let verification = if run.report.is_clean() {
            Verification::Verified
        } else {
            Verification::Rejected
        };
        return Ok(Cleared {
            iterations: run.protocol.consensus.diagnostics.iterations,
            outcome: run.outcome,
            verification,
        });
    }
    let run = run_protocol_with(&inst.reports, &inst.valuations, &inst.bounds, &net, &settings, None)
        .map_err(|e| e.at_epoch(epoch, Stage::Consensus))?;
    Ok(Cleared {
        iterations: run.consensus.diagnostics.iterations,
        verification: if run.fallback {
            Verification::Fallback
        } else {
            Verification::Consensus
        },
        outcome: run.outcome,
    })
}

/// Scenario problem on the peg deviation `x = P − 1`. An issued fraction `u`
/// of the supply moves the price by `−P·u`; `z` is the deviation weighted by
/// its current value, the linearisation of `½x²` at `x₀`.
fn peg_problem(cfg: &ExperimentConfig, price: f64, drift: f64, rng: &mut impl Rng) -> Result<ScenarioOcp> {
    let m = &cfg.mpc;
    let x0 = price - 1.0;
    let sys = LinearSystem::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, -price),
        DMatrix::identity(1, 1),
        DMatrix::from_element(1, 1, x0),
    )?;
    let step = cfg.gbm.sigma * cfg.gbm.dt.sqrt();
    let noise = (0..m.scenarios)
        .map(|_| {
            (0..m.horizon)
                .map(|_| {
                    let xi: f64 = rng.sample(StandardNormal);
                    DVector::from_element(1, price * (drift + step * xi))
                })
                .collect()
        })
        .collect();
    Ok(ScenarioOcp {
        sys,
        x0: DVector::from_element(1, x0),
        horizon: m.horizon,
        noise,
        lambda_tradeoff: m.lambda,
        u_lower: vec![],
        u_upper: vec![],
        consensus_horizon: m.consensus_horizon,
        input_penalty: m.input_penalty,
    }
    .with_constant_box(DVector::from_element(1, m.u_min), DVector::from_element(1, m.u_max)))
}

fn coin_run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let controlled = !cfg.baseline;
    let mut price_rng = stream(cfg.seed, "price");
    let mut state = SupplyState::genesis(cfg.supply.params()).map_err(|e| e.at_epoch(0, Stage::Econ))?;
    let mut s_eff = state.s_outstanding;
    let mut price = cfg.gbm.p0;
    let mut demand = price * s_eff;
    let (mut br_prev, mut auc_prev, mut p_prev) = (state.br_max, state.auc_max, price);

    let mut predictor = ReturnPredictor::new(cfg.predictor.window);
    predictor.hidden = cfg.predictor.hidden.clone();
    predictor.sweeps = cfg.predictor.sweeps;
    predictor.beta = cfg.predictor.beta;
    predictor.gamma = cfg.predictor.gamma;
    let mut returns: Vec<f64> = Vec::with_capacity(cfg.epochs);

    let mut rows = Vec::with_capacity(cfg.epochs);
    for t in 0..cfg.epochs {
        let econ = |e: Error| e.at_epoch(t, Stage::Econ);
        let (br, auc) = if t == 0 {
            (state.br_max, state.auc_max)
        } else {
            let mut controls = adjust_controls(&state, br_prev, auc_prev, price, p_prev).map_err(econ)?;
            if cfg.model == ModelKind::Algorithmic {
                controls.collateral_ratio = state.collateral_ratio;
            }
            state = state.next_epoch().with_controls(&controls).map_err(econ)?;
            (controls.br, controls.auc)
        };

        let mut drift = 0.0;
        if controlled && cfg.predictor.enabled {
            if t % cfg.predictor.retrain_every == 0 && returns.len() > 2 * (cfg.predictor.window + 1) {
                let mut rng = stream(cfg.seed, &format!("predictor/{t}"));
                predictor.fit(&returns, &mut rng).map_err(|e| e.at_epoch(t, Stage::Predict))?;
            }
            let step = cfg.gbm.sigma * cfg.gbm.dt.sqrt();
            drift = predictor.predict(&returns).map_or(0.0, |r| r.clamp(-step, step));
        }

        let (control, objective) = if controlled {
            let mut rng = stream(cfg.seed, &format!("scenarios/{t}"));
            let mpc = |e: Error| e.at_epoch(t, Stage::Mpc);
            let ocp = peg_problem(cfg, price, drift, &mut rng).map_err(mpc)?;
            let (sol, _) = solve_ocp_admm(&ocp, &cfg.mpc.admm()).map_err(mpc)?;
            (sol.first_input(&ocp)[0], sol.objective)
        } else {
            (0.0, 0.0)
        };

        let mut payments = 0.0;
        let mut iterations = 0;
        let mut verification = Verification::Skipped;
        let target = control * s_eff;
        if target > 0.0 {
            let reward = target.min(br).min(state.s_unissued).max(0.0);
            state = state.step_block_reward(reward).map_err(econ)?;
            let pool = (target - reward).min(auc).min(state.s_unissued);
            let mut issued = reward;
            if pool > MIN_POOL {
                let inst = sample_auction(cfg, &mut stream(cfg.seed, &format!("auction/{t}")));
                let cleared = clear_auction(cfg, &inst, t)?;
                let total: f64 = cleared.outcome.allocation.iter().map(|x| x[0]).sum();
                let scale = if total > 1.0 { pool / total } else { pool };
                let bids: Vec<Bid> = cleared
                    .outcome
                    .allocation
                    .iter()
                    .zip(&inst.reports)
                    .map(|(x, r)| Bid::new(x[0] * scale, r.slots[0].x_min * pool, r.slots[0].x_max * pool))
                    .collect();
                let coins = bids.iter().map(|b| b.coins).sum::<f64>().min(pool);
                state = state.apply_auction_issuance(coins, &bids).map_err(econ)?;
                issued += coins;
                payments = cleared.outcome.total_payments() * pool;
                iterations = cleared.iterations;
                verification = cleared.verification;
            }
            s_eff += issued;
        } else if target < 0.0 {
            s_eff += target;
        }

        rows.push(EpochRow {
            epoch: t,
            price,
            s_max: state.s_max,
            s_outstanding: state.s_outstanding,
            s_effective: s_eff,
            br,
            auc,
            collateral_ratio: state.collateral_ratio,
            control,
            mpc_objective: objective,
            auction_payments: payments,
            consensus_iterations: iterations,
            verification,
        });

        let xi: f64 = price_rng.sample(StandardNormal);
        demand = gbm_step(demand, cfg.gbm.mu, cfg.gbm.sigma, cfg.gbm.dt, xi);
        let next = demand / s_eff;
        returns.push(next / price - 1.0);
        p_prev = price;
        price = next;
        br_prev = br;
        auc_prev = auc;
    }
    Ok(RunArtifacts::new(rows, 1.0))
}

/// Output and inflation gaps under rate shocks; the price column carries the inflation level.
fn taylor_run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let params = cfg.taylor.params();
    params.validate().map_err(|e| e.at_epoch(0, Stage::Econ))?;
    let state = SupplyState::genesis(cfg.supply.params()).map_err(|e| e.at_epoch(0, Stage::Econ))?;
    let mut rng = stream(cfg.seed, "price");
    let mut x = Vector2::new(cfg.taylor.y0, cfg.taylor.pi0);
    let mut horizon = TaylorHorizon::for_params(&params);
    let mut rows = Vec::with_capacity(cfg.epochs);
    for t in 0..cfg.epochs {
        let (control, objective) = if cfg.baseline {
            (0.0, 0.0)
        } else {
            let u = taylor_mpc_solve(&params, x, &horizon).map_err(|e| e.at_epoch(t, Stage::Mpc))?;
            (u[0], taylor_mpc_objective(&params, x, &horizon, &u))
        };
        horizon.u_prev = control;
        rows.push(EpochRow {
            epoch: t,
            price: params.pi_star + x[1],
            s_max: state.s_max,
            s_outstanding: state.s_outstanding,
            s_effective: state.s_outstanding,
            br: 0.0,
            auc: 0.0,
            collateral_ratio: state.collateral_ratio,
            control,
            mpc_objective: objective,
            auction_payments: 0.0,
            consensus_iterations: 0,
            verification: Verification::Skipped,
        });
        let e_y: f64 = rng.sample(StandardNormal);
        let e_pi: f64 = rng.sample(StandardNormal);
        x = params.a() * x + params.b() * control + Vector2::new(e_y, e_pi) * cfg.taylor.shock_sigma;
    }
    Ok(RunArtifacts::new(rows, params.pi_star))
}

/// Runs the configured economy for `epochs` epochs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    match cfg.model {
        ModelKind::Algorithmic | ModelKind::Collateralised => coin_run(cfg),
        ModelKind::Taylor => taylor_run(cfg),
    }
}
