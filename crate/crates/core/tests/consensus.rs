use monpol_core::auction::*;
use monpol_core::consensus::*;

fn instance() -> AuctionInstance {
    AuctionInstance {
        reports: vec![
            DemandReport { user: 0, slots: vec![SlotDemand::new(0.0, 2.0, 3.0)] },
            DemandReport { user: 1, slots: vec![SlotDemand::new(0.0, 1.5, 3.0)] },
            DemandReport { user: 2, slots: vec![SlotDemand::new(0.2, 1.0, 1.5)] },
        ],
        valuations: ValuationModel {
            users: vec![
                vec![Valuation::new(0.0, 4.0, 1.0)],
                vec![Valuation::new(0.0, 3.0, 1.0)],
                vec![Valuation::new(0.0, 2.0, 1.0)],
            ],
            cost: vec![IssuanceCost { k0: 0.1, k2: 0.25 }],
        },
        bounds: IssuanceBounds { y_max: vec![3.0] },
    }
}

fn protocol(inst: &AuctionInstance, net: &NetworkModel) -> AuctionOutcome {
    run_protocol_one(&inst.reports, &inst.valuations, &inst.bounds, net, &ConsensusSettings::default()).unwrap()
}

#[test]
fn reliable_protocol_matches_central_payments() {
    let inst = instance();
    let central = inst.run().unwrap();
    let dec = protocol(&inst, &NetworkModel::reliable(3));
    for i in 0..3 {
        assert!((dec.payments[i][0] - central.payments[i][0]).abs() < 1e-3);
        assert!((dec.allocation[i][0] - central.allocation[i][0]).abs() < 1e-3);
    }
}

#[test]
fn degraded_network_reaches_the_same_allocation() {
    let inst = instance();
    let central = inst.run().unwrap();
    let mut mean_err = 0.0;
    let seeds = 5;
    for seed in 0..seeds {
        let dec = protocol(&inst, &NetworkModel::uniform(3, 0.7, 0.1, seed));
        let err = (0..3)
            .map(|i| (dec.allocation[i][0] - central.allocation[i][0]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "seed {seed}: error {err}");
        mean_err += err / seeds as f64;
    }
    assert!(mean_err < 1e-2);
}

#[test]
fn single_user_pays_the_cost() {
    let inst = AuctionInstance {
        reports: vec![DemandReport { user: 0, slots: vec![SlotDemand::new(0.0, 2.0, 5.0)] }],
        valuations: ValuationModel {
            users: vec![vec![Valuation::new(0.0, 4.0, 1.0)]],
            cost: vec![IssuanceCost { k0: 0.0, k2: 0.0 }],
        },
        bounds: IssuanceBounds { y_max: vec![10.0] },
    };
    let net = NetworkModel::reliable(1);
    let res = run_dual_consensus(&inst.reports, &inst.valuations, &inst.bounds, &net, &ConsensusSettings::default(), None)
        .unwrap()
        .require_converged()
        .unwrap();
    assert!((res.allocation[0][0] - 2.0).abs() < 1e-3);
    assert!(res.diagnostics.iterations < 500);
    let out = protocol(&inst, &net);
    let cost = inst.valuations.cost[0].value(out.issuance[0]);
    assert!((out.payments[0][0] - cost).abs() < 1e-12);
}

#[test]
fn residual_decay_is_at_least_sublinear() {
    let inst = instance();
    let net = NetworkModel::uniform(3, 0.8, 0.1, 3);
    let res = run_dual_consensus(&inst.reports, &inst.valuations, &inst.bounds, &net, &ConsensusSettings::default(), None).unwrap();
    let r = &res.diagnostics.primal_residuals;
    let mut pts = Vec::new();
    let mut k = 4;
    while 2 * k <= r.len() {
        let mean: f64 = r[k..2 * k].iter().sum::<f64>() / k as f64;
        pts.push(((k as f64).ln(), mean.ln()));
        k *= 2;
    }
    assert!(pts.len() >= 3, "only {} windows", pts.len());
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope <= -0.8, "slope {slope}");
}

#[test]
fn biased_prices_never_pay_off() {
    let inst = instance();
    let biases = [-0.5, -0.1, -0.02, 0.02, 0.1, 0.5];
    for node in 0..3 {
        let gain = faithfulness_probe(
            &inst.reports,
            &inst.valuations,
            &inst.bounds,
            &NetworkModel::reliable(3),
            &ConsensusSettings::default(),
            node,
            &biases,
        )
        .unwrap();
        assert!(gain <= 1e-6, "node {node} gains {gain}");
    }
}

#[test]
fn large_bias_is_detected() {
    let inst = instance();
    let run = run_protocol_with(
        &inst.reports,
        &inst.valuations,
        &inst.bounds,
        &NetworkModel::reliable(3),
        &ConsensusSettings::default(),
        Some(Deviation::new(1, 0.5)),
    )
    .unwrap();
    assert!(run.fallback);
    assert_eq!(run.flagged, vec![1]);
    assert!(run.outcome.voided[1]);
}
