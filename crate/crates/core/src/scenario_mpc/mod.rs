//! Scenario-based mean-variance MPC and its ADMM decomposition.

mod admm;
mod io;
mod ocp;
mod system;

pub use admm::{
    admm_iterate, build_admm_split, check_stopping, run_admm, solve_ocp_admm, AdmmDiagnostics,
    AdmmSettings, AdmmSplit,
};
pub use ocp::{solve_ocp_centralized, OcpSolution, ScenarioOcp};
pub use system::{exchange_rate_cost, mean_variance_objective, simulate_scenario, LinearSystem};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn instance(seed: u64, nx: usize, n: usize, s: usize, m: usize) -> ScenarioOcp {
        let mut rng = stream(seed, "ocp-unit");
        let a = DMatrix::from_fn(nx, nx, |i, j| {
            if i == j {
                rng.random_range(0.5..0.95)
            } else {
                rng.random_range(-0.2..0.2)
            }
        });
        let b = DMatrix::from_fn(nx, 1, |_, _| rng.random_range(-1.0..1.0));
        let c_z = DMatrix::from_fn(1, nx, |_, _| rng.random_range(-1.0..1.0));
        let sys = LinearSystem::new(a, b, DMatrix::identity(nx, nx), c_z).unwrap();
        let noise = (0..s)
            .map(|_| {
                (0..n)
                    .map(|_| DVector::from_fn(nx, |_, _| rng.random_range(-0.3..0.3)))
                    .collect()
            })
            .collect();
        ScenarioOcp {
            sys,
            x0: DVector::from_fn(nx, |_, _| rng.random_range(-1.0..1.0)),
            horizon: n,
            noise,
            lambda_tradeoff: 0.5,
            u_lower: vec![],
            u_upper: vec![],
            consensus_horizon: m,
            input_penalty: 0.5,
        }
        .with_constant_box(DVector::from_element(1, -0.5), DVector::from_element(1, 0.5))
    }

    #[test]
    fn cost_coefficients_match_simulation() {
        let ocp = instance(1, 3, 4, 3, 2);
        let (g, c) = ocp.cost_coefficients();
        let mut rng = stream(2, "u");
        let u = DVector::from_fn(ocp.input_len(), |_, _| rng.random_range(-1.0..1.0));
        for j in 0..3 {
            let block = u.rows(j * 4, 4);
            let direct = ocp.scenario_cost(&u, j).unwrap();
            assert!((c[j] + g.dot(&block) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn split_objective_matches_rewritten_form() {
        let ocp = instance(3, 2, 3, 4, 3);
        let mut split = build_admm_split(&ocp, 1.0).unwrap();
        let mut rng = stream(4, "point");
        split.u = DVector::from_fn(split.u.len(), |_, _| rng.random_range(-1.0..1.0));
        split.psi = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
        split.mu = split.psi.mean();
        split.mu_check = split.mu;
        let lhs = split.f1() + split.f2();
        let rhs = ocp.rewritten_objective(&split.u, &split.psi, split.mu);
        let direct = ocp.objective(&split.u, &split.psi, split.mu);
        assert!((lhs - rhs).abs() < 1e-10);
        assert!((lhs - direct).abs() < 1e-10);
    }

    #[test]
    fn structured_residuals_match_dense_matrices() {
        let ocp = instance(5, 2, 3, 3, 2);
        let mut split = build_admm_split(&ocp, 1.3).unwrap();
        for _ in 0..3 {
            split.iterate().unwrap();
        }
        let dense = &split.m1 * split.y1() + &split.m2 * split.y2();
        assert!((dense - split.residual()).amax() < 1e-12);
        let mut rng = stream(6, "dy");
        let dy2 = DVector::from_fn(split.y2().len(), |_, _| rng.random_range(-1.0..1.0));
        let n_u = split.u.len();
        let dense = (split.m1.transpose() * &split.m2 * &dy2).norm();
        let structured = split.dual_change_norm(
            &dy2.rows(0, n_u).into_owned(),
            &dy2.rows(n_u, 3).into_owned(),
            dy2[n_u + 3],
        );
        assert!((dense - structured).abs() < 1e-12);
    }

    #[test]
    fn iterates_satisfy_stacked_dynamics() {
        let ocp = instance(7, 3, 3, 2, 1);
        let mut split = build_admm_split(&ocp, 1.0).unwrap();
        split.iterate().unwrap();
        let dyn_res = &split.a_tilde * &split.x + &split.b_tilde * &split.u_check + &split.w_tilde;
        assert!(dyn_res.amax() < 1e-12);
        assert!((&split.c_tilde * &split.x - &split.z).amax() < 1e-12);
        let phi = |j: usize| ocp.scenario_cost(&split.u_check, j).unwrap();
        for j in 0..2 {
            assert!(split.psi_check[j] >= phi(j) - 1e-12);
        }
    }

    #[test]
    fn consensus_operator_detects_shared_moves() {
        let ocp = instance(8, 1, 4, 3, 2);
        let split = build_admm_split(&ocp, 1.0).unwrap();
        let mut u = DVector::zeros(12);
        for j in 0..3 {
            u[j * 4] = 0.3;
            u[j * 4 + 1] = -0.1;
            u[j * 4 + 2] = j as f64;
        }
        assert!((&split.l_tilde * &u).amax() == 0.0);
        u[4 + 1] = 0.2;
        assert!((&split.l_tilde * &u).amax() > 0.0);
    }

    #[test]
    fn single_scenario_is_rejected() {
        let mut ocp = instance(9, 1, 2, 2, 1);
        ocp.noise.truncate(1);
        assert!(matches!(
            build_admm_split(&ocp, 1.0),
            Err(crate::Error::DegenerateScenarioSet(1))
        ));
    }

    #[test]
    fn admm_matches_centralized() {
        let ocp = instance(10, 2, 4, 5, 2);
        let reference = solve_ocp_centralized(&ocp).unwrap();
        let (sol, diag) = solve_ocp_admm(&ocp, &AdmmSettings::default()).unwrap();
        assert!(diag.iterations < 10_000);
        assert!((&sol.u - &reference.u).amax() < 1e-4);
        assert!(sol.anticipativity_gap(&ocp) <= 1e-8);
    }

    #[test]
    fn kkt_point_is_a_fixed_point() {
        let ocp = instance(11, 1, 3, 3, 3);
        let settings = AdmmSettings {
            eps_primal: 1e-10,
            eps_dual: 1e-10,
            max_iter: 100_000,
            ..AdmmSettings::default()
        };
        let mut split = build_admm_split(&ocp, 1.0).unwrap();
        let (_, ok) = run_admm(&mut split, &settings).unwrap();
        assert!(ok);
        let eta = split.eta.clone();
        let (p, d) = split.iterate().unwrap();
        assert!(p < 1e-9 && d < 1e-9);
        assert!((split.eta - eta).amax() < 1e-9);
    }

    #[test]
    fn primal_residual_decays() {
        let ocp = instance(12, 3, 5, 8, 5);
        let mut split = build_admm_split(&ocp, 1.0).unwrap();
        let res: Vec<f64> = (0..500).map(|_| split.iterate().unwrap().0).collect();
        assert!(res[499] < 1e-3 * res[0].max(1e-3));
    }

    #[test]
    fn stopping_rule_boundaries() {
        let mut d = AdmmDiagnostics::new(&AdmmSettings::default());
        assert!(!check_stopping(&d));
        d.record(0.0, 0.0);
        assert!(check_stopping(&d));
        d.record(2e-6, 0.0);
        assert!(!check_stopping(&d));
        d.record(1e-6, 1e-6);
        assert!(check_stopping(&d));
    }

    #[test]
    fn identical_scenarios_have_zero_variance() {
        let mut ocp = instance(13, 2, 3, 4, 3);
        let first = ocp.noise[0].clone();
        for w in ocp.noise.iter_mut() {
            *w = first.clone();
        }
        let sol = solve_ocp_centralized(&ocp).unwrap();
        assert!(ocp.variance_component(&sol.psi, sol.mu) < 1e-8);
    }

    #[test]
    fn one_step_scalar_matches_grid() {
        let sys = LinearSystem::fully_observed(
            DMatrix::from_element(1, 1, 0.8),
            DMatrix::from_element(1, 1, -1.0),
        )
        .unwrap();
        let ocp = ScenarioOcp {
            sys,
            x0: DVector::from_element(1, 0.4),
            horizon: 1,
            noise: vec![
                vec![DVector::from_element(1, 0.2)],
                vec![DVector::from_element(1, -0.1)],
                vec![DVector::from_element(1, 0.05)],
            ],
            lambda_tradeoff: 0.6,
            u_lower: vec![],
            u_upper: vec![],
            consensus_horizon: 1,
            input_penalty: 1.5,
        }
        .with_constant_box(DVector::from_element(1, -1.0), DVector::from_element(1, 1.0));
        let sol = solve_ocp_centralized(&ocp).unwrap();
        // the best lift of ψ above φ is the same for every u, so ψ = φ ranks u correctly
        let (g, c) = ocp.cost_coefficients();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=200_000 {
            let u = -1.0 + i as f64 * 1e-5;
            let psi: Vec<f64> = c.iter().map(|cj| cj + g[0] * u).collect();
            let f = mean_variance_objective(&psi, 0.6).unwrap() + 1.5 * u * u;
            if f < best.1 {
                best = (u, f);
            }
        }
        assert!((sol.u[0] - best.0).abs() < 1e-4, "{} vs {}", sol.u[0], best.0);
    }

    #[test]
    fn linear_cost_optimum_is_a_vertex() {
        let mut ocp = instance(14, 2, 3, 3, 1);
        ocp.lambda_tradeoff = 1.0;
        ocp.input_penalty = 0.0;
        let sol = solve_ocp_centralized(&ocp).unwrap();
        let (g, _) = ocp.cost_coefficients();
        for j in 0..3 {
            for k in 0..3 {
                let v = sol.u[j * 3 + k];
                let vertex = if g[k] > 0.0 { -0.5 } else { 0.5 };
                assert!((v - vertex).abs() < 1e-6, "u = {v}, g = {}", g[k]);
            }
        }
    }

    #[test]
    fn toml_round_trip() {
        let ocp = instance(15, 2, 2, 3, 1);
        let text = ocp.to_toml_string();
        let back = ScenarioOcp::from_toml_str(&text).unwrap();
        assert_eq!(back, ocp);
    }
}
