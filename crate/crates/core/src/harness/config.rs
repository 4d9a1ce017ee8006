use serde::{Deserialize, Serialize};

use crate::econ::{SupplyParams, TaylorParams};
use crate::error::{Error, Result};
use crate::scenario_mpc::AdmmSettings;
use crate::consensus::ConsensusSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Algorithmic,
    Collateralised,
    Taylor,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Algorithmic => "algorithmic",
            ModelKind::Collateralised => "collateralised",
            ModelKind::Taylor => "taylor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmConfig {
    pub p0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            p0: 1.0,
            mu: 0.0,
            sigma: 0.05,
            dt: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupplyConfig {
    pub s_initial: f64,
    pub s_max: f64,
    pub br_max: f64,
    pub auc_max: f64,
    pub collateral_ratio: f64,
    pub lambda_max: f64,
}

impl Default for SupplyConfig {
    fn default() -> Self {
        SupplyConfig {
            s_initial: 1_000.0,
            s_max: 10_000.0,
            br_max: 5.0,
            auc_max: 150.0,
            collateral_ratio: 1.0,
            lambda_max: 3.0,
        }
    }
}

impl SupplyConfig {
    pub fn params(&self) -> SupplyParams {
        SupplyParams {
            s_initial: self.s_initial,
            s_max: self.s_max,
            br_max: self.br_max,
            auc_max: self.auc_max,
            collateral_ratio: self.collateral_ratio,
            lambda_max: self.lambda_max,
        }
    }
}

/// Scenario MPC on the peg deviation `P − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    pub scenarios: usize,
    pub lambda: f64,
    pub rho: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub input_penalty: f64,
    pub consensus_horizon: usize,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 5,
            scenarios: 8,
            lambda: 0.5,
            rho: 1.0,
            eps: 1e-6,
            max_iter: 10_000,
            input_penalty: 2.5,
            consensus_horizon: 1,
            u_min: -0.1,
            u_max: 0.1,
        }
    }
}

impl MpcConfig {
    pub fn admm(&self) -> AdmmSettings {
        AdmmSettings {
            rho: self.rho,
            eps_primal: self.eps,
            eps_dual: self.eps,
            max_iter: self.max_iter,
            residual_balancing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub enabled: bool,
    pub window: usize,
    pub retrain_every: usize,
    pub hidden: Vec<usize>,
    pub sweeps: usize,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            enabled: true,
            window: 5,
            retrain_every: 50,
            hidden: Vec::new(),
            sweeps: 200,
            beta: 0.01,
            gamma: 1.0,
        }
    }
}

/// Bidders in the issuance auction. Quantities are fractions of the auctioned pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionConfig {
    pub users: usize,
    pub demand_mean: f64,
    pub demand_spread: f64,
    pub curvature_min: f64,
    pub curvature_max: f64,
    pub cap_factor: f64,
    pub cost_k0: f64,
    pub cost_k2: f64,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        AuctionConfig {
            users: 4,
            demand_mean: 0.4,
            demand_spread: 0.5,
            curvature_min: 0.5,
            curvature_max: 2.0,
            cap_factor: 1.5,
            cost_k0: 0.0,
            cost_k2: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub decentralised: bool,
    pub alpha: f64,
    pub p_e: f64,
    pub q: f64,
    pub sigma: f64,
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let c = ConsensusSettings::default();
        NetworkConfig {
            decentralised: true,
            alpha: 0.9,
            p_e: 0.05,
            q: c.q,
            sigma: c.sigma,
            eps: c.eps1,
            max_iters: c.max_iters,
        }
    }
}

impl NetworkConfig {
    pub fn settings(&self) -> ConsensusSettings {
        ConsensusSettings {
            q: self.q,
            sigma: self.sigma,
            eps1: self.eps,
            eps2: self.eps,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecureConfig {
    pub enabled: bool,
}

impl Default for SecureConfig {
    fn default() -> Self {
        SecureConfig { enabled: true }
    }
}

/// Taylor-rule economy plus the initial gaps and shock size of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorConfig {
    pub alpha: f64,
    pub rho: f64,
    pub zeta: f64,
    pub phi_y: f64,
    pub phi_pi: f64,
    pub i_star: f64,
    pub pi_star: f64,
    pub r_star: f64,
    pub beta_discount: f64,
    pub lambda_weight: f64,
    pub horizon: usize,
    pub allow_negative_rates: bool,
    pub y0: f64,
    pub pi0: f64,
    pub shock_sigma: f64,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        let p = TaylorParams::default();
        TaylorConfig {
            alpha: p.alpha,
            rho: p.rho,
            zeta: p.zeta,
            phi_y: p.phi_y,
            phi_pi: p.phi_pi,
            i_star: p.i_star,
            pi_star: p.pi_star,
            r_star: p.r_star,
            beta_discount: p.beta_discount,
            lambda_weight: p.lambda_weight,
            horizon: p.horizon,
            allow_negative_rates: p.allow_negative_rates,
            y0: 0.01,
            pi0: 0.01,
            shock_sigma: 0.002,
        }
    }
}

impl TaylorConfig {
    pub fn params(&self) -> TaylorParams {
        TaylorParams {
            alpha: self.alpha,
            rho: self.rho,
            zeta: self.zeta,
            phi_y: self.phi_y,
            phi_pi: self.phi_pi,
            i_star: self.i_star,
            pi_star: self.pi_star,
            r_star: self.r_star,
            beta_discount: self.beta_discount,
            lambda_weight: self.lambda_weight,
            horizon: self.horizon,
            allow_negative_rates: self.allow_negative_rates,
        }
    }
}

/// Grid of the `(φ_y, φ_π)` stability sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub phi_y_min: f64,
    pub phi_y_max: f64,
    pub phi_y_steps: usize,
    pub phi_pi_min: f64,
    pub phi_pi_max: f64,
    pub phi_pi_steps: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            phi_y_min: 0.0,
            phi_y_max: 3.0,
            phi_y_steps: 61,
            phi_pi_min: 0.0,
            phi_pi_max: 3.0,
            phi_pi_steps: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub epochs: usize,
    pub model: ModelKind,
    /// Skip the controller and let the price follow the raw process.
    pub baseline: bool,
    pub output_dir: String,
    pub gbm: GbmConfig,
    pub supply: SupplyConfig,
    pub mpc: MpcConfig,
    pub predictor: PredictorConfig,
    pub auction: AuctionConfig,
    pub network: NetworkConfig,
    pub secure: SecureConfig,
    pub taylor: TaylorConfig,
    pub stability: StabilityConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            epochs: 200,
            model: ModelKind::Algorithmic,
            baseline: false,
            output_dir: "out".into(),
            gbm: GbmConfig::default(),
            supply: SupplyConfig::default(),
            mpc: MpcConfig::default(),
            predictor: PredictorConfig::default(),
            auction: AuctionConfig::default(),
            network: NetworkConfig::default(),
            secure: SecureConfig::default(),
            taylor: TaylorConfig::default(),
            stability: StabilityConfig::default(),
        }
    }
}

struct Problems(Vec<String>);

impl Problems {
    fn check(&mut self, ok: bool, field: &str, msg: impl FnOnce() -> String) {
        if !ok {
            self.0.push(format!("{field}: {}", msg()));
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        self.check(v > 0.0 && v.is_finite(), field, || format!("{v} must be positive"));
    }

    fn non_negative(&mut self, field: &str, v: f64) {
        self.check(v >= 0.0 && v.is_finite(), field, || format!("{v} must be non-negative"));
    }

    fn unit(&mut self, field: &str, v: f64) {
        self.check((0.0..=1.0).contains(&v), field, || format!("{v} not in [0, 1]"));
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
            let line = e
                .span()
                .map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems(Vec::new());

        p.positive("gbm.p0", self.gbm.p0);
        p.check(self.gbm.mu.is_finite(), "gbm.mu", || "must be finite".into());
        p.non_negative("gbm.sigma", self.gbm.sigma);
        p.positive("gbm.dt", self.gbm.dt);

        let s = &self.supply;
        p.positive("supply.s_initial", s.s_initial);
        p.check(s.s_max >= s.s_initial, "supply.s_max", || {
            format!("{} is below s_initial {}", s.s_max, s.s_initial)
        });
        p.non_negative("supply.br_max", s.br_max);
        p.non_negative("supply.auc_max", s.auc_max);
        p.check(s.collateral_ratio >= 1.0, "supply.collateral_ratio", || {
            format!("{} must be at least 1", s.collateral_ratio)
        });
        p.check(s.lambda_max >= s.collateral_ratio, "supply.lambda_max", || {
            format!("{} is below collateral_ratio {}", s.lambda_max, s.collateral_ratio)
        });

        let m = &self.mpc;
        p.check(m.horizon >= 1, "mpc.horizon", || "must be at least 1".into());
        p.check(m.scenarios >= 2, "mpc.scenarios", || {
            format!("{} scenarios, at least 2 required", m.scenarios)
        });
        p.check(m.lambda > 0.0 && m.lambda <= 1.0, "mpc.lambda", || {
            format!("{} not in (0, 1]", m.lambda)
        });
        p.positive("mpc.rho", m.rho);
        p.positive("mpc.eps", m.eps);
        p.check(m.max_iter >= 1, "mpc.max_iter", || "must be at least 1".into());
        p.positive("mpc.input_penalty", m.input_penalty);
        p.check(
            m.consensus_horizon >= 1 && m.consensus_horizon <= m.horizon,
            "mpc.consensus_horizon",
            || format!("{} not in [1, horizon = {}]", m.consensus_horizon, m.horizon),
        );
        p.check(m.u_min <= 0.0 && m.u_max >= 0.0 && m.u_min < m.u_max, "mpc.u_min/u_max", || {
            format!("[{}, {}] must contain 0 with u_min < u_max", m.u_min, m.u_max)
        });
        p.check(m.u_min > -1.0, "mpc.u_min", || {
            format!("{} would depreciate the whole supply", m.u_min)
        });

        let pr = &self.predictor;
        p.check(pr.window >= 1, "predictor.window", || "must be at least 1".into());
        p.check(pr.retrain_every >= 1, "predictor.retrain_every", || "must be at least 1".into());
        p.check(pr.sweeps >= 1, "predictor.sweeps", || "must be at least 1".into());
        p.check(pr.hidden.iter().all(|&h| h > 0), "predictor.hidden", || {
            "layer widths must be positive".into()
        });
        p.positive("predictor.beta", pr.beta);
        p.positive("predictor.gamma", pr.gamma);

        let a = &self.auction;
        p.check(a.users >= 1, "auction.users", || "at least one bidder required".into());
        p.positive("auction.demand_mean", a.demand_mean);
        p.check((0.0..1.0).contains(&a.demand_spread), "auction.demand_spread", || {
            format!("{} not in [0, 1)", a.demand_spread)
        });
        p.positive("auction.curvature_min", a.curvature_min);
        p.check(a.curvature_max >= a.curvature_min, "auction.curvature_max", || {
            format!("{} is below curvature_min {}", a.curvature_max, a.curvature_min)
        });
        p.check(a.cap_factor >= 1.0, "auction.cap_factor", || {
            format!("{} must be at least 1", a.cap_factor)
        });
        p.non_negative("auction.cost_k0", a.cost_k0);
        p.non_negative("auction.cost_k2", a.cost_k2);

        let n = &self.network;
        p.unit("network.alpha", n.alpha);
        p.unit("network.p_e", n.p_e);
        p.positive("network.q", n.q);
        p.positive("network.sigma", n.sigma);
        p.positive("network.eps", n.eps);
        p.check(n.max_iters >= 2, "network.max_iters", || "must be at least 2".into());
        p.check(!self.secure.enabled || n.decentralised, "secure.enabled", || {
            "the verified layer needs network.decentralised = true".into()
        });

        let t = &self.taylor;
        p.check(t.beta_discount > 0.0 && t.beta_discount < 1.0, "taylor.beta_discount", || {
            format!("{} not in (0, 1)", t.beta_discount)
        });
        p.check(t.lambda_weight > 0.0 && t.lambda_weight < 1.0, "taylor.lambda_weight", || {
            format!("{} not in (0, 1)", t.lambda_weight)
        });
        p.check(t.horizon >= 1, "taylor.horizon", || "must be at least 1".into());
        p.non_negative("taylor.shock_sigma", t.shock_sigma);
        for (field, v) in [
            ("taylor.alpha", t.alpha),
            ("taylor.rho", t.rho),
            ("taylor.zeta", t.zeta),
            ("taylor.phi_y", t.phi_y),
            ("taylor.phi_pi", t.phi_pi),
            ("taylor.i_star", t.i_star),
            ("taylor.y0", t.y0),
            ("taylor.pi0", t.pi0),
        ] {
            p.check(v.is_finite(), field, || "must be finite".into());
        }

        let st = &self.stability;
        p.check(st.phi_y_steps >= 1, "stability.phi_y_steps", || "must be at least 1".into());
        p.check(st.phi_pi_steps >= 1, "stability.phi_pi_steps", || "must be at least 1".into());
        p.check(st.phi_y_min <= st.phi_y_max, "stability.phi_y_min", || {
            "range is empty".into()
        });
        p.check(st.phi_pi_min <= st.phi_pi_max, "stability.phi_pi_min", || {
            "range is empty".into()
        });

        if p.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.0))
        }
    }
}
