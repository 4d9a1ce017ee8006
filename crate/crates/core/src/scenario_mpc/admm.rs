use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use super::ocp::{stacked_prediction, OcpSolution, ScenarioOcp};
use super::system::simulate_scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub residual_balancing: bool,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        AdmmSettings {
            rho: 1.0,
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            max_iter: 10_000,
            residual_balancing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdmmDiagnostics {
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub iterations: usize,
}

impl AdmmDiagnostics {
    pub fn new(settings: &AdmmSettings) -> Self {
        AdmmDiagnostics {
            eps_primal: settings.eps_primal,
            eps_dual: settings.eps_dual,
            ..Default::default()
        }
    }

    pub fn record(&mut self, primal: f64, dual: f64) {
        self.primal_residuals.push(primal);
        self.dual_residuals.push(dual);
        self.iterations += 1;
    }
}

/// Stopping test on the latest recorded residual pair. Thresholds are inclusive.
pub fn check_stopping(diag: &AdmmDiagnostics) -> bool {
    match (diag.primal_residuals.last(), diag.dual_residuals.last()) {
        (Some(&p), Some(&d)) => p <= diag.eps_primal && d <= diag.eps_dual,
        _ => false,
    }
}

/// Two-block form of the scenario problem.
///
/// `y1 = (ǔ, x, z, ψ̌, μ̌)` carries the dynamics and epigraph constraints,
/// `y2 = (u, ψ, μ)` the input box, non-anticipativity and the quadratic cost.
/// Residual rows are ordered `(μ̌ − 𝟙ᵀψ/S, μ̌ − μ, ǔ − u, ψ̌ − ψ)`.
#[derive(Debug, Clone)]
pub struct AdmmSplit {
    pub ocp: ScenarioOcp,
    pub rho: f64,
    pub u_check: DVector<f64>,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub psi_check: DVector<f64>,
    pub mu_check: f64,
    pub u: DVector<f64>,
    pub psi: DVector<f64>,
    pub mu: f64,
    pub eta: DVector<f64>,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub c_tilde: DMatrix<f64>,
    pub w_tilde: DVector<f64>,
    pub l_tilde: DMatrix<f64>,
    phi_g: DVector<f64>,
    phi_c: Vec<f64>,
    psi_mu: LU<f64, Dyn, Dyn>,
}

fn block_diag(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * copies, c * copies);
    for i in 0..copies {
        out.view_mut((i * r, i * c), (r, c)).copy_from(block);
    }
    out
}

fn psi_mu_system(s: usize, lt: f64, rho: f64) -> LU<f64, Dyn, Dyn> {
    let sf = s as f64;
    let mut k = DMatrix::zeros(s + 1, s + 1);
    for i in 0..s {
        for j in 0..s {
            k[(i, j)] = rho / (sf * sf);
        }
        k[(i, i)] += 2.0 * lt + rho;
        k[(i, s)] = -2.0 * lt;
        k[(s, i)] = -2.0 * lt;
    }
    k[(s, s)] = 2.0 * sf * lt + rho;
    k.lu()
}

pub fn build_admm_split(ocp: &ScenarioOcp, rho: f64) -> Result<AdmmSplit> {
    ocp.validate()?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty rho = {rho} must be positive")));
    }
    let s = ocp.scenario_count();
    let (n, nx, nu, nz) = (ocp.horizon, ocp.sys.nx(), ocp.sys.nu(), ocp.sys.nz());
    let n_u = s * n * nu;
    let n_x = s * n * nx;
    let n_z = s * n * nz;
    let n_y1 = n_u + n_x + n_z + s + 1;
    let n_y2 = n_u + s + 1;
    let n_r = 2 + n_u + s;
    let lt = ocp.lambda_tilde();
    let sf = s as f64;

    let mut g = DVector::zeros(n_y1);
    g[n_y1 - 1] = ocp.lambda_tradeoff;

    let mut h = DMatrix::zeros(n_y2, n_y2);
    for i in 0..n_u {
        h[(i, i)] = ocp.input_penalty / sf;
    }
    for j in 0..s {
        h[(n_u + j, n_u + j)] = lt;
        h[(n_u + j, n_y2 - 1)] = -lt;
        h[(n_y2 - 1, n_u + j)] = -lt;
    }
    h[(n_y2 - 1, n_y2 - 1)] = sf * lt;

    let mut m1 = DMatrix::zeros(n_r, n_y1);
    let mut m2 = DMatrix::zeros(n_r, n_y2);
    m1[(0, n_y1 - 1)] = 1.0;
    m1[(1, n_y1 - 1)] = 1.0;
    for j in 0..s {
        m2[(0, n_u + j)] = -1.0 / sf;
    }
    m2[(1, n_y2 - 1)] = -1.0;
    for i in 0..n_u {
        m1[(2 + i, i)] = 1.0;
        m2[(2 + i, i)] = -1.0;
    }
    for j in 0..s {
        m1[(2 + n_u + j, n_u + n_x + n_z + j)] = 1.0;
        m2[(2 + n_u + j, n_u + j)] = -1.0;
    }

    let (a_bar, b_bar) = stacked_prediction(&ocp.sys, n);
    let a_tilde = block_diag(&a_bar, s);
    let b_tilde = block_diag(&b_bar, s);
    let c_tilde = block_diag(&block_diag(&ocp.sys.c_z, n), s);
    let mut w_tilde = DVector::zeros(n_x);
    let ax0 = &ocp.sys.a * &ocp.x0;
    for (j, w) in ocp.noise.iter().enumerate() {
        for (k, wk) in w.iter().enumerate() {
            let mut v = wk.clone();
            if k == 0 {
                v += &ax0;
            }
            w_tilde.rows_mut((j * n + k) * nx, nx).copy_from(&v);
        }
    }
    let m = ocp.consensus_horizon;
    let mut l_tilde = DMatrix::zeros((s - 1) * m * nu, n_u);
    for j in 0..s - 1 {
        for i in 0..m * nu {
            l_tilde[(j * m * nu + i, j * n * nu + i)] = 1.0;
            l_tilde[(j * m * nu + i, (j + 1) * n * nu + i)] = -1.0;
        }
    }

    let (phi_g, phi_c) = ocp.cost_coefficients();

    let mut u = DVector::zeros(n_u);
    for j in 0..s {
        for k in 0..n {
            for c in 0..nu {
                u[(j * n + k) * nu + c] = 0.0_f64.clamp(ocp.lower_bound(k, c), ocp.upper_bound(k, c));
            }
        }
    }
    let psi = DVector::from_fn(s, |j, _| {
        phi_c[j] + phi_g.dot(&u.rows(j * n * nu, n * nu))
    });
    let mu = psi.mean();

    let mut split = AdmmSplit {
        ocp: ocp.clone(),
        rho,
        u_check: u.clone(),
        x: DVector::zeros(n_x),
        z: DVector::zeros(n_z),
        psi_check: psi.clone(),
        mu_check: mu,
        u,
        psi,
        mu,
        eta: DVector::zeros(n_r),
        g,
        h,
        m1,
        m2,
        a_tilde,
        b_tilde,
        c_tilde,
        w_tilde,
        l_tilde,
        phi_g,
        phi_c,
        psi_mu: psi_mu_system(s, lt, rho),
    };
    split.refresh_states()?;
    Ok(split)
}

impl AdmmSplit {
    fn dims(&self) -> (usize, usize, usize) {
        (
            self.ocp.scenario_count(),
            self.ocp.horizon,
            self.ocp.sys.nu(),
        )
    }

    pub fn y1(&self) -> DVector<f64> {
        let parts = [
            self.u_check.as_slice(),
            self.x.as_slice(),
            self.z.as_slice(),
            self.psi_check.as_slice(),
            &[self.mu_check],
        ];
        DVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.concat().into_iter())
    }

    pub fn y2(&self) -> DVector<f64> {
        let parts = [self.u.as_slice(), self.psi.as_slice(), &[self.mu]];
        DVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.concat().into_iter())
    }

    pub fn f1(&self) -> f64 {
        self.g.dot(&self.y1())
    }

    pub fn f2(&self) -> f64 {
        let y2 = self.y2();
        y2.dot(&(&self.h * &y2))
    }

    /// `M1·y1 + M2·y2`, evaluated blockwise.
    pub fn residual(&self) -> DVector<f64> {
        let (s, _, _) = self.dims();
        let n_u = self.u.len();
        let mut r = DVector::zeros(2 + n_u + s);
        r[0] = self.mu_check - self.psi.sum() / s as f64;
        r[1] = self.mu_check - self.mu;
        r.rows_mut(2, n_u).copy_from(&(&self.u_check - &self.u));
        r.rows_mut(2 + n_u, s).copy_from(&(&self.psi_check - &self.psi));
        r
    }

    /// Norm of `M1ᵀM2·Δy2`.
    pub fn dual_change_norm(&self, du: &DVector<f64>, dpsi: &DVector<f64>, dmu: f64) -> f64 {
        let s = dpsi.len() as f64;
        let mean_row = dpsi.sum() / s + dmu;
        (du.norm_squared() + dpsi.norm_squared() + mean_row * mean_row).sqrt()
    }

    fn refresh_states(&mut self) -> Result<()> {
        let (s, n, nu) = self.dims();
        let (nx, nz) = (self.ocp.sys.nx(), self.ocp.sys.nz());
        let ocp = &self.ocp;
        let u_check = &self.u_check;
        let rolled: Vec<_> = (0..s)
            .into_par_iter()
            .map(|j| {
                let inputs: Vec<_> = (0..n)
                    .map(|k| u_check.rows((j * n + k) * nu, nu).into_owned())
                    .collect();
                simulate_scenario(&ocp.sys, &ocp.x0, &inputs, &ocp.noise[j])
            })
            .collect();
        for (j, r) in rolled.into_iter().enumerate() {
            let (xs, zs) = r?;
            for k in 0..n {
                self.x.rows_mut((j * n + k) * nx, nx).copy_from(&xs[k]);
                self.z.rows_mut((j * n + k) * nz, nz).copy_from(&zs[k]);
            }
        }
        Ok(())
    }

    fn update_y1(&mut self) -> Result<()> {
        let (s, n, nu) = self.dims();
        let sf = s as f64;
        let n_u = self.u.len();
        let block = n * nu;

        let a1 = self.psi.sum() / sf - self.eta[0];
        let a2 = self.mu - self.eta[1];
        self.mu_check = 0.5 * (a1 + a2) - self.ocp.lambda_tradeoff / (2.0 * self.rho);

        // each scenario projects onto its epigraph halfspace ψ̌ ≥ c_j + gᵀǔ
        let g = &self.phi_g;
        let gg = g.norm_squared() + 1.0;
        let eta_u = self.eta.rows(2, n_u);
        let eta_psi = self.eta.rows(2 + n_u, s);
        let (u, psi, c) = (&self.u, &self.psi, &self.phi_c);
        let projected: Vec<(DVector<f64>, f64)> = (0..s)
            .into_par_iter()
            .map(|j| {
                let mut pu = u.rows(j * block, block) - eta_u.rows(j * block, block);
                let mut pp = psi[j] - eta_psi[j];
                let viol = g.dot(&pu) - pp + c[j];
                if viol > 0.0 {
                    let t = viol / gg;
                    pu -= g * t;
                    pp += t;
                }
                (pu, pp)
            })
            .collect();
        for (j, (pu, pp)) in projected.into_iter().enumerate() {
            self.u_check.rows_mut(j * block, block).copy_from(&pu);
            self.psi_check[j] = pp;
        }
        self.refresh_states()
    }

    fn update_y2(&mut self) -> Result<()> {
        let (s, n, nu) = self.dims();
        let sf = s as f64;
        let n_u = self.u.len();
        let r = self.ocp.input_penalty;
        let rho = self.rho;
        let v = &self.u_check + self.eta.rows(2, n_u);
        for k in 0..n {
            for c in 0..nu {
                let (lo, hi) = (self.ocp.lower_bound(k, c), self.ocp.upper_bound(k, c));
                let idx = |j: usize| (j * n + k) * nu + c;
                if self.ocp.is_shared(k) {
                    let total: f64 = (0..s).map(|j| v[idx(j)]).sum();
                    let val = (rho * total / (2.0 * r + sf * rho)).clamp(lo, hi);
                    for j in 0..s {
                        self.u[idx(j)] = val;
                    }
                } else {
                    for j in 0..s {
                        self.u[idx(j)] = (rho * v[idx(j)] / (2.0 * r / sf + rho)).clamp(lo, hi);
                    }
                }
            }
        }
        let alpha1 = self.mu_check + self.eta[0];
        let alpha2 = self.mu_check + self.eta[1];
        let mut rhs = DVector::zeros(s + 1);
        for j in 0..s {
            rhs[j] = rho * alpha1 / sf + rho * (self.psi_check[j] + self.eta[2 + n_u + j]);
        }
        rhs[s] = rho * alpha2;
        let sol = self
            .psi_mu
            .solve(&rhs)
            .ok_or_else(|| Error::SubproblemFailure("singular (ψ, μ) system".into()))?;
        self.psi.copy_from(&sol.rows(0, s));
        self.mu = sol[s];
        Ok(())
    }

    /// One pass of the recursions; returns `(‖r_p‖, ρ‖M1ᵀM2Δy2‖)`.
    pub fn iterate(&mut self) -> Result<(f64, f64)> {
        self.update_y1()?;
        let (u_old, psi_old, mu_old) = (self.u.clone(), self.psi.clone(), self.mu);
        self.update_y2()?;
        let r = self.residual();
        self.eta += &r;
        let dual = self.rho * self.dual_change_norm(&(&self.u - u_old), &(&self.psi - psi_old), self.mu - mu_old);
        Ok((r.norm(), dual))
    }

    /// Rescales the penalty when one residual dominates the other by 10×.
    pub fn balance(&mut self, primal: f64, dual: f64) {
        let factor = if primal > 10.0 * dual {
            2.0
        } else if dual > 10.0 * primal {
            0.5
        } else {
            return;
        };
        self.rho *= factor;
        self.eta /= factor;
        self.psi_mu = psi_mu_system(self.ocp.scenario_count(), self.ocp.lambda_tilde(), self.rho);
    }

    pub fn solution(&self) -> OcpSolution {
        OcpSolution {
            u: self.u.clone(),
            psi: self.psi.clone(),
            mu: self.mu,
            objective: self.ocp.objective(&self.u, &self.psi, self.mu),
        }
    }
}

pub fn admm_iterate(split: &AdmmSplit) -> Result<AdmmSplit> {
    let mut next = split.clone();
    next.iterate()?;
    Ok(next)
}

/// Runs the recursions until the stopping test passes or the cap is hit.
/// The diagnostics are returned in both cases; the flag reports convergence.
pub fn run_admm(split: &mut AdmmSplit, settings: &AdmmSettings) -> Result<(AdmmDiagnostics, bool)> {
    let mut diag = AdmmDiagnostics::new(settings);
    for it in 0..settings.max_iter {
        let (primal, dual) = split.iterate()?;
        diag.record(primal, dual);
        if check_stopping(&diag) {
            return Ok((diag, true));
        }
        if settings.residual_balancing && (it + 1) % 10 == 0 {
            split.balance(primal, dual);
        }
    }
    Ok((diag, false))
}

pub fn solve_ocp_admm(ocp: &ScenarioOcp, settings: &AdmmSettings) -> Result<(OcpSolution, AdmmDiagnostics)> {
    let mut split = build_admm_split(ocp, settings.rho)?;
    let (diag, converged) = run_admm(&mut split, settings)?;
    if !converged {
        return Err(Error::IterationLimit {
            iterations: diag.iterations,
            primal: *diag.primal_residuals.last().unwrap_or(&f64::NAN),
            dual: *diag.dual_residuals.last().unwrap_or(&f64::NAN),
        });
    }
    Ok((split.solution(), diag))
}
