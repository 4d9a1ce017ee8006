use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use nalgebra::{DMatrix, DVector};

use super::system::{simulate_scenario, LinearSystem};
use crate::error::{Error, Result};

/// Scenario-based mean-variance control problem over a horizon of `N` steps.
///
/// Decision vectors stack inputs scenario-major: entry `(j·N + k)·n_u + c` is
/// component `c` of input `k` in scenario `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOcp {
    pub sys: LinearSystem,
    pub x0: DVector<f64>,
    pub horizon: usize,
    /// `noise[j][k]` is the disturbance entering step `k` of scenario `j`.
    pub noise: Vec<Vec<DVector<f64>>>,
    pub lambda_tradeoff: f64,
    pub u_lower: Vec<DVector<f64>>,
    pub u_upper: Vec<DVector<f64>>,
    /// Inputs `0..M` must agree across scenarios.
    pub consensus_horizon: usize,
    /// Weight `r` of the input regulariser `(r/S)·Σ_j ‖u^j‖²`.
    pub input_penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    pub u: DVector<f64>,
    pub psi: DVector<f64>,
    pub mu: f64,
    pub objective: f64,
}

impl OcpSolution {
    pub fn scenario_input(&self, ocp: &ScenarioOcp, j: usize, k: usize) -> DVector<f64> {
        let nu = ocp.sys.nu();
        let at = (j * ocp.horizon + k) * nu;
        self.u.rows(at, nu).into_owned()
    }

    /// The input applied under receding-horizon control.
    pub fn first_input(&self, ocp: &ScenarioOcp) -> DVector<f64> {
        self.scenario_input(ocp, 0, 0)
    }

    /// Largest disagreement between scenarios over the consensus horizon.
    pub fn anticipativity_gap(&self, ocp: &ScenarioOcp) -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..ocp.consensus_horizon {
            let first = self.scenario_input(ocp, 0, k);
            for j in 1..ocp.scenario_count() {
                worst = worst.max((self.scenario_input(ocp, j, k) - &first).amax());
            }
        }
        worst
    }
}

impl ScenarioOcp {
    pub fn scenario_count(&self) -> usize {
        self.noise.len()
    }

    pub fn input_len(&self) -> usize {
        self.scenario_count() * self.horizon * self.sys.nu()
    }

    /// `λ̃ = (1−λ)/(S−1)`.
    pub fn lambda_tilde(&self) -> f64 {
        (1.0 - self.lambda_tradeoff) / (self.scenario_count() as f64 - 1.0)
    }

    pub fn with_constant_box(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.u_lower = vec![lower; self.horizon];
        self.u_upper = vec![upper; self.horizon];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scenario_count();
        if s < 2 {
            return Err(Error::DegenerateScenarioSet(s));
        }
        let (nx, nu, n) = (self.sys.nx(), self.sys.nu(), self.horizon);
        let mut problems = Vec::new();
        if n == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if self.x0.len() != nx {
            problems.push(format!("x0 has length {}, expected {nx}", self.x0.len()));
        }
        for (j, w) in self.noise.iter().enumerate() {
            if w.len() != n || w.iter().any(|wk| wk.len() != nx) {
                problems.push(format!("scenario {j} noise is not {n}x{nx}"));
            }
        }
        if self.u_lower.len() != n || self.u_upper.len() != n {
            problems.push(format!("input bounds need {n} rows"));
        } else if self
            .u_lower
            .iter()
            .chain(&self.u_upper)
            .any(|b| b.len() != nu)
        {
            problems.push(format!("input bound rows need {nu} entries"));
        }
        if !problems.is_empty() {
            return Err(Error::DimensionMismatch(problems.join("; ")));
        }
        if !(0.0..=1.0).contains(&self.lambda_tradeoff) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} outside [0, 1]",
                self.lambda_tradeoff
            )));
        }
        if self.consensus_horizon == 0 || self.consensus_horizon > n {
            return Err(Error::InvalidParameter(format!(
                "consensus horizon {} outside [1, {n}]",
                self.consensus_horizon
            )));
        }
        if !(self.input_penalty >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "input penalty {} is negative",
                self.input_penalty
            )));
        }
        for k in 0..n {
            for c in 0..nu {
                if !(self.u_lower[k][c] <= self.u_upper[k][c]) {
                    return Err(Error::InfeasibleProblem(format!(
                        "empty input box at step {k}, component {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn lower_bound(&self, k: usize, c: usize) -> f64 {
        self.u_lower[k][c]
    }

    pub fn upper_bound(&self, k: usize, c: usize) -> f64 {
        self.u_upper[k][c]
    }

    /// Affine form of the exchange-rate functional `φ^j = c_j + gᵀu^j`,
    /// with `φ = 𝟙ᵀz` summed over the horizon. `g` is shared by all scenarios.
    pub fn cost_coefficients(&self) -> (DVector<f64>, Vec<f64>) {
        let (n, nu) = (self.horizon, self.sys.nu());
        let h = self.sys.c_z.transpose() * DVector::from_element(self.sys.nz(), 1.0);
        // q_l = Σ_{k=l+1..N} (A^{k−1−l})ᵀ h
        let mut q = vec![DVector::zeros(self.sys.nx()); n];
        q[n - 1] = h.clone();
        for l in (0..n - 1).rev() {
            q[l] = &h + self.sys.a.transpose() * &q[l + 1];
        }
        let mut g = DVector::zeros(n * nu);
        for l in 0..n {
            g.rows_mut(l * nu, nu).copy_from(&(self.sys.b.transpose() * &q[l]));
        }
        let base = q[0].dot(&(&self.sys.a * &self.x0));
        let c = self
            .noise
            .iter()
            .map(|w| base + (0..n).map(|l| q[l].dot(&w[l])).sum::<f64>())
            .collect();
        (g, c)
    }

    /// `φ^j` evaluated by simulating scenario `j` under its input block.
    pub fn scenario_cost(&self, u: &DVector<f64>, j: usize) -> Result<f64> {
        let (n, nu) = (self.horizon, self.sys.nu());
        let inputs: Vec<_> = (0..n)
            .map(|k| u.rows((j * n + k) * nu, nu).into_owned())
            .collect();
        let (_, zs) = simulate_scenario(&self.sys, &self.x0, &inputs, &self.noise[j])?;
        Ok(zs.iter().map(|z| z.sum()).sum())
    }

    pub fn regulariser(&self, u: &DVector<f64>) -> f64 {
        self.input_penalty / self.scenario_count() as f64 * u.norm_squared()
    }

    /// `λμ + λ̃ Σ(ψ^j − μ)² + (r/S)‖u‖²`.
    pub fn objective(&self, u: &DVector<f64>, psi: &DVector<f64>, mu: f64) -> f64 {
        let lt = self.lambda_tilde();
        self.lambda_tradeoff * mu
            + lt * psi.iter().map(|p| (p - mu).powi(2)).sum::<f64>()
            + self.regulariser(u)
    }

    /// The expanded quadratic `λμ + λ̃ψᵀψ + Sλ̃μ² − 2λ̃μ𝟙ᵀψ` plus the regulariser.
    pub fn rewritten_objective(&self, u: &DVector<f64>, psi: &DVector<f64>, mu: f64) -> f64 {
        let lt = self.lambda_tilde();
        let s = self.scenario_count() as f64;
        self.lambda_tradeoff * mu + lt * psi.norm_squared() + s * lt * mu * mu
            - 2.0 * lt * mu * psi.sum()
            + self.regulariser(u)
    }

    /// The sample-variance part `Σ(ψ^j − μ)²/(S−1)` of a solution.
    pub fn variance_component(&self, psi: &DVector<f64>, mu: f64) -> f64 {
        psi.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / (self.scenario_count() as f64 - 1.0)
    }

    pub fn is_shared(&self, k: usize) -> bool {
        k < self.consensus_horizon
    }
}

/// Reference interior-point solve of the full scenario problem.
pub fn solve_ocp_centralized(ocp: &ScenarioOcp) -> Result<OcpSolution> {
    ocp.validate()?;
    let s = ocp.scenario_count();
    let (n, nu) = (ocp.horizon, ocp.sys.nu());
    let nu_tot = ocp.input_len();
    let (g, c) = ocp.cost_coefficients();
    let psi0 = nu_tot;
    let mu_idx = nu_tot + s;
    let nvar = mu_idx + 1;
    let lt = ocp.lambda_tilde();

    let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    let reg = 2.0 * ocp.input_penalty / s as f64;
    if reg > 0.0 {
        for i in 0..nu_tot {
            pi.push(i);
            pj.push(i);
            pv.push(reg);
        }
    }
    if lt > 0.0 {
        for j in 0..s {
            pi.push(psi0 + j);
            pj.push(psi0 + j);
            pv.push(2.0 * lt);
            pi.push(psi0 + j);
            pj.push(mu_idx);
            pv.push(-2.0 * lt);
        }
        pi.push(mu_idx);
        pj.push(mu_idx);
        pv.push(2.0 * s as f64 * lt);
    }
    let p = CscMatrix::new_from_triplets(nvar, nvar, pi, pj, pv);
    let mut q = vec![0.0; nvar];
    q[mu_idx] = ocp.lambda_tradeoff;

    let (mut ai, mut aj, mut av, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut row = 0;
    let push = |r: usize, col: usize, v: f64, ai: &mut Vec<usize>, aj: &mut Vec<usize>, av: &mut Vec<f64>| {
        ai.push(r);
        aj.push(col);
        av.push(v);
    };
    // equalities: non-anticipativity and the mean
    for j in 1..s {
        for k in 0..ocp.consensus_horizon {
            for cc in 0..nu {
                push(row, k * nu + cc, 1.0, &mut ai, &mut aj, &mut av);
                push(row, (j * n + k) * nu + cc, -1.0, &mut ai, &mut aj, &mut av);
                b.push(0.0);
                row += 1;
            }
        }
    }
    push(row, mu_idx, 1.0, &mut ai, &mut aj, &mut av);
    for j in 0..s {
        push(row, psi0 + j, -1.0 / s as f64, &mut ai, &mut aj, &mut av);
    }
    b.push(0.0);
    row += 1;
    let n_eq = row;
    // epigraph: gᵀu^j − ψ^j ≤ −c_j
    for j in 0..s {
        for i in 0..n * nu {
            if g[i] != 0.0 {
                push(row, j * n * nu + i, g[i], &mut ai, &mut aj, &mut av);
            }
        }
        push(row, psi0 + j, -1.0, &mut ai, &mut aj, &mut av);
        b.push(-c[j]);
        row += 1;
    }
    // input box
    for j in 0..s {
        for k in 0..n {
            for cc in 0..nu {
                let col = (j * n + k) * nu + cc;
                let (lo, hi) = (ocp.lower_bound(k, cc), ocp.upper_bound(k, cc));
                if hi.is_finite() {
                    push(row, col, 1.0, &mut ai, &mut aj, &mut av);
                    b.push(hi);
                    row += 1;
                }
                if lo.is_finite() {
                    push(row, col, -1.0, &mut ai, &mut aj, &mut av);
                    b.push(-lo);
                    row += 1;
                }
            }
        }
    }
    let a = CscMatrix::new_from_triplets(row, nvar, ai, aj, av);
    let cones: Vec<SupportedConeT<f64>> = vec![ZeroConeT(n_eq), NonnegativeConeT(row - n_eq)];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        max_iter: 400,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::SubproblemFailure(format!("interior-point setup: {e}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::InfeasibleProblem("scenario problem is infeasible".into()))
        }
        other => {
            return Err(Error::SubproblemFailure(format!(
                "interior-point solve ended with {other:?}"
            )))
        }
    }
    let x = &solver.solution.x;
    let mut u = DVector::from_column_slice(&x[..nu_tot]);
    // snap the shared block onto scenario 0 and into the box
    for j in 0..s {
        for k in 0..n {
            for cc in 0..nu {
                let at = (j * n + k) * nu + cc;
                let src = if ocp.is_shared(k) { k * nu + cc } else { at };
                u[at] = x[src].clamp(ocp.lower_bound(k, cc), ocp.upper_bound(k, cc));
            }
        }
    }
    let psi = DVector::from_column_slice(&x[psi0..psi0 + s]);
    let mu = psi.mean();
    let objective = ocp.objective(&u, &psi, mu);
    Ok(OcpSolution {
        u,
        psi,
        mu,
        objective,
    })
}

/// Dense `(A, B)` products raised for the stacked dynamics of one scenario.
pub(crate) fn stacked_prediction(sys: &LinearSystem, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nx, nu) = (sys.nx(), sys.nu());
    // Ā from the dynamics: rows k: A x_k − x_{k+1}
    let mut a_bar = DMatrix::zeros(n * nx, n * nx);
    for k in 0..n {
        for i in 0..nx {
            a_bar[(k * nx + i, k * nx + i)] = -1.0;
        }
        if k > 0 {
            a_bar
                .view_mut((k * nx, (k - 1) * nx), (nx, nx))
                .copy_from(&sys.a);
        }
    }
    let mut b_bar = DMatrix::zeros(n * nx, n * nu);
    for k in 0..n {
        b_bar.view_mut((k * nx, k * nu), (nx, nu)).copy_from(&sys.b);
    }
    (a_bar, b_bar)
}
