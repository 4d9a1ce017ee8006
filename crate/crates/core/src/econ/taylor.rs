use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::BoxQp;

/// Taylor-rule economy in deviation variables `x = (y − y*, π − π*)`, `u = i − i*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorParams {
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
}

impl Default for TaylorParams {
    fn default() -> Self {
        TaylorParams {
            alpha: 0.3,
            rho: 0.9,
            zeta: 0.5,
            phi_y: 0.5,
            phi_pi: 1.5,
            i_star: 0.04,
            pi_star: 0.02,
            r_star: 0.02,
            beta_discount: 0.95,
            lambda_weight: 0.5,
            horizon: 8,
            allow_negative_rates: false,
        }
    }
}

impl TaylorParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.beta_discount > 0.0 && self.beta_discount < 1.0) {
            problems.push(format!("beta_discount = {} not in (0, 1)", self.beta_discount));
        }
        if !(self.lambda_weight > 0.0 && self.lambda_weight < 1.0) {
            problems.push(format!("lambda_weight = {} not in (0, 1)", self.lambda_weight));
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn a(&self) -> Matrix2<f64> {
        Matrix2::new(self.rho, self.zeta, self.alpha, 1.0)
    }

    pub fn b(&self) -> Vector2<f64> {
        Vector2::new(-self.zeta, 0.0)
    }

    pub fn q(&self) -> Matrix2<f64> {
        Matrix2::new(1.0 - self.lambda_weight, 0.0, 0.0, self.lambda_weight)
    }

    /// Rate prescribed by the Taylor rule for levels `(y, π)` with `y* = 0`.
    pub fn rule_rate(&self, y: f64, pi: f64) -> f64 {
        self.phi_y * y + self.phi_pi * (pi - self.pi_star) + self.pi_star + self.r_star
    }

    /// The three Jury expressions; the loop is stable iff all are positive.
    pub fn jury_margins(&self) -> [f64; 3] {
        let k = self.alpha * self.zeta * (self.phi_pi - 1.0);
        [
            2.0 + 2.0 * self.rho - 2.0 * self.zeta * self.phi_y + k,
            1.0 - self.rho + self.zeta * self.phi_y - k,
            k,
        ]
    }
}

pub fn taylor_closed_loop_matrix(params: &TaylorParams) -> Matrix2<f64> {
    let TaylorParams {
        alpha,
        rho,
        zeta,
        phi_y,
        phi_pi,
        ..
    } = *params;
    Matrix2::new(rho - zeta * phi_y, zeta - zeta * phi_pi, alpha, 1.0)
}

pub fn is_closed_loop_stable(params: &TaylorParams) -> bool {
    params.jury_margins().iter().all(|&m| m > 0.0)
}

/// Weights and boundary data of the finite-horizon rate problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorHorizon {
    pub r2: f64,
    pub s2: f64,
    pub q_terminal: Matrix2<f64>,
    /// Rate change applied in the previous period, entering `δu₀`.
    pub u_prev: f64,
    /// Number of free moves; later inputs repeat the last free one.
    pub move_blocks: usize,
}

impl TaylorHorizon {
    pub fn for_params(params: &TaylorParams) -> Self {
        TaylorHorizon {
            r2: 0.1,
            s2: 0.0,
            q_terminal: params.q(),
            u_prev: 0.0,
            move_blocks: params.horizon,
        }
    }
}

/// Minimises the discounted quadratic cost over the rate sequence and returns all `N` moves.
pub fn taylor_mpc_solve(
    params: &TaylorParams,
    x0: Vector2<f64>,
    horizon: &TaylorHorizon,
) -> Result<Vec<f64>> {
    params.validate()?;
    let n = params.horizon;
    let m = horizon.move_blocks.clamp(1, n);
    if horizon.r2 < 0.0 || horizon.s2 < 0.0 {
        return Err(Error::InvalidParameter("R² and S² must be non-negative".into()));
    }
    let a = params.a();
    let b = params.b();
    let q = params.q();
    let beta = params.beta_discount;

    // u_k = v_{min(k, m-1)}
    let block = |k: usize| k.min(m - 1);

    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut g = DVector::<f64>::zeros(m);

    // x̂_k = c_k + F_k v, accumulated forwards
    let mut c = x0;
    let mut f = DMatrix::<f64>::zeros(2, m);
    let mut weight = 1.0;
    for k in 0..=n {
        let qk = if k == n { horizon.q_terminal } else { q };
        if k > 0 {
            let qd = DMatrix::from_column_slice(2, 2, qk.as_slice());
            let cd = DVector::from_column_slice(c.as_slice());
            h += (f.transpose() * &qd * &f) * weight;
            g += (f.transpose() * (&qd * &cd)) * weight;
        }
        if k == n {
            break;
        }
        let j = block(k);
        h[(j, j)] += weight * horizon.r2;
        if horizon.s2 > 0.0 {
            // δu_k = u_k − u_{k−1}
            if k == 0 {
                h[(j, j)] += weight * horizon.s2;
                g[j] -= weight * horizon.s2 * horizon.u_prev;
            } else {
                let i = block(k - 1);
                if i != j {
                    h[(j, j)] += weight * horizon.s2;
                    h[(i, i)] += weight * horizon.s2;
                    h[(i, j)] -= weight * horizon.s2;
                    h[(j, i)] -= weight * horizon.s2;
                }
            }
        }
        let ad = DMatrix::from_column_slice(2, 2, a.as_slice());
        let mut next_f = &ad * &f;
        next_f[(0, j)] += b[0];
        next_f[(1, j)] += b[1];
        f = next_f;
        c = a * c;
        weight *= beta;
    }

    let lower = if params.allow_negative_rates {
        f64::NEG_INFINITY
    } else {
        -params.i_star
    };
    let qp = BoxQp::new(
        h * 2.0,
        g * 2.0,
        DVector::from_element(m, lower),
        DVector::from_element(m, f64::INFINITY),
    )?;
    let v = qp.solve()?;
    Ok((0..n).map(|k| v[block(k)]).collect())
}

/// Objective value of a full rate sequence; used to cross-check the solver.
pub fn taylor_mpc_objective(
    params: &TaylorParams,
    x0: Vector2<f64>,
    horizon: &TaylorHorizon,
    u: &[f64],
) -> f64 {
    let a = params.a();
    let b = params.b();
    let q = params.q();
    let mut x = x0;
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut prev = horizon.u_prev;
    for &uk in u {
        let du = uk - prev;
        total += weight * (x.dot(&(q * x)) + horizon.r2 * uk * uk + horizon.s2 * du * du);
        x = a * x + b * uk;
        prev = uk;
        weight *= params.beta_discount;
    }
    total + weight * x.dot(&(horizon.q_terminal * x))
}
