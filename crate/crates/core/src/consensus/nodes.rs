use nalgebra::{DMatrix, DVector};

use crate::auction::{IssuanceCost, Valuation};
use crate::error::{Error, Result};
use crate::qp::BoxQp;

/// The auction manager's iterates. `t[i]` is the manager's copy of the edge
/// average shared with user `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerState {
    pub mu: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
    pub q: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub t: Vec<DVector<f64>>,
    /// Dual increment booked on the last edge exchanges, applied next round.
    pub pending: DVector<f64>,
}

impl ManagerState {
    pub fn new(users: usize, slots: usize, q: f64, eps1: f64, eps2: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::InvalidParameter(format!("penalty q = {q} must be positive")));
        }
        if users == 0 {
            return Err(Error::InvalidParameter("consensus needs at least one user".into()));
        }
        Ok(ManagerState {
            mu: DVector::zeros(slots),
            y: DVector::zeros(slots),
            lambda: DVector::zeros(slots),
            q,
            eps1,
            eps2,
            t: vec![DVector::zeros(slots); users],
            pending: DVector::zeros(slots),
        })
    }

    pub fn users(&self) -> usize {
        self.t.len()
    }
}

/// One user's iterates and local data. The polyhedron `C x ⪯ d` is enforced
/// through the slack `r ⪰ 0` and multiplier `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserNodeState {
    pub mu: DVector<f64>,
    pub z: DVector<f64>,
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    pub t: DVector<f64>,
    pub lambda: DVector<f64>,
    pub sigma: f64,
    pub q: f64,
    pub c_mat: DMatrix<f64>,
    pub d: DVector<f64>,
    pub valuations: Vec<Valuation>,
    pub x_lower: DVector<f64>,
    pub x_upper: DVector<f64>,
    pub pending: DVector<f64>,
}

impl UserNodeState {
    /// A user whose polyhedron is the upper cap `x ⪯ x_max`.
    pub fn new(valuations: Vec<Valuation>, x_lower: DVector<f64>, x_upper: DVector<f64>, q: f64, sigma: f64) -> Result<Self> {
        let n = valuations.len();
        Self::with_polyhedron(valuations, x_lower, x_upper.clone(), DMatrix::identity(n, n), x_upper, q, sigma)
    }

    pub fn with_polyhedron(
        valuations: Vec<Valuation>,
        x_lower: DVector<f64>,
        x_upper: DVector<f64>,
        c_mat: DMatrix<f64>,
        d: DVector<f64>,
        q: f64,
        sigma: f64,
    ) -> Result<Self> {
        let n = valuations.len();
        if !(sigma > 0.0 && q > 0.0) {
            return Err(Error::InvalidParameter(format!("penalties q = {q}, σ = {sigma} must be positive")));
        }
        if x_lower.len() != n || x_upper.len() != n || c_mat.ncols() != n || c_mat.nrows() != d.len() {
            return Err(Error::DimensionMismatch(format!(
                "user data for {n} slots: bounds {}/{}, polyhedron {}x{} with {} rows of d",
                x_lower.len(),
                x_upper.len(),
                c_mat.nrows(),
                c_mat.ncols(),
                d.len()
            )));
        }
        let m = d.len();
        let x = x_lower.zip_map(&x_upper, |lo, hi| 0.0_f64.clamp(lo, hi));
        let r = (&d - &c_mat * &x).map(|v| v.max(0.0));
        Ok(UserNodeState {
            mu: DVector::zeros(n),
            z: DVector::zeros(m),
            x,
            r,
            t: DVector::zeros(n),
            lambda: DVector::zeros(n),
            sigma,
            q,
            c_mat,
            d,
            valuations,
            x_lower,
            x_upper,
            pending: DVector::zeros(n),
        })
    }

    /// The `(x, r)` proximal subproblem as a box QP over the stacked vector.
    pub fn local_qp(&self) -> Result<BoxQp> {
        let n = self.x.len();
        let m = self.d.len();
        let (q, s) = (self.q, self.sigma);
        let mut h = DMatrix::zeros(n + m, n + m);
        let mut g = DVector::zeros(n + m);
        for (k, v) in self.valuations.iter().enumerate() {
            h[(k, k)] += 2.0 * v.c + 1.0 / (2.0 * q);
            g[k] += -v.b - (self.mu[k] - 2.0 * q * self.t[k]) / (2.0 * q);
        }
        let e = &self.d - &self.z * s;
        let ctc = self.c_mat.transpose() * &self.c_mat;
        let cte = self.c_mat.transpose() * &e;
        for a in 0..n {
            for b in 0..n {
                h[(a, b)] += ctc[(a, b)] / s;
            }
            g[a] -= cte[a] / s;
            for j in 0..m {
                h[(a, n + j)] += self.c_mat[(j, a)] / s;
                h[(n + j, a)] += self.c_mat[(j, a)] / s;
            }
        }
        for j in 0..m {
            h[(n + j, n + j)] += 1.0 / s;
            g[n + j] -= e[j] / s;
        }
        let mut lo = DVector::zeros(n + m);
        let mut hi = DVector::from_element(n + m, f64::INFINITY);
        lo.rows_mut(0, n).copy_from(&self.x_lower);
        hi.rows_mut(0, n).copy_from(&self.x_upper);
        BoxQp::new(h, g, lo, hi)
    }

    /// Best response to a price under this user's valuation, ignoring the
    /// polyhedron. `None` for flat valuations.
    pub fn best_response(&self, price: &DVector<f64>) -> Option<DVector<f64>> {
        let mut out = DVector::zeros(self.x.len());
        for (k, v) in self.valuations.iter().enumerate() {
            if v.c <= 0.0 {
                return None;
            }
            out[k] = ((v.b - price[k]) / (2.0 * v.c)).clamp(self.x_lower[k], self.x_upper[k]);
        }
        Some(out)
    }
}

/// Manager update: dual aggregate, proximal issuance step (closed form for the
/// quadratic cost over the box), then the consensus price.
pub fn manager_step(m: &ManagerState, cost: &[IssuanceCost], y_max: &[f64]) -> Result<ManagerState> {
    let slots = m.lambda.len();
    if cost.len() != slots || y_max.len() != slots {
        return Err(Error::DimensionMismatch(format!(
            "manager has {slots} slots, cost {} and caps {}",
            cost.len(),
            y_max.len()
        )));
    }
    let n = m.users() as f64;
    let q = m.q;
    let mu = &m.mu + &m.pending;
    let s = m.t.iter().fold(DVector::zeros(slots), |acc, t| acc + t);
    let y = DVector::from_fn(slots, |k, _| {
        (-(mu[k] - 2.0 * q * s[k]) / (1.0 + 4.0 * n * q * cost[k].k2)).clamp(0.0, y_max[k])
    });
    let lambda = (-&y / q - &mu / q + &s * 2.0) / (2.0 * n);
    Ok(ManagerState {
        mu,
        y,
        lambda,
        pending: DVector::zeros(slots),
        ..m.clone()
    })
}

/// User update; an offline user keeps every variable.
pub fn user_step(u: &UserNodeState, active: bool) -> Result<UserNodeState> {
    if !active {
        return Ok(u.clone());
    }
    let n = u.x.len();
    let mut next = u.clone();
    next.mu = &u.mu + &u.pending;
    next.pending = DVector::zeros(n);
    let sol = next.local_qp()?.solve()?;
    next.x = sol.rows(0, n).into_owned();
    next.r = sol.rows(n, u.d.len()).into_owned();
    next.z = &u.z + (&u.c_mat * &next.x + &next.r - &u.d) / u.sigma;
    next.lambda = &next.x / (2.0 * u.q) - &next.mu / (2.0 * u.q) + &u.t;
    Ok(next)
}

/// Exchange over an active manager edge: both ends set the edge average and
/// book their dual increments `2q(λ − t)`, which sum to zero.
pub fn exchange(m: &mut ManagerState, u: &mut UserNodeState, i: usize, sent: &DVector<f64>) {
    let manager_lambda = m.lambda.clone();
    m.absorb(i, sent);
    u.absorb(&manager_lambda, sent);
}

impl ManagerState {
    /// Manager's half of an edge exchange with user `i`, who sent `sent`.
    pub fn absorb(&mut self, i: usize, sent: &DVector<f64>) {
        let t = (&self.lambda + sent) * 0.5;
        self.pending += (&self.lambda - &t) * (2.0 * self.q);
        self.t[i] = t;
    }
}

impl UserNodeState {
    /// User's half of an edge exchange.
    pub fn absorb(&mut self, manager_lambda: &DVector<f64>, sent: &DVector<f64>) {
        let t = (manager_lambda + sent) * 0.5;
        self.pending += (sent - &t) * (2.0 * self.q);
        self.t = t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user() -> UserNodeState {
        UserNodeState::new(
            vec![Valuation::new(0.0, 3.0, 0.5)],
            DVector::from_element(1, 0.0),
            DVector::from_element(1, 4.0),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_prices_leave_manager_dual_at_zero() {
        let m = ManagerState::new(3, 2, 1.0, 1e-8, 1e-8).unwrap();
        let cost = [IssuanceCost { k0: 0.0, k2: 0.5 }; 2];
        let next = manager_step(&m, &cost, &[5.0, 5.0]).unwrap();
        assert_eq!(next.mu, DVector::zeros(2));
    }

    #[test]
    fn issuance_step_matches_projection_and_price_formula() {
        let mut m = ManagerState::new(2, 1, 0.7, 1e-8, 1e-8).unwrap();
        m.mu[0] = -1.3;
        m.pending[0] = 0.2;
        m.t = vec![DVector::from_element(1, 0.4), DVector::from_element(1, 0.9)];
        let cost = [IssuanceCost { k0: 0.0, k2: 0.3 }];
        let next = manager_step(&m, &cost, &[10.0]).unwrap();
        let (mu, s, q, n) = (-1.1, 1.3, 0.7, 2.0);
        // grid minimisation of c(y) + q/(4N)·(−y/q − μ/q + 2s)² over [0, 10]
        let f = |y: f64| 0.3 * y * y + q / (4.0 * n) * (-y / q - mu / q + 2.0 * s).powi(2);
        let ygrid = (0..=1_000_000).map(|k| k as f64 * 1e-5).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
        assert!((next.y[0] - ygrid).abs() < 1e-5);
        let lam = (-next.y[0] / q - mu / q + 2.0 * s) / (2.0 * n);
        assert!((next.lambda[0] - lam).abs() < 1e-12);
        let capped = manager_step(&m, &cost, &[0.5]).unwrap();
        assert_eq!(capped.y[0], 0.5);
    }

    #[test]
    fn offline_user_is_unchanged() {
        let mut u = user();
        u.pending[0] = 1.0;
        assert_eq!(user_step(&u, false).unwrap(), u);
    }

    #[test]
    fn equal_prices_give_that_average() {
        let mut m = ManagerState::new(1, 1, 1.0, 1e-8, 1e-8).unwrap();
        let mut u = user();
        m.lambda[0] = 0.8;
        exchange(&mut m, &mut u, 0, &DVector::from_element(1, 0.8));
        assert_eq!(u.t[0], 0.8);
        assert_eq!(m.pending[0] + u.pending[0], 0.0);
    }

    #[test]
    fn local_subproblem_matches_grid() {
        let mut u = user();
        u.mu[0] = 0.6;
        u.t[0] = 0.3;
        u.z[0] = 0.2;
        let sol = u.local_qp().unwrap().solve().unwrap();
        let f = |x: f64, r: f64| {
            -u.valuations[0].value(x) + 0.25 * (x - 0.6 + 0.6).powi(2) + 0.5 * (x + r - 4.0 + 0.2).powi(2)
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for a in 0..=400 {
            for b in 0..=400 {
                let (x, r) = (a as f64 * 0.01, b as f64 * 0.01);
                let v = f(x, r);
                if v < best.0 {
                    best = (v, x, r);
                }
            }
        }
        assert!(f(sol[0], sol[1]) <= best.0 + 1e-9);
        assert!((sol[0] - best.1).abs() < 0.02);
    }
}
