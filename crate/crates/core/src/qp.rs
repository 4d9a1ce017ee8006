//! Small dense quadratic programs with simple bounds.
//!
//! `minimise ½ xᵀHx + gᵀx  subject to  lo ≤ x ≤ hi`
//!
//! Solved with a primal active-set method: each step solves the Newton system
//! on the free variables, walks to the first blocking bound, and releases the
//! bound with the most negative multiplier once the free subproblem is optimal.
//! Finite termination holds for positive definite `H`; the problems in this crate
//! have a handful of variables.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BoxQp {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

impl BoxQp {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let n = linear.len();
        if hessian.nrows() != n || hessian.ncols() != n || lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "box QP with {n} variables got hessian {}x{}, bounds {}/{}",
                hessian.nrows(),
                hessian.ncols(),
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InfeasibleProblem(format!(
                "empty box on variable {i}: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(BoxQp {
            hessian,
            linear,
            lower,
            upper,
        })
    }

    pub fn unbounded(hessian: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        let n = linear.len();
        Self::new(
            hessian,
            linear,
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * x + &self.linear
    }

    /// Largest violation of the bound-constrained KKT conditions at `x`.
    pub fn kkt_residual(&self, x: &DVector<f64>) -> f64 {
        let g = self.gradient(x);
        let mut worst = 0.0_f64;
        for i in 0..x.len() {
            let at_lo = x[i] <= self.lower[i];
            let at_hi = x[i] >= self.upper[i];
            let r = match (at_lo, at_hi) {
                (true, true) => 0.0,
                (true, false) => (-g[i]).max(0.0),
                (false, true) => g[i].max(0.0),
                (false, false) => g[i].abs(),
            };
            worst = worst.max(r);
        }
        worst
    }

    pub fn solve(&self) -> Result<DVector<f64>> {
        let n = self.linear.len();
        if n == 0 {
            return Ok(DVector::zeros(0));
        }
        let mut x = DVector::from_fn(n, |i, _| 0.0_f64.clamp(self.lower[i], self.upper[i]));
        let mut state: Vec<Bound> = (0..n)
            .map(|i| {
                if x[i] == self.lower[i] {
                    Bound::Lower
                } else if x[i] == self.upper[i] {
                    Bound::Upper
                } else {
                    Bound::Free
                }
            })
            .collect();

        let max_iter = 50 * n + 100;
        for _ in 0..max_iter {
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
            let target = self.free_minimiser(&x, &free)?;

            // walk from x towards target, stopping at the first bound hit
            let mut step = 1.0_f64;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let d = target[k] - x[i];
                if d < 0.0 && self.lower[i].is_finite() {
                    let s = (self.lower[i] - x[i]) / d;
                    if s < step {
                        step = s.max(0.0);
                        blocking = Some((i, Bound::Lower));
                    }
                } else if d > 0.0 && self.upper[i].is_finite() {
                    let s = (self.upper[i] - x[i]) / d;
                    if s < step {
                        step = s.max(0.0);
                        blocking = Some((i, Bound::Upper));
                    }
                }
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] += step * (target[k] - x[i]);
                x[i] = x[i].clamp(self.lower[i], self.upper[i]);
            }
            if let Some((i, side)) = blocking {
                state[i] = side;
                x[i] = match side {
                    Bound::Lower => self.lower[i],
                    Bound::Upper => self.upper[i],
                    Bound::Free => unreachable!(),
                };
                continue;
            }

            // free subproblem optimal; check multipliers on the active bounds
            let g = self.gradient(&x);
            let scale = 1e-12 * (1.0 + g.amax());
            let mut release = None;
            let mut worst = scale;
            for i in 0..n {
                if self.lower[i] == self.upper[i] {
                    continue;
                }
                let violation = match state[i] {
                    Bound::Lower => -g[i],
                    Bound::Upper => g[i],
                    Bound::Free => continue,
                };
                if violation > worst {
                    worst = violation;
                    release = Some(i);
                }
            }
            match release {
                Some(i) => state[i] = Bound::Free,
                None => return Ok(x),
            }
        }
        Err(Error::SubproblemFailure(format!(
            "box QP active set did not terminate in {max_iter} iterations"
        )))
    }

    fn free_minimiser(&self, x: &DVector<f64>, free: &[usize]) -> Result<DVector<f64>> {
        let m = free.len();
        if m == 0 {
            return Ok(DVector::zeros(0));
        }
        let mut h = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (a, &i) in free.iter().enumerate() {
            let mut r = -self.linear[i];
            for j in 0..x.len() {
                if !free.contains(&j) {
                    r -= self.hessian[(i, j)] * x[j];
                }
            }
            rhs[a] = r;
            for (b, &j) in free.iter().enumerate() {
                h[(a, b)] = self.hessian[(i, j)];
            }
        }
        if let Some(chol) = h.clone().cholesky() {
            return Ok(chol.solve(&rhs));
        }
        let ridge = 1e-12 * (1.0 + h.amax());
        let reg = &h + DMatrix::identity(m, m) * ridge;
        reg.cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| h.lu().solve(&rhs))
            .ok_or_else(|| Error::SubproblemFailure("singular reduced hessian".into()))
    }
}
