use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `x⁺ = Ax + Bu + w`, `y = C_y x + v`, `z = C_z x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c_y: DMatrix<f64>,
    pub c_z: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c_y: DMatrix<f64>,
        c_z: DMatrix<f64>,
    ) -> Result<Self> {
        let nx = a.nrows();
        let mut problems = Vec::new();
        if a.ncols() != nx {
            problems.push(format!("A is {}x{}, expected square", a.nrows(), a.ncols()));
        }
        if b.nrows() != nx {
            problems.push(format!("B has {} rows, expected {nx}", b.nrows()));
        }
        if c_y.ncols() != nx {
            problems.push(format!("C_y has {} columns, expected {nx}", c_y.ncols()));
        }
        if c_z.ncols() != nx {
            problems.push(format!("C_z has {} columns, expected {nx}", c_z.ncols()));
        }
        if nx == 0 || b.ncols() == 0 {
            problems.push("system needs at least one state and one input".into());
        }
        if !problems.is_empty() {
            return Err(Error::DimensionMismatch(problems.join("; ")));
        }
        Ok(LinearSystem { a, b, c_y, c_z })
    }

    /// A system whose measured and controlled outputs are the full state.
    pub fn fully_observed(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, b, DMatrix::identity(n, n), DMatrix::identity(n, n))
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c_y.nrows()
    }

    pub fn nz(&self) -> usize {
        self.c_z.nrows()
    }
}

/// Rolls the system forward; returns `x_1..x_N` and `z_1..z_N`.
pub fn simulate_scenario(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    u: &[DVector<f64>],
    w: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    if u.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs but {} noise vectors",
            u.len(),
            w.len()
        )));
    }
    if x0.len() != sys.nx() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            sys.nx()
        )));
    }
    if let Some(k) = (0..u.len()).find(|&k| u[k].len() != sys.nu() || w[k].len() != sys.nx()) {
        return Err(Error::DimensionMismatch(format!("step {k} has wrong input or noise length")));
    }
    let mut xs = Vec::with_capacity(u.len());
    let mut zs = Vec::with_capacity(u.len());
    let mut x = x0.clone();
    for (uk, wk) in u.iter().zip(w) {
        x = &sys.a * &x + &sys.b * uk + wk;
        zs.push(&sys.c_z * &x);
        xs.push(x.clone());
    }
    Ok((xs, zs))
}

/// Cumulative exchange rate over the horizon.
pub fn exchange_rate_cost(prices: &[f64]) -> f64 {
    prices.iter().sum()
}

/// `λ·mean + (1−λ)·sample variance`.
pub fn mean_variance_objective(psi: &[f64], lambda_tradeoff: f64) -> Result<f64> {
    let s = psi.len();
    if s < 2 {
        return Err(Error::DegenerateScenarioSet(s));
    }
    let mean = psi.iter().sum::<f64>() / s as f64;
    let var = psi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    Ok(lambda_tradeoff * mean + (1.0 - lambda_tradeoff) * var)
}
