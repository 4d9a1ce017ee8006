use nalgebra::DMatrix;

use super::network::{Activation, LayeredNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `‖z − y‖²`.
    Squared,
    /// `Σ max(0, 1 − y·z)` with labels in `{−1, +1}`.
    Hinge,
}

impl Loss {
    pub fn value(self, z: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        match self {
            Loss::Squared => (z - y).norm_squared(),
            Loss::Hinge => z.zip_map(y, |z, y| (1.0 - y * z).max(0.0)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Penalties {
    /// `β_1..β_L`.
    pub beta: Vec<f64>,
    /// `γ_1..γ_{L−1}`.
    pub gamma: Vec<f64>,
}

impl Penalties {
    pub fn uniform(layers: usize, beta: f64, gamma: f64) -> Self {
        Penalties {
            beta: vec![beta; layers],
            gamma: vec![gamma; layers.saturating_sub(1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub z: Vec<DMatrix<f64>>,
    /// `a_1..a_{L−1}`.
    pub a: Vec<DMatrix<f64>>,
    pub lambda_mult: DMatrix<f64>,
    pub penalties: Penalties,
    pub loss: Loss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub net: LayeredNetwork,
    /// Penalised objective after each sweep.
    pub objective_trace: Vec<f64>,
    /// Sweeps at which the objective failed to decrease.
    pub non_decreasing: Vec<usize>,
    pub converged: bool,
}

/// Minimum-norm least-squares solution of `W·a_prev ≈ z`.
pub fn update_weights(z: &DMatrix<f64>, a_prev: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a_prev.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * a_prev.nrows().max(a_prev.ncols()) as f64 * f64::EPSILON;
    let pinv = svd
        .pseudo_inverse(tol.max(f64::MIN_POSITIVE))
        .expect("both singular vector sets were computed");
    z * pinv
}

pub fn update_activations(
    w_next: &DMatrix<f64>,
    z_next: &DMatrix<f64>,
    z_l: &DMatrix<f64>,
    beta_next: f64,
    gamma_l: f64,
    h: Activation,
) -> DMatrix<f64> {
    let n = w_next.ncols();
    let lhs = w_next.transpose() * w_next * beta_next + DMatrix::identity(n, n) * gamma_l;
    let rhs = w_next.transpose() * z_next * beta_next + h.apply_matrix(z_l) * gamma_l;
    lhs.cholesky()
        .expect("regularised normal matrix is positive definite")
        .solve(&rhs)
}

fn relu_prox(a: f64, m: f64, beta: f64, gamma: f64) -> f64 {
    let pos = ((gamma * a + beta * m) / (gamma + beta)).max(0.0);
    let neg = m.min(0.0);
    let cost = |z: f64| gamma * (a - z.max(0.0)).powi(2) + beta * (z - m).powi(2);
    if cost(neg) < cost(pos) {
        neg
    } else {
        pos
    }
}

/// Elementwise minimiser of `γ‖a_l − h(z)‖² + β‖z − W_l a_prev‖²`.
pub fn update_outputs(
    a_l: &DMatrix<f64>,
    w_l: &DMatrix<f64>,
    a_prev: &DMatrix<f64>,
    beta_l: f64,
    gamma_l: f64,
    h: Activation,
) -> DMatrix<f64> {
    let m = w_l * a_prev;
    match h {
        Activation::Identity => (a_l * gamma_l + &m * beta_l) / (gamma_l + beta_l),
        Activation::Relu => a_l.zip_map(&m, |a, m| relu_prox(a, m, beta_l, gamma_l)),
    }
}

fn hinge_prox(y: f64, lam: f64, m: f64, beta: f64) -> f64 {
    let cost = |z: f64| (1.0 - y * z).max(0.0) + lam * z + beta * (z - m).powi(2);
    let mut best = y;
    for cand in [m - lam / (2.0 * beta), m + (y - lam) / (2.0 * beta)] {
        if cost(cand) < cost(best) {
            best = cand;
        }
    }
    best
}

/// Output-layer update `argmin_z l(z, y) + ⟨z, λ⟩ + β‖z − W_L a_{L−1}‖²`.
pub fn update_final_outputs(
    y: &DMatrix<f64>,
    lambda_mult: &DMatrix<f64>,
    w_last: &DMatrix<f64>,
    a_prev: &DMatrix<f64>,
    beta_last: f64,
    loss: Loss,
) -> DMatrix<f64> {
    let m = w_last * a_prev;
    match loss {
        Loss::Squared => (y * 2.0 - lambda_mult + &m * (2.0 * beta_last)) / (2.0 + 2.0 * beta_last),
        Loss::Hinge => {
            DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
                hinge_prox(y[(i, j)], lambda_mult[(i, j)], m[(i, j)], beta_last)
            })
        }
    }
}

pub fn update_multiplier(
    lambda_mult: &DMatrix<f64>,
    z_last: &DMatrix<f64>,
    w_last: &DMatrix<f64>,
    a_prev: &DMatrix<f64>,
    beta_last: f64,
) -> DMatrix<f64> {
    lambda_mult + (z_last - w_last * a_prev) * beta_last
}

impl TrainState {
    /// Auxiliaries from one forward pass; the multiplier starts at zero.
    pub fn initialise(net: &LayeredNetwork, a0: &DMatrix<f64>, penalties: Penalties, loss: Loss) -> Result<Self> {
        let l = net.layers();
        if penalties.beta.len() != l || penalties.gamma.len() != l - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{l} layers need {l} β and {} γ penalties",
                l - 1
            )));
        }
        if penalties.beta.iter().chain(&penalties.gamma).any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidParameter("penalties must be positive".into()));
        }
        let (z, a) = net.forward_trace(a0)?;
        let lambda_mult = DMatrix::zeros(net.output_dim(), a0.ncols());
        Ok(TrainState {
            z,
            a,
            lambda_mult,
            penalties,
            loss,
        })
    }

    fn input<'a>(&'a self, a0: &'a DMatrix<f64>, l: usize) -> &'a DMatrix<f64> {
        if l == 0 {
            a0
        } else {
            &self.a[l - 1]
        }
    }

    /// Value of the penalised training objective.
    pub fn objective(&self, net: &LayeredNetwork, a0: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let last = net.layers() - 1;
        let zl = &self.z[last];
        let mut total = self.loss.value(zl, y)
            + zl.dot(&self.lambda_mult)
            + self.penalties.beta[last] * (zl - &net.weights[last] * self.input(a0, last)).norm_squared();
        for l in 0..last {
            total += self.penalties.beta[l] * (&self.z[l] - &net.weights[l] * self.input(a0, l)).norm_squared()
                + self.penalties.gamma[l]
                    * (&self.a[l] - net.activations[l].apply_matrix(&self.z[l])).norm_squared();
        }
        total
    }

    /// One sweep of the layer-wise updates followed by the multiplier step.
    pub fn sweep(&mut self, net: &mut LayeredNetwork, a0: &DMatrix<f64>, y: &DMatrix<f64>) {
        let last = net.layers() - 1;
        for l in 0..last {
            net.weights[l] = update_weights(&self.z[l], self.input(a0, l));
            self.a[l] = update_activations(
                &net.weights[l + 1],
                &self.z[l + 1],
                &self.z[l],
                self.penalties.beta[l + 1],
                self.penalties.gamma[l],
                net.activations[l],
            );
            self.z[l] = update_outputs(
                &self.a[l],
                &net.weights[l],
                self.input(a0, l),
                self.penalties.beta[l],
                self.penalties.gamma[l],
                net.activations[l],
            );
        }
        net.weights[last] = update_weights(&self.z[last], self.input(a0, last));
        self.z[last] = update_final_outputs(
            y,
            &self.lambda_mult,
            &net.weights[last],
            self.input(a0, last),
            self.penalties.beta[last],
            self.loss,
        );
        self.lambda_mult = update_multiplier(
            &self.lambda_mult,
            &self.z[last],
            &net.weights[last],
            self.input(a0, last),
            self.penalties.beta[last],
        );
    }
}

pub const RELATIVE_TOLERANCE: f64 = 1e-6;

/// Gradient-free training; samples are the columns of `a0` and `y`.
pub fn train_admm(
    net: &LayeredNetwork,
    a0: &DMatrix<f64>,
    y: &DMatrix<f64>,
    penalties: Penalties,
    loss: Loss,
    max_sweeps: usize,
) -> Result<TrainReport> {
    if a0.ncols() == 0 {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if y.ncols() != a0.ncols() || y.nrows() != net.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "targets are {}x{}, expected {}x{}",
            y.nrows(),
            y.ncols(),
            net.output_dim(),
            a0.ncols()
        )));
    }
    let mut state = TrainState::initialise(net, a0, penalties, loss)?;
    let mut net = net.clone();
    let mut trace = Vec::with_capacity(max_sweeps);
    let mut non_decreasing = Vec::new();
    let mut converged = false;
    for sweep in 0..max_sweeps {
        state.sweep(&mut net, a0, y);
        let obj = state.objective(&net, a0, y);
        if let Some(&prev) = trace.last() {
            if obj >= prev {
                non_decreasing.push(sweep);
            }
            if (obj - prev).abs() <= RELATIVE_TOLERANCE * prev.abs().max(f64::MIN_POSITIVE) {
                trace.push(obj);
                converged = true;
                break;
            }
        }
        trace.push(obj);
    }
    Ok(TrainReport {
        net,
        objective_trace: trace,
        non_decreasing,
        converged,
    })
}
