use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::network::{forward, Activation, LayeredNetwork};
use super::train::{train_admm, Loss, Penalties};
use crate::error::{Error, Result};

/// Columns `[v_{t−w}, …, v_{t−1}, 1]` with target `v_t` for every `t ≥ w`.
pub fn windowed_dataset(values: &[f64], window: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = values.len().saturating_sub(window);
    let mut a0 = DMatrix::zeros(window + 1, n);
    let mut y = DMatrix::zeros(1, n);
    for k in 0..n {
        for i in 0..window {
            a0[(i, k)] = values[k + i];
        }
        a0[(window, k)] = 1.0;
        y[(0, k)] = values[k + window];
    }
    (a0, y)
}

/// The most recent feature column.
pub fn feature_window(values: &[f64], window: usize) -> Option<DVector<f64>> {
    if values.len() < window {
        return None;
    }
    let mut f = DVector::from_element(window + 1, 1.0);
    f.rows_mut(0, window)
        .copy_from_slice(&values[values.len() - window..]);
    Some(f)
}

/// One-step-ahead regressor on a scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPredictor {
    pub window: usize,
    pub hidden: Vec<usize>,
    pub beta: f64,
    pub gamma: f64,
    pub sweeps: usize,
    pub net: Option<LayeredNetwork>,
}

impl ReturnPredictor {
    pub fn new(window: usize) -> Self {
        ReturnPredictor {
            window,
            hidden: Vec::new(),
            beta: 0.01,
            gamma: 1.0,
            sweeps: 200,
            net: None,
        }
    }

    pub fn fit<R: Rng + ?Sized>(&mut self, values: &[f64], rng: &mut R) -> Result<()> {
        let (a0, y) = windowed_dataset(values, self.window);
        if a0.ncols() <= self.window + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} samples are too few for a window of {}",
                a0.ncols(),
                self.window
            )));
        }
        let mut dims = vec![self.window + 1];
        dims.extend(&self.hidden);
        dims.push(1);
        let init = LayeredNetwork::random(&dims, Activation::Relu, rng)?;
        let layers = dims.len() - 1;
        let report = train_admm(
            &init,
            &a0,
            &y,
            Penalties::uniform(layers, self.beta, self.gamma),
            Loss::Squared,
            self.sweeps,
        )?;
        self.net = Some(report.net);
        Ok(())
    }

    /// Predicted next value, or `None` before the first fit.
    pub fn predict(&self, values: &[f64]) -> Option<f64> {
        let net = self.net.as_ref()?;
        let f = feature_window(values, self.window)?;
        let out = forward(net, &DMatrix::from_column_slice(f.len(), 1, f.as_slice())).ok()?;
        Some(out[(0, 0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_layout() {
        let (a0, y) = windowed_dataset(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(a0, DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 3.0, 1.0, 1.0]));
        assert_eq!(y, DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
        let f = feature_window(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(f.as_slice(), &[3.0, 4.0, 1.0]);
        assert!(feature_window(&[1.0], 2).is_none());
    }
}
