use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
        }
    }

    pub fn apply_matrix(self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.map(|v| self.apply(v))
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Feed-forward network `a_l = h_l(W_l a_{l−1})`; samples are columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNetwork {
    pub weights: Vec<DMatrix<f64>>,
    pub activations: Vec<Activation>,
}

impl LayeredNetwork {
    pub fn new(weights: Vec<DMatrix<f64>>, activations: Vec<Activation>) -> Result<Self> {
        if weights.is_empty() || weights.len() != activations.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weight matrices but {} activations",
                weights.len(),
                activations.len()
            )));
        }
        if let Some(l) = (1..weights.len()).find(|&l| weights[l].ncols() != weights[l - 1].nrows()) {
            return Err(Error::DimensionMismatch(format!(
                "layer {} expects {} inputs but layer {} emits {}",
                l + 1,
                weights[l].ncols(),
                l,
                weights[l - 1].nrows()
            )));
        }
        if activations.last() != Some(&Activation::Identity) {
            return Err(Error::InvalidParameter("the output layer must be linear".into()));
        }
        Ok(LayeredNetwork {
            weights,
            activations,
        })
    }

    /// Uniform weights in `±1/√fan_in`; hidden layers use `hidden`.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::DimensionMismatch("need input and output widths".into()));
        }
        let layers = dims.len() - 1;
        let weights = (0..layers)
            .map(|l| {
                let bound = 1.0 / (dims[l] as f64).sqrt();
                DMatrix::from_fn(dims[l + 1], dims[l], |_, _| rng.random_range(-bound..=bound))
            })
            .collect();
        let mut activations = vec![hidden; layers];
        activations[layers - 1] = Activation::Identity;
        Self::new(weights, activations)
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.layers() - 1].nrows()
    }

    /// Pre-activations `z_1..z_L` and activations `a_1..a_{L−1}`.
    pub fn forward_trace(&self, a0: &DMatrix<f64>) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
        if a0.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} rows, network expects {}",
                a0.nrows(),
                self.input_dim()
            )));
        }
        let mut zs = Vec::with_capacity(self.layers());
        let mut acts = Vec::with_capacity(self.layers() - 1);
        let mut a = a0.clone();
        for (l, (w, h)) in self.weights.iter().zip(&self.activations).enumerate() {
            let z = w * &a;
            if l + 1 < self.layers() {
                a = h.apply_matrix(&z);
                acts.push(a.clone());
            }
            zs.push(z);
        }
        Ok((zs, acts))
    }
}

pub fn forward(net: &LayeredNetwork, a0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (mut zs, _) = net.forward_trace(a0)?;
    Ok(zs.pop().expect("network has a layer"))
}

/// Sign of the scalar output; zero counts as an upward move.
pub fn predict_direction(net: &LayeredNetwork, features: &DVector<f64>) -> Result<i8> {
    let a0 = DMatrix::from_column_slice(features.len(), 1, features.as_slice());
    let out = forward(net, &a0)?;
    Ok(if out[(0, 0)] >= 0.0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;

    #[test]
    fn identity_network_is_transparent() {
        let net = LayeredNetwork::new(
            vec![DMatrix::identity(3, 3), DMatrix::identity(3, 3)],
            vec![Activation::Identity, Activation::Identity],
        )
        .unwrap();
        let a0 = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        assert_eq!(forward(&net, &a0).unwrap(), a0);
    }

    #[test]
    fn single_linear_layer() {
        let w = DMatrix::from_row_slice(1, 2, &[2.0, -1.0]);
        let net = LayeredNetwork::new(vec![w.clone()], vec![Activation::Identity]).unwrap();
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 4.0, -2.0]);
        assert_eq!(forward(&net, &a0).unwrap(), w * a0);
    }

    #[test]
    fn forward_matches_explicit_loops() {
        let mut rng = stream(1, "net");
        let net = LayeredNetwork::random(&[3, 5, 4, 2], Activation::Relu, &mut rng).unwrap();
        let a0 = DMatrix::from_fn(3, 6, |_, _| rng.random_range(-2.0..2.0));
        let out = forward(&net, &a0).unwrap();
        for col in 0..6 {
            let mut a: Vec<f64> = a0.column(col).iter().copied().collect();
            for (l, w) in net.weights.iter().enumerate() {
                let mut next = vec![0.0; w.nrows()];
                for i in 0..w.nrows() {
                    for j in 0..w.ncols() {
                        next[i] += w[(i, j)] * a[j];
                    }
                    if l + 1 < net.layers() {
                        next[i] = next[i].max(0.0);
                    }
                }
                a = next;
            }
            for i in 0..2 {
                assert!((out[(i, col)] - a[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let r = LayeredNetwork::new(
            vec![DMatrix::zeros(2, 3), DMatrix::zeros(1, 3)],
            vec![Activation::Relu, Activation::Identity],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let net = LayeredNetwork::new(vec![DMatrix::zeros(1, 3)], vec![Activation::Identity]).unwrap();
        assert!(forward(&net, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn direction_examples() {
        let net = LayeredNetwork::new(vec![DMatrix::zeros(1, 2)], vec![Activation::Identity]).unwrap();
        assert_eq!(predict_direction(&net, &DVector::from_vec(vec![1.0, -4.0])).unwrap(), 1);
        let odd = LayeredNetwork::new(
            vec![DMatrix::from_row_slice(1, 2, &[0.7, -0.2])],
            vec![Activation::Identity],
        )
        .unwrap();
        let x = DVector::from_vec(vec![1.0, 0.5]);
        let up = predict_direction(&odd, &x).unwrap();
        let down = predict_direction(&odd, &(-x)).unwrap();
        assert_eq!(up, -down);
    }
}
