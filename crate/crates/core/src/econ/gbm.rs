use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRICE_FLOOR: f64 = 1e-9;

/// One Euler–Maruyama step of geometric Brownian motion.
pub fn gbm_step(p: f64, mu: f64, sigma: f64, dt: f64, noise: f64) -> f64 {
    gbm_step_floored(p, mu, sigma, dt, noise, PRICE_FLOOR)
}

pub fn gbm_step_floored(p: f64, mu: f64, sigma: f64, dt: f64, noise: f64, floor: f64) -> f64 {
    let next = p * (1.0 + mu * dt + sigma * dt.sqrt() * noise);
    if next.is_nan() {
        floor
    } else {
        next.max(floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub prices: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl PricePath {
    pub fn new(p0: f64, mu: f64, sigma: f64, dt: f64) -> Result<Self> {
        if !(p0 > 0.0) {
            return Err(Error::InvalidParameter(format!("initial price {p0} must be positive")));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be non-negative")));
        }
        Ok(PricePath {
            prices: vec![p0],
            mu,
            sigma,
            dt,
        })
    }

    pub fn simulate<R: Rng + ?Sized>(
        p0: f64,
        mu: f64,
        sigma: f64,
        dt: f64,
        steps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut path = Self::new(p0, mu, sigma, dt)?;
        for _ in 0..steps {
            path.advance(rng.sample(StandardNormal));
        }
        Ok(path)
    }

    pub fn last(&self) -> f64 {
        *self.prices.last().expect("price path is never empty")
    }

    pub fn advance(&mut self, noise: f64) -> f64 {
        let next = gbm_step(self.last(), self.mu, self.sigma, self.dt, noise);
        self.prices.push(next);
        next
    }

    /// First differences `P(t) - P(t-1)`.
    pub fn increments(&self) -> Vec<f64> {
        self.prices.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;

    #[test]
    fn deterministic_cases() {
        assert_eq!(gbm_step(1.0, 0.0, 0.0, 1.0, 0.7), 1.0);
        assert!((gbm_step(1.0, 0.1, 0.0, 1.0, 0.0) - 1.1).abs() < 1e-15);
        assert_eq!(gbm_step(1.0, 0.0, 1.0, 1.0, -5.0), PRICE_FLOOR);
    }

    #[test]
    fn monte_carlo_mean_tracks_exponential_growth() {
        let (mu, sigma, dt, steps) = (0.05, 0.2, 0.01, 100);
        let paths = 100_000;
        let mut rng = stream(11, "gbm-mc");
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..paths {
            let mut p = 1.0;
            for _ in 0..steps {
                let e: f64 = rng.sample(StandardNormal);
                p = gbm_step(p, mu, sigma, dt, e);
            }
            sum += p;
            sum_sq += p * p;
        }
        let n = paths as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean) / n).sqrt();
        let expected = (mu * dt * steps as f64).exp();
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
    }

    #[test]
    fn path_increments() {
        let mut path = PricePath::new(2.0, 0.0, 0.0, 1.0).unwrap();
        path.advance(0.0);
        assert_eq!(path.increments(), vec![0.0]);
        assert!(PricePath::new(0.0, 0.0, 0.1, 1.0).is_err());
    }
}
