use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coin vintages losing a fixed fraction of their face value per elapsed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepreciationSchedule {
    pub d_rate: f64,
    /// `(mint epoch, coins minted)` pairs.
    pub minted_by_epoch: Vec<(usize, f64)>,
}

impl DepreciationSchedule {
    pub fn new(d_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d_rate) {
            return Err(Error::InvalidParameter(format!("depreciation rate {d_rate} outside [0, 1]")));
        }
        Ok(DepreciationSchedule {
            d_rate,
            minted_by_epoch: Vec::new(),
        })
    }

    pub fn mint(&mut self, epoch: usize, coins: f64) {
        self.minted_by_epoch.push((epoch, coins));
    }

    pub fn depreciation(&self, minted: f64, elapsed: usize) -> f64 {
        (elapsed as f64 * self.d_rate * minted).min(minted)
    }
}

pub fn outstanding_with_depreciation(sched: &DepreciationSchedule, now: usize) -> f64 {
    sched
        .minted_by_epoch
        .iter()
        .map(|&(t, minted)| minted - sched.depreciation(minted, now.saturating_sub(t)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(minted: f64) -> DepreciationSchedule {
        let mut s = DepreciationSchedule::new(0.01).unwrap();
        s.mint(3, minted);
        s
    }

    #[test]
    fn fresh_vintage_is_undepreciated() {
        assert_eq!(outstanding_with_depreciation(&single(200.0), 3), 200.0);
    }

    #[test]
    fn linear_depreciation() {
        assert!((outstanding_with_depreciation(&single(200.0), 8) - 190.0).abs() < 1e-12);
    }

    #[test]
    fn depreciation_is_capped() {
        assert_eq!(outstanding_with_depreciation(&single(200.0), 103), 0.0);
        assert_eq!(outstanding_with_depreciation(&single(200.0), 500), 0.0);
    }

    #[test]
    fn rate_is_validated() {
        assert!(DepreciationSchedule::new(1.5).is_err());
        assert!(DepreciationSchedule::new(-0.1).is_err());
    }
}
