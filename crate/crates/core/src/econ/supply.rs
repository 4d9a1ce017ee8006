use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing coin totals.
pub const COIN_TOLERANCE: f64 = 1e-9;

fn coin_tol(scale: f64) -> f64 {
    COIN_TOLERANCE * scale.abs().max(1.0)
}

/// On-chain supply ledger for one epoch.
///
/// Coin counts are real-valued: auctioned coins are divisible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyState {
    pub t: usize,
    pub s_max: f64,
    pub s_outstanding: f64,
    pub s_unissued: f64,
    pub s_initial: f64,
    /// Coins minted in each epoch, genesis mint first.
    pub s_minted_history: Vec<f64>,
    pub reserve: f64,
    pub collateral_ratio: f64,
    pub br_max: f64,
    pub auc_max: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyParams {
    pub s_initial: f64,
    pub s_max: f64,
    pub br_max: f64,
    pub auc_max: f64,
    pub collateral_ratio: f64,
    pub lambda_max: f64,
}

impl Default for SupplyParams {
    fn default() -> Self {
        SupplyParams {
            s_initial: 1_000.0,
            s_max: 10_000.0,
            br_max: 50.0,
            auc_max: 150.0,
            collateral_ratio: 1.0,
            lambda_max: 3.0,
        }
    }
}

/// One user's auctioned amount together with that user's admissible range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub coins: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Bid {
    pub fn new(coins: f64, x_min: f64, x_max: f64) -> Self {
        Bid { coins, x_min, x_max }
    }

    /// A bid whose only constraint is non-negativity.
    pub fn unbounded(coins: f64) -> Self {
        Bid::new(coins, 0.0, f64::INFINITY)
    }
}

impl SupplyState {
    pub fn genesis(p: SupplyParams) -> Result<Self> {
        let state = SupplyState {
            t: 1,
            s_max: p.s_max,
            s_outstanding: p.s_initial,
            s_unissued: p.s_max - p.s_initial,
            s_initial: p.s_initial,
            s_minted_history: vec![p.s_initial],
            reserve: p.collateral_ratio * p.s_initial,
            collateral_ratio: p.collateral_ratio,
            br_max: p.br_max,
            auc_max: p.auc_max,
            lambda_max: p.lambda_max,
        };
        state.check_invariants()?;
        Ok(state)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let tol = coin_tol(self.s_max);
        let mut problems = Vec::new();
        if !(self.s_initial >= 0.0) {
            problems.push(format!("s_initial = {} is negative", self.s_initial));
        }
        if self.s_outstanding < self.s_initial - tol {
            problems.push(format!(
                "s_outstanding = {} below s_initial = {}",
                self.s_outstanding, self.s_initial
            ));
        }
        if self.s_outstanding > self.s_max + tol {
            problems.push(format!(
                "s_outstanding = {} above s_max = {}",
                self.s_outstanding, self.s_max
            ));
        }
        if (self.s_max - self.s_unissued - self.s_outstanding).abs() > tol {
            problems.push(format!(
                "s_max = {} differs from s_unissued + s_outstanding = {}",
                self.s_max,
                self.s_unissued + self.s_outstanding
            ));
        }
        if !(1.0..=self.lambda_max).contains(&self.collateral_ratio) {
            problems.push(format!(
                "collateral ratio {} outside [1, {}]",
                self.collateral_ratio, self.lambda_max
            ));
        }
        if (self.reserve - self.collateral_ratio * self.s_outstanding).abs()
            > coin_tol(self.reserve)
        {
            problems.push(format!(
                "reserve {} != ratio * outstanding {}",
                self.reserve,
                self.collateral_ratio * self.s_outstanding
            ));
        }
        if self.br_max < 0.0 || self.auc_max < 0.0 {
            problems.push("negative issuance caps".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::BoundViolation(problems.join("; ")))
        }
    }

    fn mint(&self, coins: f64) -> SupplyState {
        let mut next = self.clone();
        next.s_outstanding += coins;
        next.s_unissued -= coins;
        if let Some(last) = next.s_minted_history.last_mut() {
            *last += coins;
        }
        next.reserve = next.collateral_ratio * next.s_outstanding;
        next
    }

    /// Pays a block reward out of the unissued pool.
    pub fn step_block_reward(&self, br: f64) -> Result<SupplyState> {
        if !(br >= 0.0) || br > self.br_max {
            return Err(Error::BoundViolation(format!(
                "block reward {br} outside [0, {}]",
                self.br_max
            )));
        }
        if br > self.s_unissued + coin_tol(self.s_unissued) {
            return Err(Error::BoundViolation(format!(
                "block reward {br} exceeds unissued supply {}",
                self.s_unissued
            )));
        }
        Ok(self.mint(br.min(self.s_unissued)))
    }

    /// Issues `auc_coins` to the winning bidders. The bids must clear the pool exactly.
    pub fn apply_auction_issuance(&self, auc_coins: f64, bids: &[Bid]) -> Result<SupplyState> {
        if !(auc_coins >= 0.0) || auc_coins > self.auc_max {
            return Err(Error::BoundViolation(format!(
                "auctioned coins {auc_coins} outside [0, {}]",
                self.auc_max
            )));
        }
        if auc_coins > self.s_unissued + coin_tol(self.s_unissued) {
            return Err(Error::BoundViolation(format!(
                "auctioned coins {auc_coins} exceed unissued supply {}",
                self.s_unissued
            )));
        }
        for (i, bid) in bids.iter().enumerate() {
            let tol = coin_tol(bid.coins);
            if bid.coins < bid.x_min - tol || bid.coins > bid.x_max + tol || bid.coins < -tol {
                return Err(Error::BoundViolation(format!(
                    "bid {i} = {} outside [{}, {}]",
                    bid.coins, bid.x_min, bid.x_max
                )));
            }
        }
        let total: f64 = bids.iter().map(|b| b.coins).sum();
        if (total - auc_coins).abs() > coin_tol(auc_coins) {
            return Err(Error::ClearingMismatch {
                bids: total,
                pool: auc_coins,
            });
        }
        Ok(self.mint(auc_coins.min(self.s_unissued)))
    }

    /// Opens a new epoch with an empty mint record.
    pub fn next_epoch(&self) -> SupplyState {
        let mut next = self.clone();
        next.t += 1;
        next.s_minted_history.push(0.0);
        next
    }

    /// Installs adjusted controls, keeping `s_unissued` consistent with the new cap.
    pub fn with_controls(&self, controls: &Controls) -> Result<SupplyState> {
        let mut next = self.clone();
        next.s_max = controls.s_max;
        next.s_unissued = controls.s_max - next.s_outstanding;
        next.collateral_ratio = controls.collateral_ratio;
        next.reserve = next.collateral_ratio * next.s_outstanding;
        next.check_invariants()?;
        Ok(next)
    }
}

/// Controlled variables of the supply model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub s_max: f64,
    pub br: f64,
    pub auc: f64,
    pub collateral_ratio: f64,
}

/// Scales the supply controls with the price ratio `p_now / p_prev`, the collateral
/// ratio with its inverse, then clips each into its admissible interval.
pub fn adjust_controls(
    state: &SupplyState,
    br_prev: f64,
    auc_prev: f64,
    p_now: f64,
    p_prev: f64,
) -> Result<Controls> {
    if !(p_now > 0.0 && p_prev > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prices must be positive, got {p_now} and {p_prev}"
        )));
    }
    let ratio = p_now / p_prev;
    Ok(Controls {
        s_max: (state.s_max * ratio).max(state.s_outstanding),
        br: (br_prev * ratio).clamp(0.0, state.br_max),
        auc: (auc_prev * ratio).clamp(0.0, state.auc_max),
        collateral_ratio: (state.collateral_ratio / ratio).clamp(1.0, state.lambda_max),
    })
}
