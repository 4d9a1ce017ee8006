//! Divisible-coin issuance auction with VCG payments.

mod io;
mod probe;
pub(crate) mod solve;
mod types;

pub use io::{read_outcome_csv, write_outcome_csv};
pub use probe::{demand_grid, overstatement_grid, strategyproofness_probe, AuctionInstance};
pub use solve::{
    apply_penalty, run_auction, solve_excluding, solve_welfare, user_utility, vcg_payment,
    welfare_kkt_residual, welfare_value, AuctionOutcome, WelfareSolution, COUPLING_TOLERANCE,
};
pub use types::{DemandReport, IssuanceBounds, IssuanceCost, SlotDemand, Valuation, ValuationModel};
