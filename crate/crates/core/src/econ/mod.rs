//! Supply ledger, price process and monetary-policy models.

mod depreciation;
mod gbm;
mod supply;
mod taylor;

pub use depreciation::{outstanding_with_depreciation, DepreciationSchedule};
pub use gbm::{gbm_step, gbm_step_floored, PricePath, PRICE_FLOOR};
pub use supply::{adjust_controls, Bid, Controls, SupplyParams, SupplyState, COIN_TOLERANCE};
pub use taylor::{
    is_closed_loop_stable, taylor_closed_loop_matrix, taylor_mpc_objective, taylor_mpc_solve,
    TaylorHorizon, TaylorParams,
};
