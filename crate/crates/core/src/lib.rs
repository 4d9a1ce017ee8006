//! Monetary-policy stack for a decentralised stablecoin: supply and price models,
//! scenario MPC solved by consensus ADMM, a VCG issuance auction run over an
//! unreliable network, an ADMM-trained price-direction predictor and a
//! share/commitment layer for verifying the distributed computation.

pub mod error;
pub mod qp;
pub mod seed;

pub mod econ;
pub mod scenario_mpc;
pub mod deep_predict;
pub mod auction;
pub mod consensus;
pub mod secure;
pub mod harness;

pub use error::{Error, Result, Stage};
