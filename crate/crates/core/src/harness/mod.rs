//! Seeded end-to-end experiments: price process, prediction, stabilising MPC,
//! issuance auction, consensus and verification, with CSV artifacts.

mod artifacts;
mod config;
mod run;
mod sweep;

pub use artifacts::{
    compare_runs, read_epochs_csv, write_comparison_csv, write_epochs_csv, write_summary_csv, EpochRow,
    MetricDelta, RunArtifacts, Summary, Verification, EPOCH_HEADER,
};
pub use config::{
    AuctionConfig, ExperimentConfig, GbmConfig, ModelKind, MpcConfig, NetworkConfig, PredictorConfig,
    SecureConfig, StabilityConfig, SupplyConfig, TaylorConfig,
};
pub use run::{run_experiment, sample_auction};
pub use sweep::{spectral_radius, stability_region, write_stability_csv, StabilityPoint};
