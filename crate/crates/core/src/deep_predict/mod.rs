//! Neural price-direction predictor trained by layer-wise ADMM.

mod checkpoint;
mod features;
mod network;
mod train;

pub use features::{feature_window, windowed_dataset, ReturnPredictor};
pub use network::{forward, predict_direction, Activation, LayeredNetwork};
pub use train::{
    train_admm, update_activations, update_final_outputs, update_multiplier, update_outputs,
    update_weights, Loss, Penalties, TrainReport, TrainState, RELATIVE_TOLERANCE,
};
