//! Graph classifier: two multi-head attention layers, a GCN pooling layer
//! with mean readout, a small MLP and softmax over `[good, bad]`.

mod config;
mod layers;
mod model;
mod params;
mod train;

use thiserror::Error;

pub use config::{ClassWeights, GcGatConfig};
pub use layers::{
    attention_neighborhood, gat_layer, gcn_pool, loss_and_gradients, loss_at, mlp_forward, normalized_adjacency,
    probabilities, softmax, weighted_loss, DropoutMasks, Graph, LOG_FLOOR,
};
pub use model::{GcGatModel, Prediction};
pub use params::{Dense, GatHead, GatLayer, Params, Tensor, TensorMut};
pub use train::{train, train_with, Adam, EpochStats, Sample, TrainHistory, TrainOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    Format(String),
}
