use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::veccpg::FEATURE_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassWeights {
    pub majority: f64,
    pub minority: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights { majority: 0.6, minority: 1.7 }
    }
}

impl ClassWeights {
    /// Per-class weights `[good, bad]` from training counts. On a tie, bad is
    /// treated as the minority class.
    pub fn resolve(&self, good: usize, bad: usize) -> [f64; 2] {
        if bad <= good {
            [self.majority, self.minority]
        } else {
            [self.minority, self.majority]
        }
    }
}

/// Hyperparameters of the classifier. Missing keys take their defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcGatConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub pool_dim: usize,
    pub gat_layers: usize,
    pub heads: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub mlp_dims: Vec<usize>,
    pub class_weights: ClassWeights,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GcGatConfig {
    fn default() -> Self {
        GcGatConfig {
            input_dim: FEATURE_WIDTH,
            hidden_dim: 64,
            pool_dim: 32,
            gat_layers: 2,
            heads: 4,
            leaky_slope: 0.2,
            dropout: 0.3,
            mlp_dims: vec![32, 16, 2],
            class_weights: ClassWeights::default(),
            learning_rate: 8.6e-4,
            epochs: 15,
            seed: 0,
        }
    }
}

impl GcGatConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.input_dim != FEATURE_WIDTH {
            return bad(format!("input_dim must be {FEATURE_WIDTH}, got {}", self.input_dim));
        }
        if self.heads == 0 || self.gat_layers == 0 {
            return bad("heads and gat_layers must be positive".into());
        }
        if self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.heads) {
            return bad(format!("hidden_dim {} is not divisible by heads {}", self.hidden_dim, self.heads));
        }
        if self.pool_dim == 0 {
            return bad("pool_dim must be positive".into());
        }
        if self.mlp_dims.len() < 2 || self.mlp_dims[0] != self.pool_dim {
            return bad(format!("mlp_dims must start with pool_dim {}", self.pool_dim));
        }
        if self.mlp_dims.last() != Some(&2) {
            return bad("mlp_dims must end with 2".into());
        }
        if self.mlp_dims.contains(&0) {
            return bad("mlp_dims entries must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.leaky_slope.is_finite() && self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("leaky_slope and learning_rate must be finite, learning_rate positive".into());
        }
        let w = self.class_weights;
        if !(w.majority > 0.0 && w.minority > 0.0 && w.majority.is_finite() && w.minority.is_finite()) {
            return bad("class weights must be positive".into());
        }
        Ok(())
    }

    /// Output width of each head in GAT layer `l`. Inner layers concatenate
    /// their heads; the last averages them.
    pub fn head_dim(&self, l: usize) -> usize {
        if self.is_concat(l) {
            self.hidden_dim / self.heads
        } else {
            self.hidden_dim
        }
    }

    pub fn is_concat(&self, l: usize) -> bool {
        l + 1 < self.gat_layers
    }

    pub fn layer_input_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }
}
