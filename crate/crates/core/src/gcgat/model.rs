use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, Graph};
use super::params::Params;
use super::{GcGatConfig, ModelError};
use crate::cpg::PropertyGraph;
use crate::datakit::Label;
use crate::veccpg::{FunctionVocabulary, VecCpg};

/// A classifier together with the configuration and vocabulary it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct GcGatModel {
    pub config: GcGatConfig,
    pub vocab: FunctionVocabulary,
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub class: Label,
    pub prob_bad: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredModel {
    config: GcGatConfig,
    vocab: FunctionVocabulary,
    parameters: Vec<StoredTensor>,
}

impl GcGatModel {
    /// Freshly initialized model, seeded from `config.seed`.
    pub fn new(config: GcGatConfig, vocab: FunctionVocabulary) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::with_rng(config, vocab, &mut rng)
    }

    pub(crate) fn with_rng(
        config: GcGatConfig,
        vocab: FunctionVocabulary,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let params = Params::init(&config, rng);
        Ok(GcGatModel { config, vocab, params })
    }

    /// Class probabilities `[good, bad]` for a feature and adjacency matrix.
    pub fn forward(&self, x: &Array2<f64>, a: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>), ModelError> {
        let g = Graph::new(x, a)?;
        let t = layers::trace(&self.params, &self.config, &g, None)?;
        Ok((t.probs, t.logits))
    }

    pub fn predict_vec(&self, v: &VecCpg) -> Result<Prediction, ModelError> {
        let (probs, _) = self.forward(&v.x, &v.a)?;
        Ok(Prediction::from_probs(probs[0], probs[1]))
    }

    /// Vectorizes with the model's vocabulary and classifies.
    pub fn predict(&self, graph: &PropertyGraph) -> Result<Prediction, ModelError> {
        self.predict_vec(&VecCpg::new(graph, &self.vocab))
    }

    pub fn to_json(&self) -> String {
        let stored = StoredModel {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            parameters: self
                .params
                .tensors()
                .into_iter()
                .map(|t| StoredTensor { name: t.name, shape: t.shape, data: t.data.to_vec() })
                .collect(),
        };
        serde_json::to_string(&stored).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let stored: StoredModel = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        stored.config.validate()?;
        let mut by_name: BTreeMap<String, StoredTensor> =
            stored.parameters.into_iter().map(|t| (t.name.clone(), t)).collect();
        let mut params = Params::zeros(&stored.config);
        for t in params.tensors_mut() {
            let s = by_name.remove(&t.name).ok_or_else(|| ModelError::Format(format!("missing parameter `{}`", t.name)))?;
            if s.shape != t.shape || s.data.len() != t.data.len() {
                return Err(ModelError::Format(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    t.name, s.shape, t.shape
                )));
            }
            t.data.copy_from_slice(&s.data);
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(ModelError::Format(format!("unexpected parameter `{extra}`")));
        }
        if !params.is_finite() {
            return Err(ModelError::Numerical("stored parameters are not finite".into()));
        }
        Ok(GcGatModel { config: stored.config, vocab: stored.vocab, params })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }
}

impl Prediction {
    /// Argmax over `[good, bad]`; an exact tie goes to bad.
    pub fn from_probs(p_good: f64, p_bad: f64) -> Self {
        let class = if p_bad >= p_good { Label::Bad } else { Label::Good };
        Prediction { class, prob_bad: p_bad }
    }
}
