use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers::{self, DropoutMasks, Graph};
use super::params::Params;
use super::{GcGatConfig, GcGatModel, ModelError, Prediction};
use crate::datakit::{compute_metrics, ConfusionCounts, DataError, Label};
use crate::veccpg::{FunctionVocabulary, VecCpg};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// A vectorized, labelled function.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: VecCpg,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's update steps.
    pub loss: f64,
    /// `None` when F1 is undefined for the epoch's predictions.
    pub train_f1: Option<f64>,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Stats of 1-based epoch `e`.
    pub fn epoch(&self, e: usize) -> Option<&EpochStats> {
        e.checked_sub(1).and_then(|i| self.epochs.get(i))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    pub validation: Option<&'a [Sample]>,
    /// Stop once training F1 reaches this value, but not before `min_epochs`.
    pub stop_at_train_f1: Option<f64>,
    pub min_epochs: usize,
}

/// Adam moments over the parameter structure.
pub struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

impl Adam {
    pub fn new(params: &Params) -> Self {
        Adam { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    pub fn update(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let tensors = params.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, m), v), g) in tensors.zip(grad.tensors()) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = BETA1 * m.data[i] + (1.0 - BETA1) * gi;
                v.data[i] = BETA2 * v.data[i] + (1.0 - BETA2) * gi * gi;
                p.data[i] -= lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + EPSILON);
            }
        }
    }
}

fn f1_of(model: &GcGatModel, graphs: &[Graph], labels: &[Label]) -> Result<Option<f64>, ModelError> {
    let mut counts = ConfusionCounts::default();
    for (g, &label) in graphs.iter().zip(labels) {
        let probs = layers::probabilities(&model.params, &model.config, g)?;
        counts.record(label, Prediction::from_probs(probs[0], probs[1]).class);
    }
    Ok(compute_metrics(&counts).f1)
}

pub fn train(
    samples: &[Sample],
    config: &GcGatConfig,
    vocab: &FunctionVocabulary,
) -> crate::Result<(GcGatModel, TrainHistory)> {
    train_with(samples, config, vocab, &TrainOptions::default())
}

/// Per-graph Adam updates over `config.epochs` passes in a seeded shuffled
/// order. Deterministic for a given seed.
pub fn train_with(
    samples: &[Sample],
    config: &GcGatConfig,
    vocab: &FunctionVocabulary,
    opts: &TrainOptions<'_>,
) -> crate::Result<(GcGatModel, TrainHistory)> {
    if samples.is_empty() {
        return Err(DataError::Empty("training set".into()).into());
    }
    let bad = samples.iter().filter(|s| s.label == Label::Bad).count();
    let good = samples.len() - bad;
    if bad == 0 || good == 0 {
        return Err(DataError::MissingClass { good, bad }.into());
    }
    let weights = config.class_weights.resolve(good, bad);
    info!("training on {} graphs ({good} good, {bad} bad), class weights {weights:?}", samples.len());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GcGatModel::with_rng(config.clone(), vocab.clone(), &mut rng)?;
    let prepare = |set: &[Sample]| -> Result<(Vec<Graph>, Vec<Label>), ModelError> {
        let graphs = set.iter().map(|s| Graph::new(&s.graph.x, &s.graph.a)).collect::<Result<_, _>>()?;
        Ok((graphs, set.iter().map(|s| s.label).collect()))
    };
    let (graphs, labels) = prepare(samples)?;
    let validation = opts.validation.map(prepare).transpose()?;

    let mut adam = Adam::new(&model.params);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let masks = (config.dropout > 0.0).then(|| DropoutMasks::sample(config, graphs[i].num_nodes(), &mut rng));
            let (loss, grad) = layers::loss_and_gradients(
                &model.params,
                config,
                &graphs[i],
                labels[i].index(),
                weights,
                masks.as_ref(),
            )?;
            total += loss;
            adam.update(&mut model.params, &grad, config.learning_rate);
        }
        if !model.params.is_finite() {
            return Err(ModelError::Numerical(format!("parameters diverged in epoch {epoch}")).into());
        }
        let train_f1 = f1_of(&model, &graphs, &labels)?;
        let val_f1 = match &validation {
            Some((g, l)) => f1_of(&model, g, l)?,
            None => None,
        };
        let stats = EpochStats { epoch, loss: total / samples.len() as f64, train_f1, val_f1 };
        info!(
            "epoch {epoch}: loss {:.6}, train F1 {}, val F1 {}",
            stats.loss,
            fmt_opt(stats.train_f1),
            fmt_opt(stats.val_f1)
        );
        history.epochs.push(stats);
        if let (Some(target), Some(f1)) = (opts.stop_at_train_f1, train_f1) {
            if epoch >= opts.min_epochs && f1 >= target {
                debug!("stopping after epoch {epoch}: train F1 {f1} reached {target}");
                break;
            }
        }
    }
    Ok((model, history))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |f| format!("{f:.4}"))
}
