//! Forward and reverse-mode passes of the classifier.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::params::{Dense, GatHead, GatLayer, Params};
use super::{GcGatConfig, ModelError};

pub const LOG_FLOOR: f64 = 1e-12;

/// A graph prepared for the model: features, the attention neighborhood
/// (symmetrized adjacency plus self-loops) and the normalized GCN operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub x: Array2<f64>,
    pub nbr: Array2<f64>,
    pub a_hat: Array2<f64>,
}

impl Graph {
    pub fn new(x: &Array2<f64>, a: &Array2<f64>) -> Result<Self, ModelError> {
        let n = x.nrows();
        if n == 0 {
            return Err(ModelError::Shape("graph has no nodes".into()));
        }
        if a.dim() != (n, n) {
            return Err(ModelError::Shape(format!("adjacency is {:?}, expected ({n}, {n})", a.dim())));
        }
        if a.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(ModelError::Shape("adjacency entries must be 0 or 1".into()));
        }
        finite("input features", x.iter())?;
        let nbr = attention_neighborhood(a);
        let a_hat = normalized_adjacency(&nbr);
        Ok(Graph { x: x.clone(), nbr, a_hat })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }
}

/// `max(A, Aᵀ)` with ones on the diagonal.
pub fn attention_neighborhood(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j || a[[i, j]] != 0.0 || a[[j, i]] != 0.0 { 1.0 } else { 0.0 })
}

/// `D^{-1/2} Ã D^{-1/2}` for a binary, symmetric `Ã` with self-loops.
pub fn normalized_adjacency(tilde: &Array2<f64>) -> Array2<f64> {
    let inv_sqrt: Vec<f64> = tilde.sum_axis(Axis(1)).iter().map(|d| 1.0 / d.sqrt()).collect();
    Array2::from_shape_fn(tilde.dim(), |(i, j)| tilde[[i, j]] * inv_sqrt[i] * inv_sqrt[j])
}

fn finite<'a>(what: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<(), ModelError> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::Numerical(format!("non-finite values in {what}")))
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Inverted-dropout masks for one training step. Entries are 0 or `1/(1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// Per GAT layer, over that layer's input features.
    pub inputs: Vec<Array2<f64>>,
    /// Per GAT layer and head, over attention coefficients.
    pub attention: Vec<Vec<Array2<f64>>>,
}

impl DropoutMasks {
    pub fn sample<R: Rng>(cfg: &GcGatConfig, n: usize, rng: &mut R) -> Self {
        let keep = 1.0 - cfg.dropout;
        let unit = Uniform::new(0.0, 1.0);
        let mut draw = |shape: (usize, usize)| {
            Array2::from_shape_simple_fn(shape, || if unit.sample(rng) < keep { 1.0 / keep } else { 0.0 })
        };
        let mut inputs = Vec::new();
        let mut attention = Vec::new();
        for l in 0..cfg.gat_layers {
            inputs.push(draw((n, cfg.layer_input_dim(l))));
            attention.push((0..cfg.heads).map(|_| draw((n, n))).collect());
        }
        DropoutMasks { inputs, attention }
    }
}

struct HeadCache {
    z: Array2<f64>,
    scores: Array2<f64>,
    alpha: Array2<f64>,
    alpha_d: Array2<f64>,
    pre: Array2<f64>,
}

struct LayerCache {
    input: Array2<f64>,
    heads: Vec<HeadCache>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
pub struct Trace {
    layers: Vec<LayerCache>,
    pooled_in: Array2<f64>,
    y: Array2<f64>,
    mlp_in: Vec<Array1<f64>>,
    mlp_pre: Vec<Array1<f64>>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

fn head_forward(
    h: &Array2<f64>,
    nbr: &Array2<f64>,
    head: &GatHead,
    slope: f64,
    mask: Option<&Array2<f64>>,
) -> HeadCache {
    let n = h.nrows();
    let z = h.dot(&head.w);
    let dh = z.ncols();
    let src = z.dot(&head.a.slice(s![..dh]));
    let dst = z.dot(&head.a.slice(s![dh..]));
    let mut scores = Array2::zeros((n, n));
    let mut alpha = Array2::zeros((n, n));
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            if nbr[[i, j]] != 0.0 {
                let e = src[i] + dst[j];
                scores[[i, j]] = e;
                max = max.max(leaky(e, slope));
            }
        }
        let mut sum = 0.0;
        for j in 0..n {
            if nbr[[i, j]] != 0.0 {
                let v = (leaky(scores[[i, j]], slope) - max).exp();
                alpha[[i, j]] = v;
                sum += v;
            }
        }
        alpha.row_mut(i).mapv_inplace(|v| v / sum);
    }
    let alpha_d = match mask {
        Some(m) => &alpha * m,
        None => alpha.clone(),
    };
    let pre = alpha_d.dot(&z);
    HeadCache { z, scores, alpha, alpha_d, pre }
}

fn layer_forward(
    h: &Array2<f64>,
    nbr: &Array2<f64>,
    layer: &GatLayer,
    slope: f64,
    input_mask: Option<&Array2<f64>>,
    attn_masks: Option<&[Array2<f64>]>,
) -> Result<(Array2<f64>, LayerCache), ModelError> {
    let input = match input_mask {
        Some(m) => h * m,
        None => h.clone(),
    };
    let heads: Vec<HeadCache> = layer
        .heads
        .iter()
        .enumerate()
        .map(|(k, head)| head_forward(&input, nbr, head, slope, attn_masks.map(|m| &m[k])))
        .collect();
    let n = h.nrows();
    let dh = heads[0].pre.ncols();
    let out = if layer.concat {
        let mut out = Array2::zeros((n, dh * heads.len()));
        for (k, hc) in heads.iter().enumerate() {
            out.slice_mut(s![.., k * dh..(k + 1) * dh]).assign(&hc.pre.mapv(elu));
        }
        out
    } else {
        let mut out = Array2::zeros((n, dh));
        for hc in &heads {
            out += &hc.pre.mapv(elu);
        }
        out / heads.len() as f64
    };
    finite("attention layer output", out.iter())?;
    Ok((out, LayerCache { input, heads }))
}

/// One attention layer in inference mode. `a` is the raw directed adjacency.
pub fn gat_layer(h: &Array2<f64>, a: &Array2<f64>, layer: &GatLayer, slope: f64) -> Result<Array2<f64>, ModelError> {
    let din = layer.heads.first().map(|hd| hd.w.nrows()).ok_or_else(|| ModelError::Shape("layer has no heads".into()))?;
    if h.ncols() != din || a.dim() != (h.nrows(), h.nrows()) {
        return Err(ModelError::Shape(format!("input {:?} / adjacency {:?} do not fit a {din}-wide layer", h.dim(), a.dim())));
    }
    let nbr = attention_neighborhood(a);
    layer_forward(h, &nbr, layer, slope, None, None).map(|(out, _)| out)
}

/// GCN reduction followed by the mean over nodes.
pub fn gcn_pool(h: &Array2<f64>, a: &Array2<f64>, w: &Array2<f64>) -> Result<Array1<f64>, ModelError> {
    if h.ncols() != w.nrows() || a.dim() != (h.nrows(), h.nrows()) || h.nrows() == 0 {
        return Err(ModelError::Shape(format!("pool input {:?}, adjacency {:?}, weight {:?}", h.dim(), a.dim(), w.dim())));
    }
    let a_hat = normalized_adjacency(&attention_neighborhood(a));
    let z = a_hat.dot(h).dot(w).mapv(|v| v.max(0.0));
    Ok(z.mean_axis(Axis(0)).expect("non-empty"))
}

/// Affine layers with ReLU between them; the last layer's output is returned raw.
pub fn mlp_forward(g: &Array1<f64>, layers: &[Dense]) -> Result<Array1<f64>, ModelError> {
    let mut x = g.clone();
    for (i, d) in layers.iter().enumerate() {
        if x.len() != d.w.nrows() {
            return Err(ModelError::Shape(format!("mlp layer {i} expects {} inputs, got {}", d.w.nrows(), x.len())));
        }
        x = x.dot(&d.w) + &d.b;
        if i + 1 < layers.len() {
            x.mapv_inplace(|v| v.max(0.0));
        }
    }
    Ok(x)
}

pub fn softmax(z: ArrayView1<f64>) -> Array1<f64> {
    let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = z.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

/// `-w[label] · ln(max(probs[label], 1e-12))`
pub fn weighted_loss(probs: &[f64], label: usize, weights: [f64; 2]) -> f64 {
    -weights[label] * probs[label].max(LOG_FLOOR).ln()
}

fn check_input(cfg: &GcGatConfig, g: &Graph) -> Result<(), ModelError> {
    if g.x.ncols() != cfg.input_dim {
        return Err(ModelError::Shape(format!("feature width {} != {}", g.x.ncols(), cfg.input_dim)));
    }
    Ok(())
}

/// Full forward pass; dropout applies only when masks are given.
pub fn trace(params: &Params, cfg: &GcGatConfig, g: &Graph, masks: Option<&DropoutMasks>) -> Result<Trace, ModelError> {
    check_input(cfg, g)?;
    let mut h = g.x.clone();
    let mut layers = Vec::with_capacity(params.gat.len());
    for (l, layer) in params.gat.iter().enumerate() {
        let (out, cache) = layer_forward(
            &h,
            &g.nbr,
            layer,
            cfg.leaky_slope,
            masks.map(|m| &m.inputs[l]),
            masks.map(|m| m.attention[l].as_slice()),
        )?;
        layers.push(cache);
        h = out;
    }
    let pooled_in = g.a_hat.dot(&h);
    let y = pooled_in.dot(&params.pool);
    let mut x = y.mapv(|v| v.max(0.0)).mean_axis(Axis(0)).expect("non-empty");
    let mut mlp_in = Vec::with_capacity(params.mlp.len());
    let mut mlp_pre = Vec::with_capacity(params.mlp.len());
    for (i, d) in params.mlp.iter().enumerate() {
        let pre = x.dot(&d.w) + &d.b;
        mlp_in.push(x);
        x = if i + 1 < params.mlp.len() { pre.mapv(|v| v.max(0.0)) } else { pre.clone() };
        mlp_pre.push(pre);
    }
    finite("logits", x.iter())?;
    let probs = softmax(x.view());
    Ok(Trace { layers, pooled_in, y, mlp_in, mlp_pre, logits: x, probs })
}

#[allow(clippy::too_many_arguments)]
fn head_backward(
    hc: &HeadCache,
    head: &GatHead,
    input: &Array2<f64>,
    nbr: &Array2<f64>,
    slope: f64,
    mask: Option<&Array2<f64>>,
    d_out: &Array2<f64>,
    grad: &mut GatHead,
) -> Array2<f64> {
    let n = input.nrows();
    let dh = hc.z.ncols();
    let d_pre = d_out * &hc.pre.mapv(elu_grad);
    let d_alpha_d = d_pre.dot(&hc.z.t());
    let mut dz = hc.alpha_d.t().dot(&d_pre);
    let d_alpha = match mask {
        Some(m) => &d_alpha_d * m,
        None => d_alpha_d,
    };
    let mut d_src = Array1::zeros(n);
    let mut d_dst = Array1::zeros(n);
    for i in 0..n {
        let mut dot = 0.0;
        for j in 0..n {
            if nbr[[i, j]] != 0.0 {
                dot += hc.alpha[[i, j]] * d_alpha[[i, j]];
            }
        }
        for j in 0..n {
            if nbr[[i, j]] != 0.0 {
                let dl = hc.alpha[[i, j]] * (d_alpha[[i, j]] - dot);
                let de = if hc.scores[[i, j]] > 0.0 { dl } else { slope * dl };
                d_src[i] += de;
                d_dst[j] += de;
            }
        }
    }
    let a_src = head.a.slice(s![..dh]);
    let a_dst = head.a.slice(s![dh..]);
    for i in 0..n {
        for c in 0..dh {
            dz[[i, c]] += d_src[i] * a_src[c] + d_dst[i] * a_dst[c];
        }
    }
    grad.a.slice_mut(s![..dh]).scaled_add(1.0, &hc.z.t().dot(&d_src));
    grad.a.slice_mut(s![dh..]).scaled_add(1.0, &hc.z.t().dot(&d_dst));
    grad.w.scaled_add(1.0, &input.t().dot(&dz));
    dz.dot(&head.w.t())
}

/// Loss and exact gradients for one labelled graph.
pub fn loss_and_gradients(
    params: &Params,
    cfg: &GcGatConfig,
    g: &Graph,
    label: usize,
    weights: [f64; 2],
    masks: Option<&DropoutMasks>,
) -> Result<(f64, Params), ModelError> {
    let t = trace(params, cfg, g, masks)?;
    let probs = t.probs.as_slice().expect("contiguous");
    let loss = weighted_loss(probs, label, weights);
    let mut grad = params.zeros_like();

    let mut d = Array1::zeros(t.probs.len());
    if probs[label] >= LOG_FLOOR {
        for (c, p) in probs.iter().enumerate() {
            d[c] = weights[label] * (p - if c == label { 1.0 } else { 0.0 });
        }
    }
    for i in (0..params.mlp.len()).rev() {
        if i + 1 < params.mlp.len() {
            d.zip_mut_with(&t.mlp_pre[i], |g, &pre| {
                if pre <= 0.0 {
                    *g = 0.0
                }
            });
        }
        let x = &t.mlp_in[i];
        for (r, xv) in x.iter().enumerate() {
            grad.mlp[i].w.row_mut(r).scaled_add(*xv, &d);
        }
        grad.mlp[i].b += &d;
        d = params.mlp[i].w.dot(&d);
    }

    let n = g.num_nodes();
    let mut dy = Array2::zeros(t.y.dim());
    for ((r, c), v) in t.y.indexed_iter() {
        if *v > 0.0 {
            dy[[r, c]] = d[c] / n as f64;
        }
    }
    grad.pool = t.pooled_in.t().dot(&dy);
    let mut dh = g.a_hat.t().dot(&dy.dot(&params.pool.t()));

    for l in (0..params.gat.len()).rev() {
        let layer = &params.gat[l];
        let cache = &t.layers[l];
        let heads = layer.heads.len();
        let mut d_input = Array2::zeros(cache.input.dim());
        for k in 0..heads {
            let d_out = if layer.concat {
                let dhk = cache.heads[k].pre.ncols();
                dh.slice(s![.., k * dhk..(k + 1) * dhk]).to_owned()
            } else {
                &dh / heads as f64
            };
            d_input += &head_backward(
                &cache.heads[k],
                &layer.heads[k],
                &cache.input,
                &g.nbr,
                cfg.leaky_slope,
                masks.map(|m| &m.attention[l][k]),
                &d_out,
                &mut grad.gat[l].heads[k],
            );
        }
        if let Some(m) = masks {
            d_input *= &m.inputs[l];
        }
        dh = d_input;
    }

    if !grad.is_finite() {
        return Err(ModelError::Numerical("non-finite gradient".into()));
    }
    Ok((loss, grad))
}

/// Class probabilities in inference mode.
pub fn probabilities(params: &Params, cfg: &GcGatConfig, g: &Graph) -> Result<Array1<f64>, ModelError> {
    trace(params, cfg, g, None).map(|t| t.probs)
}

/// Loss at the given parameters with fixed masks; used for finite differences.
pub fn loss_at(
    params: &Params,
    cfg: &GcGatConfig,
    g: &Graph,
    label: usize,
    weights: [f64; 2],
    masks: Option<&DropoutMasks>,
) -> Result<f64, ModelError> {
    let t = trace(params, cfg, g, masks)?;
    Ok(weighted_loss(t.probs.as_slice().expect("contiguous"), label, weights))
}
