use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::GcGatConfig;

/// One attention head: projection `w` (d_in × d_head) and attention vector
/// `a` (2·d_head). The first half of `a` scores the attending node, the second
/// half its neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub w: Array2<f64>,
    pub a: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub heads: Vec<GatHead>,
    /// Concatenate head outputs (inner layers) or average them (last layer).
    pub concat: bool,
}

/// Affine map `x·w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Every trainable tensor of the model. Gradients and optimizer moments use
/// the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub gat: Vec<GatLayer>,
    pub pool: Array2<f64>,
    pub mlp: Vec<Dense>,
}

pub struct Tensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

impl Params {
    pub fn zeros(cfg: &GcGatConfig) -> Self {
        let gat = (0..cfg.gat_layers)
            .map(|l| {
                let (din, dh) = (cfg.layer_input_dim(l), cfg.head_dim(l));
                GatLayer {
                    heads: (0..cfg.heads)
                        .map(|_| GatHead { w: Array2::zeros((din, dh)), a: Array1::zeros(2 * dh) })
                        .collect(),
                    concat: cfg.is_concat(l),
                }
            })
            .collect();
        let mlp = cfg
            .mlp_dims
            .windows(2)
            .map(|d| Dense { w: Array2::zeros((d[0], d[1])), b: Array1::zeros(d[1]) })
            .collect();
        Params { gat, pool: Array2::zeros((cfg.hidden_dim, cfg.pool_dim)), mlp }
    }

    /// Uniform initialization in `±1/√fan_in`, where fan-in is the input
    /// width of the map the tensor belongs to.
    pub fn init<R: Rng>(cfg: &GcGatConfig, rng: &mut R) -> Self {
        let mut p = Params::zeros(cfg);
        for t in p.tensors_mut() {
            let fan_in = if t.name.ends_with(".b") { fan_in_of_bias(cfg, &t.name) } else { t.shape[0] };
            let limit = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for v in t.data.iter_mut() {
                *v = dist.sample(rng);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data.fill(value);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Named row-major views in a fixed order.
    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = Vec::new();
        for (l, layer) in self.gat.iter().enumerate() {
            for (k, h) in layer.heads.iter().enumerate() {
                out.push(view(format!("gat.{l}.head.{k}.w"), h.w.shape(), h.w.as_slice()));
                out.push(view(format!("gat.{l}.head.{k}.a"), h.a.shape(), h.a.as_slice()));
            }
        }
        out.push(view("pool.w".into(), self.pool.shape(), self.pool.as_slice()));
        for (i, d) in self.mlp.iter().enumerate() {
            out.push(view(format!("mlp.{i}.w"), d.w.shape(), d.w.as_slice()));
            out.push(view(format!("mlp.{i}.b"), d.b.shape(), d.b.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (l, layer) in self.gat.iter_mut().enumerate() {
            for (k, h) in layer.heads.iter_mut().enumerate() {
                let shape = h.w.shape().to_vec();
                out.push(view_mut(format!("gat.{l}.head.{k}.w"), shape, h.w.as_slice_mut()));
                let shape = h.a.shape().to_vec();
                out.push(view_mut(format!("gat.{l}.head.{k}.a"), shape, h.a.as_slice_mut()));
            }
        }
        let shape = self.pool.shape().to_vec();
        out.push(view_mut("pool.w".into(), shape, self.pool.as_slice_mut()));
        for (i, d) in self.mlp.iter_mut().enumerate() {
            let shape = d.w.shape().to_vec();
            out.push(view_mut(format!("mlp.{i}.w"), shape, d.w.as_slice_mut()));
            let shape = d.b.shape().to_vec();
            out.push(view_mut(format!("mlp.{i}.b"), shape, d.b.as_slice_mut()));
        }
        out
    }
}

fn fan_in_of_bias(cfg: &GcGatConfig, name: &str) -> usize {
    let i: usize = name.split('.').nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    cfg.mlp_dims[i]
}

fn view<'a>(name: String, shape: &[usize], data: Option<&'a [f64]>) -> Tensor<'a> {
    Tensor { name, shape: shape.to_vec(), data: data.expect("parameters use standard layout") }
}

fn view_mut(name: String, shape: Vec<usize>, data: Option<&mut [f64]>) -> TensorMut<'_> {
    TensorMut { name, shape, data: data.expect("parameters use standard layout") }
}
