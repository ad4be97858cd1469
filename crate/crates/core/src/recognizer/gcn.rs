//! Graph convolutional encoder with hand-written backpropagation.
//!
//! Layer `l` computes `h_i = norm(relu(Σ_{j ∈ N(i) ∪ {i}} h_j·V + b))` with
//! `norm` the L2 row normalization (all-zero rows stay zero). The encoder
//! output concatenates the input features with every layer's output.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Dimension};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EntityId, KnowledgeGraph};
use crate::error::{config, Result};

/// Undirected simple neighbour lists (self excluded).
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbourhood {
    lists: Vec<Vec<u32>>,
}

impl Neighbourhood {
    pub fn of(kg: &KnowledgeGraph) -> Self {
        Self {
            lists: kg
                .entity_ids()
                .map(|e| kg.undirected_neighbours(e).into_iter().map(|n| n.0).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbours(&self, e: EntityId) -> &[u32] {
        &self.lists[e.idx()]
    }

    /// Row `i` of the result is `x_i + Σ_{j ∈ N(i)} x_j`. The operator is
    /// symmetric, so it is also its own transpose.
    pub fn aggregate(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (i, nbrs) in self.lists.iter().enumerate() {
            let mut row = out.row_mut(i);
            for &j in nbrs {
                row += &x.row(j as usize);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnLayer {
    /// `in_dim × out_dim`, applied to row vectors.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    /// Initial entity features `h⁽⁰⁾`.
    pub features: Array2<f64>,
    pub layers: Vec<GcnLayer>,
}

impl GcnParams {
    /// Features uniform in ±0.01, Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(entities: usize, input_dim: usize, output_dim: usize, layers: usize, rng: &mut R) -> Self {
        let features = Array2::from_shape_simple_fn((entities, input_dim), || rng.gen_range(-0.01..0.01));
        let mut stack = Vec::with_capacity(layers);
        let mut fan_in = input_dim;
        for _ in 0..layers {
            let bound = (6.0 / (fan_in + output_dim) as f64).sqrt();
            stack.push(GcnLayer {
                weight: Array2::from_shape_simple_fn((fan_in, output_dim), || rng.gen_range(-bound..bound)),
                bias: Array1::zeros(output_dim),
            });
            fan_in = output_dim;
        }
        Self { features, layers: stack }
    }

    pub fn output_dim(&self) -> usize {
        self.features.ncols() + self.layers.iter().map(|l| l.bias.len()).sum::<usize>()
    }

    fn check(&self, nb: &Neighbourhood) -> Result<()> {
        if self.features.nrows() != nb.len() {
            return Err(config(format!(
                "encoder has {} feature rows for a graph of {} entities",
                self.features.nrows(),
                nb.len()
            )));
        }
        let mut dim = self.features.ncols();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weight.nrows() != dim || layer.weight.ncols() != layer.bias.len() {
                return Err(config(format!("layer {} dimensions do not chain", l + 1)));
            }
            dim = layer.bias.len();
        }
        Ok(())
    }
}

/// Intermediate values kept for the backward pass.
pub(crate) struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    norms: Vec<Array1<f64>>,
    outputs: Vec<Array2<f64>>,
}

#[derive(Clone, Debug)]
pub(crate) struct GcnGrads {
    pub features: Array2<f64>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn normalize(r: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms: Array1<f64> = r.map_axis(Axis(1), |row| row.dot(&row).sqrt());
    let mut out = r.clone();
    for (mut row, &n) in out.rows_mut().into_iter().zip(&norms) {
        if n > 0.0 {
            row.mapv_inplace(|x| x / n);
        }
    }
    (out, norms)
}

pub(crate) fn forward(nb: &Neighbourhood, p: &GcnParams) -> (Array2<f64>, Trace) {
    let mut trace = Trace {
        inputs: Vec::new(),
        pre: Vec::new(),
        norms: Vec::new(),
        outputs: Vec::new(),
    };
    let mut h = p.features.clone();
    for layer in &p.layers {
        let m = nb.aggregate(h.view());
        let z = m.dot(&layer.weight) + &layer.bias;
        let r = z.mapv(|x| x.max(0.0));
        let (out, norms) = normalize(&r);
        trace.inputs.push(m);
        trace.pre.push(z);
        trace.norms.push(norms);
        trace.outputs.push(out.clone());
        h = out;
    }
    let mut blocks = vec![p.features.view()];
    blocks.extend(trace.outputs.iter().map(|o| o.view()));
    let out = concatenate(Axis(1), &blocks).expect("blocks share row count");
    (out, trace)
}

pub(crate) fn backward(nb: &Neighbourhood, p: &GcnParams, trace: &Trace, d_out: &Array2<f64>) -> GcnGrads {
    let d0 = p.features.ncols();
    let mut offsets = vec![d0];
    for layer in &p.layers {
        offsets.push(offsets.last().unwrap() + layer.bias.len());
    }
    let mut weights = vec![Array2::zeros((0, 0)); p.layers.len()];
    let mut biases = vec![Array1::zeros(0); p.layers.len()];
    let last = p.layers.len();
    let mut carry: Option<Array2<f64>> = None;
    for l in (0..last).rev() {
        let mut d_h = d_out.slice(s![.., offsets[l]..offsets[l + 1]]).to_owned();
        if let Some(c) = carry.take() {
            d_h += &c;
        }
        let h = &trace.outputs[l];
        let mut d_z = Array2::zeros(d_h.raw_dim());
        for i in 0..d_h.nrows() {
            let n = trace.norms[l][i];
            if n == 0.0 {
                continue;
            }
            let hr = h.row(i);
            let dh = d_h.row(i);
            let proj = hr.dot(&dh);
            let z = trace.pre[l].row(i);
            let mut dz = d_z.row_mut(i);
            for k in 0..dz.len() {
                if z[k] > 0.0 {
                    dz[k] = (dh[k] - hr[k] * proj) / n;
                }
            }
        }
        weights[l] = trace.inputs[l].t().dot(&d_z);
        biases[l] = d_z.sum_axis(Axis(0));
        let d_m = d_z.dot(&p.layers[l].weight.t());
        carry = Some(nb.aggregate(d_m.view()));
    }
    let mut features = d_out.slice(s![.., 0..d0]).to_owned();
    if let Some(c) = carry {
        features += &c;
    }
    GcnGrads {
        features,
        weights,
        biases,
    }
}

/// Encodes every entity of `kg`; one row per entity.
pub fn gcn_encode(kg: &KnowledgeGraph, params: &GcnParams) -> Result<Array2<f64>> {
    let nb = Neighbourhood::of(kg);
    encode_with(&nb, params)
}

pub fn encode_with(nb: &Neighbourhood, params: &GcnParams) -> Result<Array2<f64>> {
    params.check(nb)?;
    Ok(forward(nb, params).0)
}

/// Adam moment estimates for one parameter tensor.
#[derive(Clone, Debug)]
pub(crate) struct AdamSlot<D: Dimension> {
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: Dimension> AdamSlot<D> {
    pub fn like(p: &ndarray::Array<f64, D>) -> Self {
        Self {
            m: ndarray::Array::zeros(p.raw_dim()),
            v: ndarray::Array::zeros(p.raw_dim()),
        }
    }

    pub fn step(&mut self, param: &mut ndarray::Array<f64, D>, grad: &ndarray::Array<f64, D>, lr: f64, t: i32) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let c1 = 1.0 - B1.powi(t);
        let c2 = 1.0 - B2.powi(t);
        ndarray::Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            });
    }
}

#[derive(Clone, Debug)]
pub(crate) struct GcnAdam {
    features: AdamSlot<ndarray::Ix2>,
    weights: Vec<AdamSlot<ndarray::Ix2>>,
    biases: Vec<AdamSlot<ndarray::Ix1>>,
}

impl GcnAdam {
    pub fn new(p: &GcnParams) -> Self {
        Self {
            features: AdamSlot::like(&p.features),
            weights: p.layers.iter().map(|l| AdamSlot::like(&l.weight)).collect(),
            biases: p.layers.iter().map(|l| AdamSlot::like(&l.bias)).collect(),
        }
    }

    /// Updates layer parameters, and the input features when `features`.
    pub fn step(&mut self, p: &mut GcnParams, g: &GcnGrads, lr: f64, t: i32, features: bool) {
        if features {
            self.features.step(&mut p.features, &g.features, lr, t);
        }
        for (((layer, sw), sb), (gw, gb)) in p
            .layers
            .iter_mut()
            .zip(&mut self.weights)
            .zip(&mut self.biases)
            .zip(g.weights.iter().zip(&g.biases))
        {
            sw.step(&mut layer.weight, gw, lr, t);
            sb.step(&mut layer.bias, gb, lr, t);
        }
    }
}

/// Update rule for encoder training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    /// Plain full-batch gradient descent.
    #[default]
    Sgd,
}

pub(crate) enum GcnOptimizer {
    Adam(Box<GcnAdam>),
    Sgd,
}

impl GcnOptimizer {
    pub fn new(kind: Optimizer, p: &GcnParams) -> Self {
        match kind {
            Optimizer::Adam => Self::Adam(Box::new(GcnAdam::new(p))),
            Optimizer::Sgd => Self::Sgd,
        }
    }

    pub fn step(&mut self, p: &mut GcnParams, g: &GcnGrads, lr: f64, t: i32, features: bool) {
        match self {
            Self::Adam(a) => a.step(p, g, lr, t, features),
            Self::Sgd => {
                if features {
                    p.features.scaled_add(-lr, &g.features);
                }
                for (layer, (gw, gb)) in p.layers.iter_mut().zip(g.weights.iter().zip(&g.biases)) {
                    layer.weight.scaled_add(-lr, gw);
                    layer.bias.scaled_add(-lr, gb);
                }
            }
        }
    }
}
