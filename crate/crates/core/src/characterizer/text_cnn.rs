//! Text-CNN characterizer with a fully connected softmax head.
//!
//! Tokens are embedded, each filter slides over every window of `k`
//! consecutive embeddings, the ReLU responses are max-pooled per filter and
//! the pooled features feed a small ReLU network ending in two logits
//! `[fake, real]`. Credibility is the softmax probability of `real`.

use fnv::FnvHashMap;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, WordVectors};
use super::{sigmoid, CredibilityModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCnnConfig {
    pub embedding_dim: usize,
    pub windows: Vec<usize>,
    pub filters_per_window: usize,
    /// Hidden layer widths of the head; the output layer of width 2 is implied.
    pub hidden: Vec<usize>,
    /// Half-width of the uniform embedding initialization.
    pub embedding_init: f64,
}

impl Default for TextCnnConfig {
    fn default() -> Self {
        TextCnnConfig {
            embedding_dim: 60,
            windows: vec![2, 3, 4, 5],
            filters_per_window: 10,
            hidden: vec![50, 10],
            embedding_init: 0.1,
        }
    }
}

impl TextCnnConfig {
    pub fn feature_len(&self) -> usize {
        self.windows.len() * self.filters_per_window
    }

    pub fn max_window(&self) -> usize {
        self.windows.iter().copied().max().unwrap_or(1)
    }

    fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0
            || self.filters_per_window == 0
            || self.windows.is_empty()
            || self.windows.contains(&0)
            || self.hidden.contains(&0)
        {
            return Err(Error::InvalidArgument(format!(
                "degenerate text-cnn shape {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub window: usize,
    /// `filters x (window * dim)`, row-major; row `f` holds `window` stacked taps.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl FilterBank {
    fn filters(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|o| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCnnModel {
    pub config: TextCnnConfig,
    pub vocab: Vocabulary,
    /// `|V| x dim`, row-major.
    pub embeddings: Vec<f64>,
    pub banks: Vec<FilterBank>,
    pub head: Vec<Dense>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Per filter (bank-major): max pre-activation and the window start where it occurs.
    pooled: Vec<(f64, usize)>,
    /// Per filter: gap between the best and second-best window, infinite with one window.
    pool_gap: Vec<f64>,
    features: Vec<f64>,
    /// Pre-activations of every head layer; the last entry holds the logits.
    pre: Vec<Vec<f64>>,
    /// Inputs of every head layer (features, then ReLU outputs).
    inputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn logits(&self) -> [f64; 2] {
        let last = self.pre.last().expect("head has an output layer");
        [last[0], last[1]]
    }

    /// Distance to the nearest non-differentiable point: a hidden ReLU at 0,
    /// a pooled ReLU at 0, or two windows tied for the max.
    pub fn kink_margin(&self) -> f64 {
        let relu = self.pooled.iter().map(|(s, _)| s.abs());
        let gaps = self.pool_gap.iter().copied();
        let hidden = self.pre[..self.pre.len() - 1]
            .iter()
            .flat_map(|layer| layer.iter().map(|z| z.abs()));
        relu.chain(gaps).chain(hidden).fold(f64::INFINITY, f64::min)
    }

    /// Which windows won the pooling and which units were active.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let pool = self
            .pooled
            .iter()
            .map(|&(s, at)| if s > 0.0 { at + 1 } else { 0 });
        let hidden = self.pre[..self.pre.len() - 1]
            .iter()
            .flat_map(|layer| layer.iter().map(|&z| usize::from(z > 0.0)));
        pool.chain(hidden).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextCnnGradient {
    pub embeddings: FnvHashMap<usize, Vec<f64>>,
    pub banks: Vec<(Vec<f64>, Vec<f64>)>,
    pub head: Vec<(Vec<f64>, Vec<f64>)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cached filter-tap responses, see [`TextCnnModel::projection`].
#[derive(Debug, Clone)]
pub struct Projection {
    offsets: Vec<usize>,
    rows: FnvHashMap<usize, Vec<f64>>,
}

fn uniform(rng: &mut impl Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-half_width..=half_width)).collect()
}

impl TextCnnModel {
    /// Random initialization: embeddings uniform in `±embedding_init`,
    /// filters and dense layers He-uniform, biases zero.
    pub fn new(config: TextCnnConfig, vocab: Vocabulary, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let dim = config.embedding_dim;
        let embeddings = uniform(rng, vocab.len() * dim, config.embedding_init);
        let banks = config
            .windows
            .iter()
            .map(|&window| {
                let fan_in = window * dim;
                FilterBank {
                    window,
                    weights: uniform(
                        rng,
                        config.filters_per_window * fan_in,
                        (6.0 / fan_in as f64).sqrt(),
                    ),
                    bias: vec![0.0; config.filters_per_window],
                }
            })
            .collect();
        let mut widths = vec![config.feature_len()];
        widths.extend(&config.hidden);
        widths.push(2);
        let head = widths
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: uniform(rng, w[0] * w[1], (6.0 / w[0] as f64).sqrt()),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(TextCnnModel {
            config,
            vocab,
            embeddings,
            banks,
            head,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn embedding(&self, row: usize) -> &[f64] {
        let d = self.dim();
        &self.embeddings[row * d..(row + 1) * d]
    }

    /// Copies pretrained vectors into matching vocabulary rows; returns how many matched.
    pub fn import_vectors(&mut self, vectors: &WordVectors) -> Result<usize> {
        if vectors.dim != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "word vectors have dimension {}, model expects {}",
                vectors.dim,
                self.dim()
            )));
        }
        let d = self.dim();
        let mut matched = 0;
        for (row, token) in self.vocab.tokens().iter().enumerate() {
            if let Some(v) = vectors.vectors.get(token) {
                self.embeddings[row * d..(row + 1) * d].copy_from_slice(v);
                matched += 1;
            }
        }
        Ok(matched)
    }

    /// Token rows right-padded with the unknown row up to the widest window.
    pub fn encode_tokens(&self, tokens: &[String]) -> Option<Vec<usize>> {
        if tokens.is_empty() {
            return None;
        }
        let mut ids: Vec<usize> = tokens.iter().map(|t| self.vocab.lookup(t)).collect();
        let min_len = self.config.max_window();
        if ids.len() < min_len {
            ids.resize(min_len, 0);
        }
        Some(ids)
    }

    pub fn forward(&self, ids: &[usize]) -> Trace {
        let d = self.dim();
        self.forward_with(ids, |b, f, r, j| {
            let bank = &self.banks[b];
            let at = (f * bank.window + r) * d;
            dot(&bank.weights[at..at + d], self.embedding(ids[j]))
        })
    }

    /// Forward pass where `tap(bank, filter, r, j)` gives the response of
    /// tap `r` of a filter to the token at position `j`.
    fn forward_with(&self, ids: &[usize], tap: impl Fn(usize, usize, usize, usize) -> f64) -> Trace {
        let n_filters: usize = self.banks.iter().map(FilterBank::filters).sum();
        let mut pooled = Vec::with_capacity(n_filters);
        let mut pool_gap = Vec::with_capacity(n_filters);
        for (b, bank) in self.banks.iter().enumerate() {
            let k = bank.window;
            let positions = ids.len().saturating_sub(k) + 1;
            for f in 0..bank.filters() {
                let mut best = (f64::NEG_INFINITY, 0usize);
                let mut second = f64::NEG_INFINITY;
                for i in 0..positions {
                    let mut s = bank.bias[f];
                    for r in 0..k {
                        s += tap(b, f, r, i + r);
                    }
                    if s > best.0 {
                        second = best.0;
                        best = (s, i);
                    } else if s > second {
                        second = s;
                    }
                }
                pooled.push(best);
                pool_gap.push(best.0 - second);
            }
        }
        let features: Vec<f64> = pooled.iter().map(|(s, _)| s.max(0.0)).collect();

        let mut inputs = Vec::with_capacity(self.head.len());
        let mut pre = Vec::with_capacity(self.head.len());
        let mut x = features.clone();
        for (layer_no, layer) in self.head.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&x, &mut z);
            let next = if layer_no + 1 < self.head.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                Vec::new()
            };
            inputs.push(std::mem::replace(&mut x, next));
            pre.push(z);
        }
        Trace {
            pooled,
            pool_gap,
            features,
            pre,
            inputs,
        }
    }

    /// Softmax probabilities `[fake, real]`.
    pub fn class_probabilities(&self, ids: &[usize]) -> [f64; 2] {
        let [fake, real] = self.forward(ids).logits();
        let p_real = sigmoid(real - fake);
        [sigmoid(fake - real), p_real]
    }

    /// Per-token filter responses for every row used by `inputs`, so that
    /// scoring many news with fixed parameters does each dot product once.
    pub fn projection<'a>(&self, inputs: impl IntoIterator<Item = &'a Vec<usize>>) -> Projection {
        let d = self.dim();
        let mut used = vec![false; self.vocab.len()];
        for ids in inputs {
            for &id in ids {
                used[id] = true;
            }
        }
        let mut offsets = Vec::with_capacity(self.banks.len());
        let mut taps = 0;
        for bank in &self.banks {
            offsets.push(taps);
            taps += bank.filters() * bank.window;
        }
        let rows: Vec<usize> = (0..used.len()).filter(|&r| used[r]).collect();
        let responses: Vec<(usize, Vec<f64>)> = rows
            .par_iter()
            .map(|&row| {
                let e = self.embedding(row);
                let mut out = Vec::with_capacity(taps);
                for bank in &self.banks {
                    for tap in bank.weights.chunks_exact(d) {
                        out.push(dot(tap, e));
                    }
                }
                (row, out)
            })
            .collect();
        Projection {
            offsets,
            rows: responses.into_iter().collect(),
        }
    }

    /// Same value as [`CredibilityModel::raw_credibility`], using cached responses.
    pub fn projected_credibility(&self, projection: &Projection, ids: &[usize]) -> f64 {
        let rows: Vec<&[f64]> = ids
            .iter()
            .map(|id| projection.rows[id].as_slice())
            .collect();
        let trace = self.forward_with(ids, |b, f, r, j| {
            rows[j][projection.offsets[b] + f * self.banks[b].window + r]
        });
        let [fake, real] = trace.logits();
        sigmoid(real - fake)
    }

    pub fn zero_gradient(&self) -> TextCnnGradient {
        TextCnnGradient {
            embeddings: FnvHashMap::default(),
            banks: self
                .banks
                .iter()
                .map(|b| (vec![0.0; b.weights.len()], vec![0.0; b.bias.len()]))
                .collect(),
            head: self
                .head
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    /// Adds `scale * dloss/dparams` for one example to `grad`.
    /// `dlogit` is the derivative of the loss with respect to `real - fake`.
    fn backward(&self, ids: &[usize], trace: &Trace, dlogit: f64, scale: f64, grad: &mut TextCnnGradient) {
        let d = self.dim();
        // softmax over two logits depends on real - fake only
        let mut delta = vec![-dlogit * scale, dlogit * scale];
        for (layer_no, layer) in self.head.iter().enumerate().rev() {
            let input = &trace.inputs[layer_no];
            let (gw, gb) = &mut grad.head[layer_no];
            let mut dinput = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let g = delta[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let row = o * layer.inputs;
                for i in 0..layer.inputs {
                    gw[row + i] += g * input[i];
                    dinput[i] += g * layer.weights[row + i];
                }
            }
            if layer_no > 0 {
                let below = &trace.pre[layer_no - 1];
                for (g, z) in dinput.iter_mut().zip(below) {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = dinput;
        }

        // delta now holds dloss/dfeatures
        let mut filter = 0;
        for (bank_no, bank) in self.banks.iter().enumerate() {
            let width = bank.window * d;
            let (gw, gb) = &mut grad.banks[bank_no];
            for f in 0..bank.filters() {
                let (s, at) = trace.pooled[filter];
                let g = delta[filter];
                filter += 1;
                if s <= 0.0 || g == 0.0 {
                    continue;
                }
                gb[f] += g;
                let w = &bank.weights[f * width..(f + 1) * width];
                for r in 0..bank.window {
                    let row = ids[at + r];
                    let e = self.embedding(row);
                    let ge = grad.embeddings.entry(row).or_insert_with(|| vec![0.0; d]);
                    for c in 0..d {
                        gw[f * width + r * d + c] += g * e[c];
                        ge[c] += g * w[r * d + c];
                    }
                }
            }
        }
    }
}

impl CredibilityModel for TextCnnModel {
    type Input = Vec<usize>;
    type Gradient = TextCnnGradient;

    fn encode(&self, tokens: &[String]) -> Option<Vec<usize>> {
        self.encode_tokens(tokens)
    }

    fn raw_credibility(&self, input: &Vec<usize>) -> f64 {
        self.class_probabilities(input)[1]
    }

    fn zero_gradient(&self) -> TextCnnGradient {
        TextCnnModel::zero_gradient(self)
    }

    fn accumulate_gradient(&self, input: &Vec<usize>, target: f64, scale: f64, grad: &mut TextCnnGradient) -> f64 {
        let trace = self.forward(input);
        let [fake, real] = trace.logits();
        let p = sigmoid(real - fake);
        self.backward(input, &trace, p - target, scale, grad);
        super::bce_loss(p, target)
    }

    fn merge_gradient(into: &mut TextCnnGradient, from: TextCnnGradient) {
        for (row, g) in from.embeddings {
            match into.embeddings.get_mut(&row) {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => {
                    into.embeddings.insert(row, g);
                }
            }
        }
        for ((aw, ab), (bw, bb)) in into.banks.iter_mut().zip(from.banks) {
            aw.iter_mut().zip(&bw).for_each(|(a, b)| *a += b);
            ab.iter_mut().zip(&bb).for_each(|(a, b)| *a += b);
        }
        for ((aw, ab), (bw, bb)) in into.head.iter_mut().zip(from.head) {
            aw.iter_mut().zip(&bw).for_each(|(a, b)| *a += b);
            ab.iter_mut().zip(&bb).for_each(|(a, b)| *a += b);
        }
    }

    fn apply_gradient(&mut self, grad: &TextCnnGradient, step: f64) {
        let d = self.dim();
        for (&row, g) in &grad.embeddings {
            for (p, v) in self.embeddings[row * d..(row + 1) * d].iter_mut().zip(g) {
                *p -= step * v;
            }
        }
        for (bank, (gw, gb)) in self.banks.iter_mut().zip(&grad.banks) {
            bank.weights.iter_mut().zip(gw).for_each(|(p, g)| *p -= step * g);
            bank.bias.iter_mut().zip(gb).for_each(|(p, g)| *p -= step * g);
        }
        for (layer, (gw, gb)) in self.head.iter_mut().zip(&grad.head) {
            layer.weights.iter_mut().zip(gw).for_each(|(p, g)| *p -= step * g);
            layer.bias.iter_mut().zip(gb).for_each(|(p, g)| *p -= step * g);
        }
    }

    fn parameters(&self) -> Vec<f64> {
        let mut out = self.embeddings.clone();
        for bank in &self.banks {
            out.extend(&bank.weights);
            out.extend(&bank.bias);
        }
        for layer in &self.head {
            out.extend(&layer.weights);
            out.extend(&layer.bias);
        }
        out
    }

    fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameters().len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.parameters().len(),
                params.len()
            )));
        }
        let mut rest = params;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(&mut self.embeddings);
        for bank in &mut self.banks {
            take(&mut bank.weights);
            take(&mut bank.bias);
        }
        for layer in &mut self.head {
            take(&mut layer.weights);
            take(&mut layer.bias);
        }
        Ok(())
    }

    fn flatten_gradient(&self, grad: &TextCnnGradient) -> Vec<f64> {
        let d = self.dim();
        let mut emb = vec![0.0; self.embeddings.len()];
        for (&row, g) in &grad.embeddings {
            emb[row * d..(row + 1) * d].copy_from_slice(g);
        }
        for (gw, gb) in grad.banks.iter().chain(&grad.head) {
            emb.extend(gw);
            emb.extend(gb);
        }
        emb
    }
}
