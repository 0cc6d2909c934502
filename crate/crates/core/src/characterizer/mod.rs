//! News characterizers: models mapping a token sequence to the probability
//! that the news is real, and their SGD training on labeled plus
//! pseudo-labeled news.

mod linear;
mod text_cnn;
mod vocab;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use linear::{HashedFeatures, LinearGradient, LinearModel, DEFAULT_HASH_BITS};
pub use text_cnn::{
    Dense, FilterBank, Projection, TextCnnConfig, TextCnnGradient, TextCnnModel, Trace,
};
pub use vocab::{Vocabulary, WordVectors, UNKNOWN_TOKEN};

use crate::corpus::{Label, NewsItem};
use crate::error::{Error, Result};
use crate::text::tokenize;

/// Probabilities are kept within `[EPSILON, 1 - EPSILON]` before any log.
pub const EPSILON: f64 = 1e-12;

/// Examples per sequential accumulation chunk inside a mini-batch. Chunks run
/// in parallel and are merged in order, so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 8;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of credibility `p` against target `y` (1 = real).
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(EPSILON, 1.0 - EPSILON);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn mean_bce(predictions: &[(f64, Label)]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions
        .iter()
        .map(|&(p, label)| bce_loss(p, label.credibility()))
        .sum::<f64>()
        / predictions.len() as f64
}

/// `lambda_l * labeled_loss + lambda_s * pseudo_loss`.
pub fn combine_losses(labeled_loss: f64, pseudo_loss: f64, lambda_l: f64, lambda_s: f64) -> f64 {
    lambda_l * labeled_loss + lambda_s * pseudo_loss
}

/// Weighted sum of the mean BCE over labeled and over pseudo-labeled
/// predictions. An empty side contributes 0.
pub fn combined_loss(
    labeled: &[(f64, Label)],
    pseudo: &[(f64, Label)],
    lambda_l: f64,
    lambda_s: f64,
) -> f64 {
    combine_losses(mean_bce(labeled), mean_bce(pseudo), lambda_l, lambda_s)
}

/// A trainable credibility scorer.
pub trait CredibilityModel: Send + Sync {
    type Input: Send + Sync;
    type Gradient: Send;

    /// `None` when there is nothing to score.
    fn encode(&self, tokens: &[String]) -> Option<Self::Input>;

    /// Probability of the real class, unclamped.
    fn raw_credibility(&self, input: &Self::Input) -> f64;

    /// Probability of the real class, kept strictly inside (0, 1).
    fn credibility(&self, input: &Self::Input) -> f64 {
        self.raw_credibility(input).clamp(EPSILON, 1.0 - EPSILON)
    }

    fn zero_gradient(&self) -> Self::Gradient;

    /// Adds `scale * d bce / d params` for one example and returns its unscaled loss.
    fn accumulate_gradient(
        &self,
        input: &Self::Input,
        target: f64,
        scale: f64,
        grad: &mut Self::Gradient,
    ) -> f64;

    fn merge_gradient(into: &mut Self::Gradient, from: Self::Gradient);

    /// `params -= step * grad`.
    fn apply_gradient(&mut self, grad: &Self::Gradient, step: f64);

    /// All parameters flattened in a fixed order.
    fn parameters(&self) -> Vec<f64>;

    fn set_parameters(&mut self, params: &[f64]) -> Result<()>;

    /// A gradient in the layout of [`CredibilityModel::parameters`].
    fn flatten_gradient(&self, grad: &Self::Gradient) -> Vec<f64>;
}

/// Descriptive credibility of one news; 0.5 (with a warning) when its text has no tokens.
pub fn predict_credibility<M: CredibilityModel>(model: &M, news: &NewsItem) -> f64 {
    match model.encode(&tokenize(&news.text)) {
        Some(input) => model.credibility(&input),
        None => {
            log::warn!("news `{}` has no tokens; using neutral credibility", news.id);
            0.5
        }
    }
}

/// Scores many inputs concurrently; output order follows input order.
pub fn score_all<M: CredibilityModel>(model: &M, inputs: &[Option<M::Input>]) -> Vec<f64> {
    inputs
        .par_iter()
        .map(|input| input.as_ref().map_or(0.5, |x| model.credibility(x)))
        .collect()
}

#[derive(Debug)]
pub struct Example<'a, I> {
    pub input: &'a I,
    pub label: Label,
    /// Pseudo-labeled rather than verified.
    pub pseudo: bool,
}

impl<'a, I> Clone for Example<'a, I> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<'a, I> Copy for Example<'a, I> {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Passes over the training set per call to [`train_update`].
    pub epochs: usize,
    pub lambda_l: f64,
    pub lambda_s: f64,
}

impl Default for SgdSettings {
    fn default() -> Self {
        SgdSettings {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 1,
            lambda_l: 1.0,
            lambda_s: 1.0,
        }
    }
}

impl SgdSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.lambda_l >= 0.0 && self.lambda_s >= 0.0) {
            return Err(Error::InvalidArgument("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-example weights `(labeled, pseudo)` that make the mean over all
/// examples equal the combined objective: `lambda * n_total / n_side`.
fn example_weights<I>(examples: &[Example<'_, I>], lambda_l: f64, lambda_s: f64) -> (f64, f64) {
    let n = examples.len() as f64;
    let n_pseudo = examples.iter().filter(|e| e.pseudo).count() as f64;
    let n_labeled = n - n_pseudo;
    let w = |lambda: f64, side: f64| if side > 0.0 { lambda * n / side } else { 0.0 };
    (w(lambda_l, n_labeled), w(lambda_s, n_pseudo))
}

/// Combined objective of the current model on `examples`.
pub fn objective<M: CredibilityModel>(
    model: &M,
    examples: &[Example<'_, M::Input>],
    lambda_l: f64,
    lambda_s: f64,
) -> f64 {
    let (labeled, pseudo): (Vec<_>, Vec<_>) = examples.iter().partition(|e| !e.pseudo);
    let predict = |side: Vec<&Example<'_, M::Input>>| -> Vec<(f64, Label)> {
        side.iter()
            .map(|e| (model.raw_credibility(e.input), e.label))
            .collect()
    };
    combined_loss(&predict(labeled), &predict(pseudo), lambda_l, lambda_s)
}

/// Exact gradient of [`objective`], accumulated in example order.
pub fn objective_gradient<M: CredibilityModel>(
    model: &M,
    examples: &[Example<'_, M::Input>],
    lambda_l: f64,
    lambda_s: f64,
) -> M::Gradient {
    let (w_l, w_s) = example_weights(examples, lambda_l, lambda_s);
    let n = examples.len().max(1) as f64;
    let mut grad = model.zero_gradient();
    for e in examples {
        let w = if e.pseudo { w_s } else { w_l };
        model.accumulate_gradient(e.input, e.label.credibility(), w / n, &mut grad);
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub batches: usize,
    /// Mean weighted loss over all examples seen, computed before each step.
    pub mean_loss: f64,
}

/// Mini-batch SGD on the combined objective.
///
/// Each pass shuffles the examples with `rng` and steps once per batch with
/// the weighted batch-mean gradient. Example weights are chosen so that the
/// expected batch gradient is the gradient of
/// `lambda_l * mean labeled loss + lambda_s * mean pseudo loss`.
pub fn train_update<M: CredibilityModel>(
    model: &mut M,
    examples: &[Example<'_, M::Input>],
    settings: &SgdSettings,
    rng: &mut impl Rng,
) -> Result<TrainStats> {
    settings.validate()?;
    let (w_l, w_s) = example_weights(examples, settings.lambda_l, settings.lambda_s);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut stats = TrainStats::default();
    let mut total_loss = 0.0;
    let mut seen = 0usize;

    for _ in 0..settings.epochs {
        order.shuffle(rng);
        for batch in order.chunks(settings.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let frozen: &M = model;
            let partials: Vec<(f64, M::Gradient)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grad = frozen.zero_gradient();
                    let mut loss = 0.0;
                    for &i in chunk {
                        let e = &examples[i];
                        let w = if e.pseudo { w_s } else { w_l };
                        let l = frozen.accumulate_gradient(
                            e.input,
                            e.label.credibility(),
                            w * scale,
                            &mut grad,
                        );
                        loss += w * l;
                    }
                    (loss, grad)
                })
                .collect();

            let mut parts = partials.into_iter();
            let (mut batch_loss, mut grad) = parts.next().expect("batch is non-empty");
            for (loss, g) in parts {
                batch_loss += loss;
                M::merge_gradient(&mut grad, g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    update: 0,
                    batch: stats.batches,
                });
            }
            model.apply_gradient(&grad, settings.learning_rate);
            stats.batches += 1;
            total_loss += batch_loss;
            seen += batch.len();
        }
    }
    stats.mean_loss = if seen > 0 { total_loss / seen as f64 } else { 0.0 };
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterizerKind {
    #[default]
    TextCnn,
    Linear,
}

impl fmt::Display for CharacterizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CharacterizerKind::TextCnn => "text_cnn",
            CharacterizerKind::Linear => "linear",
        })
    }
}

impl FromStr for CharacterizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text_cnn" | "text-cnn" | "textcnn" => Ok(CharacterizerKind::TextCnn),
            "linear" => Ok(CharacterizerKind::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown characterizer `{other}` (text_cnn|linear)"
            ))),
        }
    }
}

/// Either characterizer behind one type, for pipelines and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Characterizer {
    TextCnn(TextCnnModel),
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Ids(Vec<usize>),
    Features(HashedFeatures),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CharacterizerGradient {
    TextCnn(TextCnnGradient),
    Linear(LinearGradient),
}

impl Characterizer {
    /// Fresh model; the text-CNN vocabulary comes from `documents`.
    pub fn init(
        kind: CharacterizerKind,
        documents: &[Vec<String>],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        match kind {
            CharacterizerKind::TextCnn => {
                let vocab = Vocabulary::build(documents);
                Ok(Characterizer::TextCnn(TextCnnModel::new(
                    TextCnnConfig::default(),
                    vocab,
                    rng,
                )?))
            }
            CharacterizerKind::Linear => Ok(Characterizer::Linear(LinearModel::with_hash_bits(
                DEFAULT_HASH_BITS,
            )?)),
        }
    }

    pub fn kind(&self) -> CharacterizerKind {
        match self {
            Characterizer::TextCnn(_) => CharacterizerKind::TextCnn,
            Characterizer::Linear(_) => CharacterizerKind::Linear,
        }
    }
}

/// Read-only scoring view of a [`Characterizer`] with per-token caches.
pub enum Scorer<'a> {
    TextCnn(&'a TextCnnModel, Projection),
    Plain(&'a Characterizer),
}

impl Scorer<'_> {
    /// Equals `credibility` of the underlying model.
    pub fn credibility(&self, input: &Encoded) -> f64 {
        match (self, input) {
            (Scorer::TextCnn(m, proj), Encoded::Ids(ids)) => {
                m.projected_credibility(proj, ids).clamp(EPSILON, 1.0 - EPSILON)
            }
            (Scorer::Plain(m), input) => m.credibility(input),
            _ => panic!("{MISMATCH}"),
        }
    }
}

impl Characterizer {
    /// A scorer for `inputs` (and any other input using the same tokens).
    pub fn scorer<'a>(&'a self, inputs: impl IntoIterator<Item = &'a Encoded>) -> Scorer<'a> {
        match self {
            Characterizer::TextCnn(m) => {
                let ids = inputs.into_iter().filter_map(|x| match x {
                    Encoded::Ids(ids) => Some(ids),
                    Encoded::Features(_) => None,
                });
                Scorer::TextCnn(m, m.projection(ids))
            }
            Characterizer::Linear(_) => Scorer::Plain(self),
        }
    }
}

const MISMATCH: &str = "input encoded for a different characterizer";

impl CredibilityModel for Characterizer {
    type Input = Encoded;
    type Gradient = CharacterizerGradient;

    fn encode(&self, tokens: &[String]) -> Option<Encoded> {
        match self {
            Characterizer::TextCnn(m) => m.encode(tokens).map(Encoded::Ids),
            Characterizer::Linear(m) => m.encode(tokens).map(Encoded::Features),
        }
    }

    fn raw_credibility(&self, input: &Encoded) -> f64 {
        match (self, input) {
            (Characterizer::TextCnn(m), Encoded::Ids(x)) => m.raw_credibility(x),
            (Characterizer::Linear(m), Encoded::Features(x)) => m.raw_credibility(x),
            _ => panic!("{MISMATCH}"),
        }
    }

    fn zero_gradient(&self) -> CharacterizerGradient {
        match self {
            Characterizer::TextCnn(m) => CharacterizerGradient::TextCnn(m.zero_gradient()),
            Characterizer::Linear(m) => {
                CharacterizerGradient::Linear(CredibilityModel::zero_gradient(m))
            }
        }
    }

    fn accumulate_gradient(
        &self,
        input: &Encoded,
        target: f64,
        scale: f64,
        grad: &mut CharacterizerGradient,
    ) -> f64 {
        match (self, input, grad) {
            (Characterizer::TextCnn(m), Encoded::Ids(x), CharacterizerGradient::TextCnn(g)) => {
                m.accumulate_gradient(x, target, scale, g)
            }
            (Characterizer::Linear(m), Encoded::Features(x), CharacterizerGradient::Linear(g)) => {
                m.accumulate_gradient(x, target, scale, g)
            }
            _ => panic!("{MISMATCH}"),
        }
    }

    fn merge_gradient(into: &mut CharacterizerGradient, from: CharacterizerGradient) {
        match (into, from) {
            (CharacterizerGradient::TextCnn(a), CharacterizerGradient::TextCnn(b)) => {
                TextCnnModel::merge_gradient(a, b)
            }
            (CharacterizerGradient::Linear(a), CharacterizerGradient::Linear(b)) => {
                LinearModel::merge_gradient(a, b)
            }
            _ => panic!("{MISMATCH}"),
        }
    }

    fn apply_gradient(&mut self, grad: &CharacterizerGradient, step: f64) {
        match (self, grad) {
            (Characterizer::TextCnn(m), CharacterizerGradient::TextCnn(g)) => {
                m.apply_gradient(g, step)
            }
            (Characterizer::Linear(m), CharacterizerGradient::Linear(g)) => {
                m.apply_gradient(g, step)
            }
            _ => panic!("{MISMATCH}"),
        }
    }

    fn parameters(&self) -> Vec<f64> {
        match self {
            Characterizer::TextCnn(m) => m.parameters(),
            Characterizer::Linear(m) => m.parameters(),
        }
    }

    fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        match self {
            Characterizer::TextCnn(m) => m.set_parameters(params),
            Characterizer::Linear(m) => m.set_parameters(params),
        }
    }

    fn flatten_gradient(&self, grad: &CharacterizerGradient) -> Vec<f64> {
        match (self, grad) {
            (Characterizer::TextCnn(m), CharacterizerGradient::TextCnn(g)) => m.flatten_gradient(g),
            (Characterizer::Linear(m), CharacterizerGradient::Linear(g)) => m.flatten_gradient(g),
            _ => panic!("{MISMATCH}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn bce_values() {
        assert!(bce_loss(1.0 - EPSILON, 1.0) < 1e-11);
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(bce_loss(0.5, 0.0), bce_loss(0.5, 1.0));
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn combined_examples() {
        assert!((combine_losses(0.3, 0.2, 1.0, 1.0) - 0.5).abs() < 1e-15);
        let labeled = [(0.5, Label::Real)];
        assert_eq!(combined_loss(&labeled, &[], 1.0, 1.0), bce_loss(0.5, 1.0));
        let pseudo = [(0.9, Label::Fake)];
        assert_eq!(
            combined_loss(&labeled, &pseudo, 2.0, 0.0),
            2.0 * bce_loss(0.5, 1.0)
        );
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_hand_gradient_step() {
        // p = 0.5 at zero init, dL/dbias = p - y = -0.5, so bias = 0 - 0.1 * -0.5
        let mut model = LinearModel::zeros(64).unwrap();
        let input = model.encode(&toks("only")).unwrap();
        let examples = [Example { input: &input, label: Label::Real, pseudo: false }];
        let settings = SgdSettings { learning_rate: 0.1, batch_size: 32, ..Default::default() };
        train_update(&mut model, &examples, &settings, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((model.bias - 0.05).abs() < 1e-15);
        assert!((model.weights[input[0].0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let docs = vec![toks("a b c"), toks("d e f g")];
        let mut model =
            Characterizer::init(CharacterizerKind::TextCnn, &docs, &mut ChaCha8Rng::seed_from_u64(3))
                .unwrap();
        let before = model.clone();
        let inputs: Vec<Encoded> = docs.iter().map(|d| model.encode(d).unwrap()).collect();
        let examples: Vec<_> = inputs
            .iter()
            .zip([Label::Real, Label::Fake])
            .map(|(input, label)| Example { input, label, pseudo: false })
            .collect();
        let settings = SgdSettings { learning_rate: 0.0, ..Default::default() };
        train_update(&mut model, &examples, &settings, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(model, before);
    }

    fn train_twice(seed: u64) -> Characterizer {
        let docs: Vec<Vec<String>> = (0..40)
            .map(|i| toks(&format!("w{} w{} w{} common", i % 7, i % 5, i % 3)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Characterizer::init(CharacterizerKind::TextCnn, &docs, &mut rng).unwrap();
        let inputs: Vec<Encoded> = docs.iter().map(|d| model.encode(d).unwrap()).collect();
        let examples: Vec<_> = inputs
            .iter()
            .enumerate()
            .map(|(i, input)| Example {
                input,
                label: if i % 2 == 0 { Label::Real } else { Label::Fake },
                pseudo: i % 3 == 0,
            })
            .collect();
        let settings = SgdSettings { batch_size: 7, epochs: 2, ..Default::default() };
        train_update(&mut model, &examples, &settings, &mut rng).unwrap();
        model
    }

    #[test]
    fn same_seed_same_parameters() {
        assert_eq!(train_twice(11), train_twice(11));
        assert_ne!(train_twice(11), train_twice(12));
    }

    #[test]
    fn overfits_single_example() {
        let docs = vec![toks("the harbour bridge reopened after repairs")];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = Characterizer::init(CharacterizerKind::TextCnn, &docs, &mut rng).unwrap();
        let input = model.encode(&docs[0]).unwrap();
        let examples = [Example { input: &input, label: Label::Real, pseudo: false }];
        let settings = SgdSettings { learning_rate: 0.05, epochs: 400, ..Default::default() };
        train_update(&mut model, &examples, &settings, &mut rng).unwrap();
        let news = NewsItem::new("x", "The harbour bridge reopened after repairs.", None);
        assert!(predict_credibility(&model, &news) > 0.99);
    }

    #[test]
    fn empty_text_is_neutral() {
        let model = Characterizer::Linear(LinearModel::zeros(8).unwrap());
        assert_eq!(predict_credibility(&model, &NewsItem::new("x", "?!", None)), 0.5);
    }

    #[test]
    fn divergence_is_reported() {
        let mut model = LinearModel::zeros(8).unwrap();
        model.bias = f64::NAN;
        let input = model.encode(&toks("a")).unwrap();
        let examples = [Example { input: &input, label: Label::Real, pseudo: false }];
        let r = train_update(&mut model, &examples, &SgdSettings::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn kind_parses() {
        assert_eq!("text_cnn".parse::<CharacterizerKind>().unwrap(), CharacterizerKind::TextCnn);
        assert_eq!("linear".parse::<CharacterizerKind>().unwrap(), CharacterizerKind::Linear);
        assert!("lstm".parse::<CharacterizerKind>().is_err());
    }

    #[test]
    fn checkpoint_json_round_trip() {
        let docs = vec![toks("a b c")];
        let model =
            Characterizer::init(CharacterizerKind::TextCnn, &docs, &mut ChaCha8Rng::seed_from_u64(2))
                .unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: Characterizer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn linear_full_batch_loss_never_increases() {
        let docs: Vec<Vec<String>> = (0..30)
            .map(|i| toks(&format!("t{} t{} t{}", i % 4, i % 9, (i * 7) % 5)))
            .collect();
        let mut model = LinearModel::zeros(256).unwrap();
        let inputs: Vec<_> = docs.iter().map(|d| model.encode(d).unwrap()).collect();
        let examples: Vec<_> = inputs
            .iter()
            .enumerate()
            .map(|(i, input)| Example {
                input,
                label: if i % 4 < 2 { Label::Real } else { Label::Fake },
                pseudo: i % 5 == 0,
            })
            .collect();
        let mut last = objective(&model, &examples, 1.0, 1.0);
        for _ in 0..50 {
            let grad = objective_gradient(&model, &examples, 1.0, 1.0);
            model.apply_gradient(&grad, 1e-2);
            let now = objective(&model, &examples, 1.0, 1.0);
            assert!(now <= last + 1e-15, "{now} > {last}");
            last = now;
        }
    }
}
