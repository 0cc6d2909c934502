//! The self-training loop.
//!
//! Every update scores all training-visible news, fuses each score with the
//! credibility of its event, derives the detection threshold on the labeled
//! news, pseudo-labels the unlabeled pool, selects a growing share of it by
//! news entropy and runs one SGD pass over labeled plus selected news.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hasher;
use std::path::Path;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotator::{self, NEUTRAL_PRIOR};
use crate::characterizer::{
    bce_loss, train_update, Characterizer, CharacterizerKind, CredibilityModel, Encoded, Example,
    SgdSettings, WordVectors,
};
use crate::clusterer::DEFAULT_TAU;
use crate::corpus::{Dataset, Label, Split};
use crate::error::{Error, Result};
use crate::eval::{self, RunReport, Timing};
use crate::kalman::{self, EventCredState, KalmanParams};
use crate::selector::{self, EntropyScore, SelectorOrder};
use crate::text::tokenize;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// News credibility fused with event credibility.
    #[default]
    Ecfm,
    /// News credibility alone.
    EcfmMinus,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ecfm => "ecfm",
            Mode::EcfmMinus => "ecfm_minus",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecfm" => Ok(Mode::Ecfm),
            "ecfm_minus" | "ecfm-minus" | "ecfm-" => Ok(Mode::EcfmMinus),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (ecfm|ecfm_minus)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub updates: usize,
    pub mode: Mode,
    /// Smooth event credibility with the Kalman filter (ECFM mode only).
    pub use_kalman: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_per_update: usize,
    pub seed: u64,
    pub characterizer: CharacterizerKind,
    pub selector_order: SelectorOrder,
    pub kalman: KalmanParams,
    pub lambda_l: f64,
    pub lambda_s: f64,
    /// Similarity threshold used when events have to be clustered first.
    pub tau: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sgd = SgdSettings::default();
        PipelineConfig {
            alpha: 0.6,
            updates: 50,
            mode: Mode::Ecfm,
            use_kalman: true,
            learning_rate: sgd.learning_rate,
            batch_size: sgd.batch_size,
            epochs_per_update: sgd.epochs,
            seed: 0,
            characterizer: CharacterizerKind::TextCnn,
            selector_order: SelectorOrder::Largest,
            kalman: KalmanParams::default(),
            lambda_l: sgd.lambda_l,
            lambda_s: sgd.lambda_s,
            tau: DEFAULT_TAU,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        annotator::check_alpha(self.alpha)?;
        if self.updates == 0 {
            return Err(Error::InvalidArgument("updates must be at least 1".into()));
        }
        if self.epochs_per_update == 0 {
            return Err(Error::InvalidArgument(
                "epochs_per_update must be at least 1".into(),
            ));
        }
        if !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be finite, got {}", self.tau)));
        }
        self.sgd().validate()?;
        self.kalman.validate()
    }

    pub fn sgd(&self) -> SgdSettings {
        SgdSettings {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs_per_update,
            lambda_l: self.lambda_l,
            lambda_s: self.lambda_s,
        }
    }

    fn kalman_active(&self) -> bool {
        self.mode == Mode::Ecfm && self.use_kalman
    }

    /// Sets one field by name. Dotted names (`kalman.q`, `selector.order`)
    /// are accepted as well as underscored ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let normalized = key.trim().replace(['.', '-'], "_");
        let value = value.trim();
        match normalized.as_str() {
            "alpha" => self.alpha = parse(key, value)?,
            "updates" => self.updates = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "use_kalman" | "kalman" => self.use_kalman = parse(key, value)?,
            "learning_rate" | "lr" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs_per_update" | "epochs" => self.epochs_per_update = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "characterizer" => self.characterizer = value.parse()?,
            "selector_order" | "order" => self.selector_order = value.parse()?,
            "kalman_q" | "q" => self.kalman.q = parse(key, value)?,
            "kalman_r" | "r" => self.kalman.r = parse(key, value)?,
            "kalman_b" | "b" => self.kalman.b = parse(key, value)?,
            "kalman_p0" | "p0" => self.kalman.p0 = parse(key, value)?,
            "kalman_c0" | "c0" => self.kalman.c0 = parse(key, value)?,
            "lambda_l" => self.lambda_l = parse(key, value)?,
            "lambda_s" => self.lambda_s = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown configuration key `{key}`"
                )))
            }
        }
        Ok(())
    }
}

/// What one update did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub t: usize,
    /// Share of the unlabeled pool pseudo-labeled Real.
    pub positive_fraction: f64,
    pub dt: f64,
    /// Accuracy of `dt` on the labeled news.
    pub dt_accuracy: f64,
    pub selected_count: usize,
    /// Mean loss on labeled news, before this update's training pass.
    pub labeled_loss: f64,
    /// Mean loss on selected news against their pseudo labels, before training.
    pub pseudo_loss: f64,
    /// FNV-1a digest of the event credibilities used for fusion.
    pub event_digest: String,
}

fn event_digest(view: &BTreeMap<u64, f64>) -> String {
    let mut h = FnvHasher::default();
    for (&event, &c) in view {
        h.write_u64(event);
        h.write_u64(c.to_bits());
    }
    format!("{:016x}", h.finish())
}

/// Digest of the item records, stored in checkpoints to catch a resume on
/// different data.
pub fn dataset_digest(dataset: &Dataset) -> String {
    let mut h = FnvHasher::default();
    for item in dataset.items() {
        let line = serde_json::to_string(item).unwrap_or_default();
        h.write(line.as_bytes());
        h.write_u8(b'\n');
    }
    format!("{:016x}", h.finish())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn update_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    created_unix: f64,
    dataset_digest: String,
    config: PipelineConfig,
    model: Characterizer,
    kalman: Vec<EventCredState>,
    epoch_logs: Vec<EpochLog>,
}

pub struct Pipeline<'d> {
    config: PipelineConfig,
    dataset: &'d Dataset,
    model: Characterizer,
    kalman: BTreeMap<u64, EventCredState>,
    logs: Vec<EpochLog>,
    inputs: Vec<Option<Encoded>>,
    events: Vec<u64>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    test: Vec<usize>,
    /// Labeled and unlabeled positions in dataset order.
    visible: Vec<usize>,
    position: HashMap<String, usize>,
    started: Instant,
    started_unix: f64,
}

fn check_dataset(dataset: &Dataset) -> Result<()> {
    if let Some(item) = dataset.items().iter().find(|i| i.event_id.is_none()) {
        return Err(Error::Precondition(format!(
            "news `{}` has no event id; assign events with `ecfm cluster` first",
            item.id
        )));
    }
    let labels: Vec<Label> = dataset
        .labeled_train()
        .iter()
        .filter_map(|&i| dataset.items()[i].label)
        .collect();
    if labels.is_empty() {
        return Err(Error::Precondition("dataset has no labeled training news".into()));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Precondition(format!(
            "labeled training news are all {:?}; the threshold search needs both classes",
            labels[0]
        )));
    }
    if dataset.test().is_empty() {
        return Err(Error::Precondition("dataset has no test news to evaluate on".into()));
    }
    Ok(())
}

impl<'d> Pipeline<'d> {
    pub fn new(config: PipelineConfig, dataset: &'d Dataset) -> Result<Self> {
        config.validate()?;
        check_dataset(dataset)?;
        let docs: Vec<Vec<String>> = dataset
            .items()
            .iter()
            .filter(|item| item.split != Split::Test)
            .map(|item| tokenize(&item.text))
            .collect();
        let mut rng = update_rng(config.seed, 0);
        let model = Characterizer::init(config.characterizer, &docs, &mut rng)?;
        Self::from_parts(config, dataset, model, BTreeMap::new(), Vec::new())
    }

    fn from_parts(
        config: PipelineConfig,
        dataset: &'d Dataset,
        model: Characterizer,
        kalman: BTreeMap<u64, EventCredState>,
        logs: Vec<EpochLog>,
    ) -> Result<Self> {
        config.validate()?;
        check_dataset(dataset)?;
        let inputs: Vec<Option<Encoded>> = dataset
            .items()
            .par_iter()
            .map(|item| model.encode(&tokenize(&item.text)))
            .collect();
        for (item, input) in dataset.items().iter().zip(&inputs) {
            if input.is_none() {
                log::warn!("news `{}` has no tokens; it is scored 0.5 and never trained on", item.id);
            }
        }
        let labeled = dataset.labeled_train();
        let unlabeled = dataset.unlabeled();
        let test = dataset.test();
        let visible = dataset
            .items()
            .iter()
            .enumerate()
            .filter(|(_, item)| item.split != Split::Test)
            .map(|(i, _)| i)
            .collect();
        let position = dataset
            .items()
            .iter()
            .enumerate()
            .map(|(i, item)| (item.id.clone(), i))
            .collect();
        let events = dataset
            .items()
            .iter()
            .map(|item| item.event_id.expect("checked above"))
            .collect();
        Ok(Pipeline {
            config,
            dataset,
            model,
            kalman,
            logs,
            inputs,
            events,
            labeled,
            unlabeled,
            test,
            visible,
            position,
            started: Instant::now(),
            started_unix: unix_now(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> &Characterizer {
        &self.model
    }

    pub fn epoch_logs(&self) -> &[EpochLog] {
        &self.logs
    }

    pub fn kalman_states(&self) -> &BTreeMap<u64, EventCredState> {
        &self.kalman
    }

    /// Copies pretrained vectors into the text-CNN embeddings; returns how many matched.
    pub fn import_vectors(&mut self, vectors: &WordVectors) -> Result<usize> {
        match &mut self.model {
            Characterizer::TextCnn(m) => m.import_vectors(vectors),
            Characterizer::Linear(_) => Err(Error::InvalidArgument(
                "word vectors need the text_cnn characterizer".into(),
            )),
        }
    }

    pub fn completed_updates(&self) -> usize {
        self.logs.len()
    }

    pub fn is_done(&self) -> bool {
        self.logs.len() >= self.config.updates
    }

    fn label(&self, i: usize) -> Label {
        self.dataset.items()[i].label.expect("labeled partition")
    }

    /// Descriptive credibility of the given positions; the result has one
    /// slot per dataset item, NaN where not scored.
    fn score(&self, positions: &[usize]) -> Vec<f64> {
        let scorer = self
            .model
            .scorer(positions.iter().filter_map(|&i| self.inputs[i].as_ref()));
        let scored: Vec<f64> = positions
            .par_iter()
            .map(|&i| self.inputs[i].as_ref().map_or(0.5, |x| scorer.credibility(x)))
            .collect();
        let mut p = vec![f64::NAN; self.inputs.len()];
        for (&i, v) in positions.iter().zip(scored) {
            p[i] = v;
        }
        p
    }

    /// Raw event credibility: labels for labeled news, scores for unlabeled.
    fn raw_event_credibility(&self, p: &[f64]) -> BTreeMap<u64, f64> {
        let labeled = self.dataset.items();
        annotator::event_credibilities(self.visible.iter().map(|&i| {
            let nc = match labeled[i].split {
                Split::Train => self.label(i).credibility(),
                _ => p[i],
            };
            (self.events[i], nc)
        }))
    }

    fn fused(&self, i: usize, p: &[f64], view: &BTreeMap<u64, f64>) -> f64 {
        match self.config.mode {
            Mode::Ecfm => {
                let ec = view.get(&self.events[i]).copied().unwrap_or(NEUTRAL_PRIOR);
                self.config.alpha * p[i] + (1.0 - self.config.alpha) * ec
            }
            Mode::EcfmMinus => p[i],
        }
    }

    fn threshold(&self, p: &[f64], view: &BTreeMap<u64, f64>) -> Result<annotator::ThresholdModel> {
        let labeled: Vec<(f64, Label)> = self
            .labeled
            .iter()
            .map(|&i| (self.fused(i, p, view), self.label(i)))
            .collect();
        annotator::find_threshold(&labeled)
    }

    /// Runs the next update and returns its log.
    pub fn step(&mut self) -> Result<&EpochLog> {
        let t = self.logs.len() + 1;
        let p = self.score(&self.visible);

        let raw = self.raw_event_credibility(&p);
        let view = if self.config.kalman_active() {
            kalman::update_all(&mut self.kalman, &raw, &self.config.kalman)?;
            raw.keys().map(|&e| (e, self.kalman[&e].c_hat)).collect()
        } else {
            raw
        };

        let threshold = self.threshold(&p, &view)?;
        let dt = threshold.dt;
        let pseudo: Vec<(usize, Label)> = self
            .unlabeled
            .iter()
            .map(|&i| (i, annotator::pseudo_label(self.fused(i, &p, &view), dt)))
            .collect();
        let positive_fraction = if pseudo.is_empty() {
            0.0
        } else {
            pseudo.iter().filter(|(_, l)| *l == Label::Real).count() as f64 / pseudo.len() as f64
        };

        let scores: Vec<EntropyScore> = pseudo
            .iter()
            .map(|&(i, label)| EntropyScore::new(self.dataset.items()[i].id.clone(), p[i], label))
            .collect();
        let selected: Vec<(usize, Label)> =
            selector::select_top(&scores, t, self.config.selector_order)?
                .into_iter()
                .map(|(id, label)| (self.position[&id], label))
                .collect();

        let labeled_loss = mean(
            self.labeled
                .iter()
                .map(|&i| bce_loss(p[i], self.label(i).credibility())),
        );
        let pseudo_loss = mean(selected.iter().map(|&(i, l)| bce_loss(p[i], l.credibility())));

        let examples: Vec<Example<'_, Encoded>> = self
            .labeled
            .iter()
            .map(|&i| (i, self.label(i), false))
            .chain(selected.iter().map(|&(i, l)| (i, l, true)))
            .filter_map(|(i, label, pseudo)| {
                self.inputs[i].as_ref().map(|input| Example { input, label, pseudo })
            })
            .collect();
        let mut rng = update_rng(self.config.seed, t);
        let stats = train_update(&mut self.model, &examples, &self.config.sgd(), &mut rng)
            .map_err(|e| match e {
                Error::NonFiniteLoss { batch, .. } => Error::NonFiniteLoss { update: t, batch },
                other => other,
            })?;

        log::info!(
            "update {t}/{}: dt {dt:.4} (acc {:.3}), real share {positive_fraction:.3}, selected {}, loss {:.4}",
            self.config.updates,
            threshold.achieved_accuracy,
            selected.len(),
            stats.mean_loss
        );
        self.logs.push(EpochLog {
            t,
            positive_fraction,
            dt,
            dt_accuracy: threshold.achieved_accuracy,
            selected_count: selected.len(),
            labeled_loss,
            pseudo_loss,
            event_digest: event_digest(&view),
        });
        Ok(self.logs.last().expect("just pushed"))
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    /// Test-set evaluation with the current model.
    ///
    /// Event credibility is the last Kalman estimate when the filter is in
    /// use and the raw event mean under the current model otherwise; events
    /// unseen during training fall back to the neutral prior. The threshold
    /// is re-derived on the labeled news.
    pub fn report(&self) -> Result<RunReport> {
        let mut positions = self.visible.clone();
        positions.extend(&self.test);
        let p = self.score(&positions);
        let view = if self.config.kalman_active() {
            self.kalman.iter().map(|(&e, s)| (e, s.c_hat)).collect()
        } else {
            self.raw_event_credibility(&p)
        };
        let dt = self.threshold(&p, &view)?.dt;
        let ce: Vec<f64> = self.test.iter().map(|&i| self.fused(i, &p, &view)).collect();
        let labels: Vec<Label> = self.test.iter().map(|&i| self.label(i)).collect();
        let (metrics, flags) = eval::score_predictions(&ce, dt, &labels)?;
        Ok(RunReport {
            accuracy: metrics.accuracy,
            auc_roc: metrics.auc_roc,
            precision: metrics.precision,
            recall: metrics.recall,
            f1: metrics.f1,
            flags,
            final_dt: dt,
            test_size: self.test.len(),
            seed: self.config.seed,
            config: self.config.clone(),
            epoch_logs: self.logs.clone(),
            timing: Timing {
                started_unix: self.started_unix,
                wall_clock_secs: self.started.elapsed().as_secs_f64(),
            },
        })
    }

    pub fn checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            created_unix: unix_now(),
            dataset_digest: dataset_digest(self.dataset),
            config: self.config.clone(),
            model: self.model.clone(),
            kalman: self.kalman.values().copied().collect(),
            epoch_logs: self.logs.clone(),
        };
        let json = serde_json::to_string(&ckpt).map_err(|e| Error::Serialize(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Restores a checkpoint written for the same dataset.
    pub fn resume(path: impl AsRef<Path>, dataset: &'d Dataset) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |message: String| Error::Parse {
            what: "checkpoint",
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| parse_err("missing version field".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::VersionMismatch {
                found: version.try_into().unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Checkpoint =
            serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
        if ckpt.dataset_digest != dataset_digest(dataset) {
            return Err(Error::Precondition(format!(
                "checkpoint {} was written for a different dataset",
                path.display()
            )));
        }
        let kalman = ckpt.kalman.into_iter().map(|s| (s.event_id, s)).collect();
        Self::from_parts(ckpt.config, dataset, ckpt.model, kalman, ckpt.epoch_logs)
    }
}

/// Trains for `config.updates` updates and evaluates on the test news.
pub fn run(config: &PipelineConfig, dataset: &Dataset) -> Result<RunReport> {
    let mut pipeline = Pipeline::new(config.clone(), dataset)?;
    pipeline.run_to_end()?;
    pipeline.report()
}
