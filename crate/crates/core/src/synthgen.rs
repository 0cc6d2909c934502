//! Synthetic corpora with event structure, for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Dataset, Label, NewsItem};
use crate::error::{Error, Result};

/// Chance that a token is drawn from the news's own class signal set.
pub const SIGNAL_PROBABILITY: f64 = 0.4;

/// Train share of the labeled news.
const TRAIN_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub events: usize,
    pub news_per_event: usize,
    pub labeled_frac: f64,
    /// Probability that a news inherits the class of its event.
    pub purity: f64,
    /// Probability that an event is Real.
    pub balance: f64,
    pub shared_vocab: usize,
    /// Signal tokens per class.
    pub signal_vocab: usize,
    pub tokens_per_news: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            events: 200,
            news_per_event: 20,
            labeled_frac: 0.1,
            purity: 1.0,
            balance: 0.5,
            shared_vocab: 200,
            signal_vocab: 20,
            tokens_per_news: 8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.events == 0 || self.news_per_event == 0 {
            return bad("need at least one event and one news per event".into());
        }
        if !(0.0..=1.0).contains(&self.labeled_frac) {
            return bad(format!("labeled_frac must lie in [0, 1], got {}", self.labeled_frac));
        }
        if !(0.5..=1.0).contains(&self.purity) {
            return bad(format!("purity must lie in [0.5, 1], got {}", self.purity));
        }
        if !(self.balance > 0.0 && self.balance < 1.0) {
            return bad(format!("balance must lie in (0, 1), got {}", self.balance));
        }
        if self.tokens_per_news == 0 || self.shared_vocab == 0 || self.signal_vocab == 0 {
            return bad(format!(
                "vocabulary too small to draw {} tokens per news (shared {}, signal {})",
                self.tokens_per_news, self.shared_vocab, self.signal_vocab
            ));
        }
        Ok(())
    }

    pub fn corpus_size(&self) -> usize {
        self.events * self.news_per_event
    }
}

/// A generated corpus with the labels hidden from the dataset.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dataset: Dataset,
    /// True class of every news, in dataset order.
    pub truth: Vec<Label>,
    /// Class of every event, by event id.
    pub event_classes: Vec<Label>,
}

pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    generate_with_truth(config).map(|c| c.dataset)
}

pub fn generate_with_truth(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut truth = Vec::with_capacity(config.corpus_size());
    let mut event_classes = Vec::with_capacity(config.events);
    let mut drafts = Vec::with_capacity(config.corpus_size());
    for event in 0..config.events {
        let class = if rng.gen_bool(config.balance) { Label::Real } else { Label::Fake };
        event_classes.push(class);
        for k in 0..config.news_per_event {
            let label = if rng.gen_bool(config.purity) { class } else { class.flipped() };
            let prefix = if label == Label::Real { "real" } else { "fake" };
            let words: Vec<String> = (0..config.tokens_per_news)
                .map(|_| {
                    if rng.gen_bool(SIGNAL_PROBABILITY) {
                        format!("{prefix}{}", rng.gen_range(0..config.signal_vocab))
                    } else {
                        format!("w{}", rng.gen_range(0..config.shared_vocab))
                    }
                })
                .collect();
            let id = format!("e{event:04}n{k:03}");
            drafts.push((id, words.join(" "), event as u64, label));
            truth.push(label);
        }
    }

    let n_labeled = (config.labeled_frac * drafts.len() as f64 + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.shuffle(&mut rng);
    let mut is_labeled = vec![false; drafts.len()];
    for &i in &order[..n_labeled] {
        is_labeled[i] = true;
    }

    let labeled: Vec<NewsItem> = drafts
        .iter()
        .zip(&is_labeled)
        .filter(|(_, &l)| l)
        .map(|((id, text, event, label), _)| {
            NewsItem::new(id.clone(), text.clone(), Some(*label)).with_event(*event)
        })
        .collect();
    let (train, test) = if labeled.len() >= 2 {
        corpus::split(&labeled, TRAIN_RATIO, config.seed)?
    } else {
        (labeled, Vec::new())
    };
    let mut assigned: std::collections::HashMap<String, NewsItem> = train
        .into_iter()
        .chain(test)
        .map(|item| (item.id.clone(), item))
        .collect();

    let items = drafts
        .into_iter()
        .map(|(id, text, event, _)| {
            assigned
                .remove(&id)
                .unwrap_or_else(|| NewsItem::new(id, text, None).with_event(event))
        })
        .collect();
    Ok(SynthCorpus {
        dataset: Dataset::new(items)?,
        truth,
        event_classes,
    })
}
