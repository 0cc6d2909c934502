//! News items, JSONL ingestion and the labeled / unlabeled / test partition.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    /// Target value for the credibility model: Real is 1, Fake is 0.
    pub fn credibility(self) -> f64 {
        match self {
            Label::Real => 1.0,
            Label::Fake => 0.0,
        }
    }

    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<u64>,
    pub split: Split,
}

impl NewsItem {
    /// Builds an item whose split follows from whether it carries a label.
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        let split = if label.is_some() {
            Split::Train
        } else {
            Split::Unlabeled
        };
        NewsItem {
            id: id.into(),
            text: text.into(),
            label,
            event_id: None,
            split,
        }
    }

    pub fn with_event(mut self, event_id: u64) -> Self {
        self.event_id = Some(event_id);
        self
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(self.invalid("text is empty"));
        }
        match (self.split, self.label) {
            (Split::Test, None) => Err(self.invalid("test item has no label")),
            (Split::Train, None) => Err(self.invalid("train item has no label")),
            _ => Ok(()),
        }
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidItem {
            id: self.id.clone(),
            reason: reason.to_string(),
        }
    }
}

/// Wire form of a line; `split` may be absent and is then inferred from the label.
#[derive(Deserialize)]
struct RawItem {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<Label>,
    #[serde(default)]
    event_id: Option<u64>,
    #[serde(default)]
    split: Option<Split>,
}

impl From<RawItem> for NewsItem {
    fn from(raw: RawItem) -> Self {
        let split = raw.split.unwrap_or(if raw.label.is_some() {
            Split::Train
        } else {
            Split::Unlabeled
        });
        NewsItem {
            id: raw.id,
            text: raw.text,
            label: raw.label,
            event_id: raw.event_id,
            split,
        }
    }
}

/// A validated collection of news with its event index.
///
/// Items keep their file order. Labels on `Unlabeled` items are tolerated but
/// never read by training code.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<NewsItem>,
    event_index: BTreeMap<u64, Vec<String>>,
}

impl Dataset {
    pub fn new(items: Vec<NewsItem>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(Error::DuplicateId(item.id.clone()));
            }
            item.validate()?;
        }
        let event_index = build_event_index(&items);
        Ok(Dataset { items, event_index })
    }

    pub fn empty() -> Self {
        Dataset {
            items: Vec::new(),
            event_index: BTreeMap::new(),
        }
    }

    pub fn items(&self) -> &[NewsItem] {
        &self.items
    }

    pub fn into_items(self) -> Vec<NewsItem> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn event_index(&self) -> &BTreeMap<u64, Vec<String>> {
        &self.event_index
    }

    /// Number of distinct events.
    pub fn event_count(&self) -> usize {
        self.event_index.len()
    }

    pub fn get(&self, id: &str) -> Option<&NewsItem> {
        self.items.iter().find(|item| item.id == id)
    }

    /// Positions of the labeled training items (X^l).
    pub fn labeled_train(&self) -> Vec<usize> {
        self.positions(Split::Train)
    }

    /// Positions of the unlabeled items (X^u).
    pub fn unlabeled(&self) -> Vec<usize> {
        self.positions(Split::Unlabeled)
    }

    pub fn test(&self) -> Vec<usize> {
        self.positions(Split::Test)
    }

    fn positions(&self, split: Split) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, item)| item.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn all_have_events(&self) -> bool {
        self.items.iter().all(|item| item.event_id.is_some())
    }
}

fn build_event_index(items: &[NewsItem]) -> BTreeMap<u64, Vec<String>> {
    let mut index: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for item in items {
        if let Some(event) = item.event_id {
            index.entry(event).or_default().push(item.id.clone());
        }
    }
    index
}

/// Reads a JSONL corpus. Blank lines are skipped; line numbers in errors are 1-based.
pub fn ingest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: n + 1,
            message: e.to_string(),
        })?;
        items.push(NewsItem::from(raw));
    }
    Dataset::new(items)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in dataset.items() {
        let line = serde_json::to_string(item).map_err(|e| Error::Serialize(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Seeded train/test split of labeled items.
///
/// Ids are sorted, shuffled with the seed, and the first `floor(ratio * n)`
/// become train. Both halves keep the input order, so membership depends on
/// ids only and not on the position of an item in `items`.
pub fn split(items: &[NewsItem], ratio: f64, seed: u64) -> Result<(Vec<NewsItem>, Vec<NewsItem>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    if let Some(item) = items.iter().find(|item| item.label.is_none()) {
        return Err(Error::InvalidItem {
            id: item.id.clone(),
            reason: "cannot split an unlabeled item".into(),
        });
    }
    let mut ids: Vec<&str> = items.iter().map(|item| item.id.as_str()).collect();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    // the epsilon absorbs products such as 0.29 * 100 = 28.999999999999996
    let n_train = ((ratio * items.len() as f64) + 1e-9).floor() as usize;
    let train_ids: HashSet<&str> = ids[..n_train].iter().copied().collect();

    let (train, test): (Vec<_>, Vec<_>) = items
        .iter()
        .cloned()
        .partition(|item| train_ids.contains(item.id.as_str()));
    let train = train
        .into_iter()
        .map(|item| item.with_split(Split::Train))
        .collect();
    let test = test
        .into_iter()
        .map(|item| item.with_split(Split::Test))
        .collect();
    Ok((train, test))
}
