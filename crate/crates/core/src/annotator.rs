//! Pseudo-label annotation from fused news and event credibility.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Credibility assumed for an event with no scored members.
pub const NEUTRAL_PRIOR: f64 = 0.5;

/// Mean credibility of an event's members; `None` for an empty event (cold start).
pub fn event_credibility(members: &[f64]) -> Option<f64> {
    if members.is_empty() {
        None
    } else {
        Some(members.iter().sum::<f64>() / members.len() as f64)
    }
}

/// Per-event means over `(event, credibility)` pairs, summed in iteration order.
pub fn event_credibilities(pairs: impl IntoIterator<Item = (u64, f64)>) -> BTreeMap<u64, f64> {
    let mut grouped: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (event, nc) in pairs {
        grouped.entry(event).or_default().push(nc);
    }
    grouped
        .into_iter()
        .filter_map(|(event, members)| event_credibility(&members).map(|ec| (event, ec)))
        .collect()
}

/// `alpha * p + (1 - alpha) * ec`.
pub fn optimized_credibility(p: f64, ec: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * p + (1.0 - alpha) * ec)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )))
    }
}

/// News credibility, event credibility and their fusion for one update.
#[derive(Debug, Clone, PartialEq)]
pub struct CredibilityView {
    pub news: BTreeMap<String, f64>,
    pub events: BTreeMap<u64, f64>,
    pub alpha: f64,
    pub optimized: BTreeMap<String, f64>,
}

impl CredibilityView {
    /// Fuses every news whose event has a credibility entry.
    ///
    /// `news` pairs each id with its event and descriptive credibility.
    pub fn new(
        news: impl IntoIterator<Item = (String, u64, f64)>,
        events: BTreeMap<u64, f64>,
        alpha: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let mut credibility = BTreeMap::new();
        let mut optimized = BTreeMap::new();
        for (id, event, p) in news {
            if let Some(&ec) = events.get(&event) {
                optimized.insert(id.clone(), alpha * p + (1.0 - alpha) * ec);
            }
            credibility.insert(id, p);
        }
        Ok(CredibilityView {
            news: credibility,
            events,
            alpha,
            optimized,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdModel {
    pub dt: f64,
    pub achieved_accuracy: f64,
    pub candidate_count: usize,
}

/// Accuracy-maximizing threshold for the rule `ce >= dt => Real`.
///
/// Candidates are `min - 1`, the midpoints between adjacent distinct sorted
/// values, and `max + 1`. The smallest maximizer wins.
pub fn find_threshold(labeled: &[(f64, Label)]) -> Result<ThresholdModel> {
    if labeled.is_empty() {
        return Err(Error::InvalidArgument(
            "threshold search needs at least one labeled news".into(),
        ));
    }
    if let Some((ce, _)) = labeled.iter().find(|(ce, _)| !ce.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "credibility {ce} is not finite"
        )));
    }
    let mut real: Vec<f64> = Vec::new();
    let mut fake: Vec<f64> = Vec::new();
    for &(ce, label) in labeled {
        match label {
            Label::Real => real.push(ce),
            Label::Fake => fake.push(ce),
        }
    }
    real.sort_by(f64::total_cmp);
    fake.sort_by(f64::total_cmp);

    let mut values: Vec<f64> = labeled.iter().map(|(ce, _)| *ce).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut candidates = Vec::with_capacity(values.len() + 1);
    candidates.push(values[0] - 1.0);
    candidates.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(values[values.len() - 1] + 1.0);

    let correct_at = |dt: f64| {
        let real_hits = real.len() - real.partition_point(|&v| v < dt);
        let fake_hits = fake.partition_point(|&v| v < dt);
        real_hits + fake_hits
    };
    let mut best = (candidates[0], correct_at(candidates[0]));
    for &dt in &candidates[1..] {
        let hits = correct_at(dt);
        if hits > best.1 || (hits == best.1 && dt < best.0) {
            best = (dt, hits);
        }
    }
    Ok(ThresholdModel {
        dt: best.0,
        achieved_accuracy: best.1 as f64 / labeled.len() as f64,
        candidate_count: candidates.len(),
    })
}

/// Boundary inclusive: `ce == dt` is Real.
pub fn pseudo_label(ce: f64, dt: f64) -> Label {
    if ce >= dt {
        Label::Real
    } else {
        Label::Fake
    }
}

pub fn assign_pseudo_labels<'a>(
    unlabeled: impl IntoIterator<Item = &'a str>,
    optimized: &HashMap<String, f64>,
    dt: f64,
) -> Result<BTreeMap<String, Label>> {
    unlabeled
        .into_iter()
        .map(|id| {
            optimized
                .get(id)
                .map(|&ce| (id.to_string(), pseudo_label(ce, dt)))
                .ok_or_else(|| Error::MissingCredibility(id.to_string()))
        })
        .collect()
}
