//! News-entropy scoring and scheduled selection of pseudo-labeled samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;

/// `-p * ln(1 - p)`, with `1 - p` floored at 1e-12 before the log.
pub fn news_entropy(p: f64) -> f64 {
    let p_prime = (1.0 - p).clamp(LOG_FLOOR, 1.0);
    let h = -p * p_prime.ln();
    // -0.0 for p = 0
    h.max(0.0)
}

/// Two-class Shannon entropy in nats; only used by the `symmetric` order.
pub fn shannon_entropy(p: f64) -> f64 {
    let p = p.clamp(LOG_FLOOR, 1.0 - LOG_FLOOR);
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorOrder {
    /// Highest news entropy first.
    #[default]
    Largest,
    /// Lowest news entropy first.
    Smallest,
    /// Lowest two-class Shannon entropy first, i.e. most confident either way.
    Symmetric,
}

impl fmt::Display for SelectorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectorOrder::Largest => "largest",
            SelectorOrder::Smallest => "smallest",
            SelectorOrder::Symmetric => "symmetric",
        })
    }
}

impl FromStr for SelectorOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(SelectorOrder::Largest),
            "smallest" => Ok(SelectorOrder::Smallest),
            "symmetric" => Ok(SelectorOrder::Symmetric),
            other => Err(Error::InvalidArgument(format!(
                "unknown selector order `{other}` (largest|smallest|symmetric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyScore {
    pub id: String,
    pub p: f64,
    pub p_prime: f64,
    pub h: f64,
    pub pseudo_label: Label,
}

impl EntropyScore {
    pub fn new(id: impl Into<String>, p: f64, pseudo_label: Label) -> Self {
        EntropyScore {
            id: id.into(),
            p,
            p_prime: 1.0 - p,
            h: news_entropy(p),
            pseudo_label,
        }
    }

    fn key(&self, order: SelectorOrder) -> f64 {
        match order {
            SelectorOrder::Largest => self.h,
            SelectorOrder::Smallest => -self.h,
            SelectorOrder::Symmetric => -shannon_entropy(self.p),
        }
    }
}

/// Number of samples picked at update `t` from a pool of `n`:
/// `min(n, ceil(n * min(2t, 100) / 100))`, computed in integers.
pub fn schedule_count(t: usize, n: usize) -> Result<usize> {
    if t < 1 {
        return Err(Error::InvalidArgument(
            "update number must be at least 1".into(),
        ));
    }
    let percent = (2 * t).min(100);
    Ok(((n * percent).div_ceil(100)).min(n))
}

/// Picks the scheduled number of samples, best key first, ties by id ascending.
pub fn select_top(
    scores: &[EntropyScore],
    t: usize,
    order: SelectorOrder,
) -> Result<Vec<(String, Label)>> {
    let k = schedule_count(t, scores.len())?;
    let mut ranked: Vec<&EntropyScore> = scores.iter().collect();
    let cmp = |a: &&EntropyScore, b: &&EntropyScore| {
        b.key(order)
            .total_cmp(&a.key(order))
            .then_with(|| a.id.cmp(&b.id))
    };
    if k > 0 && k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, cmp);
    }
    ranked.truncate(k);
    ranked.sort_by(cmp);
    Ok(ranked
        .into_iter()
        .map(|s| (s.id.clone(), s.pseudo_label))
        .collect())
}
