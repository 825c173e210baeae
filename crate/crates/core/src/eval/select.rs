use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Random,
    Amplitude,
    Relevance,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Random, StrategyKind::Amplitude, StrategyKind::Relevance];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Random => "random",
            StrategyKind::Amplitude => "amplitude",
            StrategyKind::Relevance => "relevance",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "amplitude" => Ok(StrategyKind::Amplitude),
            "relevance" | "lrp" => Ok(StrategyKind::Relevance),
            _ => Err(Error::Config(format!("unknown selection strategy {s:?}"))),
        }
    }
}

/// Ranking used by relevance-based selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceOrder {
    /// Most positive relevance first.
    #[default]
    Signed,
    /// Largest magnitude first.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy {
    Random { seed: u64 },
    Amplitude,
    Relevance { order: RelevanceOrder },
}

impl SelectionStrategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            SelectionStrategy::Random { .. } => StrategyKind::Random,
            SelectionStrategy::Amplitude => StrategyKind::Amplitude,
            SelectionStrategy::Relevance { .. } => StrategyKind::Relevance,
        }
    }
}

/// Picks `round(fraction · k)` of the `k` non-zero entries of `signal`,
/// returned in ascending index order.
///
/// Ranked strategies break ties towards the lower index, so the selection
/// at a smaller fraction is always a subset of that at a larger one.
pub fn select_indices(
    strategy: SelectionStrategy,
    signal: &[f64],
    relevance: Option<&[f64]>,
    fraction: f64,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
    }
    match (strategy, relevance) {
        (SelectionStrategy::Relevance { .. }, None) => {
            return Err(Error::InvalidArgument("relevance selection needs a relevance map".into()))
        }
        (SelectionStrategy::Relevance { .. }, Some(r)) if r.len() != signal.len() => {
            return Err(Error::Shape(format!(
                "relevance map has {} entries, signal {}",
                r.len(),
                signal.len()
            )))
        }
        (SelectionStrategy::Random { .. } | SelectionStrategy::Amplitude, Some(_)) => {
            return Err(Error::InvalidArgument(format!(
                "{} selection does not take a relevance map",
                strategy.kind()
            )))
        }
        _ => {}
    }
    let eligible: Vec<usize> = (0..signal.len()).filter(|&i| signal[i] != 0.0).collect();
    let count = (fraction * eligible.len() as f64).round() as usize;
    let mut chosen: Vec<usize> = match strategy {
        SelectionStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, eligible.len(), count)
                .into_iter()
                .map(|i| eligible[i])
                .collect()
        }
        SelectionStrategy::Amplitude => top_k(eligible, count, |i| signal[i].abs()),
        SelectionStrategy::Relevance { order } => {
            let r = relevance.expect("checked above");
            match order {
                RelevanceOrder::Signed => top_k(eligible, count, |i| r[i]),
                RelevanceOrder::Absolute => top_k(eligible, count, |i| r[i].abs()),
            }
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

fn top_k(mut idx: Vec<usize>, k: usize, score: impl Fn(usize) -> f64) -> Vec<usize> {
    idx.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Sets the listed positions to zero.
pub fn zero_out(signal: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    let mut out = signal.to_vec();
    for &i in indices {
        *out.get_mut(i).ok_or_else(|| {
            Error::InvalidArgument(format!("index {i} outside signal of length {}", signal.len()))
        })? = 0.0;
    }
    Ok(out)
}
