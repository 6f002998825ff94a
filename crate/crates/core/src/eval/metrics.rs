//! Unit-level precision and recall and their aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Precision and recall of one prediction; `None` where the denominator is 0.
pub fn unit_pr(pred: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> (Option<f64>, Option<f64>) {
    let hit = pred.intersection(gold).count() as f64;
    let p = (!pred.is_empty()).then(|| hit / pred.len() as f64);
    let r = (!gold.is_empty()).then(|| hit / gold.len() as f64);
    (p, r)
}

/// Harmonic mean, 0 when both are 0.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean of the defined per-unit values.
    #[default]
    Macro,
    /// Hits pooled over all units before dividing.
    Micro,
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "macro" => Ok(Self::Macro),
            "micro" => Ok(Self::Micro),
            other => Err(format!("unknown averaging `{other}` (macro, micro)")),
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Macro => "macro",
            Self::Micro => "micro",
        })
    }
}

/// One evaluated unit: predictions best first, and the gold set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredUnit {
    pub ranked: Vec<usize>,
    pub gold: BTreeSet<usize>,
}

impl ScoredUnit {
    pub fn new(ranked: Vec<usize>, gold: BTreeSet<usize>) -> Self {
        Self { ranked, gold }
    }

    /// The first `k` predictions as a set; all of them when `k` is `None`.
    pub fn cut(&self, k: Option<usize>) -> BTreeSet<usize> {
        let n = k.unwrap_or(usize::MAX).min(self.ranked.len());
        self.ranked[..n].iter().copied().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub n_units: usize,
    /// Units with at least one prediction.
    pub n_precision_defined: usize,
    /// Units with non-empty gold.
    pub n_recall_defined: usize,
}

impl Aggregate {
    pub fn is_empty(&self) -> bool {
        self.n_units == 0
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Aggregates units at cut-off `k` (`None` keeps every prediction). F1 is
/// computed from the aggregate precision and recall.
pub fn aggregate(units: &[ScoredUnit], k: Option<usize>, averaging: Averaging) -> Aggregate {
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    let (mut hits, mut predicted, mut relevant) = (0usize, 0usize, 0usize);
    for u in units {
        let pred = u.cut(k);
        let (p, r) = unit_pr(&pred, &u.gold);
        ps.extend(p);
        rs.extend(r);
        hits += pred.intersection(&u.gold).count();
        predicted += pred.len();
        relevant += u.gold.len();
    }
    let (precision, recall) = match averaging {
        Averaging::Macro => (mean(&ps), mean(&rs)),
        Averaging::Micro => (
            (predicted > 0).then(|| hits as f64 / predicted as f64),
            (relevant > 0).then(|| hits as f64 / relevant as f64),
        ),
    };
    Aggregate {
        precision,
        recall,
        f1: precision.zip(recall).map(|(p, r)| f1(p, r)),
        n_units: units.len(),
        n_precision_defined: ps.len(),
        n_recall_defined: rs.len(),
    }
}
