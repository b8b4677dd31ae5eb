//! The similarity predicate `≈` over value constants.
//!
//! Similarity is reflexive and symmetric. It holds for an explicitly listed
//! pair or, when a metric is configured, for strings whose normalized
//! Levenshtein similarity reaches the threshold.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::model::{Constant, Kind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Minimum normalized similarity `1 - lev(a, b) / max(|a|, |b|)`, in `[0, 1]`.
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimilarityOracle {
    pairs: BTreeSet<(Arc<str>, Arc<str>)>,
    metric: Option<MetricConfig>,
}

impl SimilarityOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_metric(threshold: f64) -> Self {
        SimilarityOracle {
            pairs: BTreeSet::new(),
            metric: Some(MetricConfig { threshold }),
        }
    }

    /// Declare `a ≈ b` (and hence `b ≈ a`).
    pub fn add_pair(&mut self, a: &str, b: &str) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.pairs.insert((lo.into(), hi.into()));
    }

    pub fn set_metric(&mut self, metric: Option<MetricConfig>) {
        self.metric = metric;
    }

    pub fn metric(&self) -> Option<MetricConfig> {
        self.metric
    }

    /// Declared pairs, each stored once with the smaller lexeme first.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (&**a, &**b))
    }

    pub fn similar_lexemes(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if self.pairs.contains(&(Arc::from(lo), Arc::from(hi))) {
            return true;
        }
        match self.metric {
            Some(m) => strsim::normalized_levenshtein(a, b) >= m.threshold,
            None => false,
        }
    }

    /// `a ≈ b`. Only value constants are ever similar.
    pub fn sim(&self, a: &Constant, b: &Constant) -> bool {
        a.kind == Kind::Val && b.kind == Kind::Val && self.similar_lexemes(&a.lexeme, &b.lexeme)
    }
}
