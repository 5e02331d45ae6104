//! Metrics, cross-run aggregation, head-to-head comparison and corpus length
//! statistics. Binary metrics treat the synthetic class as positive.

mod aggregate;
mod compare;
mod metrics;
mod render;
mod textstats;

use thiserror::Error;

pub use aggregate::{aggregate_runs, cell, AggregateReport};
pub use compare::{compare_models, ComparisonTable, RunRow, WinCount, Winner};
pub use metrics::{
    binary_fractions, binary_metrics, confusion, evaluate_labels, metrics_for, micro_f1, multiclass_metrics,
    BinaryCounts, ConfusionCounts, ConfusionMatrix, Metric, MetricValues, MetricsReport, UndefinedFlags,
};
pub use render::{aggregate_csv, comparison_csv, render_aggregate, render_comparison};
pub use textstats::{
    count_words, doc_lengths, histogram, length_stats, paired_word_counts, pearson, split_sentences, LengthAnalysis,
    LengthStatsReport, MeanStd, SEGMENTER_VERSION,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels come from more than one schema")]
    MixedSchema,
    #[error("no evaluated items")]
    EmptyCounts,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no human/synthetic pairs for correlation")]
    NoPairs,
    #[error("expected a binary corpus, got {0}")]
    NotBinary(String),
    #[error("corpus lacks one of the two classes")]
    MissingClass,
    #[error("run count mismatch: {a} vs {b}")]
    RunCountMismatch { a: usize, b: usize },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

/// Rounds half away from zero to 2 decimals. A tiny relative nudge keeps
/// values like 1.005, stored as 1.00499.., on the intended side.
pub fn round2(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scaled = x.abs() * 100.0;
    let nudged = scaled + scaled * 1e-12 + 1e-12;
    let r = (nudged + 0.5).floor() / 100.0;
    if x < 0.0 {
        -r
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up_rounding() {
        assert_eq!(round2(1.005), 1.01);
        assert_eq!(round2(42.857142), 42.86);
        assert_eq!(round2(84.802), 84.80);
        assert_eq!(round2(-2.59), -2.59);
        assert_eq!(round2(-0.125), -0.13);
        assert_eq!(round2(2.0 / 3.0 * 100.0), 66.67);
    }
}
