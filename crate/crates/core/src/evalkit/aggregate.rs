use serde::{Deserialize, Serialize};

use super::metrics::{Metric, MetricValues, MetricsReport};
use super::{round2, EvalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub per_run: Vec<MetricsReport>,
    /// Arithmetic mean per metric, unrounded.
    pub mean: MetricValues,
    /// Population variance per metric, unrounded.
    pub variance: MetricValues,
    /// `mean - baseline mean`, present only when a baseline was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<MetricValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_mean: Option<MetricValues>,
}

impl AggregateReport {
    pub fn runs(&self) -> usize {
        self.per_run.len()
    }

    pub fn rounded_mean(&self) -> MetricValues {
        self.mean.rounded()
    }

    pub fn rounded_variance(&self) -> MetricValues {
        self.variance.rounded()
    }

    pub fn rounded_delta(&self) -> Option<MetricValues> {
        self.delta.map(|d| d.rounded())
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn summarize(reports: &[MetricsReport]) -> (MetricValues, MetricValues) {
    let mut mean = MetricValues::default();
    let mut var = MetricValues::default();
    for metric in Metric::TABLE {
        let xs: Vec<f64> = reports.iter().map(|r| r.value(metric).expect("table metric")).collect();
        let (m, v) = mean_var(&xs);
        match metric {
            Metric::Precision => (mean.precision, var.precision) = (m, v),
            Metric::Recall => (mean.recall, var.recall) = (m, v),
            Metric::F1 => (mean.f1, var.f1) = (m, v),
            Metric::Accuracy => (mean.accuracy, var.accuracy) = (m, v),
            Metric::F1Micro => unreachable!(),
        }
    }
    let micro: Option<Vec<f64>> = reports.iter().map(|r| r.raw.f1_micro).collect();
    if let Some(xs) = micro {
        let (m, v) = mean_var(&xs);
        mean.f1_micro = Some(m);
        var.f1_micro = Some(v);
    }
    (mean, var)
}

/// Mean and population variance over runs, optionally with the per-metric
/// difference from a baseline's mean.
pub fn aggregate_runs(
    reports: &[MetricsReport],
    baseline: Option<&[MetricsReport]>,
) -> Result<AggregateReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyCounts);
    }
    let (mean, variance) = summarize(reports);
    let (delta, baseline_mean) = match baseline {
        None => (None, None),
        Some(base) => {
            if base.len() != reports.len() {
                return Err(EvalError::LengthMismatch {
                    left: reports.len(),
                    right: base.len(),
                });
            }
            let (bm, _) = summarize(base);
            let d = MetricValues {
                precision: mean.precision - bm.precision,
                recall: mean.recall - bm.recall,
                f1: mean.f1 - bm.f1,
                accuracy: mean.accuracy - bm.accuracy,
                f1_micro: mean.f1_micro.zip(bm.f1_micro).map(|(a, b)| a - b),
            };
            (Some(d), Some(bm))
        }
    };
    Ok(AggregateReport {
        per_run: reports.to_vec(),
        mean,
        variance,
        delta,
        baseline_mean,
    })
}

/// Rounded value of one metric from an aggregate row.
pub fn cell(values: &MetricValues, metric: Metric) -> Option<f64> {
    values.get(metric).map(round2)
}
