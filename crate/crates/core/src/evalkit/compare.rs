use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_runs, AggregateReport};
use super::metrics::{Metric, MetricValues, MetricsReport};
use super::{round2, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub a: MetricValues,
    pub b: MetricValues,
    /// One mark per entry of `ComparisonTable::metrics`.
    pub winners: Vec<Winner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinCount {
    pub metric: Metric,
    pub a: usize,
    pub b: usize,
    pub ties: usize,
}

/// Head-to-head comparison of two paired run sets; `b` is the candidate and
/// its aggregate carries the delta against `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub a_name: String,
    pub b_name: String,
    pub metrics: Vec<Metric>,
    pub rows: Vec<RunRow>,
    pub a: AggregateReport,
    pub b: AggregateReport,
    pub wins: Vec<WinCount>,
}

/// Winner by the 2-decimal reported values, so that displayed ties are ties.
fn winner(a: f64, b: f64) -> Winner {
    let (a, b) = (round2(a), round2(b));
    if a > b {
        Winner::A
    } else if b > a {
        Winner::B
    } else {
        Winner::Tie
    }
}

pub fn compare_models(
    a_name: &str,
    a: &[MetricsReport],
    b_name: &str,
    b: &[MetricsReport],
) -> Result<ComparisonTable, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::RunCountMismatch { a: a.len(), b: b.len() });
    }
    let metrics = Metric::TABLE.to_vec();
    let rows: Vec<RunRow> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (ra, rb))| RunRow {
            run: i + 1,
            a: ra.raw,
            b: rb.raw,
            winners: metrics
                .iter()
                .map(|m| winner(ra.value(*m).unwrap_or(0.0), rb.value(*m).unwrap_or(0.0)))
                .collect(),
        })
        .collect();
    let wins = metrics
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let count = |w: Winner| rows.iter().filter(|r| r.winners[k] == w).count();
            WinCount {
                metric: *m,
                a: count(Winner::A),
                b: count(Winner::B),
                ties: count(Winner::Tie),
            }
        })
        .collect();
    Ok(ComparisonTable {
        a_name: a_name.to_string(),
        b_name: b_name.to_string(),
        metrics,
        rows,
        a: aggregate_runs(a, None)?,
        b: aggregate_runs(b, Some(a))?,
        wins,
    })
}
