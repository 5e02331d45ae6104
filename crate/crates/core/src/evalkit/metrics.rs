use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{round2, EvalError};
use crate::corpora::{Label, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl BinaryCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts from boolean predictions, `true` being the positive class.
    pub fn from_bools(preds: &[bool], golds: &[bool]) -> Result<Self, EvalError> {
        if preds.len() != golds.len() {
            return Err(EvalError::LengthMismatch {
                left: preds.len(),
                right: golds.len(),
            });
        }
        let mut c = Self::default();
        for (&p, &g) in preds.iter().zip(golds) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }
}

/// k×k counts, rows are gold classes and columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<Label>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn get(&self, gold: Label, pred: Label) -> u64 {
        self.counts[gold.index()][pred.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConfusionCounts {
    Binary {
        positive: Label,
        #[serde(flatten)]
        counts: BinaryCounts,
    },
    Multiclass(ConfusionMatrix),
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        match self {
            ConfusionCounts::Binary { counts, .. } => counts.total(),
            ConfusionCounts::Multiclass(m) => m.total(),
        }
    }
}

/// Builds confusion counts. Two-class schemas give the binary form with
/// `positive` (or the schema's default positive class) as the positive side;
/// larger schemas give the full matrix.
pub fn confusion(preds: &[Label], golds: &[Label], positive: Option<Label>) -> Result<ConfusionCounts, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    let Some(first) = golds.first() else {
        return Err(EvalError::EmptyCounts);
    };
    let schema = first.schema();
    if preds.iter().chain(golds).any(|l| l.schema() != schema) {
        return Err(EvalError::MixedSchema);
    }
    if let Some(p) = positive {
        if p.schema() != schema {
            return Err(EvalError::MixedSchema);
        }
    }
    if schema.num_classes() == 2 {
        let positive = positive
            .or_else(|| schema.positive_label())
            .expect("two-class schemas define a positive class");
        let pb: Vec<bool> = preds.iter().map(|l| *l == positive).collect();
        let gb: Vec<bool> = golds.iter().map(|l| *l == positive).collect();
        return Ok(ConfusionCounts::Binary {
            positive,
            counts: BinaryCounts::from_bools(&pb, &gb)?,
        });
    }
    let k = schema.num_classes();
    let mut counts = vec![vec![0u64; k]; k];
    for (p, g) in preds.iter().zip(golds) {
        counts[g.index()][p.index()] += 1;
    }
    Ok(ConfusionCounts::Multiclass(ConfusionMatrix {
        labels: schema.labels(),
        counts,
    }))
}

/// Metric values in percent at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_micro: Option<f64>,
}

impl MetricValues {
    pub fn new(precision: f64, recall: f64, f1: f64, accuracy: f64) -> Self {
        Self {
            precision,
            recall,
            f1,
            accuracy,
            f1_micro: None,
        }
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::F1 => Some(self.f1),
            Metric::Accuracy => Some(self.accuracy),
            Metric::F1Micro => self.f1_micro,
        }
    }

    pub fn rounded(&self) -> Self {
        Self {
            precision: round2(self.precision),
            recall: round2(self.recall),
            f1: round2(self.f1),
            accuracy: round2(self.accuracy),
            f1_micro: self.f1_micro.map(round2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    F1,
    Accuracy,
    F1Micro,
}

impl Metric {
    pub const TABLE: [Metric; 4] = [Metric::Precision, Metric::Recall, Metric::F1, Metric::Accuracy];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Accuracy => "accuracy",
            Metric::F1Micro => "f1_micro",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Metric::Precision => "P",
            Metric::Recall => "R",
            Metric::F1 => "F1",
            Metric::Accuracy => "Acc",
            Metric::F1Micro => "F1u",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "f1" => Ok(Metric::F1),
            "accuracy" => Ok(Metric::Accuracy),
            "f1_micro" | "f1-micro" | "f1micro" => Ok(Metric::F1Micro),
            other => Err(EvalError::UnknownMetric(other.to_string())),
        }
    }
}

/// Which ratios had a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UndefinedFlags {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl UndefinedFlags {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Percentages rounded half-up to 2 decimals.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_micro: Option<f64>,
    pub positive_class: Option<Label>,
    pub n: u64,
    #[serde(default)]
    pub undefined: UndefinedFlags,
    /// Unrounded percentages, used for aggregation and selection.
    pub raw: MetricValues,
}

impl MetricsReport {
    pub fn from_values(raw: MetricValues, positive_class: Option<Label>, n: u64) -> Self {
        let r = raw.rounded();
        Self {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            accuracy: r.accuracy,
            f1_micro: r.f1_micro,
            positive_class,
            n,
            undefined: UndefinedFlags::default(),
            raw,
        }
    }

    /// A report from already-computed percentages, e.g. published run values.
    pub fn from_percentages(precision: f64, recall: f64, f1: f64, accuracy: f64) -> Self {
        Self::from_values(MetricValues::new(precision, recall, f1, accuracy), None, 0)
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        self.raw.get(metric)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Unrounded fractions (not percentages) for binary counts.
pub fn binary_fractions(c: &BinaryCounts) -> (MetricValues, UndefinedFlags) {
    let (p, p_undef) = ratio(c.tp, c.tp + c.fp);
    let (r, r_undef) = ratio(c.tp, c.tp + c.fn_);
    let (f1, f1_undef) = if p_undef || r_undef || p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    };
    let acc = (c.tp + c.tn) as f64 / c.total() as f64;
    (
        MetricValues::new(p, r, f1, acc),
        UndefinedFlags {
            precision: p_undef,
            recall: r_undef,
            f1: f1_undef,
        },
    )
}

pub fn binary_metrics(c: &BinaryCounts, positive_class: Option<Label>) -> Result<MetricsReport, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let (v, undefined) = binary_fractions(c);
    let raw = MetricValues::new(v.precision * 100.0, v.recall * 100.0, v.f1 * 100.0, v.accuracy * 100.0);
    let mut report = MetricsReport::from_values(raw, positive_class, c.total());
    report.undefined = undefined;
    Ok(report)
}

/// Multiclass report: micro-averaged P/R/F1, which all equal accuracy for
/// single-label data.
pub fn multiclass_metrics(m: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let n = m.total();
    if n == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let k = m.counts.len();
    let tp: u64 = m.correct();
    let fp: u64 = (0..k).map(|c| (0..k).filter(|&g| g != c).map(|g| m.counts[g][c]).sum::<u64>()).sum();
    let fn_: u64 = (0..k).map(|g| (0..k).filter(|&c| c != g).map(|c| m.counts[g][c]).sum::<u64>()).sum();
    let (p, _) = ratio(tp, tp + fp);
    let (r, _) = ratio(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let acc = tp as f64 / n as f64;
    let mut raw = MetricValues::new(p * 100.0, r * 100.0, f1 * 100.0, acc * 100.0);
    raw.f1_micro = Some(f1 * 100.0);
    Ok(MetricsReport::from_values(raw, None, n))
}

/// Report for any schema, dispatching on the confusion form.
pub fn metrics_for(counts: &ConfusionCounts) -> Result<MetricsReport, EvalError> {
    match counts {
        ConfusionCounts::Binary { positive, counts } => {
            let mut report = binary_metrics(counts, Some(*positive))?;
            report.raw.f1_micro = Some(report.raw.accuracy);
            report.f1_micro = Some(report.accuracy);
            Ok(report)
        }
        ConfusionCounts::Multiclass(m) => multiclass_metrics(m),
    }
}

/// Evaluates predictions against golds under one schema.
pub fn evaluate_labels(preds: &[Label], golds: &[Label], schema: Schema) -> Result<MetricsReport, EvalError> {
    if golds.iter().any(|g| g.schema() != schema) {
        return Err(EvalError::MixedSchema);
    }
    metrics_for(&confusion(preds, golds, schema.positive_label())?)
}

/// Micro-averaged F1 in percent, computed from per-class counts.
pub fn micro_f1<T: Eq + Hash + Clone>(preds: &[T], golds: &[T]) -> Result<f64, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyCounts);
    }
    let mut tp: HashMap<T, u64> = HashMap::new();
    let mut fp: HashMap<T, u64> = HashMap::new();
    let mut fn_: HashMap<T, u64> = HashMap::new();
    for (p, g) in preds.iter().zip(golds) {
        if p == g {
            *tp.entry(g.clone()).or_default() += 1;
        } else {
            *fp.entry(p.clone()).or_default() += 1;
            *fn_.entry(g.clone()).or_default() += 1;
        }
    }
    let tp: u64 = tp.values().sum();
    let fp: u64 = fp.values().sum();
    let fn_: u64 = fn_.values().sum();
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let accuracy = tp as f64 / golds.len() as f64;
    debug_assert!((f1 - accuracy).abs() < 1e-12, "micro F1 must equal accuracy");
    Ok(f1 * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpora::Authorship;
    use crate::emotaxon::EkmanLabel;

    const H: Label = Label::Authorship(Authorship::Human);
    const S: Label = Label::Authorship(Authorship::Synthetic);

    #[test]
    fn confusion_binary_cases() {
        let all = vec![S; 4];
        let c = confusion(&all, &all, None).unwrap();
        assert_eq!(c, ConfusionCounts::Binary { positive: S, counts: BinaryCounts::new(4, 0, 0, 0) });

        let golds = vec![S, S, H, H];
        let ConfusionCounts::Binary { counts, .. } = confusion(&all, &golds, None).unwrap() else {
            panic!("binary expected")
        };
        assert_eq!((counts.tp, counts.fp), (2, 2));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion(&[S], &[S, H], None), Err(EvalError::LengthMismatch { .. })));
        let e = Label::Emotion(EkmanLabel::Anger);
        assert!(matches!(confusion(&[S, e], &[S, H], None), Err(EvalError::MixedSchema)));
        assert!(matches!(confusion(&[], &[], None), Err(EvalError::EmptyCounts)));
    }

    #[test]
    fn confusion_six_class_hand_count() {
        use EkmanLabel::*;
        let g = [Anger, Anger, Fear, Sadness, Surprise, Surprise, Happiness];
        let p = [Anger, Fear, Fear, Sadness, Happiness, Surprise, Happiness];
        let golds: Vec<Label> = g.iter().map(|e| Label::Emotion(*e)).collect();
        let preds: Vec<Label> = p.iter().map(|e| Label::Emotion(*e)).collect();
        let ConfusionCounts::Multiclass(m) = confusion(&preds, &golds, None).unwrap() else {
            panic!("matrix expected")
        };
        assert_eq!(m.total(), 7);
        assert_eq!(m.correct(), 5);
        assert_eq!(m.get(Label::Emotion(Anger), Label::Emotion(Fear)), 1);
        assert_eq!(m.get(Label::Emotion(Surprise), Label::Emotion(Happiness)), 1);
        assert_eq!(m.get(Label::Emotion(Disgust), Label::Emotion(Disgust)), 0);
        let r = multiclass_metrics(&m).unwrap();
        assert_eq!(r.f1_micro, Some(71.43));
        assert_eq!(r.accuracy, 71.43);
    }

    #[test]
    fn table6_rows() {
        let rows = [
            ((15, 5, 35, 45), (75.00, 30.00, 42.86, 60.00)),
            ((50, 33, 0, 17), (60.24, 100.00, 75.19, 67.00)),
            ((50, 24, 0, 26), (67.57, 100.00, 80.65, 76.00)),
        ];
        for ((tp, fp, fn_, tn), (p, r, f1, acc)) in rows {
            let m = binary_metrics(&BinaryCounts::new(tp, fp, fn_, tn), Some(S)).unwrap();
            assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (p, r, f1, acc));
        }
    }

    #[test]
    fn perfect_and_undefined() {
        let m = binary_metrics(&BinaryCounts::new(7, 0, 0, 0), None).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (100.0, 100.0, 100.0, 100.0));
        assert!(!m.undefined.any());

        let m = binary_metrics(&BinaryCounts::new(0, 0, 5, 5), None).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.precision && m.undefined.f1 && !m.undefined.recall);
        assert_eq!(m.accuracy, 50.0);
        assert!(matches!(binary_metrics(&BinaryCounts::default(), None), Err(EvalError::EmptyCounts)));
    }

    #[test]
    fn micro_f1_cases() {
        assert_eq!(micro_f1(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        let v = micro_f1(&[1, 2, 3, 4, 5], &[1, 2, 3, 0, 0]).unwrap();
        assert!((v - 60.0).abs() < 1e-9);
        assert!(matches!(micro_f1(&[1], &[1, 2]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn report_serde_round_trip() {
        let m = binary_metrics(&BinaryCounts::new(15, 5, 35, 45), Some(S)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<MetricsReport>(&s).unwrap(), m);
        let c = confusion(&[S, H], &[S, S], None).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"fn\":1"));
        assert_eq!(serde_json::from_str::<ConfusionCounts>(&s).unwrap(), c);
    }
}
