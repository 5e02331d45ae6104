//! Text and CSV renderings of run tables. Layout: one row per run, then a
//! Mean row, the variance in brackets beneath it, and a Δ row when a
//! baseline is present.

use super::aggregate::AggregateReport;
use super::compare::ComparisonTable;
use super::metrics::{Metric, MetricValues};
use super::round2;

fn fmt_value(v: f64) -> String {
    format!("{:.2}", round2(v))
}

fn fmt_signed(v: f64) -> String {
    let r = round2(v);
    if r > 0.0 {
        format!("+{r:.2}")
    } else if r < 0.0 {
        format!("\u{2212}{:.2}", -r)
    } else {
        "0.00".to_string()
    }
}

fn cells(values: &MetricValues, metrics: &[Metric], f: fn(f64) -> String) -> Vec<String> {
    metrics.iter().map(|m| values.get(*m).map(f).unwrap_or_else(|| "-".into())).collect()
}

fn bracketed(values: &MetricValues, metrics: &[Metric]) -> Vec<String> {
    cells(values, metrics, |v| format!("({:.2})", round2(v)))
}

/// Aligns a grid of cells into columns separated by two spaces.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn metric_headers(metrics: &[Metric]) -> Vec<String> {
    metrics.iter().map(|m| m.short().to_string()).collect()
}

pub fn render_aggregate(name: &str, agg: &AggregateReport) -> String {
    let metrics: Vec<Metric> = Metric::TABLE.to_vec();
    let mut rows = vec![
        std::iter::once(name.to_string()).chain(metric_headers(&metrics)).collect::<Vec<_>>(),
    ];
    for (i, r) in agg.per_run.iter().enumerate() {
        rows.push(std::iter::once(format!("{}", i + 1)).chain(cells(&r.raw, &metrics, fmt_value)).collect());
    }
    rows.push(std::iter::once("Mean".to_string()).chain(cells(&agg.mean, &metrics, fmt_value)).collect());
    rows.push(std::iter::once("Var.".to_string()).chain(bracketed(&agg.variance, &metrics)).collect());
    if let Some(d) = &agg.delta {
        rows.push(std::iter::once("\u{394}".to_string()).chain(cells(d, &metrics, fmt_signed)).collect());
    }
    align(&rows)
}

pub fn render_comparison(t: &ComparisonTable) -> String {
    let m = &t.metrics;
    let blank = || vec![String::new(); m.len()];
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Run".to_string()];
    header.extend(metric_headers(m).into_iter().map(|h| format!("{}:{h}", t.a_name)));
    header.push("|".into());
    header.extend(metric_headers(m).into_iter().map(|h| format!("{}:{h}", t.b_name)));
    rows.push(header);
    let line = |label: String, a: Vec<String>, b: Vec<String>| {
        let mut row = vec![label];
        row.extend(a);
        row.push("|".into());
        row.extend(b);
        row
    };
    for r in &t.rows {
        rows.push(line(r.run.to_string(), cells(&r.a, m, fmt_value), cells(&r.b, m, fmt_value)));
    }
    rows.push(line("Mean".into(), cells(&t.a.mean, m, fmt_value), cells(&t.b.mean, m, fmt_value)));
    rows.push(line("Var.".into(), bracketed(&t.a.variance, m), bracketed(&t.b.variance, m)));
    if let Some(d) = &t.b.delta {
        rows.push(line("\u{394}".into(), blank(), cells(d, m, fmt_signed)));
    }
    let wins: Vec<String> = t.wins.iter().map(|w| format!("{}/{}", w.b, t.rows.len())).collect();
    rows.push(line(format!("{} wins", t.b_name), blank(), wins));
    align(&rows)
}

fn csv_string(records: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn csv_values(v: &MetricValues, metrics: &[Metric]) -> Vec<String> {
    metrics
        .iter()
        .map(|m| v.get(*m).map(|x| format!("{:.2}", round2(x))).unwrap_or_default())
        .collect()
}

/// Long-form CSV: `model,row,precision,recall,f1,accuracy`.
pub fn comparison_csv(t: &ComparisonTable) -> String {
    let m = &t.metrics;
    let mut records = vec![["model", "row"]
        .iter()
        .map(|s| s.to_string())
        .chain(m.iter().map(|x| x.as_str().to_string()))
        .collect::<Vec<_>>()];
    for (name, agg) in [(&t.a_name, &t.a), (&t.b_name, &t.b)] {
        records.extend(aggregate_records(name, agg, m));
    }
    csv_string(records)
}

fn aggregate_records(name: &str, agg: &AggregateReport, m: &[Metric]) -> Vec<Vec<String>> {
    let row = |label: String, v: &MetricValues| {
        let mut r = vec![name.to_string(), label];
        r.extend(csv_values(v, m));
        r
    };
    let mut out: Vec<Vec<String>> =
        agg.per_run.iter().enumerate().map(|(i, r)| row(format!("run-{}", i + 1), &r.raw)).collect();
    out.push(row("mean".into(), &agg.mean));
    out.push(row("variance".into(), &agg.variance));
    if let Some(d) = &agg.delta {
        out.push(row("delta".into(), d));
    }
    out
}

pub fn aggregate_csv(name: &str, agg: &AggregateReport) -> String {
    let m = Metric::TABLE;
    let mut records = vec![["model", "row"]
        .iter()
        .map(|s| s.to_string())
        .chain(m.iter().map(|x| x.as_str().to_string()))
        .collect::<Vec<_>>()];
    records.extend(aggregate_records(name, agg, &m));
    csv_string(records)
}
