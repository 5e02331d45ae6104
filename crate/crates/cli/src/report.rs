//! Report bundles: aligned tables, CSVs, plot data and copied run manifests.
//!
//! Output depends only on the inputs (no clocks, no absolute paths), so
//! writing the same results twice yields byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emodetect_core::backend::write_atomic;
use emodetect_core::evalkit::{aggregate_csv, comparison_csv, render_aggregate, render_comparison, AggregateReport, Metric};
use emodetect_core::trainer::{compare_run_sets, RunSetResult};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub name: String,
    pub protocol_digest: String,
    pub runs: usize,
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config_digest: String,
    /// `baseline` then `candidate` for a comparison, or a single protocol.
    pub protocols: Vec<ProtocolSummary>,
    pub tables: Vec<BundleFile>,
    pub plotdata: Vec<BundleFile>,
    pub manifests: Vec<BundleFile>,
}

pub const BUNDLE_FILE: &str = "bundle.json";

struct Writer<'a> {
    root: &'a Path,
}

impl Writer<'_> {
    fn put(&self, rel: &str, bytes: &[u8]) -> Result<BundleFile, CliError> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes).map_err(|e| CliError::OutputUnwritable { path, source: e })?;
        Ok(BundleFile {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        })
    }
}

/// Prepends a comment line naming the config digest.
fn stamped(digest: &str, body: &str) -> String {
    format!("# config_digest={digest}\n{body}")
}

fn check_complete(r: &RunSetResult) -> Result<&AggregateReport, CliError> {
    match &r.aggregate {
        Some(agg) if r.all_completed() => Ok(agg),
        _ => Err(CliError::User(format!(
            "protocol {} is incomplete ({} of {} runs finished); refusing to report",
            r.protocol,
            r.completed,
            r.per_run.len()
        ))),
    }
}

/// Writes a report for one protocol, or a comparison when `baseline` is given
/// (`results` is then the candidate).
pub fn emit_report(
    results: &RunSetResult,
    baseline: Option<&RunSetResult>,
    config_digest: &str,
    out_dir: &Path,
) -> Result<ReportBundle, CliError> {
    let w = Writer { root: out_dir };
    let mut tables = Vec::new();
    let sets: Vec<&RunSetResult> = baseline.into_iter().chain(std::iter::once(results)).collect();
    for s in &sets {
        check_complete(s)?;
    }

    match baseline {
        Some(base) => {
            let table = compare_run_sets(base, results).map_err(|e| CliError::User(e.to_string()))?;
            tables.push(w.put("table.txt", stamped(config_digest, &render_comparison(&table)).as_bytes())?);
            tables.push(w.put("table.csv", stamped(config_digest, &comparison_csv(&table)).as_bytes())?);
            tables.push(w.put("comparison.json", &json_bytes(&serde_json::json!({
                "config_digest": config_digest,
                "comparison": table,
            })))?);
        }
        None => {
            let agg = check_complete(results)?;
            tables.push(w.put("table.txt", stamped(config_digest, &render_aggregate(&results.protocol, agg)).as_bytes())?);
            tables.push(w.put("table.csv", stamped(config_digest, &aggregate_csv(&results.protocol, agg)).as_bytes())?);
        }
    }

    let mut per_run = String::from("protocol,run,model_seed,data_seed_base,precision,recall,f1,accuracy\n");
    let mut curves = String::from("protocol,run,stage,epoch,train_loss,selection_value\n");
    for s in &sets {
        for r in &s.per_run {
            let t = r.test.as_ref().expect("checked complete");
            let _ = write!(per_run, "{},{},{},{},", s.protocol, r.run, r.model_seed, r.data_seed_base);
            let cells: Vec<String> = Metric::TABLE.iter().map(|&m| format!("{:.6}", t.raw.get(m).unwrap_or(f64::NAN))).collect();
            per_run.push_str(&cells.join(","));
            per_run.push('\n');
            for st in &r.stages {
                for e in &st.epochs {
                    let _ = writeln!(
                        curves,
                        "{},{},{},{},{:.6},{:.6}",
                        s.protocol, r.run, st.stage_name, e.epoch, e.train_loss, e.selection_value
                    );
                }
            }
        }
    }
    let plotdata = vec![
        w.put("plotdata/test_metrics_per_run.csv", stamped(config_digest, &per_run).as_bytes())?,
        w.put("plotdata/selection_curves.csv", stamped(config_digest, &curves).as_bytes())?,
    ];

    let mut manifests = Vec::new();
    for s in &sets {
        for r in &s.per_run {
            if let Ok(bytes) = std::fs::read(&r.manifest) {
                manifests.push(w.put(&format!("manifests/{}-run-{}.jsonl", s.protocol, r.run), &bytes)?);
            } else {
                log::warn!("run manifest {} not found; not bundled", r.manifest.display());
            }
        }
    }

    let bundle = ReportBundle {
        config_digest: config_digest.to_string(),
        protocols: sets
            .iter()
            .map(|s| ProtocolSummary {
                name: s.protocol.clone(),
                protocol_digest: s.config_digest.clone(),
                runs: s.per_run.len(),
                completed: s.completed,
            })
            .collect(),
        tables,
        plotdata,
        manifests,
    };
    w.put(BUNDLE_FILE, &json_bytes(&bundle))?;
    Ok(bundle)
}

/// Digest used when reporting results outside of a `train` invocation:
/// derived from the protocol digests involved.
pub fn results_digest(sets: &[&RunSetResult]) -> String {
    let mut h = Sha256::new();
    for s in sets {
        h.update(s.config_digest.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report values serialize");
    v.push(b'\n');
    v
}

pub fn read_results(path: &Path) -> Result<RunSetResult, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read results {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::User(format!("{} is not a results file: {e}", path.display())))
}

pub fn results_path(out_dir: &Path, protocol: &str) -> PathBuf {
    out_dir.join(protocol).join("results.json")
}
