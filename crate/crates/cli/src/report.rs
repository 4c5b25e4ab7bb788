//! Consolidated `report.json` over whatever the earlier stages left behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use driftcal::sha256_hex;
use serde_json::{json, Map, Value};

use crate::pipeline::{ADAPT_DIR, EVAL_DIR, MODELS_DIR, RUN_FILE, SIM_DIR};

pub const REPORT_FILE: &str = "report.json";

const STAGES: [(&str, &str); 4] = [
    ("adapt", ADAPT_DIR),
    ("train", MODELS_DIR),
    ("evaluate", EVAL_DIR),
    ("simulate", SIM_DIR),
];

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = fs::read_dir(&dir) else { continue };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

/// Reads a provenance-prefixed CSV into one JSON object per row, strings as written.
fn csv_rows(path: &Path) -> Result<Vec<Value>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let obj: Map<String, Value> = headers
            .iter()
            .zip(rec.iter())
            .map(|(h, v)| (h.to_string(), Value::String(v.to_string())))
            .collect();
        rows.push(Value::Object(obj));
    }
    Ok(rows)
}

fn rel(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Builds the report. Missing or unreadable pieces become warnings.
pub fn build_report(out: &Path) -> Value {
    let mut warnings: Vec<String> = Vec::new();
    if !out.is_dir() {
        warnings.push(format!("output directory {} does not exist", out.display()));
    }

    let mut files = Vec::new();
    for path in files_under(out) {
        let name = rel(out, &path);
        if name == REPORT_FILE {
            continue;
        }
        match fs::read(&path) {
            Ok(bytes) => files.push(json!({"path": name, "sha256": sha256_hex(&bytes), "bytes": bytes.len()})),
            Err(e) => warnings.push(format!("cannot read {name}: {e}")),
        }
    }

    let mut sections = Map::new();
    let mut config = Value::Null;
    let mut digests = Vec::new();
    for (stage, dir) in STAGES {
        let record_path = out.join(dir).join(RUN_FILE);
        let record: Value = match fs::read_to_string(&record_path) {
            Ok(text) => match serde_json::from_str(&text) {
                Ok(v) => v,
                Err(e) => {
                    warnings.push(format!("{stage}: malformed {}: {e}", rel(out, &record_path)));
                    continue;
                }
            },
            Err(_) => {
                warnings.push(format!("{stage}: no outputs found"));
                continue;
            }
        };
        let mut section = Map::new();
        section.insert("seed".into(), record["seed"].clone());
        section.insert("config_digest".into(), record["config_digest"].clone());
        section.insert("summary".into(), record["summary"].clone());
        if let Some(d) = record["config_digest"].as_str() {
            digests.push(d.to_string());
        }
        config = record["settings"].clone();

        let tables: &[&str] = match stage {
            "evaluate" => &["metrics.csv"],
            "simulate" => &["policy_table.csv"],
            _ => &[],
        };
        for table in tables {
            let path = out.join(dir).join(table);
            match csv_rows(&path) {
                Ok(rows) => {
                    section.insert(table.trim_end_matches(".csv").to_string(), Value::Array(rows));
                }
                Err(e) => warnings.push(format!("{stage}: cannot read {}: {e}", rel(out, &path))),
            }
        }
        if stage == "train" {
            let mut logs = Map::new();
            for path in files_under(&out.join(dir)) {
                let name = rel(out, &path);
                if !name.ends_with("_training_log.csv") {
                    continue;
                }
                match csv_rows(&path) {
                    Ok(rows) => {
                        logs.insert(
                            name,
                            json!({"epochs": rows.len(), "last": rows.last().cloned().unwrap_or(Value::Null)}),
                        );
                    }
                    Err(e) => warnings.push(format!("train: cannot read {name}: {e}")),
                }
            }
            section.insert("training_logs".into(), Value::Object(logs));
        }
        sections.insert(stage.to_string(), Value::Object(section));
    }
    digests.dedup();
    if digests.len() > 1 {
        warnings.push("stages were run with different settings; see each section's config_digest".into());
    }

    json!({
        "tool": format!("driftcal {}", env!("CARGO_PKG_VERSION")),
        "config": config,
        "sections": sections,
        "files": files,
        "warnings": warnings,
    })
}

pub fn write_report(out: &Path) -> Result<Value> {
    let report = build_report(out);
    fs::create_dir_all(out)?;
    fs::write(out.join(REPORT_FILE), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}
