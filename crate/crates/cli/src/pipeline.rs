//! The adapt, train, evaluate and simulate stages.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use driftcal::adaptation::{adapt_dataset, AdaptedDataset, AdaptedRun};
use driftcal::cmapss::read_trajectories;
use driftcal::fmt::g17;
use driftcal::labeling::{fit_standardizer, split_engines, windows_for_runs, LabeledWindow, SplitAssignment, WindowConfig};
use driftcal::models::{
    evaluate, fit_linear, fit_quantile, score_table, train_attention, write_training_log, ForecastModel, ModelKind,
    DEFAULT_QUANTILES, DEFAULT_RIDGE,
};
use driftcal::scheduler::{
    median_segment_length, simulate, write_event_log, write_policy_table, OracleScorer, PolicyKind, PolicySpec, Scorer,
};
use driftcal::synthetic::generate;
use serde_json::json;

use crate::config::Settings;
use crate::svg::scatter_svg;

pub const ADAPT_DIR: &str = "adapted";
pub const MODELS_DIR: &str = "models";
pub const EVAL_DIR: &str = "eval";
pub const SIM_DIR: &str = "sim";
pub const SPLIT_FILE: &str = "split.json";
pub const RUN_FILE: &str = "run.json";

/// Writes a CSV artifact behind the provenance comment line.
fn write_csv(path: &Path, s: &Settings, body: impl FnOnce(&mut Vec<u8>) -> driftcal::Result<()>) -> Result<()> {
    let mut buf = s.provenance_line().into_bytes();
    body(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Stage record read back by `report`.
fn write_run_record(dir: &Path, command: &str, s: &Settings, summary: serde_json::Value) -> Result<()> {
    let record = json!({
        "command": command,
        "seed": s.seed,
        "config_digest": s.digest(),
        "settings": s.snapshot(),
        "summary": summary,
    });
    fs::write(dir.join(RUN_FILE), serde_json::to_string_pretty(&record)? + "\n")?;
    Ok(())
}

fn stage_dir(s: &Settings, name: &str) -> Result<PathBuf> {
    let dir = s.out.join(name);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_dataset(s: &Settings) -> Result<(AdaptedDataset, SplitAssignment)> {
    let dir = s.out.join(ADAPT_DIR);
    let ds = AdaptedDataset::read_from_dir(&dir)
        .with_context(|| format!("loading adapted dataset from {} (run `adapt` first)", dir.display()))?;
    let split_path = dir.join(SPLIT_FILE);
    let split: SplitAssignment = serde_json::from_str(
        &fs::read_to_string(&split_path).with_context(|| format!("reading {}", split_path.display()))?,
    )?;
    Ok((ds, split))
}

fn model_path(s: &Settings, kind: ModelKind) -> PathBuf {
    s.out.join(MODELS_DIR).join(format!("{}.model", kind.name()))
}

fn load_model(s: &Settings, kind: ModelKind) -> Result<ForecastModel> {
    let path = model_path(s, kind);
    let model = ForecastModel::load(&path)
        .with_context(|| format!("loading {} (run `train --model {}` first)", path.display(), kind.name()))?;
    if model.window != s.window {
        bail!(
            "shape mismatch: {} was trained on windows of {} cycles, settings ask for {}",
            path.display(),
            model.window,
            s.window
        );
    }
    Ok(model)
}

fn windows(runs: &[&AdaptedRun], window: usize, stride: usize) -> Result<Vec<LabeledWindow>> {
    Ok(windows_for_runs(
        runs.iter().copied(),
        &WindowConfig { window, stride, allow_cross_reset: true },
    )?)
}

pub fn adapt(s: &Settings) -> Result<String> {
    let trajs = if s.split == "synthetic" {
        generate(&s.synthetic, s.seed)
    } else {
        let path = s.data_dir.join(format!("train_{}.txt", s.split));
        read_trajectories(&path).with_context(|| format!("reading {}", path.display()))?
    };
    let mut ds = adapt_dataset(&trajs, &s.adaptation, s.seed, &s.split)?;
    ds.annotations.insert("seed".into(), s.seed.to_string());
    ds.annotations.insert("config_digest".into(), s.digest());
    let dir = stage_dir(s, ADAPT_DIR)?;
    let digest = ds.write_to_dir(&dir)?;
    let split = split_engines(&ds.engine_ids(), s.train_fraction, s.seed)?;
    fs::write(dir.join(SPLIT_FILE), serde_json::to_string_pretty(&split)? + "\n")?;

    let crossings: usize = ds.runs.iter().map(AdaptedRun::crossing_segments).sum();
    let resets: usize = ds.runs.iter().map(|r| r.reset_events.len()).sum();
    println!("adapted {} runs ({} skipped) from split {}", ds.runs.len(), ds.skipped_engines.len(), s.split);
    println!("drift sensors: {:?}", ds.ranking.selected());
    println!("crossing segments {crossings}, synthetic resets {resets}");
    println!("train engines {}, validation engines {}", split.train_engines.len(), split.val_engines.len());
    println!("digest {digest}");
    write_run_record(
        &dir,
        "adapt",
        s,
        json!({
            "digest": digest,
            "runs": ds.runs.len(),
            "skipped_engines": ds.skipped_engines,
            "drift_sensors": ds.ranking.selected(),
            "crossing_segments": crossings,
            "resets": resets,
            "train_engines": split.train_engines,
            "val_engines": split.val_engines,
        }),
    )?;
    Ok(digest)
}

pub fn train(s: &Settings) -> Result<()> {
    let (ds, split) = load_dataset(s)?;
    let train_runs: Vec<&AdaptedRun> = ds.runs_for(&split.train_engines).collect();
    let val_runs: Vec<&AdaptedRun> = ds.runs_for(&split.val_engines).collect();
    let train_w = windows(&train_runs, s.window, s.stride)?;
    let val_w = windows(&val_runs, s.window, 1)?;
    let standardizer = fit_standardizer(&train_w)?;
    let dir = stage_dir(s, MODELS_DIR)?;
    let mut summary = BTreeMap::new();
    for &kind in &s.models {
        let start = Instant::now();
        let trained = match kind {
            ModelKind::Linear => fit_linear(&train_w, &standardizer, DEFAULT_RIDGE).map(|m| (m, None)),
            ModelKind::Quantile => fit_quantile(&train_w, &val_w, &standardizer, &DEFAULT_QUANTILES, &s.train)
                .map(|(m, h)| (m, Some(h))),
            ModelKind::Attention => {
                train_attention(&train_w, &val_w, &standardizer, &s.train).map(|(m, h)| (m, Some(h)))
            }
        };
        let (mut model, history) = trained.with_context(|| format!("training {}", kind.name()))?;
        model.annotations.insert("seed".into(), s.seed.to_string());
        model.annotations.insert("config_digest".into(), s.digest());
        model.annotations.insert("split".into(), s.split.clone());
        let path = model_path(s, kind);
        model.save(&path)?;
        let secs = start.elapsed().as_secs_f64();
        let mut entry = json!({
            "model_file": path.file_name().unwrap().to_string_lossy(),
            "params": model.params.len(),
            "train_windows": train_w.len(),
            "val_windows": val_w.len(),
        });
        match &history {
            Some(h) => {
                let log = dir.join(format!("{}_training_log.csv", kind.name()));
                write_csv(&log, s, |buf| write_training_log(h, buf))?;
                let last = h.epochs.last().expect("at least one epoch");
                println!(
                    "{}: {} epochs, best epoch {}, final status {}, {:.1}s",
                    kind.name(),
                    h.epochs.len(),
                    h.best_epoch,
                    last.status.name(),
                    secs
                );
                entry["epochs"] = json!(h.epochs.len());
                entry["best_epoch"] = json!(h.best_epoch);
                entry["final_status"] = json!(last.status.name());
            }
            None => println!("{}: closed-form fit, {:.1}s", kind.name(), secs),
        }
        summary.insert(kind.name().to_string(), entry);
    }
    write_run_record(&dir, "train", s, json!(summary))
}

pub fn evaluate_models(s: &Settings) -> Result<()> {
    let (ds, split) = load_dataset(s)?;
    let val_runs: Vec<&AdaptedRun> = ds.runs_for(&split.val_engines).collect();
    let val_w = windows(&val_runs, s.window, 1)?;
    let dir = stage_dir(s, EVAL_DIR)?;
    let mut rows = Vec::new();
    for &kind in &s.models {
        let model = load_model(s, kind)?;
        let (report, preds) = evaluate(&model, &val_w)?;
        let labels: Vec<f64> = val_w.iter().map(|w| w.label as f64).collect();
        write_csv(&dir.join(format!("scatter_{}.csv", kind.name())), s, |buf| {
            let mut wtr = csv::Writer::from_writer(buf);
            wtr.write_record(["engine_id", "end_cycle", "true_ttd", "pred_ttd"])?;
            for (w, p) in val_w.iter().zip(&preds) {
                wtr.write_record([w.engine_id.to_string(), w.end_cycle.to_string(), w.label.to_string(), g17(*p)])?;
            }
            wtr.flush()?;
            Ok(())
        })?;
        if s.svg {
            let title = format!("{} (MAE {:.2})", kind.name(), report.mae);
            fs::write(dir.join(format!("scatter_{}.svg", kind.name())), scatter_svg(&labels, &preds, &title))?;
        }
        println!(
            "{}: MAE {:.3} RMSE {:.3} R2 {} (n={})",
            kind.name(),
            report.mae,
            report.rmse,
            report.r2.map_or("undefined".into(), |r| format!("{r:.3}")),
            report.n
        );
        rows.push((kind, report));
    }
    write_csv(&dir.join("metrics.csv"), s, |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(["model", "mae", "rmse", "r2", "n"])?;
        for (kind, r) in &rows {
            wtr.write_record([
                kind.name().to_string(),
                g17(r.mae),
                g17(r.rmse),
                r.r2.map(g17).unwrap_or_default(),
                r.n.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    let summary: BTreeMap<_, _> = rows
        .iter()
        .map(|(k, r)| (k.name(), json!({"mae": r.mae, "rmse": r.rmse, "r2": r.r2, "n": r.n})))
        .collect();
    write_run_record(&dir, "evaluate", s, json!(summary))
}

pub fn simulate_policies(s: &Settings) -> Result<()> {
    let (ds, split) = load_dataset(s)?;
    let train_runs: Vec<&AdaptedRun> = ds.runs_for(&split.train_engines).collect();
    let val_runs: Vec<&AdaptedRun> = ds.runs_for(&split.val_engines).collect();
    let period = match s.period {
        Some(p) => p,
        None => median_segment_length(&train_runs).context("training split has no segments")?,
    };

    let oracle = OracleScorer::new(&val_runs);
    let point_table;
    let lower_table;
    let mut point: Option<&dyn Scorer> = None;
    let mut lower: Option<&dyn Scorer> = None;
    let mut point_source = String::new();
    if s.oracle_scorer {
        point = Some(&oracle);
        lower = Some(&oracle);
        point_source = "oracle".into();
    } else {
        if s.policies.contains(&PolicyKind::Predictive) {
            let kind = s.models[0];
            point_table = score_table(&load_model(s, kind)?, &val_runs, false)?;
            point = Some(&point_table);
            point_source = kind.name().into();
        }
        if s.policies.contains(&PolicyKind::Quantile) {
            if !model_path(s, ModelKind::Quantile).exists() {
                bail!(
                    "the quantile policy needs a quantile model at {}; run `train --model quantile` or drop it from --policies",
                    model_path(s, ModelKind::Quantile).display()
                );
            }
            lower_table = score_table(&load_model(s, ModelKind::Quantile)?, &val_runs, true)?;
            lower = Some(&lower_table);
        }
    }

    let costs = s.costs();
    let capacity = s.capacity();
    let dir = stage_dir(s, SIM_DIR)?;
    let mut outcomes = Vec::new();
    for &kind in &s.policies {
        let spec = PolicySpec::new(kind, s.margin, period)?;
        let scorer: &dyn Scorer = match kind {
            PolicyKind::Predictive => point.expect("point scorer prepared"),
            PolicyKind::Quantile => lower.expect("quantile scorer prepared"),
            _ => &oracle,
        };
        let outcome = simulate(&val_runs, scorer, &spec, &costs, capacity.as_ref())?;
        write_csv(&dir.join(format!("events_{}.csv", kind.name())), s, |buf| write_event_log(&outcome, buf))?;
        outcomes.push(outcome);
    }
    write_csv(&dir.join("policy_table.csv"), s, |buf| write_policy_table(&outcomes, buf))?;

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<11} {:>7} {:>7} {:>12}", "policy", "cal", "viol", "cost")?;
    for o in &outcomes {
        writeln!(stdout, "{:<11} {:>7} {:>7} {:>12}", o.policy.name(), o.n_cal, o.n_vio, g17(o.cost))?;
    }
    writeln!(stdout, "fixed period {period}, margin {}, scorer {}", s.margin, if point_source.is_empty() { "none" } else { &point_source })?;

    let rows: Vec<_> = outcomes
        .iter()
        .map(|o| {
            json!({
                "policy": o.policy.name(),
                "n_cal": o.n_cal,
                "n_vio": o.n_vio,
                "cost": o.cost,
                "lead_time_total": o.lead_time_total,
            })
        })
        .collect();
    write_run_record(
        &dir,
        "simulate",
        s,
        json!({
            "period": period,
            "margin": s.margin,
            "scorer": point_source,
            "capacity": capacity,
            "policies": rows,
        }),
    )
}
