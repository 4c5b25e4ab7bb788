//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string. The `*_value` functions hold the logic
//! and are plain Rust so they can be tested natively.

// `!(x >= 0.0)` is how NaN-rejecting range checks are written here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use driftcal::adaptation::{adapt_dataset, AdaptationConfig, AdaptedRun};
use driftcal::cmapss::sensor_channel;
use driftcal::labeling::{compute_ttd, fit_standardizer, split_engines, windows_for_runs, WindowConfig};
use driftcal::models::{fit_linear, lr_at, score_table, DEFAULT_RIDGE};
use driftcal::scheduler::{
    median_segment_length, simulate, CostSpec, OracleScorer, PolicyKind, PolicySpec, Scorer,
};
use driftcal::synthetic::{generate, SyntheticConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Engines in the demo fleet.
const FLEET: usize = 20;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Raw and adapted drift-sensor traces for one engine of a synthetic fleet.
pub fn adaptation_demo_value(seed: u64, engine_id: u32, max_resets: usize, noise_reset_probability: f64) -> Result<Value, String> {
    let cfg = AdaptationConfig {
        max_resets,
        noise_reset_probability,
        ..Default::default()
    };
    let trajs = generate(&SyntheticConfig { engines: FLEET, ..Default::default() }, seed);
    let ds = adapt_dataset(&trajs, &cfg, seed, "synthetic").map_err(err)?;
    let run = ds
        .runs
        .iter()
        .find(|r| r.engine_id == engine_id)
        .ok_or_else(|| format!("engine {engine_id} is not in the fleet (1..={FLEET})"))?;
    let raw = trajs.iter().find(|t| t.engine_id == engine_id).expect("adapted runs come from the fleet");
    let sensors: Vec<Value> = run
        .thresholds
        .iter()
        .map(|th| {
            let ch = sensor_channel(th.sensor_id);
            json!({
                "sensor_id": th.sensor_id,
                "baseline": th.baseline,
                "threshold": th.threshold,
                "raw": raw.channel(ch),
                "adapted": run.channels.channel(ch),
            })
        })
        .collect();
    Ok(json!({
        "engine_id": run.engine_id,
        "cycles": run.len(),
        "sensors": sensors,
        "resets": run.reset_events.iter().map(|e| json!({"cycle": e.cycle, "kind": e.kind.as_str()})).collect::<Vec<_>>(),
        "crossings": run.segments.iter().filter_map(|s| s.crossing).collect::<Vec<_>>(),
        "ttd": compute_ttd(run).values,
    }))
}

/// Policy cost on the validation engines for margins `0..=max_margin`.
///
/// The predictive policy is scored twice: with a ridge forecaster fitted in
/// place and with the true TTD.
pub fn policy_sweep_value(seed: u64, window: usize, max_margin: u32, cost_cal: f64, cost_vio: f64) -> Result<Value, String> {
    let costs = CostSpec { c_cal: cost_cal, c_vio: cost_vio };
    let trajs = generate(&SyntheticConfig { engines: FLEET, ..Default::default() }, seed);
    let ds = adapt_dataset(&trajs, &AdaptationConfig::default(), seed, "synthetic").map_err(err)?;
    let split = split_engines(&ds.engine_ids(), 0.75, seed).map_err(err)?;
    let train_runs: Vec<&AdaptedRun> = ds.runs_for(&split.train_engines).collect();
    let val_runs: Vec<&AdaptedRun> = ds.runs_for(&split.val_engines).collect();
    let train = windows_for_runs(
        train_runs.iter().copied(),
        &WindowConfig { window, stride: 2, allow_cross_reset: true },
    )
    .map_err(err)?;
    let model = fit_linear(&train, &fit_standardizer(&train).map_err(err)?, DEFAULT_RIDGE).map_err(err)?;
    let forecasts = score_table(&model, &val_runs, false).map_err(err)?;
    let oracle = OracleScorer::new(&val_runs);
    let period = median_segment_length(&train_runs).ok_or("training engines have no segments")?;

    let run = |kind: PolicyKind, margin: f64, scorer: &dyn Scorer| -> Result<Value, String> {
        let spec = PolicySpec::new(kind, margin, period).map_err(err)?;
        let o = simulate(&val_runs, scorer, &spec, &costs, None).map_err(err)?;
        Ok(json!({"n_cal": o.n_cal, "n_vio": o.n_vio, "cost": o.cost}))
    };
    let margins: Vec<u32> = (0..=max_margin).collect();
    let mut learned = Vec::new();
    let mut perfect = Vec::new();
    for &m in &margins {
        learned.push(run(PolicyKind::Predictive, m as f64, &forecasts)?);
        perfect.push(run(PolicyKind::Predictive, m as f64, &oracle)?);
    }
    Ok(json!({
        "margins": margins,
        "period": period,
        "reactive": run(PolicyKind::Reactive, 0.0, &oracle)?,
        "fixed": run(PolicyKind::Fixed, 0.0, &oracle)?,
        "predictive": learned,
        "oracle": perfect,
    }))
}

/// Warmup plus cosine decay, one entry per update step.
pub fn lr_schedule_value(base_lr: f64, warmup: usize, total: usize) -> Result<Value, String> {
    if !(base_lr > 0.0) || total == 0 {
        return Err("base_lr must be positive and total >= 1".into());
    }
    let lr: Vec<f64> = (1..=total).map(|k| lr_at(k, base_lr, warmup, total)).collect();
    Ok(json!({"steps": total, "lr": lr}))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn adaptation_demo(seed: u32, engine_id: u32, max_resets: u32, noise_reset_probability: f64) -> Result<String, JsError> {
    to_js(adaptation_demo_value(seed as u64, engine_id, max_resets as usize, noise_reset_probability))
}

#[wasm_bindgen]
pub fn policy_sweep(seed: u32, window: u32, max_margin: u32, cost_cal: f64, cost_vio: f64) -> Result<String, JsError> {
    to_js(policy_sweep_value(seed as u64, window as usize, max_margin, cost_cal, cost_vio))
}

#[wasm_bindgen]
pub fn lr_schedule(base_lr: f64, warmup: u32, total: u32) -> Result<String, JsError> {
    to_js(lr_schedule_value(base_lr, warmup as usize, total as usize))
}
