//! TTD labels, sliding windows, engine-level splits and standardization.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptedRun;
use crate::cmapss::N_CHANNELS;
use crate::fmt::g17;
use crate::{Error, Result};

/// Floor applied to stored standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtdSeries {
    pub engine_id: u32,
    /// One label per cycle; `values[t]` belongs to cycle `t + 1`.
    pub values: Vec<u32>,
}

/// Cycles until the segment's crossing (0 at and after it); in a segment
/// without a crossing, cycles until the segment end.
pub fn compute_ttd(run: &AdaptedRun) -> TtdSeries {
    let mut values = Vec::with_capacity(run.len());
    for seg in &run.segments {
        for t in seg.start..=seg.end {
            values.push(match seg.crossing {
                Some(c) => c.saturating_sub(t),
                None => seg.end - t,
            });
        }
    }
    TtdSeries {
        engine_id: run.engine_id,
        values,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    /// `window × channels` values, time-major.
    pub features: Vec<f64>,
    pub window: usize,
    pub channels: usize,
    pub label: u32,
    pub engine_id: u32,
    pub segment_id: usize,
    pub end_cycle: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window: usize,
    pub stride: usize,
    /// Allow a window to start in an earlier segment than the one it ends in.
    pub allow_cross_reset: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window: 40,
            stride: 1,
            allow_cross_reset: true,
        }
    }
}

/// Windows ending at cycles `w, w + stride, ...` up to the run length.
pub fn make_windows(run: &AdaptedRun, ttd: &TtdSeries, cfg: &WindowConfig) -> Result<Vec<LabeledWindow>> {
    if cfg.window == 0 || cfg.stride == 0 {
        return Err(Error::invalid("window and stride must be >= 1"));
    }
    if ttd.values.len() != run.len() {
        return Err(Error::LengthMismatch {
            left: ttd.values.len(),
            right: run.len(),
        });
    }
    let w = cfg.window;
    let mut out = Vec::new();
    let mut end = w;
    while end <= run.len() {
        let end_cycle = end as u32;
        let start_cycle = (end - w + 1) as u32;
        let seg = run.segment_index(end_cycle).expect("segments cover the run");
        if cfg.allow_cross_reset || run.segments[seg].contains(start_cycle) {
            let rows = &run.channels.data()[(end - w) * N_CHANNELS..end * N_CHANNELS];
            out.push(LabeledWindow {
                features: rows.to_vec(),
                window: w,
                channels: N_CHANNELS,
                label: ttd.values[end - 1],
                engine_id: run.engine_id,
                segment_id: seg,
                end_cycle,
            });
        }
        end += cfg.stride;
    }
    Ok(out)
}

/// Labels and windows every run in order.
pub fn windows_for_runs<'a>(
    runs: impl IntoIterator<Item = &'a AdaptedRun>,
    cfg: &WindowConfig,
) -> Result<Vec<LabeledWindow>> {
    let mut out = Vec::new();
    for run in runs {
        out.extend(make_windows(run, &compute_ttd(run), cfg)?);
    }
    Ok(out)
}

/// Debug dump: provenance, label, then `w·d` feature cells per row.
pub fn write_windows_csv<W: Write>(windows: &[LabeledWindow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    if let Some(first) = windows.first() {
        let mut header: Vec<String> = ["engine_id", "segment_id", "end_cycle", "label"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for t in 0..first.window {
            for c in 0..first.channels {
                header.push(format!("x_{t}_{c}"));
            }
        }
        wtr.write_record(&header)?;
    }
    for w in windows {
        let mut rec = vec![
            w.engine_id.to_string(),
            w.segment_id.to_string(),
            w.end_cycle.to_string(),
            w.label.to_string(),
        ];
        rec.extend(w.features.iter().map(|v| g17(*v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_engines: Vec<u32>,
    pub val_engines: Vec<u32>,
    pub fraction: f64,
    pub seed: u64,
}

/// Seeded engine-level split; `round(fraction · n)` engines (half rounds up)
/// go to training.
pub fn split_engines(ids: &[u32], fraction: f64, seed: u64) -> Result<SplitAssignment> {
    let unique: BTreeSet<u32> = ids.iter().copied().collect();
    if unique.len() < 2 {
        return Err(Error::invalid("need at least 2 engines to split"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = unique.len();
    let n_train = (fraction * n as f64 + 0.5).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {n} engines leaves one side empty"
        )));
    }
    let mut order: Vec<u32> = unique.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, val) = order.split_at(n_train);
    let mut train_engines = train.to_vec();
    let mut val_engines = val.to_vec();
    train_engines.sort_unstable();
    val_engines.sort_unstable();
    Ok(SplitAssignment {
        train_engines,
        val_engines,
        fraction,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizeMode {
    /// Statistics over every cell of every training window.
    #[default]
    WindowCells,
    /// Statistics over the training runs' cycles, each counted once.
    Cycles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(channels: usize) -> Self {
        Standardizer {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes one flattened time-major window.
    pub fn transform(&self, features: &[f64]) -> Vec<f64> {
        let d = self.channels();
        features
            .iter()
            .enumerate()
            .map(|(i, x)| (x - self.mean[i % d]) / self.std[i % d])
            .collect()
    }

    pub fn apply(&self, windows: &[LabeledWindow]) -> Result<Vec<LabeledWindow>> {
        windows
            .iter()
            .map(|w| {
                if w.channels != self.channels() {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{} channels", self.channels()),
                        got: w.channels.to_string(),
                    });
                }
                Ok(LabeledWindow {
                    features: self.transform(&w.features),
                    ..w.clone()
                })
            })
            .collect()
    }
}

fn stats_from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, d: usize) -> Standardizer {
    let mut count = 0usize;
    let mut mean = vec![0.0; d];
    for row in rows.clone() {
        count += 1;
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; d];
    for row in rows {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .iter()
        .map(|v| (v / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Standardizer { mean, std }
}

/// Per-channel mean and population std over all cells of the training windows.
pub fn fit_standardizer(train: &[LabeledWindow]) -> Result<Standardizer> {
    let first = train.first().ok_or(Error::Empty("no training windows"))?;
    let d = first.channels;
    if train.iter().any(|w| w.channels != d) {
        return Err(Error::invalid("windows disagree on channel count"));
    }
    let rows = train.iter().flat_map(|w| w.features.chunks_exact(d));
    Ok(stats_from_rows(rows, d))
}

/// Per-channel statistics over the cycles of the training runs.
pub fn fit_standardizer_cycles<'a>(
    runs: impl IntoIterator<Item = &'a AdaptedRun>,
) -> Result<Standardizer> {
    let runs: Vec<&AdaptedRun> = runs.into_iter().collect();
    let rows = runs
        .iter()
        .flat_map(|r| r.channels.data().chunks_exact(N_CHANNELS));
    if rows.clone().next().is_none() {
        return Err(Error::Empty("no training cycles"));
    }
    Ok(stats_from_rows(rows, N_CHANNELS))
}
