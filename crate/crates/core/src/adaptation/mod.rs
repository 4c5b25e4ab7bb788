//! Calibration-surrogate adaptation of run-to-failure trajectories.
//!
//! Each run gets per-sensor virtual thresholds on the most cycle-monotonic
//! sensors. Scanning forward, the first cycle at which any drift sensor is at
//! or beyond its threshold closes a drift segment; a synthetic reset then
//! restarts drift on the remaining cycles, up to `max_resets` times.

mod dataset;
mod spearman;

pub use dataset::AdaptedDataset;
pub use spearman::{average_ranks, spearman_rho};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cmapss::{sensor_channel, SensorTrajectory, N_SENSORS};
use crate::{Error, Result};

/// Hard cap on reset events per run.
pub const MAX_RESETS_CAP: usize = 3;
/// Spans below this are treated as flat.
pub const SPAN_TOLERANCE: f64 = 1e-9;
/// Shortest series for which a threshold can be estimated.
pub const MIN_THRESHOLD_SERIES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    pub top_k: usize,
    pub max_resets: usize,
    pub fraction_min: f64,
    pub fraction_max: f64,
    /// Noise-reset standard deviation as a fraction of |tail - baseline|.
    pub noise_sigma_fraction: f64,
    /// Probability that a reset is a noise reset rather than a stitch.
    pub noise_reset_probability: f64,
    pub stitch_scale_min: f64,
    pub stitch_scale_max: f64,
    pub baseline_cycles: usize,
    pub tail_cycles: usize,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        AdaptationConfig {
            top_k: 3,
            max_resets: 3,
            fraction_min: 0.55,
            fraction_max: 0.80,
            noise_sigma_fraction: 0.02,
            noise_reset_probability: 0.5,
            stitch_scale_min: 0.95,
            stitch_scale_max: 1.05,
            baseline_cycles: 10,
            tail_cycles: 5,
        }
    }
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || self.top_k > N_SENSORS {
            return Err(Error::invalid(format!(
                "top_k must be in 1..={N_SENSORS}, got {}",
                self.top_k
            )));
        }
        if self.max_resets > MAX_RESETS_CAP {
            return Err(Error::invalid(format!(
                "max_resets must be <= {MAX_RESETS_CAP}, got {}",
                self.max_resets
            )));
        }
        if !(0.55..=0.80).contains(&self.fraction_min)
            || !(0.55..=0.80).contains(&self.fraction_max)
            || self.fraction_min > self.fraction_max
        {
            return Err(Error::invalid(
                "threshold fraction range must lie within [0.55, 0.80]",
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_reset_probability) {
            return Err(Error::invalid("noise_reset_probability must be in [0, 1]"));
        }
        if self.noise_sigma_fraction < 0.0 || self.stitch_scale_min > self.stitch_scale_max {
            return Err(Error::invalid("bad reset perturbation parameters"));
        }
        if self.baseline_cycles == 0 || self.tail_cycles == 0 {
            return Err(Error::invalid("baseline/tail windows must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorScore {
    pub sensor_id: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSensorRanking {
    pub method: String,
    pub top_k: usize,
    /// Sorted by score descending, ties by ascending sensor id.
    pub entries: Vec<SensorScore>,
}

impl DriftSensorRanking {
    pub fn selected(&self) -> Vec<u8> {
        self.entries.iter().take(self.top_k).map(|e| e.sensor_id).collect()
    }
}

/// Scores each of the 21 sensors by the mean over engines of
/// |Spearman(sensor, cycle)|.
pub fn rank_drift_sensors(trajs: &[SensorTrajectory], top_k: usize) -> Result<DriftSensorRanking> {
    if top_k == 0 || top_k > N_SENSORS {
        return Err(Error::invalid(format!(
            "top_k must be in 1..={N_SENSORS}, got {top_k}"
        )));
    }
    if trajs.is_empty() {
        return Err(Error::Empty("no trajectories to rank"));
    }
    let mut sums = [0.0f64; N_SENSORS];
    for traj in trajs {
        let cycles: Vec<f64> = (1..=traj.len()).map(|c| c as f64).collect();
        for (s, sum) in sums.iter_mut().enumerate() {
            let series = traj.sensor(s as u8 + 1);
            *sum += spearman_rho(&series, &cycles)?.abs();
        }
    }
    let mut entries: Vec<SensorScore> = sums
        .iter()
        .enumerate()
        .map(|(s, sum)| SensorScore {
            sensor_id: s as u8 + 1,
            score: sum / trajs.len() as f64,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.sensor_id.cmp(&b.sensor_id))
    });
    Ok(DriftSensorRanking {
        method: "spearman-vs-cycle".into(),
        top_k,
        entries,
    })
}

/// Direction of drift: +1 upward, -1 downward.
pub type Direction = i8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub sensor_id: u8,
    pub baseline: f64,
    pub tail: f64,
    pub fraction: f64,
    pub threshold: f64,
    pub direction: Direction,
}

impl ThresholdSpec {
    pub fn from_span(sensor_id: u8, baseline: f64, tail: f64, fraction: f64) -> Result<Self> {
        let span = tail - baseline;
        if !span.is_finite() || span.abs() < SPAN_TOLERANCE {
            return Err(Error::DegenerateSpan { sensor_id, span });
        }
        Ok(ThresholdSpec {
            sensor_id,
            baseline,
            tail,
            fraction,
            threshold: baseline + fraction * span,
            direction: if span > 0.0 { 1 } else { -1 },
        })
    }

    /// At or beyond the threshold in the drift direction.
    pub fn is_crossed(&self, value: f64) -> bool {
        if self.direction > 0 {
            value >= self.threshold
        } else {
            value <= self.threshold
        }
    }

    pub fn span(&self) -> f64 {
        self.tail - self.baseline
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Threshold from a sensor series: baseline = mean of the first
/// `baseline_cycles`, tail = mean of the last `tail_cycles`, fraction drawn
/// uniformly from the configured range.
pub fn make_threshold<R: Rng>(
    sensor_id: u8,
    series: &[f64],
    cfg: &AdaptationConfig,
    rng: &mut R,
) -> Result<ThresholdSpec> {
    if series.len() < MIN_THRESHOLD_SERIES.max(cfg.baseline_cycles + cfg.tail_cycles) {
        return Err(Error::invalid(format!(
            "sensor {sensor_id}: series of {} cycles is too short for a threshold",
            series.len()
        )));
    }
    let baseline = mean(&series[..cfg.baseline_cycles]);
    let tail = mean(&series[series.len() - cfg.tail_cycles..]);
    // Draw before the degeneracy check so the rng stream does not depend on it.
    let fraction = rng.random_range(cfg.fraction_min..=cfg.fraction_max);
    ThresholdSpec::from_span(sensor_id, baseline, tail, fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetKind {
    NoiseReset,
    StitchReset,
}

impl ResetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResetKind::NoiseReset => "noise-reset",
            ResetKind::StitchReset => "stitch-reset",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noise-reset" => Some(ResetKind::NoiseReset),
            "stitch-reset" => Some(ResetKind::StitchReset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    /// First cycle of the post-reset segment.
    pub cycle: u32,
    pub kind: ResetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor: Option<u32>,
}

/// Inclusive 1-based cycle range with an optional first crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: u32,
    pub end: u32,
    pub crossing: Option<u32>,
}

impl Segment {
    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, cycle: u32) -> bool {
        (self.start..=self.end).contains(&cycle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedRun {
    pub engine_id: u32,
    pub drift_sensors: Vec<u8>,
    pub thresholds: Vec<ThresholdSpec>,
    pub segments: Vec<Segment>,
    pub reset_events: Vec<ResetEvent>,
    /// Adapted channel values, same layout as the source trajectory.
    pub channels: SensorTrajectory,
}

impl AdaptedRun {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Whether any drift sensor is at or beyond its threshold at 0-based index `t`.
    pub fn is_out_of_calibration(&self, t: usize) -> bool {
        any_crossed(&self.channels, &self.thresholds, t)
    }

    /// 0-based index of the segment holding 1-based `cycle`.
    pub fn segment_index(&self, cycle: u32) -> Option<usize> {
        self.segments.iter().position(|s| s.contains(cycle))
    }

    pub fn crossing_segments(&self) -> usize {
        self.segments.iter().filter(|s| s.crossing.is_some()).count()
    }
}

fn any_crossed(traj: &SensorTrajectory, thresholds: &[ThresholdSpec], t: usize) -> bool {
    thresholds
        .iter()
        .any(|th| th.is_crossed(traj.value(t, sensor_channel(th.sensor_id))))
}

fn first_crossing(traj: &SensorTrajectory, thresholds: &[ThresholdSpec], from: usize) -> Option<usize> {
    (from..traj.len()).find(|&t| any_crossed(traj, thresholds, t))
}

/// Segments of an unmodified run: a single scan, no resets.
pub fn scan_segments(traj: &SensorTrajectory, thresholds: &[ThresholdSpec]) -> Vec<Segment> {
    vec![Segment {
        start: 1,
        end: traj.len() as u32,
        crossing: first_crossing(traj, thresholds, 0).map(|t| t as u32 + 1),
    }]
}

/// Inserts synthetic resets at threshold crossings.
///
/// After the first crossing at cycle `c` of a segment, cycles `c+1..` of the
/// drift sensors are rewritten in one of two ways. A noise reset shifts the
/// rest of the run's own trend down so that it restarts from the baseline
/// (the level at `c` is the mean of the last `tail_cycles` cycles), then adds
/// Gaussian noise. A stitch reset substitutes a donor's early-life deviation
/// from its own baseline, re-anchored at this run's baseline and scaled by a
/// factor near 1. Other channels are left untouched.
pub fn synthesize_resets<R: Rng>(
    traj: &SensorTrajectory,
    sensors: &[u8],
    thresholds: &[ThresholdSpec],
    donors: &[SensorTrajectory],
    rng: &mut R,
    cfg: &AdaptationConfig,
) -> Result<AdaptedRun> {
    if sensors.is_empty() {
        return Err(Error::Empty("no drift sensors"));
    }
    let covered = sensors.len() == thresholds.len()
        && sensors
            .iter()
            .zip(thresholds)
            .all(|(s, th)| *s == th.sensor_id);
    if !covered {
        return Err(Error::invalid("thresholds must cover exactly the drift sensors, in order"));
    }
    if cfg.max_resets > MAX_RESETS_CAP {
        return Err(Error::invalid(format!("max_resets must be <= {MAX_RESETS_CAP}")));
    }
    let donors: Vec<&SensorTrajectory> = donors
        .iter()
        .filter(|d| d.engine_id != traj.engine_id)
        .collect();

    let len = traj.len();
    let mut adapted = traj.clone();
    let mut segments = Vec::new();
    let mut resets = Vec::new();
    let mut start = 0usize;
    loop {
        let Some(c) = first_crossing(&adapted, thresholds, start) else {
            segments.push(Segment {
                start: start as u32 + 1,
                end: len as u32,
                crossing: None,
            });
            break;
        };
        if resets.len() >= cfg.max_resets || c + 1 >= len {
            segments.push(Segment {
                start: start as u32 + 1,
                end: len as u32,
                crossing: Some(c as u32 + 1),
            });
            break;
        }
        segments.push(Segment {
            start: start as u32 + 1,
            end: c as u32 + 1,
            crossing: Some(c as u32 + 1),
        });
        let from = c + 1;
        let event = apply_reset(traj, &mut adapted, thresholds, &donors, from, rng, cfg)?;
        resets.push(event);
        start = from;
    }

    Ok(AdaptedRun {
        engine_id: traj.engine_id,
        drift_sensors: sensors.to_vec(),
        thresholds: thresholds.to_vec(),
        segments,
        reset_events: resets,
        channels: adapted,
    })
}

fn apply_reset<R: Rng>(
    original: &SensorTrajectory,
    adapted: &mut SensorTrajectory,
    thresholds: &[ThresholdSpec],
    donors: &[&SensorTrajectory],
    from: usize,
    rng: &mut R,
    cfg: &AdaptationConfig,
) -> Result<ResetEvent> {
    let remaining = original.len() - from;
    let cycle = from as u32 + 1;
    let wants_noise = donors.is_empty() || rng.random_bool(cfg.noise_reset_probability);
    if !wants_noise {
        let donor = donors[rng.random_range(0..donors.len())];
        let scale = rng.random_range(cfg.stitch_scale_min..=cfg.stitch_scale_max);
        if donor.len() >= remaining.max(cfg.baseline_cycles) {
            let stride = crate::cmapss::N_CHANNELS;
            let data = adapted.data_mut();
            for th in thresholds {
                let ch = sensor_channel(th.sensor_id);
                let donor_series = donor.channel(ch);
                let donor_base = mean(&donor_series[..cfg.baseline_cycles]);
                for j in 0..remaining {
                    data[(from + j) * stride + ch] =
                        th.baseline + scale * (donor_series[j] - donor_base);
                }
            }
            return Ok(ResetEvent {
                cycle,
                kind: ResetKind::StitchReset,
                donor: Some(donor.engine_id),
            });
        }
    }
    let stride = crate::cmapss::N_CHANNELS;
    let level_from = from.saturating_sub(cfg.tail_cycles.max(1));
    for th in thresholds {
        let ch = sensor_channel(th.sensor_id);
        let sigma = cfg.noise_sigma_fraction * th.span().abs();
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let level = (level_from..from).map(|t| adapted.value(t, ch)).sum::<f64>() / (from - level_from) as f64;
        let shift = level - th.baseline;
        let data = adapted.data_mut();
        for j in 0..remaining {
            let idx = (from + j) * stride + ch;
            data[idx] = data[idx] - shift + noise.sample(rng);
        }
    }
    Ok(ResetEvent {
        cycle,
        kind: ResetKind::NoiseReset,
        donor: None,
    })
}

/// Per-engine rng stream derived from `(seed, engine_id)`.
pub fn engine_rng(seed: u64, engine_id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(engine_id as u64);
    rng
}

/// Thresholds for one run; degenerate sensors are dropped.
pub fn run_thresholds<R: Rng>(
    traj: &SensorTrajectory,
    selected: &[u8],
    cfg: &AdaptationConfig,
    rng: &mut R,
) -> Result<Vec<ThresholdSpec>> {
    let mut out = Vec::with_capacity(selected.len());
    for &s in selected {
        match make_threshold(s, &traj.sensor(s), cfg, rng) {
            Ok(th) => out.push(th),
            Err(Error::DegenerateSpan { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Adapts every trajectory of a split.
///
/// The drift-sensor ranking is computed once over all runs. Runs too short for
/// thresholds, or whose selected sensors are all flat, are skipped and listed
/// in [`AdaptedDataset::skipped_engines`].
pub fn adapt_dataset(
    trajs: &[SensorTrajectory],
    cfg: &AdaptationConfig,
    seed: u64,
    split_tag: &str,
) -> Result<AdaptedDataset> {
    if trajs.is_empty() {
        return Err(Error::Empty("no trajectories to adapt"));
    }
    cfg.validate()?;
    let ranking = rank_drift_sensors(trajs, cfg.top_k)?;
    let selected = ranking.selected();
    let mut runs = Vec::with_capacity(trajs.len());
    let mut skipped = Vec::new();
    for traj in trajs {
        if traj.len() < MIN_THRESHOLD_SERIES.max(cfg.baseline_cycles + cfg.tail_cycles) {
            skipped.push(traj.engine_id);
            continue;
        }
        let mut rng = engine_rng(seed, traj.engine_id);
        let thresholds = run_thresholds(traj, &selected, cfg, &mut rng)?;
        if thresholds.is_empty() {
            skipped.push(traj.engine_id);
            continue;
        }
        let sensors: Vec<u8> = thresholds.iter().map(|t| t.sensor_id).collect();
        runs.push(synthesize_resets(traj, &sensors, &thresholds, trajs, &mut rng, cfg)?);
    }
    Ok(AdaptedDataset {
        split_tag: split_tag.to_string(),
        seed,
        config: cfg.clone(),
        ranking,
        skipped_engines: skipped,
        annotations: Default::default(),
        runs,
    })
}
