use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AdaptationConfig, AdaptedRun, DriftSensorRanking, ResetEvent, ResetKind, Segment,
    ThresholdSpec,
};
use crate::cmapss::{channel_names, SensorTrajectory, N_CHANNELS};
use crate::fmt::g17;
use crate::{sha256_hex, Error, Result};

pub const CSV_FILE: &str = "adapted.csv";
pub const METADATA_FILE: &str = "adapted_meta.json";
const FORMAT_TAG: &str = "driftcal-adapted/1";

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedDataset {
    pub split_tag: String,
    pub seed: u64,
    pub config: AdaptationConfig,
    pub ranking: DriftSensorRanking,
    pub skipped_engines: Vec<u32>,
    /// Free-form provenance carried into the metadata sidecar.
    pub annotations: BTreeMap<String, String>,
    pub runs: Vec<AdaptedRun>,
}

#[derive(Serialize, Deserialize)]
struct RunMeta {
    engine_id: u32,
    length: usize,
    drift_sensors: Vec<u8>,
    thresholds: Vec<ThresholdSpec>,
    segments: Vec<Segment>,
    reset_events: Vec<ResetEvent>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    format: String,
    split_tag: String,
    seed: u64,
    config: AdaptationConfig,
    ranking: DriftSensorRanking,
    skipped_engines: Vec<u32>,
    #[serde(default)]
    annotations: BTreeMap<String, String>,
    runs: Vec<RunMeta>,
}

impl AdaptedDataset {
    /// Canonical CSV: one row per (engine, cycle).
    pub fn to_csv_string(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["engine_id", "cycle", "segment_id", "reset_flag", "reset_kind"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(channel_names());
        wtr.write_record(&header)?;
        for run in &self.runs {
            let resets: HashMap<u32, ResetKind> =
                run.reset_events.iter().map(|e| (e.cycle, e.kind)).collect();
            for (seg_id, seg) in run.segments.iter().enumerate() {
                for cycle in seg.start..=seg.end {
                    let reset = resets.get(&cycle);
                    let mut rec = vec![
                        run.engine_id.to_string(),
                        cycle.to_string(),
                        seg_id.to_string(),
                        u8::from(reset.is_some()).to_string(),
                        reset.map(|k| k.as_str()).unwrap_or("").to_string(),
                    ];
                    rec.extend(run.channels.row(cycle as usize - 1).iter().map(|v| g17(*v)));
                    wtr.write_record(&rec)?;
                }
            }
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn metadata_json(&self) -> Result<String> {
        let meta = Metadata {
            format: FORMAT_TAG.into(),
            split_tag: self.split_tag.clone(),
            seed: self.seed,
            config: self.config.clone(),
            ranking: self.ranking.clone(),
            skipped_engines: self.skipped_engines.clone(),
            annotations: self.annotations.clone(),
            runs: self
                .runs
                .iter()
                .map(|r| RunMeta {
                    engine_id: r.engine_id,
                    length: r.len(),
                    drift_sensors: r.drift_sensors.clone(),
                    thresholds: r.thresholds.clone(),
                    segments: r.segments.clone(),
                    reset_events: r.reset_events.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&meta)? + "\n")
    }

    /// SHA-256 over the canonical CSV followed by the metadata document.
    pub fn digest(&self) -> Result<String> {
        let mut bytes = self.to_csv_string()?.into_bytes();
        bytes.extend(self.metadata_json()?.into_bytes());
        Ok(sha256_hex(&bytes))
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<String> {
        std::fs::create_dir_all(dir)?;
        let csv = self.to_csv_string()?;
        let meta = self.metadata_json()?;
        std::fs::write(dir.join(CSV_FILE), &csv)?;
        std::fs::write(dir.join(METADATA_FILE), &meta)?;
        let mut bytes = csv.into_bytes();
        bytes.extend(meta.into_bytes());
        Ok(sha256_hex(&bytes))
    }

    pub fn read_from_dir(dir: &Path) -> Result<Self> {
        let csv = std::fs::read_to_string(dir.join(CSV_FILE))?;
        let meta = std::fs::read_to_string(dir.join(METADATA_FILE))?;
        Self::from_parts(&csv, &meta)
    }

    pub fn from_parts(csv_text: &str, metadata: &str) -> Result<Self> {
        let meta: Metadata = serde_json::from_str(metadata)?;
        if meta.format != FORMAT_TAG {
            return Err(Error::invalid(format!("unknown adapted format {:?}", meta.format)));
        }
        let mut channels: HashMap<u32, Vec<f64>> = HashMap::new();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != 5 + N_CHANNELS {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {} columns, found {}", 5 + N_CHANNELS, rec.len()),
                });
            }
            let engine: u32 = rec[0].parse().map_err(|_| Error::Parse {
                line,
                reason: "bad engine_id".into(),
            })?;
            let buf = channels.entry(engine).or_default();
            for field in rec.iter().skip(5) {
                buf.push(field.parse().map_err(|_| Error::Parse {
                    line,
                    reason: format!("non-numeric value {field:?}"),
                })?);
            }
        }
        let mut runs = Vec::with_capacity(meta.runs.len());
        for rm in meta.runs {
            let data = channels.remove(&rm.engine_id).ok_or_else(|| {
                Error::invalid(format!("engine {} missing from csv", rm.engine_id))
            })?;
            let traj = SensorTrajectory::new(rm.engine_id, data)?;
            if traj.len() != rm.length {
                return Err(Error::invalid(format!(
                    "engine {}: csv has {} cycles, metadata says {}",
                    rm.engine_id,
                    traj.len(),
                    rm.length
                )));
            }
            runs.push(AdaptedRun {
                engine_id: rm.engine_id,
                drift_sensors: rm.drift_sensors,
                thresholds: rm.thresholds,
                segments: rm.segments,
                reset_events: rm.reset_events,
                channels: traj,
            });
        }
        Ok(AdaptedDataset {
            split_tag: meta.split_tag,
            seed: meta.seed,
            config: meta.config,
            ranking: meta.ranking,
            skipped_engines: meta.skipped_engines,
            annotations: meta.annotations,
            runs,
        })
    }

    /// Runs whose engine id is in `ids`, dataset order preserved.
    pub fn runs_for<'a>(&'a self, ids: &'a [u32]) -> impl Iterator<Item = &'a AdaptedRun> + 'a {
        self.runs.iter().filter(move |r| ids.contains(&r.engine_id))
    }

    pub fn engine_ids(&self) -> Vec<u32> {
        self.runs.iter().map(|r| r.engine_id).collect()
    }
}
