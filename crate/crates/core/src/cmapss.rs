//! C-MAPSS trajectory text format.
//!
//! One row per cycle: `engine_id cycle op_setting_1..3 sensor_1..21`,
//! whitespace separated. Rows of one engine must carry contiguous cycles
//! starting at 1.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fmt::g17;
use crate::{Error, Result};

/// Operating settings per row.
pub const N_SETTINGS: usize = 3;
/// Sensor channels per row.
pub const N_SENSORS: usize = 21;
/// Numeric channels kept per cycle (settings + sensors).
pub const N_CHANNELS: usize = N_SETTINGS + N_SENSORS;
/// Columns per text row (engine id + cycle + channels).
pub const N_COLUMNS: usize = 2 + N_CHANNELS;

/// Channel identifiers in storage order.
pub fn channel_names() -> Vec<String> {
    (1..=N_SETTINGS)
        .map(|i| format!("op_setting_{i}"))
        .chain((1..=N_SENSORS).map(|i| format!("sensor_{i}")))
        .collect()
}

/// Channel index of 1-based `sensor_id`.
pub fn sensor_channel(sensor_id: u8) -> usize {
    debug_assert!((1..=N_SENSORS as u8).contains(&sensor_id));
    N_SETTINGS + sensor_id as usize - 1
}

/// One parsed text row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub engine_id: u32,
    pub cycle: u32,
    pub op_settings: [f64; N_SETTINGS],
    pub sensors: [f64; N_SENSORS],
}

impl RawRow {
    pub fn parse(line: &str, line_no: usize) -> Result<RawRow> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != N_COLUMNS {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected {N_COLUMNS} columns, found {}", fields.len()),
            });
        }
        let mut values = [0.0f64; N_COLUMNS];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("non-numeric field {field:?}"),
            })?;
        }
        let engine_id = positive_int(values[0], line_no, "engine_id")?;
        let cycle = positive_int(values[1], line_no, "cycle")?;
        let mut op_settings = [0.0; N_SETTINGS];
        op_settings.copy_from_slice(&values[2..2 + N_SETTINGS]);
        let mut sensors = [0.0; N_SENSORS];
        sensors.copy_from_slice(&values[2 + N_SETTINGS..]);
        Ok(RawRow {
            engine_id,
            cycle,
            op_settings,
            sensors,
        })
    }
}

fn positive_int(v: f64, line: usize, what: &str) -> Result<u32> {
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(Error::Parse {
            line,
            reason: format!("{what} must be a positive integer, found {v}"),
        });
    }
    Ok(v as u32)
}

/// One engine run: `len()` cycles by [`N_CHANNELS`] channels, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTrajectory {
    pub engine_id: u32,
    channels: Vec<f64>,
}

impl SensorTrajectory {
    pub fn new(engine_id: u32, channels: Vec<f64>) -> Result<Self> {
        if !channels.len().is_multiple_of(N_CHANNELS) {
            return Err(Error::ShapeMismatch {
                expected: format!("multiple of {N_CHANNELS} values"),
                got: channels.len().to_string(),
            });
        }
        let length = channels.len() / N_CHANNELS;
        if length < 2 {
            return Err(Error::TooShort {
                engine_id,
                length,
                min: 2,
            });
        }
        Ok(SensorTrajectory {
            engine_id,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len() / N_CHANNELS
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Row for 0-based cycle index `t` (cycle `t + 1`).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.channels[t * N_CHANNELS..(t + 1) * N_CHANNELS]
    }

    pub fn value(&self, t: usize, channel: usize) -> f64 {
        self.channels[t * N_CHANNELS + channel]
    }

    pub fn channel(&self, channel: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.value(t, channel)).collect()
    }

    pub fn sensor(&self, sensor_id: u8) -> Vec<f64> {
        self.channel(sensor_channel(sensor_id))
    }

    pub fn data(&self) -> &[f64] {
        &self.channels
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.channels
    }
}

/// Parses C-MAPSS text. Engines come out in first-appearance order.
pub fn parse_trajectories(text: &str) -> Result<Vec<SensorTrajectory>> {
    let mut order: Vec<u32> = Vec::new();
    let mut rows: HashMap<u32, (u32, Vec<f64>)> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = RawRow::parse(line, idx + 1)?;
        let entry = rows.entry(row.engine_id).or_insert_with(|| {
            order.push(row.engine_id);
            (0, Vec::new())
        });
        let expected = entry.0 + 1;
        if row.cycle != expected {
            return Err(Error::NonContiguousCycles {
                engine_id: row.engine_id,
                expected,
                found: row.cycle,
            });
        }
        entry.0 = row.cycle;
        entry.1.extend_from_slice(&row.op_settings);
        entry.1.extend_from_slice(&row.sensors);
    }
    order
        .into_iter()
        .map(|id| {
            let (_, channels) = rows.remove(&id).expect("engine recorded");
            SensorTrajectory::new(id, channels)
        })
        .collect()
}

/// Reads and parses a trajectory file.
pub fn read_trajectories(path: &std::path::Path) -> Result<Vec<SensorTrajectory>> {
    let text = std::fs::read_to_string(path)?;
    parse_trajectories(&text)
}

/// Serializes trajectories back to the whitespace text format.
pub fn to_text(trajs: &[SensorTrajectory]) -> String {
    let mut out = String::new();
    for traj in trajs {
        for t in 0..traj.len() {
            out.push_str(&format!("{} {}", traj.engine_id, t + 1));
            for v in traj.row(t) {
                out.push(' ');
                out.push_str(&g17(*v));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes the normalized CSV dump (header row naming all 26 columns).
pub fn write_csv<W: Write>(trajs: &[SensorTrajectory], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["engine_id".to_string(), "cycle".to_string()];
    header.extend(channel_names());
    wtr.write_record(&header)?;
    for traj in trajs {
        for t in 0..traj.len() {
            let mut rec = vec![traj.engine_id.to_string(), (t + 1).to_string()];
            rec.extend(traj.row(t).iter().map(|v| g17(*v)));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub engine_count: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub mean_length: f64,
    pub channel_min: Vec<f64>,
    pub channel_max: Vec<f64>,
}

pub fn summarize_dataset(trajs: &[SensorTrajectory]) -> Result<DatasetSummary> {
    if trajs.is_empty() {
        return Err(Error::Empty("no trajectories to summarize"));
    }
    let lengths: Vec<usize> = trajs.iter().map(SensorTrajectory::len).collect();
    let mut channel_min = vec![f64::INFINITY; N_CHANNELS];
    let mut channel_max = vec![f64::NEG_INFINITY; N_CHANNELS];
    for traj in trajs {
        for row in traj.data().chunks_exact(N_CHANNELS) {
            for (c, &v) in row.iter().enumerate() {
                channel_min[c] = channel_min[c].min(v);
                channel_max[c] = channel_max[c].max(v);
            }
        }
    }
    Ok(DatasetSummary {
        engine_count: trajs.len(),
        min_length: *lengths.iter().min().unwrap(),
        max_length: *lengths.iter().max().unwrap(),
        mean_length: lengths.iter().sum::<usize>() as f64 / lengths.len() as f64,
        channel_min,
        channel_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(engine: u32, cycle: u32, base: f64) -> String {
        let vals: Vec<String> = (0..N_CHANNELS).map(|i| format!("{}", base + i as f64)).collect();
        format!("{engine} {cycle} {}", vals.join(" "))
    }

    #[test]
    fn minimal_input_parses() {
        let text = format!("{}\n{}\n", line(1, 1, 0.5), line(1, 2, 1.5));
        let trajs = parse_trajectories(&text).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 2);
        assert_eq!(trajs[0].value(1, 0), 1.5);
        assert_eq!(trajs[0].sensor(1), vec![3.5, 4.5]);
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let mut bad = line(1, 2, 0.0);
        bad.truncate(bad.rfind(' ').unwrap());
        let text = format!("{}\n{}\n", line(1, 1, 0.0), bad);
        match parse_trajectories(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_line() {
        let text = format!("{}\n", line(1, 1, 0.0).replacen("2", "x", 1));
        assert!(matches!(
            parse_trajectories(&text),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn gap_in_cycles_names_engine() {
        let text = format!("{}\n{}\n", line(7, 1, 0.0), line(7, 3, 0.0));
        assert!(matches!(
            parse_trajectories(&text),
            Err(Error::NonContiguousCycles { engine_id: 7, .. })
        ));
    }

    #[test]
    fn tabs_trailing_space_and_blank_lines_are_accepted() {
        let text = format!(
            "{}  \n\n{}\t\n\n",
            line(3, 1, 0.0).replace(' ', "\t"),
            line(3, 2, 0.0)
        );
        assert_eq!(parse_trajectories(&text).unwrap()[0].len(), 2);
    }

    #[test]
    fn sparse_engine_ids_keep_file_order() {
        let text = [line(9, 1, 0.0), line(9, 2, 0.0), line(2, 1, 0.0), line(2, 2, 0.0)].join("\n");
        let ids: Vec<u32> = parse_trajectories(&text)
            .unwrap()
            .iter()
            .map(|t| t.engine_id)
            .collect();
        assert_eq!(ids, vec![9, 2]);
    }

    #[test]
    fn single_cycle_engine_is_rejected() {
        let text = line(1, 1, 0.0);
        assert!(matches!(
            parse_trajectories(&text),
            Err(Error::TooShort { engine_id: 1, .. })
        ));
    }

    #[test]
    fn summary_matches_scan() {
        let mk = |id, len| {
            let text: Vec<String> = (1..=len).map(|c| line(id, c, c as f64)).collect();
            parse_trajectories(&text.join("\n")).unwrap().remove(0)
        };
        let s = summarize_dataset(&[mk(1, 5)]).unwrap();
        assert_eq!((s.engine_count, s.min_length, s.max_length), (1, 5, 5));
        assert_eq!(s.mean_length, 5.0);

        let s = summarize_dataset(&[mk(1, 3), mk(2, 7)]).unwrap();
        assert_eq!(s.mean_length, 5.0);
        assert_eq!(s.channel_min[0], 1.0);
        assert_eq!(s.channel_max[N_CHANNELS - 1], 7.0 + 23.0);
        assert!(summarize_dataset(&[]).is_err());
    }

    #[test]
    fn csv_dump_has_26_column_header() {
        let text = format!("{}\n{}\n", line(1, 1, 0.0), line(1, 2, 1.0));
        let trajs = parse_trajectories(&text).unwrap();
        let mut buf = Vec::new();
        write_csv(&trajs, &mut buf).unwrap();
        let out = String::from_utf8(buf).unwrap();
        let header = out.lines().next().unwrap();
        assert_eq!(header.split(',').count(), N_COLUMNS);
        assert!(header.starts_with("engine_id,cycle,op_setting_1"));
        assert!(header.ends_with("sensor_21"));
        assert_eq!(out.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(
            lens in prop::collection::vec(2usize..6, 1..4),
            seed_vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 64)
        ) {
            let mut trajs = Vec::new();
            for (i, len) in lens.iter().enumerate() {
                let channels: Vec<f64> = (0..len * N_CHANNELS)
                    .map(|k| seed_vals[(k * 7 + i) % seed_vals.len()])
                    .collect();
                trajs.push(SensorTrajectory::new(i as u32 * 3 + 1, channels).unwrap());
            }
            let back = parse_trajectories(&to_text(&trajs)).unwrap();
            prop_assert_eq!(back.len(), trajs.len());
            for (a, b) in trajs.iter().zip(&back) {
                prop_assert_eq!(a.engine_id, b.engine_id);
                let same = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
                prop_assert!(same);
            }
        }
    }
}
