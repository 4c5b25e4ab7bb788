//! Calibration policy replay under a violation-aware cost model.
//!
//! Runs are replayed segment by segment. Within a segment the policy is
//! consulted at every cycle before the ground-truth crossing; a trigger is a
//! preventive calibration and the instrument moves on to its next drift
//! segment. Reaching the crossing is a violation plus a corrective
//! calibration. Only segments that end in a crossing are replayed: a final
//! crossing-free segment is censored by the end of the recording.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adaptation::{AdaptedRun, Segment};
use crate::fmt::g17;
use crate::labeling::compute_ttd;
use crate::{Error, Result};

/// Quantile level consumed by the quantile policy.
pub const QUANTILE_POLICY_LEVEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Reactive,
    Fixed,
    Predictive,
    Quantile,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Reactive,
        PolicyKind::Fixed,
        PolicyKind::Predictive,
        PolicyKind::Quantile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Reactive => "reactive",
            PolicyKind::Fixed => "fixed",
            PolicyKind::Predictive => "predictive",
            PolicyKind::Quantile => "quantile",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn uses_scores(self) -> bool {
        matches!(self, PolicyKind::Predictive | PolicyKind::Quantile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Trigger when score <= margin (predictive, quantile).
    pub margin: f64,
    /// Cycles of service between fixed calibrations.
    pub period: u32,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, margin: f64, period: u32) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::invalid("margin must be >= 0"));
        }
        if period == 0 {
            return Err(Error::invalid("period must be >= 1"));
        }
        Ok(PolicySpec { kind, margin, period })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub c_cal: f64,
    pub c_vio: f64,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec { c_cal: 1.0, c_vio: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacitySpec {
    /// Instruments serviceable per planning window.
    pub k: usize,
    pub window_width: u32,
}

impl Default for CapacitySpec {
    fn default() -> Self {
        CapacitySpec { k: 1, window_width: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PreventiveCal,
    Violation,
    CorrectiveCal,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::PreventiveCal => "preventive_cal",
            EventKind::Violation => "violation",
            EventKind::CorrectiveCal => "corrective_cal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvent {
    pub engine_id: u32,
    pub cycle: u32,
    pub kind: EventKind,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub policy: PolicyKind,
    /// Preventive plus corrective calibrations.
    pub n_cal: u64,
    pub n_vio: u64,
    pub cost: f64,
    /// Sum over preventive calibrations of cycles left before the crossing.
    pub lead_time_total: u64,
    pub events: Vec<PolicyEvent>,
}

pub fn total_cost(n_cal: u64, n_vio: u64, costs: &CostSpec) -> f64 {
    costs.c_cal * n_cal as f64 + costs.c_vio * n_vio as f64
}

/// Ascending score, ties by ascending id; at most `k` ids.
pub fn rank_by_urgency(candidates: &[(u32, f64)], k: usize) -> Vec<u32> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    sorted.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Per-cycle decision scores.
pub trait Scorer {
    fn score(&self, engine_id: u32, cycle: u32) -> Option<f64>;

    /// Earliest cycle at which a score exists (the window length for forecasters).
    fn first_cycle(&self) -> u32 {
        1
    }
}

/// Ground-truth TTD as the score: perfect foresight.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    labels: HashMap<u32, Vec<u32>>,
}

impl OracleScorer {
    pub fn new<R: Borrow<AdaptedRun>>(runs: &[R]) -> Self {
        OracleScorer {
            labels: runs
                .iter()
                .map(|r| (r.borrow().engine_id, compute_ttd(r.borrow()).values))
                .collect(),
        }
    }
}

impl Scorer for OracleScorer {
    fn score(&self, engine_id: u32, cycle: u32) -> Option<f64> {
        let labels = self.labels.get(&engine_id)?;
        labels.get(cycle.checked_sub(1)? as usize).map(|&v| v as f64)
    }
}

/// Precomputed scores, typically model forecasts per (engine, cycle).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScoreTable {
    first_cycle: u32,
    scores: HashMap<u32, Vec<Option<f64>>>,
}

impl ScoreTable {
    pub fn new(first_cycle: u32) -> Self {
        ScoreTable {
            first_cycle: first_cycle.max(1),
            scores: HashMap::new(),
        }
    }

    pub fn insert(&mut self, engine_id: u32, cycle: u32, score: f64) {
        let row = self.scores.entry(engine_id).or_default();
        let idx = cycle as usize - 1;
        if row.len() <= idx {
            row.resize(idx + 1, None);
        }
        row[idx] = Some(score);
    }
}

impl Scorer for ScoreTable {
    fn score(&self, engine_id: u32, cycle: u32) -> Option<f64> {
        *self.scores.get(&engine_id)?.get(cycle.checked_sub(1)? as usize)?
    }

    fn first_cycle(&self) -> u32 {
        self.first_cycle
    }
}

struct Replay<'a> {
    policy: &'a PolicySpec,
    scorer: &'a dyn Scorer,
    events: Vec<PolicyEvent>,
    lead: u64,
}

impl Replay<'_> {
    /// `Some(score)` if the policy fires at `cycle` of `seg`.
    fn trigger(&self, engine_id: u32, seg: &Segment, cycle: u32) -> Result<Option<Option<f64>>> {
        match self.policy.kind {
            PolicyKind::Reactive => Ok(None),
            PolicyKind::Fixed => Ok((cycle - seg.start + 1 >= self.policy.period).then_some(None)),
            PolicyKind::Predictive | PolicyKind::Quantile => {
                if cycle < self.scorer.first_cycle() {
                    return Ok(None);
                }
                let s = self
                    .scorer
                    .score(engine_id, cycle)
                    .ok_or(Error::MissingScore { engine_id, cycle })?;
                Ok((s <= self.policy.margin).then_some(Some(s)))
            }
        }
    }

    fn preventive(&mut self, engine_id: u32, cycle: u32, crossing: u32, score: Option<f64>) {
        self.lead += (crossing - cycle) as u64;
        self.events.push(PolicyEvent {
            engine_id,
            cycle,
            kind: EventKind::PreventiveCal,
            score,
        });
    }

    fn violation(&mut self, engine_id: u32, cycle: u32) {
        for kind in [EventKind::Violation, EventKind::CorrectiveCal] {
            self.events.push(PolicyEvent {
                engine_id,
                cycle,
                kind,
                score: None,
            });
        }
    }

    fn finish(self, costs: &CostSpec) -> PolicyOutcome {
        let n_vio = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Violation)
            .count() as u64;
        let n_cal = self
            .events
            .iter()
            .filter(|e| e.kind != EventKind::Violation)
            .count() as u64;
        PolicyOutcome {
            policy: self.policy.kind,
            n_cal,
            n_vio,
            cost: total_cost(n_cal, n_vio, costs),
            lead_time_total: self.lead,
            events: self.events,
        }
    }
}

fn crossing_segments(run: &AdaptedRun) -> Vec<(Segment, u32)> {
    run.segments
        .iter()
        .filter_map(|s| s.crossing.map(|c| (*s, c)))
        .collect()
}

/// Replays `runs` under `policy`. With a [`CapacitySpec`], at most `k`
/// preventive calibrations happen per planning window, most urgent first, and
/// each instrument gets at most one service decision per window.
pub fn simulate<R: Borrow<AdaptedRun>>(
    runs: &[R],
    scorer: &dyn Scorer,
    policy: &PolicySpec,
    costs: &CostSpec,
    capacity: Option<&CapacitySpec>,
) -> Result<PolicyOutcome> {
    let mut replay = Replay {
        policy,
        scorer,
        events: Vec::new(),
        lead: 0,
    };
    match capacity {
        None => {
            for run in runs {
                let run = run.borrow();
                for (seg, c) in crossing_segments(run) {
                    let mut fired = false;
                    for t in seg.start..c {
                        if let Some(score) = replay.trigger(run.engine_id, &seg, t)? {
                            replay.preventive(run.engine_id, t, c, score);
                            fired = true;
                            break;
                        }
                    }
                    if !fired {
                        replay.violation(run.engine_id, c);
                    }
                }
            }
        }
        Some(cap) => simulate_capacity(runs, &mut replay, cap)?,
    }
    Ok(replay.finish(costs))
}

struct Cursor {
    engine_id: u32,
    segments: Vec<(Segment, u32)>,
    idx: usize,
    pos: u32,
}

impl Cursor {
    fn current(&self) -> Option<(Segment, u32)> {
        self.segments.get(self.idx).copied()
    }

    fn advance(&mut self) {
        self.idx += 1;
        if let Some((seg, _)) = self.current() {
            self.pos = seg.start;
        }
    }
}

fn simulate_capacity<R: Borrow<AdaptedRun>>(
    runs: &[R],
    replay: &mut Replay<'_>,
    cap: &CapacitySpec,
) -> Result<()> {
    if cap.k == 0 || cap.window_width == 0 {
        return Err(Error::invalid("capacity k and window width must be >= 1"));
    }
    let mut cursors: Vec<Cursor> = runs
        .iter()
        .map(|r| {
            let r = r.borrow();
            let segments = crossing_segments(r);
            let pos = segments.first().map(|s| s.0.start).unwrap_or(1);
            Cursor {
                engine_id: r.engine_id,
                segments,
                idx: 0,
                pos,
            }
        })
        .collect();
    let horizon = cursors
        .iter()
        .filter_map(|c| c.segments.last().map(|s| s.1))
        .max()
        .unwrap_or(0);

    let mut lo = 1u32;
    while lo <= horizon {
        let hi = lo + cap.window_width - 1;
        // phase 1: find each instrument's first trigger or crossing in the window
        let mut candidates: Vec<(usize, u32, Option<f64>)> = Vec::new();
        for (i, cur) in cursors.iter_mut().enumerate() {
            'run: while let Some((seg, c)) = cur.current() {
                let from = cur.pos.max(seg.start);
                if from > hi {
                    break;
                }
                for t in from..=hi.min(c) {
                    if t == c {
                        replay.violation(cur.engine_id, c);
                        cur.advance();
                        continue 'run;
                    }
                    if let Some(score) = replay.trigger(cur.engine_id, &seg, t)? {
                        cur.pos = t;
                        candidates.push((i, t, score));
                        break 'run;
                    }
                }
                cur.pos = hi + 1;
                break;
            }
        }
        // phase 2: service the most urgent k
        let ranked: Vec<(u32, f64)> = candidates
            .iter()
            .map(|&(i, _, s)| (i as u32, s.unwrap_or(0.0)))
            .collect();
        let serviced = rank_by_urgency(&ranked, cap.k);
        for &(i, t, score) in &candidates {
            let cur = &mut cursors[i];
            if serviced.contains(&(i as u32)) {
                let (_, c) = cur.current().expect("candidate has a live segment");
                replay.preventive(cur.engine_id, t, c, score);
                cur.advance();
            } else {
                cur.pos = t + 1;
            }
        }
        // phase 3: no further decisions this window, crossings still happen
        for &(i, _, _) in &candidates {
            let cur = &mut cursors[i];
            while let Some((seg, c)) = cur.current() {
                let from = cur.pos.max(seg.start);
                if c >= from && c <= hi {
                    replay.violation(cur.engine_id, c);
                    cur.advance();
                } else {
                    break;
                }
            }
            cur.pos = cur.pos.max(hi + 1);
        }
        lo = hi + 1;
    }
    Ok(())
}

/// Median length over all segments of `runs` (upper median for even counts).
pub fn median_segment_length<R: Borrow<AdaptedRun>>(runs: &[R]) -> Option<u32> {
    let mut lens: Vec<u32> = runs
        .iter()
        .flat_map(|r| r.borrow().segments.iter().map(|s| s.len() as u32).collect::<Vec<_>>())
        .collect();
    if lens.is_empty() {
        return None;
    }
    lens.sort_unstable();
    Some(lens[lens.len() / 2])
}

/// `policy,n_cal,n_vio,cost`
pub fn write_policy_table<W: Write>(outcomes: &[PolicyOutcome], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["policy", "n_cal", "n_vio", "cost"])?;
    for o in outcomes {
        wtr.write_record([
            o.policy.name().to_string(),
            o.n_cal.to_string(),
            o.n_vio.to_string(),
            g17(o.cost),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `engine_id,cycle,event,score`; the score is empty unless a forecast triggered.
pub fn write_event_log<W: Write>(outcome: &PolicyOutcome, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["engine_id", "cycle", "event", "score"])?;
    for e in &outcome.events {
        wtr.write_record([
            e.engine_id.to_string(),
            e.cycle.to_string(),
            e.kind.name().to_string(),
            e.score.map(g17).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{adapt_dataset, AdaptationConfig, AdaptedDataset};
    use crate::synthetic::{generate, SyntheticConfig};
    use proptest::prelude::*;

    fn dataset(seed: u64, engines: usize) -> AdaptedDataset {
        let trajs = generate(&SyntheticConfig { engines, ..Default::default() }, seed);
        adapt_dataset(&trajs, &AdaptationConfig::default(), seed, "synthetic").unwrap()
    }

    fn spec(kind: PolicyKind, margin: f64) -> PolicySpec {
        PolicySpec::new(kind, margin, 60).unwrap()
    }

    #[test]
    fn cost_examples() {
        let c = CostSpec::default();
        assert_eq!(total_cost(0, 0, &c), 0.0);
        assert_eq!(total_cost(417, 289, &c), 1862.0);
        assert_eq!(total_cost(9075, 13, &c), 9140.0);
        assert_eq!(total_cost(289, 289, &c), 1734.0);
    }

    #[test]
    fn urgency_ranking() {
        let (a, b, c) = (1, 2, 3);
        assert_eq!(rank_by_urgency(&[(a, 5.0), (b, 2.0), (c, 9.0)], 2), vec![b, a]);
        assert_eq!(rank_by_urgency(&[(a, 5.0), (b, 2.0)], 10), vec![b, a]);
        assert_eq!(rank_by_urgency(&[(b, 3.0), (a, 3.0)], 1), vec![a]);
    }

    #[test]
    fn reactive_counts_every_crossing() {
        let ds = dataset(4, 10);
        let v: u64 = ds.runs.iter().map(|r| r.crossing_segments() as u64).sum();
        let out = simulate(&ds.runs, &OracleScorer::new(&ds.runs), &spec(PolicyKind::Reactive, 0.0), &CostSpec::default(), None).unwrap();
        assert_eq!((out.n_cal, out.n_vio), (v, v));
        assert_eq!(out.cost, 6.0 * v as f64);
    }

    /// Replays with perfect foresight by brute force: a crossing is caught iff
    /// some cycle before it has TTD <= margin.
    fn brute_force_oracle(ds: &AdaptedDataset, margin: u32) -> (u64, u64) {
        let (mut cal, mut vio) = (0, 0);
        for run in &ds.runs {
            let ttd = compute_ttd(run).values;
            for seg in &run.segments {
                let Some(c) = seg.crossing else { continue };
                cal += 1;
                if !(seg.start..c).any(|t| ttd[t as usize - 1] <= margin) {
                    vio += 1;
                }
            }
        }
        (cal, vio)
    }

    #[test]
    fn perfect_foresight_never_violates() {
        for seed in 0..4 {
            let ds = dataset(seed, 12);
            let out = simulate(&ds.runs, &OracleScorer::new(&ds.runs), &spec(PolicyKind::Predictive, 1.0), &CostSpec::default(), None).unwrap();
            let (cal, vio) = brute_force_oracle(&ds, 1);
            assert_eq!(out.n_vio, 0);
            assert_eq!((out.n_cal, out.n_vio), (cal, vio));
            // margin 0 sees TTD 0 only at the crossing itself
            let zero = simulate(&ds.runs, &OracleScorer::new(&ds.runs), &spec(PolicyKind::Predictive, 0.0), &CostSpec::default(), None).unwrap();
            assert_eq!(zero.n_vio, zero.n_cal);
        }
    }

    #[test]
    fn fixed_policy_fires_on_its_clock() {
        let ds = dataset(2, 6);
        let short = simulate(&ds.runs, &OracleScorer::new(&ds.runs), &PolicySpec::new(PolicyKind::Fixed, 0.0, 1).unwrap(), &CostSpec::default(), None).unwrap();
        assert_eq!(short.n_vio, 0);
        for e in &short.events {
            let run = ds.runs.iter().find(|r| r.engine_id == e.engine_id).unwrap();
            assert_eq!(run.segments[run.segment_index(e.cycle).unwrap()].start, e.cycle);
        }
        let long = simulate(&ds.runs, &OracleScorer::new(&ds.runs), &PolicySpec::new(PolicyKind::Fixed, 0.0, 10_000).unwrap(), &CostSpec::default(), None).unwrap();
        assert_eq!(long.n_vio, long.n_cal);
    }

    #[test]
    fn missing_score_names_engine_and_cycle() {
        let ds = dataset(1, 3);
        let table = ScoreTable::new(1);
        let err = simulate(&ds.runs, &table, &spec(PolicyKind::Predictive, 5.0), &CostSpec::default(), None).unwrap_err();
        assert!(matches!(err, Error::MissingScore { cycle: 1, .. }), "{err}");
    }

    #[test]
    fn scores_before_first_cycle_are_not_consulted() {
        let ds = dataset(1, 3);
        let oracle = OracleScorer::new(&ds.runs);
        let mut table = ScoreTable::new(40);
        for run in &ds.runs {
            for c in 40..=run.len() as u32 {
                table.insert(run.engine_id, c, oracle.score(run.engine_id, c).unwrap());
            }
        }
        let out = simulate(&ds.runs, &table, &spec(PolicyKind::Predictive, 1.0), &CostSpec::default(), None).unwrap();
        let early: u64 = ds
            .runs
            .iter()
            .flat_map(|r| r.segments.iter())
            .filter(|s| s.crossing.is_some_and(|c| c <= 40))
            .count() as u64;
        assert_eq!(out.n_vio, early);
    }

    #[test]
    fn capacity_one_window_per_cycle_matches_uncapacitated() {
        let ds = dataset(6, 8);
        let oracle = OracleScorer::new(&ds.runs);
        for margin in [0.0, 3.0, 12.0] {
            let p = spec(PolicyKind::Predictive, margin);
            let free = simulate(&ds.runs, &oracle, &p, &CostSpec::default(), None).unwrap();
            let cap = CapacitySpec { k: ds.runs.len(), window_width: 1 };
            let capped = simulate(&ds.runs, &oracle, &p, &CostSpec::default(), Some(&cap)).unwrap();
            assert_eq!((free.n_cal, free.n_vio), (capped.n_cal, capped.n_vio));
        }
    }

    #[test]
    fn capacity_limits_service_per_window() {
        let ds = dataset(3, 16);
        let oracle = OracleScorer::new(&ds.runs);
        let cap = CapacitySpec { k: 2, window_width: 10 };
        let out = simulate(&ds.runs, &oracle, &spec(PolicyKind::Predictive, 30.0), &CostSpec::default(), Some(&cap)).unwrap();
        let mut per_window: HashMap<u32, usize> = HashMap::new();
        for e in out.events.iter().filter(|e| e.kind == EventKind::PreventiveCal) {
            *per_window.entry((e.cycle - 1) / 10).or_default() += 1;
        }
        assert!(per_window.values().all(|&n| n <= 2));
        let crossings: u64 = ds.runs.iter().map(|r| r.crossing_segments() as u64).sum();
        assert_eq!(out.n_cal, crossings);
        assert_eq!(out.cost, total_cost(out.n_cal, out.n_vio, &CostSpec::default()));
    }

    #[test]
    fn csv_writers() {
        let ds = dataset(1, 4);
        let out = simulate(&ds.runs, &OracleScorer::new(&ds.runs), &spec(PolicyKind::Predictive, 2.0), &CostSpec::default(), None).unwrap();
        let mut buf = Vec::new();
        write_policy_table(std::slice::from_ref(&out), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "policy,n_cal,n_vio,cost");
        let mut buf = Vec::new();
        write_event_log(&out, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "engine_id,cycle,event,score");
        assert_eq!(text.lines().count(), out.events.len() + 1);
    }

    /// Oracle labels plus deterministic noise: a stand-in forecaster.
    fn noisy_table(ds: &AdaptedDataset, amp: f64, shift: f64) -> ScoreTable {
        let oracle = OracleScorer::new(&ds.runs);
        let mut t = ScoreTable::new(1);
        for run in &ds.runs {
            for c in 1..=run.len() as u32 {
                let wiggle = ((c as f64 * 0.7 + run.engine_id as f64).sin()) * amp;
                t.insert(run.engine_id, c, (oracle.score(run.engine_id, c).unwrap() + wiggle + shift).max(0.0));
            }
        }
        t
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn violations_fall_as_margin_grows(seed in 0u64..50, amp in 0.0f64..20.0, m1 in 0.0f64..20.0, dm in 0.0f64..20.0) {
            let ds = dataset(seed, 5);
            let table = noisy_table(&ds, amp, 0.0);
            let a = simulate(&ds.runs, &table, &spec(PolicyKind::Predictive, m1), &CostSpec::default(), None).unwrap();
            let b = simulate(&ds.runs, &table, &spec(PolicyKind::Predictive, m1 + dm), &CostSpec::default(), None).unwrap();
            prop_assert!(b.n_vio <= a.n_vio);
            for o in [&a, &b] {
                prop_assert_eq!(o.cost, total_cost(o.n_cal, o.n_vio, &CostSpec::default()));
            }
        }

        #[test]
        fn lower_scores_are_more_conservative(seed in 0u64..50, amp in 0.0f64..20.0, gap in 0.0f64..15.0, m in 0.0f64..10.0) {
            let ds = dataset(seed, 5);
            let point = noisy_table(&ds, amp, gap);
            let lower = noisy_table(&ds, amp, 0.0);
            let p = simulate(&ds.runs, &point, &spec(PolicyKind::Predictive, m), &CostSpec::default(), None).unwrap();
            let q = simulate(&ds.runs, &lower, &spec(PolicyKind::Quantile, m), &CostSpec::default(), None).unwrap();
            prop_assert!(q.n_vio <= p.n_vio);
        }
    }
}
