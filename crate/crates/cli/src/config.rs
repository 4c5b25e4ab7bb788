//! Run settings: defaults, a sectioned TOML file, then command-line flags.
//!
//! Each flag writes the key of the same name (dashes become underscores) into
//! its section of the parsed file before deserialization, so a flag always
//! beats the file and the file always beats the default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use driftcal::adaptation::AdaptationConfig;
use driftcal::models::{ModelKind, TrainConfig};
use driftcal::scheduler::{CapacitySpec, CostSpec, PolicyKind, PolicySpec};
use driftcal::synthetic::SyntheticConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const SPLITS: [&str; 5] = ["FD001", "FD002", "FD003", "FD004", "synthetic"];

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Sectioned key = value settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding train_FD00x.txt.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// FD001..FD004, or `synthetic` for the built-in generator.
    #[arg(long, global = true)]
    pub split: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    #[arg(long, global = true)]
    pub train_fraction: Option<f64>,
    /// Comma-separated model kinds: linear, quantile, attention.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Comma-separated policies: reactive, fixed, predictive, quantile.
    #[arg(long, global = true)]
    pub policies: Option<String>,
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Fixed-policy period; defaults to the median training segment length.
    #[arg(long, global = true)]
    pub period: Option<u32>,
    /// Preventive calibrations allowed per planning window.
    #[arg(long, global = true)]
    pub capacity_k: Option<usize>,
    #[arg(long, global = true)]
    pub cost_cal: Option<f64>,
    #[arg(long, global = true)]
    pub cost_vio: Option<f64>,
    /// Score policies with the true TTD instead of a trained model.
    #[arg(long, global = true)]
    pub oracle_scorer: bool,
    /// Also write SVG scatter plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    seed: u64,
    out: PathBuf,
    svg: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 0, out: "out".into(), svg: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DataSection {
    data_dir: PathBuf,
    split: String,
    train_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { data_dir: "data".into(), split: "synthetic".into(), train_fraction: 0.75 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WindowingSection {
    window: usize,
    stride: usize,
}

impl Default for WindowingSection {
    fn default() -> Self {
        WindowingSection { window: 40, stride: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelSection {
    model: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { model: "linear".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PolicySection {
    policies: String,
    margin: f64,
    period: Option<u32>,
    capacity_k: Option<usize>,
    capacity_window: u32,
    cost_cal: f64,
    cost_vio: f64,
    oracle_scorer: bool,
}

impl Default for PolicySection {
    fn default() -> Self {
        let costs = CostSpec::default();
        PolicySection {
            policies: "reactive,fixed,predictive".into(),
            margin: 5.0,
            period: None,
            capacity_k: None,
            capacity_window: CapacitySpec::default().window_width,
            cost_cal: costs.c_cal,
            cost_vio: costs.c_vio,
            oracle_scorer: false,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    run: RunSection,
    data: DataSection,
    windowing: WindowingSection,
    model: ModelSection,
    policy: PolicySection,
    adaptation: AdaptationConfig,
    train: TrainConfig,
    synthetic: SyntheticConfig,
}

/// Fully resolved settings. Everything except the output directory feeds the
/// config digest.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub data_dir: PathBuf,
    pub split: String,
    pub train_fraction: f64,
    pub window: usize,
    pub stride: usize,
    pub models: Vec<ModelKind>,
    pub policies: Vec<PolicyKind>,
    pub margin: f64,
    pub period: Option<u32>,
    pub capacity_k: Option<usize>,
    pub capacity_window: u32,
    pub cost_cal: f64,
    pub cost_vio: f64,
    pub oracle_scorer: bool,
    pub svg: bool,
    pub adaptation: AdaptationConfig,
    pub train: TrainConfig,
    pub synthetic: SyntheticConfig,
    #[serde(skip)]
    pub out: PathBuf,
}

fn set(table: &mut Table, section: &str, key: &str, value: Value) {
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(t) = entry {
        t.insert(key.to_string(), value);
    }
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn list<T>(raw: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        bail!("empty {what} list");
    }
    items
        .into_iter()
        .map(|s| parse(s).with_context(|| format!("unknown {what} `{s}`")))
        .collect()
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Settings> {
        let mut table = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                text.parse::<Table>()
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => Table::new(),
        };
        let train_seed_pinned = table
            .get("train")
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key("seed"));

        if let Some(v) = flags.seed {
            set(&mut table, "run", "seed", Value::Integer(v as i64));
        }
        if let Some(v) = &flags.out {
            set(&mut table, "run", "out", path_value(v));
        }
        if flags.svg {
            set(&mut table, "run", "svg", Value::Boolean(true));
        }
        if let Some(v) = &flags.data_dir {
            set(&mut table, "data", "data_dir", path_value(v));
        }
        if let Some(v) = &flags.split {
            set(&mut table, "data", "split", Value::String(v.clone()));
        }
        if let Some(v) = flags.train_fraction {
            set(&mut table, "data", "train_fraction", Value::Float(v));
        }
        if let Some(v) = flags.window {
            set(&mut table, "windowing", "window", Value::Integer(v as i64));
        }
        if let Some(v) = flags.stride {
            set(&mut table, "windowing", "stride", Value::Integer(v as i64));
        }
        if let Some(v) = &flags.model {
            set(&mut table, "model", "model", Value::String(v.clone()));
        }
        if let Some(v) = &flags.policies {
            set(&mut table, "policy", "policies", Value::String(v.clone()));
        }
        if let Some(v) = flags.margin {
            set(&mut table, "policy", "margin", Value::Float(v));
        }
        if let Some(v) = flags.period {
            set(&mut table, "policy", "period", Value::Integer(v as i64));
        }
        if let Some(v) = flags.capacity_k {
            set(&mut table, "policy", "capacity_k", Value::Integer(v as i64));
        }
        if let Some(v) = flags.cost_cal {
            set(&mut table, "policy", "cost_cal", Value::Float(v));
        }
        if let Some(v) = flags.cost_vio {
            set(&mut table, "policy", "cost_vio", Value::Float(v));
        }
        if flags.oracle_scorer {
            set(&mut table, "policy", "oracle_scorer", Value::Boolean(true));
        }

        let file: FileConfig = Value::Table(table).try_into().context("invalid settings")?;
        let mut train = file.train;
        if !train_seed_pinned {
            train.seed = file.run.seed;
        }
        let s = Settings {
            seed: file.run.seed,
            data_dir: file.data.data_dir,
            split: file.data.split,
            train_fraction: file.data.train_fraction,
            window: file.windowing.window,
            stride: file.windowing.stride,
            models: list(&file.model.model, "model", ModelKind::parse)?,
            policies: list(&file.policy.policies, "policy", PolicyKind::parse)?,
            margin: file.policy.margin,
            period: file.policy.period,
            capacity_k: file.policy.capacity_k,
            capacity_window: file.policy.capacity_window,
            cost_cal: file.policy.cost_cal,
            cost_vio: file.policy.cost_vio,
            oracle_scorer: file.policy.oracle_scorer,
            svg: file.run.svg,
            adaptation: file.adaptation,
            train,
            synthetic: file.synthetic,
            out: file.run.out,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !SPLITS.contains(&self.split.as_str()) {
            bail!("unknown split `{}`; expected one of {}", self.split, SPLITS.join(", "));
        }
        if self.window == 0 || self.stride == 0 {
            bail!("window and stride must be >= 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction must lie in (0, 1)");
        }
        if !(self.cost_cal >= 0.0 && self.cost_vio >= 0.0) {
            bail!("costs must be non-negative");
        }
        if self.capacity_k == Some(0) || self.capacity_window == 0 {
            bail!("capacity_k and capacity_window must be >= 1");
        }
        PolicySpec::new(PolicyKind::Predictive, self.margin, self.period.unwrap_or(1))?;
        self.adaptation.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn digest(&self) -> String {
        driftcal::sha256_hex(self.snapshot().to_string().as_bytes())
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("settings serialize")
    }

    pub fn costs(&self) -> CostSpec {
        CostSpec { c_cal: self.cost_cal, c_vio: self.cost_vio }
    }

    pub fn capacity(&self) -> Option<CapacitySpec> {
        self.capacity_k.map(|k| CapacitySpec { k, window_width: self.capacity_window })
    }

    /// Leading comment line carried by every CSV artifact.
    pub fn provenance_line(&self) -> String {
        format!("# seed={} config_digest={}\n", self.seed, self.digest())
    }
}
