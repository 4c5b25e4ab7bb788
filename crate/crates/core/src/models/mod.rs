//! TTD forecasters behind one [`ForecastModel`] type.
//!
//! Every model stores the standardizer fitted on its training windows and
//! standardizes raw windows itself, so callers always pass raw features.
//! The neural models regress a normalized target (`(y − mean) / std` over
//! the training labels) and map predictions back to cycles.

pub mod attention;
mod io;
pub mod linalg;
pub mod linear;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod params;
pub mod train;

use std::borrow::Borrow;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptedRun;
use crate::labeling::{LabeledWindow, Standardizer};
use crate::metrics::{regression_metrics, RegressionReport};
use crate::scheduler::ScoreTable;
use crate::{Error, Result};

pub use attention::{sinusoidal_pe, AttentionDims, AttentionNet, Pooling};
pub use linear::solve_ridge;
pub use loss::{pinball_loss, smooth_l1};
pub use mlp::{QuantileDims, QuantileNet};
pub use optim::{lr_at, AdamState, AdamW};
pub use params::{ParamEntry, ParamLayout};
pub use train::{write_training_log, EpochLog, EpochStatus, TrainConfig, TrainHistory};

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_QUANTILES: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Quantile,
    Attention,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::Quantile, ModelKind::Attention];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Quantile => "quantile",
            ModelKind::Attention => "attention",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Affine map between cycles and the network's regression target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub const IDENTITY: TargetScale = TargetScale { mean: 0.0, std: 1.0 };

    /// Mean and population std of the labels; std is floored at 1 cycle.
    pub fn fit(labels: &[f64]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("no labels"));
        }
        let n = labels.len() as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        Ok(TargetScale {
            mean,
            std: var.sqrt().max(1.0),
        })
    }

    pub fn encode(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn decode(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Architecture {
    Linear,
    Quantile { dims: QuantileDims, quantiles: Vec<f64> },
    Attention { dims: AttentionDims },
}

#[derive(Debug, Clone)]
enum Net {
    Linear,
    Quantile(QuantileNet),
    Attention(AttentionNet),
}

impl Net {
    fn build(arch: &Architecture, window: usize, channels: usize) -> Result<Net> {
        Ok(match arch {
            Architecture::Linear => Net::Linear,
            Architecture::Quantile { dims, quantiles } => {
                Net::Quantile(QuantileNet::new(window * channels, *dims, quantiles)?)
            }
            Architecture::Attention { dims } => {
                Net::Attention(AttentionNet::new(window, channels, *dims)?)
            }
        })
    }

    fn layout(&self, window: usize, channels: usize) -> ParamLayout {
        match self {
            Net::Linear => {
                let mut l = ParamLayout::default();
                l.add("coef", &[window * channels]);
                l.add("intercept", &[1]);
                l
            }
            Net::Quantile(n) => n.layout().clone(),
            Net::Attention(n) => n.layout().clone(),
        }
    }
}

/// A trained forecaster: architecture, flat parameters and preprocessing.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    pub window: usize,
    pub channels: usize,
    pub architecture: Architecture,
    pub standardizer: Standardizer,
    pub target: TargetScale,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub train_config: Option<TrainConfig>,
    /// Free-form provenance (seed, digests) carried into the model file.
    pub annotations: BTreeMap<String, String>,
    net: Net,
}

impl PartialEq for ForecastModel {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window
            && self.channels == other.channels
            && self.architecture == other.architecture
            && self.standardizer == other.standardizer
            && self.target == other.target
            && self.layout == other.layout
            && self.params == other.params
            && self.train_config == other.train_config
            && self.annotations == other.annotations
    }
}

impl ForecastModel {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        window: usize,
        channels: usize,
        architecture: Architecture,
        standardizer: Standardizer,
        target: TargetScale,
        params: Vec<f64>,
        train_config: Option<TrainConfig>,
        annotations: BTreeMap<String, String>,
    ) -> Result<Self> {
        if standardizer.channels() != channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{channels} standardizer channels"),
                got: standardizer.channels().to_string(),
            });
        }
        let net = Net::build(&architecture, window, channels)?;
        let layout = net.layout(window, channels);
        if layout.total() != params.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", layout.total()),
                got: params.len().to_string(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(ForecastModel {
            window,
            channels,
            architecture,
            standardizer,
            target,
            layout,
            params,
            train_config,
            annotations,
            net,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.architecture {
            Architecture::Linear => ModelKind::Linear,
            Architecture::Quantile { .. } => ModelKind::Quantile,
            Architecture::Attention { .. } => ModelKind::Attention,
        }
    }

    fn standardized(&self, features: &[f64]) -> Result<Vec<f64>> {
        let expected = self.window * self.channels;
        if features.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} window ({expected} values)", self.window, self.channels),
                got: format!("{} values", features.len()),
            });
        }
        Ok(self.standardizer.transform(features))
    }

    /// Outputs in cycles; quantile heads come back sorted ascending.
    pub fn predict_outputs(&self, features: &[f64]) -> Result<Vec<f64>> {
        let x = self.standardized(features)?;
        let raw = match &self.net {
            Net::Linear => {
                let p = self.window * self.channels;
                let dot: f64 = x.iter().zip(&self.params[..p]).map(|(a, b)| a * b).sum();
                vec![dot + self.params[p]]
            }
            Net::Quantile(net) => net.predict_sorted(&self.params, &x)?,
            Net::Attention(net) => vec![net.predict(&self.params, &x)?],
        };
        let out: Vec<f64> = raw.into_iter().map(|z| self.target.decode(z)).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction".into()));
        }
        Ok(out)
    }

    /// Point forecast before clipping; the median head for quantile models.
    pub fn predict_raw(&self, features: &[f64]) -> Result<f64> {
        let out = self.predict_outputs(features)?;
        Ok(match &self.architecture {
            Architecture::Quantile { quantiles, .. } => {
                let mid = quantiles
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                out[mid]
            }
            _ => out[0],
        })
    }

    /// Point forecast clipped at zero.
    pub fn predict_ttd(&self, features: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(features)?.max(0.0))
    }

    /// Rectified 0.1 / 0.5 / 0.9 forecasts; requires exactly those levels.
    pub fn predict_quantiles(&self, features: &[f64]) -> Result<QuantileForecast> {
        match &self.architecture {
            Architecture::Quantile { quantiles, .. } if quantiles[..] == DEFAULT_QUANTILES[..] => {
                let out = self.predict_outputs(features)?;
                Ok(QuantileForecast {
                    q10: out[0],
                    q50: out[1],
                    q90: out[2],
                })
            }
            _ => Err(Error::invalid(format!(
                "{} model does not predict the 0.1/0.5/0.9 quantiles",
                self.kind().name()
            ))),
        }
    }

    /// Decision score for the scheduler: the lowest quantile when asked
    /// for and available, otherwise the point forecast; both clipped at 0.
    pub fn decision_score(&self, features: &[f64], lower_quantile: bool) -> Result<f64> {
        if lower_quantile && self.kind() == ModelKind::Quantile {
            Ok(self.predict_outputs(features)?[0].max(0.0))
        } else {
            self.predict_ttd(features)
        }
    }
}

fn check_windows(windows: &[LabeledWindow], standardizer: &Standardizer) -> Result<(usize, usize)> {
    let first = windows.first().ok_or(Error::Empty("no training windows"))?;
    let (w, d) = (first.window, first.channels);
    if windows.iter().any(|x| x.window != w || x.channels != d || x.features.len() != w * d) {
        return Err(Error::invalid("windows disagree on shape"));
    }
    if standardizer.channels() != d {
        return Err(Error::ShapeMismatch {
            expected: format!("{d} standardizer channels"),
            got: standardizer.channels().to_string(),
        });
    }
    Ok((w, d))
}

fn check_val(val: &[LabeledWindow], w: usize, d: usize) -> Result<()> {
    if val.is_empty() {
        return Err(Error::Empty("no validation windows"));
    }
    if val.iter().any(|x| x.window != w || x.channels != d) {
        return Err(Error::ShapeMismatch {
            expected: format!("{w}x{d} validation windows"),
            got: "a different shape".into(),
        });
    }
    Ok(())
}

/// Ridge least squares on standardized, flattened windows.
pub fn fit_linear(train: &[LabeledWindow], standardizer: &Standardizer, ridge: f64) -> Result<ForecastModel> {
    let (w, d) = check_windows(train, standardizer)?;
    let p = w * d;
    let mut x = Vec::with_capacity(train.len() * p);
    for win in train {
        x.extend(standardizer.transform(&win.features));
    }
    let y: Vec<f64> = train.iter().map(|win| win.label as f64).collect();
    let fit = solve_ridge(&x, &y, p, ridge)?;
    let mut params = fit.coef;
    params.push(fit.intercept);
    let mut annotations = BTreeMap::new();
    annotations.insert("ridge".into(), ridge.to_string());
    ForecastModel::assemble(
        w,
        d,
        Architecture::Linear,
        standardizer.clone(),
        TargetScale::IDENTITY,
        params,
        None,
        annotations,
    )
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

struct Prepared {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    labels: Vec<f64>,
}

fn prepare(windows: &[LabeledWindow], standardizer: &Standardizer, target: &TargetScale) -> Prepared {
    Prepared {
        x: windows.iter().map(|w| standardizer.transform(&w.features)).collect(),
        y: windows.iter().map(|w| target.encode(w.label as f64)).collect(),
        labels: windows.iter().map(|w| w.label as f64).collect(),
    }
}

/// Multi-quantile MLP trained on summed pinball loss; early stopping on
/// validation pinball loss.
pub fn fit_quantile(
    train: &[LabeledWindow],
    val: &[LabeledWindow],
    standardizer: &Standardizer,
    quantiles: &[f64],
    cfg: &TrainConfig,
) -> Result<(ForecastModel, TrainHistory)> {
    cfg.validate()?;
    let (w, d) = check_windows(train, standardizer)?;
    check_val(val, w, d)?;
    let net = QuantileNet::new(w * d, cfg.quantile, quantiles)?;
    let target = TargetScale::fit(&train.iter().map(|x| x.label as f64).collect::<Vec<_>>())?;
    let tr = prepare(train, standardizer, &target);
    let va = prepare(val, standardizer, &target);
    let mut params = net.init_params(&mut init_rng(cfg.seed));
    let median = quantiles
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let history = train::run_training(
        &mut params,
        tr.x.len(),
        cfg,
        |p, i, g| net.loss_and_grad(p, &tr.x[i], tr.y[i], g),
        |p| {
            let mut loss = 0.0;
            let mut mae = 0.0;
            for (x, (&y, &label)) in va.x.iter().zip(va.y.iter().zip(&va.labels)) {
                let out = net.forward(p, x)?.pop().expect("output layer");
                loss += quantiles.iter().zip(&out).map(|(q, o)| loss::pinball(y, *o, *q)).sum::<f64>();
                let mut sorted = out;
                sorted.sort_by(f64::total_cmp);
                mae += (target.decode(sorted[median]).max(0.0) - label).abs();
            }
            let n = va.x.len() as f64;
            Ok(train::ValScore {
                criterion: loss / n,
                mae: mae / n,
                loss: loss / n,
            })
        },
    )?;
    let model = ForecastModel::assemble(
        w,
        d,
        Architecture::Quantile {
            dims: cfg.quantile,
            quantiles: quantiles.to_vec(),
        },
        standardizer.clone(),
        target,
        params,
        Some(cfg.clone()),
        BTreeMap::new(),
    )?;
    Ok((model, history))
}

/// Self-attention regressor trained on SmoothL1 with AdamW; early stopping
/// on validation MAE in cycles.
pub fn train_attention(
    train: &[LabeledWindow],
    val: &[LabeledWindow],
    standardizer: &Standardizer,
    cfg: &TrainConfig,
) -> Result<(ForecastModel, TrainHistory)> {
    cfg.validate()?;
    let (w, d) = check_windows(train, standardizer)?;
    check_val(val, w, d)?;
    let net = AttentionNet::new(w, d, cfg.attention)?;
    let target = TargetScale::fit(&train.iter().map(|x| x.label as f64).collect::<Vec<_>>())?;
    let tr = prepare(train, standardizer, &target);
    let va = prepare(val, standardizer, &target);
    let mut params = net.init_params(&mut init_rng(cfg.seed));
    let beta = cfg.smooth_l1_beta;

    let history = train::run_training(
        &mut params,
        tr.x.len(),
        cfg,
        |p, i, g| net.loss_and_grad(p, &tr.x[i], tr.y[i], beta, g),
        |p| {
            let mut loss = 0.0;
            let mut mae = 0.0;
            for (x, (&y, &label)) in va.x.iter().zip(va.y.iter().zip(&va.labels)) {
                let z = net.predict(p, x)?;
                loss += smooth_l1(z - y, beta);
                mae += (target.decode(z).max(0.0) - label).abs();
            }
            let n = va.x.len() as f64;
            Ok(train::ValScore {
                criterion: mae / n,
                mae: mae / n,
                loss: loss / n,
            })
        },
    )?;
    let model = ForecastModel::assemble(
        w,
        d,
        Architecture::Attention { dims: cfg.attention },
        standardizer.clone(),
        target,
        params,
        Some(cfg.clone()),
        BTreeMap::new(),
    )?;
    Ok((model, history))
}

/// Clipped point forecasts and metrics over labelled windows.
pub fn evaluate(model: &ForecastModel, windows: &[LabeledWindow]) -> Result<(RegressionReport, Vec<f64>)> {
    let preds = windows
        .iter()
        .map(|w| model.predict_ttd(&w.features))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = windows.iter().map(|w| w.label as f64).collect();
    Ok((regression_metrics(&labels, &preds)?, preds))
}

/// Decision scores for every cycle `t ≥ w` of each run.
pub fn score_table<R: Borrow<AdaptedRun>>(
    model: &ForecastModel,
    runs: &[R],
    lower_quantile: bool,
) -> Result<ScoreTable> {
    let w = model.window;
    let mut table = ScoreTable::new(w as u32);
    for run in runs {
        let run = run.borrow();
        let data = run.channels.data();
        let d = model.channels;
        for end in w..=run.len() {
            let features = &data[(end - w) * d..end * d];
            table.insert(run.engine_id, end as u32, model.decision_score(features, lower_quantile)?);
        }
    }
    Ok(table)
}
