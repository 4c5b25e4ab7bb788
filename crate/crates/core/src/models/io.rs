//! Model files: a text header and a little-endian `f64` parameter block.
//!
//! ```text
//! driftcal-model 1
//! {"window":40,"channels":24,...}
//! params 12345
//! <12345 × 8 bytes>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ForecastModel, ParamLayout, TargetScale, TrainConfig};
use crate::labeling::Standardizer;
use crate::{Error, Result};

const MAGIC: &str = "driftcal-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    window: usize,
    channels: usize,
    architecture: Architecture,
    standardizer: Standardizer,
    target: TargetScale,
    layout: ParamLayout,
    train_config: Option<TrainConfig>,
    annotations: BTreeMap<String, String>,
}

fn next_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::ModelFormat("truncated header".into()))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| Error::ModelFormat("header is not utf-8".into()))
}

impl ForecastModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind().name().into(),
            window: self.window,
            channels: self.channels,
            architecture: self.architecture.clone(),
            standardizer: self.standardizer.clone(),
            target: self.target,
            layout: self.layout.clone(),
            train_config: self.train_config.clone(),
            annotations: self.annotations.clone(),
        };
        let mut out = format!(
            "{MAGIC} {VERSION}\n{}\nparams {}\n",
            serde_json::to_string(&header)?,
            self.params.len()
        )
        .into_bytes();
        out.reserve(self.params.len() * 8);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = next_line(bytes, &mut pos)?;
        let version = magic
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::ModelFormat("missing magic line".into()))?;
        if version != VERSION.to_string() {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let header: Header = serde_json::from_str(next_line(bytes, &mut pos)?)?;
        let count: usize = next_line(bytes, &mut pos)?
            .strip_prefix("params ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::ModelFormat("missing parameter count".into()))?;
        let body = &bytes[pos..];
        if body.len() != count * 8 {
            return Err(Error::ModelFormat(format!(
                "expected {} parameter bytes, found {}",
                count * 8,
                body.len()
            )));
        }
        let params: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let model = ForecastModel::assemble(
            header.window,
            header.channels,
            header.architecture,
            header.standardizer,
            header.target,
            params,
            header.train_config,
            header.annotations,
        )?;
        if model.layout != header.layout || model.kind().name() != header.kind {
            return Err(Error::ModelFormat("shape table does not match architecture".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
