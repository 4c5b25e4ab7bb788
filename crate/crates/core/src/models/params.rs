use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One named tensor inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Shape table for a flat parameter vector.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub entries: Vec<ParamEntry>,
}

impl ParamLayout {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> Range<usize> {
        let entry = ParamEntry {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.total(),
        };
        let r = entry.range();
        self.entries.push(entry);
        r
    }

    pub fn total(&self) -> usize {
        self.entries.last().map(|e| e.offset + e.len()).unwrap_or(0)
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Xavier/Glorot uniform fill for a `fan_in × fan_out` weight.
pub fn xavier_uniform<R: Rng>(dst: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    if dst.is_empty() {
        return;
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in dst {
        *v = rng.random_range(-limit..limit);
    }
}
