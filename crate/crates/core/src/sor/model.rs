use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SorError;

/// Tag written into every serialized model.
pub const MODEL_FORMAT: &str = "ngrid-sor-model";
pub const MODEL_VERSION: u32 = 1;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One (feeder, hour) observation: weather and asset features plus an
/// optional outage label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureRow {
    pub feeder_id: String,
    pub hour: usize,
    pub numeric: BTreeMap<String, f64>,
    pub categorical: BTreeMap<String, String>,
    pub label: Option<bool>,
}

impl FeatureRow {
    pub fn new(feeder_id: impl Into<String>, hour: usize) -> Self {
        Self {
            feeder_id: feeder_id.into(),
            hour,
            ..Default::default()
        }
    }

    pub fn numeric(mut self, name: impl Into<String>, value: f64) -> Self {
        self.numeric.insert(name.into(), value);
        self
    }

    pub fn categorical(mut self, name: impl Into<String>, level: impl Into<String>) -> Self {
        self.categorical.insert(name.into(), level.into());
        self
    }

    pub fn labeled(mut self, label: bool) -> Self {
        self.label = Some(label);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Rows with `value < threshold` go left.
    Numeric { threshold: f64 },
    /// Rows whose level is in the set go left; anything else, including an
    /// unseen or missing level, goes right.
    Categorical { levels: BTreeSet<String> },
}

/// Depth-one regression tree over a single feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: String,
    pub split: Split,
    pub left_value: f64,
    pub right_value: f64,
}

impl Stump {
    pub fn goes_left(&self, row: &FeatureRow) -> Result<bool, SorError> {
        match &self.split {
            Split::Numeric { threshold } => {
                let value = row
                    .numeric
                    .get(&self.feature)
                    .ok_or_else(|| SorError::MissingFeature(self.feature.clone()))?;
                Ok(*value < *threshold)
            }
            Split::Categorical { levels } => Ok(row
                .categorical
                .get(&self.feature)
                .is_some_and(|level| levels.contains(level))),
        }
    }

    pub fn output(&self, row: &FeatureRow) -> Result<f64, SorError> {
        Ok(if self.goes_left(row)? {
            self.left_value
        } else {
            self.right_value
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    /// Log-odds before any stump.
    pub base_score: f64,
    pub learning_rate: f64,
    pub stumps: Vec<Stump>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: BoostedModel,
}

impl BoostedModel {
    /// Stump-free model that scores `sigmoid(base_score)` everywhere.
    pub fn constant(base_score: f64) -> Self {
        Self {
            base_score,
            learning_rate: 1.0,
            stumps: Vec::new(),
        }
    }

    /// Raw log-odds for a row.
    pub fn margin(&self, row: &FeatureRow) -> Result<f64, SorError> {
        let mut sum = 0.0;
        for stump in &self.stumps {
            sum += stump.output(row)?;
        }
        Ok(self.base_score + self.learning_rate * sum)
    }

    pub fn score(&self, row: &FeatureRow) -> Result<f64, SorError> {
        Ok(sigmoid(self.margin(row)?))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SorError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| SorError::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(SorError::ModelFormat(format!(
                "format tag `{}`",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(SorError::ModelFormat(format!("version {}", file.version)));
        }
        Ok(file.model)
    }
}
