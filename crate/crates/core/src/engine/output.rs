use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::StrategyResult;
use crate::types::FusionConfig;

/// Serialized form of one [`crate::types::SelectionRecord`], with technique names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordDocument {
    pub query: usize,
    pub valid: bool,
    pub calibrated: bool,
    pub subset: Vec<String>,
    pub weights: BTreeMap<String, f64>,
    pub ratio_score: Option<f64>,
    pub match_index: Option<usize>,
    pub fused_mean: Option<f64>,
    pub fused_std: Option<f64>,
    pub techniques_touched: Vec<String>,
    pub ranking: Vec<usize>,
    pub error: Option<String>,
}

/// Serialized form of a [`StrategyResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub strategy: String,
    pub techniques: Vec<String>,
    pub config: FusionConfig,
    pub params: Value,
    pub records: Vec<RecordDocument>,
}

impl From<&StrategyResult> for ResultDocument {
    fn from(r: &StrategyResult) -> Self {
        let name = |t: &usize| r.techniques[*t].clone();
        let records = r
            .records
            .iter()
            .map(|rec| RecordDocument {
                query: rec.query,
                valid: rec.is_valid(),
                calibrated: rec.calibrated,
                subset: rec.subset.iter().map(name).collect(),
                weights: rec
                    .subset
                    .iter()
                    .zip(&rec.weights)
                    .map(|(t, &w)| (name(t), w))
                    .collect(),
                ratio_score: rec.ratio_score,
                match_index: rec.match_index,
                fused_mean: rec.fused_stats.map(|s| s.0),
                fused_std: rec.fused_stats.map(|s| s.1),
                techniques_touched: rec.techniques_touched.iter().map(name).collect(),
                ranking: rec.ranking.clone(),
                error: rec.error.clone(),
            })
            .collect();
        Self {
            strategy: r.strategy.clone(),
            techniques: r.techniques.clone(),
            config: r.config.clone(),
            params: r.params.clone(),
            records,
        }
    }
}

impl ResultDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result documents contain only finite numbers")
    }
}
