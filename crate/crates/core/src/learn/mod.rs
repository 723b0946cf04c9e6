//! Classifiers, class weighting, splitting, metrics and grid search.

mod boost;
mod forest;
mod grid;
mod metrics;
mod mlp;
mod split;
mod standardize;
mod svm;
mod tree;

pub use boost::{train_adaboost, BoostModel, BoostParams};
pub use forest::{train_random_forest, ForestModel, ForestParams};
pub use grid::{evaluate_candidate, grid_search, CandidateResult, GridSearchReport};
pub use metrics::{accuracy, confusion_matrix, per_class_f1, weighted_f1};
pub use mlp::{train_mlp, MlpModel, MlpNetwork, MlpParams};
pub use split::{class_weights, stratified_split};
pub use standardize::Standardizer;
pub use svm::{solve_binary_svm, train_svm, BinarySvm, DualSolution, Kernel, SvmModel, SvmParams};
pub use tree::{DecisionTree, TreeParams};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest category id accepted in a training set. Category 5 exists in the
/// labeling workflow but is excluded from every experiment.
pub const MAX_TRAIN_CLASS: u8 = 4;

/// Feature rows with category labels in `1..=4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch);
        }
        if let Some(first) = rows.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::InconsistentData("feature rows are empty"));
            }
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::InconsistentData("feature rows differ in length"));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature value"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > MAX_TRAIN_CLASS) {
            return Err(Error::UnsupportedClass(bad));
        }
        Ok(LabeledSet { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<u8> {
        self.class_counts().into_keys().collect()
    }

    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub(crate) fn require_trainable(&self) -> Result<Vec<u8>> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        let classes = self.classes();
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        Ok(classes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Svm,
    Mlp,
    Forest,
    Boost,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Svm => "svm",
            Family::Mlp => "mlp",
            Family::Forest => "forest",
            Family::Boost => "boost",
        }
    }
}

impl core::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(Family::Svm),
            "mlp" => Ok(Family::Mlp),
            "forest" => Ok(Family::Forest),
            "boost" => Ok(Family::Boost),
            _ => Err(Error::InvalidParameter("family must be svm, mlp, forest or boost")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Svm(SvmParams),
    Mlp(MlpParams),
    Forest(ForestParams),
    Boost(BoostParams),
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Svm(_) => Family::Svm,
            ModelParams::Mlp(_) => Family::Mlp,
            ModelParams::Forest(_) => Family::Forest,
            ModelParams::Boost(_) => Family::Boost,
        }
    }

    pub fn train(&self, data: &LabeledSet) -> Result<Model> {
        Ok(match self {
            ModelParams::Svm(p) => Model::Svm(train_svm(data, p)?),
            ModelParams::Mlp(p) => Model::Mlp(train_mlp(data, p)?),
            ModelParams::Forest(p) => Model::Forest(train_random_forest(data, p)?),
            ModelParams::Boost(p) => Model::Boost(train_adaboost(data, p)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Model {
    Svm(SvmModel),
    Mlp(MlpModel),
    Forest(ForestModel),
    Boost(BoostModel),
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::Svm(_) => Family::Svm,
            Model::Mlp(_) => Family::Mlp,
            Model::Forest(_) => Family::Forest,
            Model::Boost(_) => Family::Boost,
        }
    }

    pub fn classes(&self) -> &[u8] {
        match self {
            Model::Svm(m) => m.classes(),
            Model::Mlp(m) => m.classes(),
            Model::Forest(m) => m.classes(),
            Model::Boost(m) => m.classes(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        match self {
            Model::Svm(m) => m.predict(row),
            Model::Mlp(m) => m.predict(row),
            Model::Forest(m) => m.predict(row),
            Model::Boost(m) => m.predict(row),
        }
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<u8> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Index of the largest score; the first one wins ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
