use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, class_weights, DecisionTree, LabeledSet, TreeParams};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `None` means `ceil(sqrt(d))`.
    #[serde(default)]
    pub max_features: Option<usize>,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_split")]
    pub min_samples_split: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    #[serde(default)]
    pub class_weighted: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_split() -> usize {
    2
}
fn default_bootstrap() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 10,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
            class_weighted: true,
            seed: 0,
        }
    }
}

/// Bagged CART trees, majority vote with ties to the lowest class id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub classes: Vec<u8>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn votes(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(row)] += 1.0;
        }
        votes
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        self.classes[argmax(&self.votes(row))]
    }
}

pub(crate) fn class_indices(data: &LabeledSet, classes: &[u8]) -> Vec<usize> {
    data.labels()
        .iter()
        .map(|l| classes.binary_search(l).unwrap_or(0))
        .collect()
}

pub fn train_random_forest(data: &LabeledSet, p: &ForestParams) -> Result<ForestModel> {
    if p.n_estimators == 0 {
        return Err(Error::InvalidParameter("forest needs at least one estimator"));
    }
    if p.max_features == Some(0) {
        return Err(Error::InvalidParameter("max_features must be positive"));
    }
    let classes = data.require_trainable()?;
    let d = data.dimension();
    let y = class_indices(data, &classes);
    let w: Vec<f64> = if p.class_weighted {
        let cw = class_weights(data.labels());
        data.labels().iter().map(|l| cw[l]).collect()
    } else {
        vec![1.0; data.len()]
    };
    let tree_params = TreeParams {
        max_depth: p.max_depth,
        min_samples_split: p.min_samples_split,
        max_features: Some(p.max_features.unwrap_or(math::ceil(math::sqrt(d as f64)) as usize)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = data.len();
    let trees = (0..p.n_estimators)
        .map(|_| {
            let indices: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(data.rows(), &y, &w, classes.len(), indices, &tree_params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        params: p.clone(),
        classes,
        trees,
    })
}
