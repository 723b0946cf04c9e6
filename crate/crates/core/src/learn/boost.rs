use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::class_indices;
use super::{argmax, DecisionTree, LabeledSet, TreeParams};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            learning_rate: 0.5,
            n_estimators: 500,
            seed: 0,
        }
    }
}

/// Multiclass AdaBoost (SAMME) over depth-1 trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub params: BoostParams,
    pub classes: Vec<u8>,
    pub stumps: Vec<DecisionTree>,
    pub stage_weights: Vec<f64>,
    /// Weighted error of each stump on its round's sample weights.
    pub stage_errors: Vec<f64>,
    /// Unweighted training error of the ensemble after each round.
    pub training_errors: Vec<f64>,
}

impl BoostModel {
    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.classes.len()];
        for (stump, &a) in self.stumps.iter().zip(&self.stage_weights) {
            s[stump.predict_index(row)] += a;
        }
        s
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        self.classes[argmax(&self.scores(row))]
    }
}

pub fn train_adaboost(data: &LabeledSet, p: &BoostParams) -> Result<BoostModel> {
    if p.n_estimators == 0 {
        return Err(Error::InvalidParameter("boosting needs at least one estimator"));
    }
    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
        return Err(Error::InvalidParameter("learning rate must be positive"));
    }
    let classes = data.require_trainable()?;
    let k = classes.len();
    let n = data.len();
    let x = data.rows();
    let y = class_indices(data, &classes);
    let stump_params = TreeParams {
        max_depth: Some(1),
        min_samples_split: 2,
        max_features: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut w = vec![1.0 / n as f64; n];
    let mut model = BoostModel {
        params: p.clone(),
        classes,
        stumps: Vec::new(),
        stage_weights: Vec::new(),
        stage_errors: Vec::new(),
        training_errors: Vec::new(),
    };
    let mut scores = vec![vec![0.0; k]; n];
    let chance = 1.0 - 1.0 / k as f64;
    for _ in 0..p.n_estimators {
        let stump = DecisionTree::fit(x, &y, &w, k, (0..n).collect(), &stump_params, &mut rng);
        let pred: Vec<usize> = x.iter().map(|r| stump.predict_index(r)).collect();
        let total: f64 = w.iter().sum();
        let err = pred
            .iter()
            .zip(&y)
            .zip(&w)
            .filter(|((a, b), _)| a != b)
            .map(|(_, wi)| wi)
            .sum::<f64>()
            / total;
        let perfect = err <= 0.0;
        if !perfect && err >= chance {
            if model.stumps.is_empty() {
                return Err(Error::InconsistentData("first stump is no better than chance"));
            }
            break;
        }
        let alpha = if perfect {
            1.0
        } else {
            p.learning_rate * (math::ln((1.0 - err) / err) + math::ln(k as f64 - 1.0))
        };
        for (s, &c) in scores.iter_mut().zip(&pred) {
            s[c] += alpha;
        }
        let wrong = scores.iter().zip(&y).filter(|(s, &c)| argmax(s) != c).count();
        model.stumps.push(stump);
        model.stage_weights.push(alpha);
        model.stage_errors.push(err);
        model.training_errors.push(wrong as f64 / n as f64);
        if perfect {
            break;
        }
        let mut sum = 0.0;
        for ((wi, &pc), &yc) in w.iter_mut().zip(&pred).zip(&y) {
            if pc != yc {
                *wi *= math::exp(alpha);
            }
            sum += *wi;
        }
        if !(sum > 0.0 && sum.is_finite()) {
            break;
        }
        w.iter_mut().for_each(|wi| *wi /= sum);
    }
    Ok(model)
}
