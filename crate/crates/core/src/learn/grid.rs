use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{accuracy, stratified_split, LabeledSet, ModelParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub params: ModelParams,
    pub accuracies: Vec<f64>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub trials: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// How a trial is formed.
    pub protocol: String,
    pub candidates: Vec<CandidateResult>,
    /// Index into `candidates`.
    pub winner: usize,
}

pub const PROTOCOL: &str = "repeated stratified train/validation splits, seed = master seed + trial index";

impl GridSearchReport {
    pub fn best(&self) -> &CandidateResult {
        &self.candidates[self.winner]
    }

    /// Builds the report from per-candidate results given in grid order;
    /// the first of equal means wins.
    pub fn from_results(trials: usize, validation_fraction: f64, seed: u64, candidates: Vec<CandidateResult>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut winner = 0;
        for (i, c) in candidates.iter().enumerate() {
            if c.mean > candidates[winner].mean {
                winner = i;
            }
        }
        Ok(GridSearchReport {
            trials,
            validation_fraction,
            seed,
            protocol: PROTOCOL.to_string(),
            candidates,
            winner,
        })
    }
}

/// Validation accuracy of one candidate over `trials` seeded splits.
pub fn evaluate_candidate(
    data: &LabeledSet,
    params: &ModelParams,
    trials: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<CandidateResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("grid search needs at least one trial"));
    }
    let accuracies = (0..trials)
        .map(|t| {
            let (train, val) = stratified_split(data, validation_fraction, seed.wrapping_add(t as u64))?;
            let model = params.train(&train)?;
            accuracy(val.labels(), &model.predict_all(val.rows()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = accuracies.iter().sum::<f64>() / trials as f64;
    Ok(CandidateResult {
        params: params.clone(),
        accuracies,
        mean,
    })
}

/// Exhaustive search over `grid`, all candidates of one family.
pub fn grid_search(
    data: &LabeledSet,
    grid: &[ModelParams],
    trials: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<GridSearchReport> {
    let family = grid.first().ok_or(Error::EmptyInput)?.family();
    if grid.iter().any(|p| p.family() != family) {
        return Err(Error::InvalidParameter("grid mixes model families"));
    }
    let results = grid
        .iter()
        .map(|p| evaluate_candidate(data, p, trials, validation_fraction, seed))
        .collect::<Result<Vec<_>>>()?;
    GridSearchReport::from_results(trials, validation_fraction, seed, results)
}
