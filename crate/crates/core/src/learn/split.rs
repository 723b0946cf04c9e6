use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledSet;
use crate::math;
use crate::{Error, Result};

/// Per class, `round(n * test_fraction)` (half up, at least 1, at most
/// `n - 1`) samples go to the test side, picked by a seeded shuffle. Both
/// sides keep the original sample order.
pub fn stratified_split(
    data: &LabeledSet,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledSet, LabeledSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter("test fraction must lie in (0, 1)"));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in data.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = alloc::vec![false; data.len()];
    for (&class, indices) in by_class.iter_mut() {
        let n = indices.len();
        if n < 2 {
            return Err(Error::ClassTooSmall { class, count: n });
        }
        let n_test = (math::floor(n as f64 * test_fraction + 0.5) as usize).clamp(1, n - 1);
        indices.shuffle(&mut rng);
        for &i in &indices[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| is_test[i]);
    Ok((data.subset(&train), data.subset(&test)))
}

/// `N / (K * n_c)` for every class present in `labels`.
pub fn class_weights(labels: &[u8]) -> BTreeMap<u8, f64> {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    counts
        .into_iter()
        .map(|(c, nc)| (c, n / (k * nc as f64)))
        .collect()
}
