use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::argmax;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree with weighted Gini impurity. Classes are indices
/// into the caller's class list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    w: &'a [f64],
    k: usize,
    params: &'a TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

impl<R: Rng> Builder<'_, R> {
    fn class_mass(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.k];
        for &i in idx {
            m[self.y[i]] += self.w[i];
        }
        m
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mass = self.class_mass(&idx);
        let total: f64 = mass.iter().sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: argmax(&mass) });
        let pure = mass.iter().filter(|&&m| m > 0.0).count() <= 1;
        let depth_left = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_left || idx.len() < self.params.min_samples_split.max(2) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, &mass, total) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, idx: &[usize], mass: &[f64], total: f64) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        let budget = self.params.max_features.unwrap_or(d).clamp(1, d);
        if budget < d {
            order.shuffle(self.rng);
        }
        let parent = gini(mass, total);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for (visited, &f) in order.iter().enumerate() {
            // Keep drawing past the budget only while no usable split exists.
            if visited >= budget && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0.0; self.k];
            let mut left_total = 0.0;
            for pos in 0..sorted.len() - 1 {
                let i = sorted[pos];
                left[self.y[i]] += self.w[i];
                left_total += self.w[i];
                let (v, next) = (self.x[i][f], self.x[sorted[pos + 1]][f]);
                if v == next {
                    continue;
                }
                let right: Vec<f64> = mass.iter().zip(&left).map(|(m, l)| m - l).collect();
                let right_total = total - left_total;
                let child = (left_total * gini(&left, left_total) + right_total * gini(&right, right_total)) / total;
                let gain = parent - child;
                if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    /// `y` are class indices below `k`, `w` per-sample weights.
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        k: usize,
        indices: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            w,
            k,
            params,
            rng,
            nodes: Vec::new(),
        };
        if indices.is_empty() {
            b.nodes.push(Node::Leaf { class: 0 });
        } else {
            b.build(indices, 0);
        }
        DecisionTree { nodes: b.nodes }
    }

    pub fn predict_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
