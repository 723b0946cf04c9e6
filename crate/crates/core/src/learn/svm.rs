use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax, class_weights, LabeledSet, Standardizer};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma * |x - y|^2)`
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => math::exp(-gamma * sq_dist(a, b)),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    #[serde(default)]
    pub class_weighted: bool,
    /// Stop once the maximal KKT violation drops to this value.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Iteration budget per binary problem, in multiples of its sample count.
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Kernel row cache budget in megabytes.
    #[serde(default = "default_cache_mb")]
    pub cache_mb: usize,
}

fn default_tolerance() -> f64 {
    1e-3
}
fn default_max_passes() -> usize {
    1000
}
fn default_true() -> bool {
    true
}
fn default_cache_mb() -> usize {
    200
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Rbf { gamma: 0.1 },
            c: 1000.0,
            class_weighted: true,
            tolerance: default_tolerance(),
            max_passes: default_max_passes(),
            standardize: true,
            cache_mb: default_cache_mb(),
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("SVM C must be positive"));
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidParameter("RBF gamma must be positive"));
            }
        }
        if !(self.tolerance > 0.0) || self.max_passes == 0 {
            return Err(Error::InvalidParameter("SVM tolerance and max_passes must be positive"));
        }
        Ok(())
    }
}

/// Solution of `max sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij` subject to
/// `0 <= a_i <= upper_i` and `sum(a_i y_i) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum(a_i y_i K(x_i, x)) + bias`.
    pub bias: f64,
    pub objective: f64,
    /// Maximal violating pair gap at exit.
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct KernelCache<'a> {
    x: &'a [Vec<f64>],
    kernel: Kernel,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a [Vec<f64>], kernel: Kernel, cache_bytes: usize) -> Self {
        let n = x.len();
        let capacity = (cache_bytes / (8 * n.max(1))).max(2);
        KernelCache {
            x,
            kernel,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = &self.x[i];
            let row = self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect();
            self.rows[i] = Some(row);
            self.order.push_back(i);
        }
        self.rows[i].as_deref().unwrap_or(&[])
    }
}

const TAU: f64 = 1e-12;

/// Sequential minimal optimization with second-order working set selection.
/// `y` holds `+1.0` / `-1.0`.
pub fn solve_binary_svm(
    x: &[Vec<f64>],
    y: &[f64],
    upper: &[f64],
    kernel: Kernel,
    tolerance: f64,
    max_iterations: usize,
) -> Result<DualSolution> {
    solve_with_cache(x, y, upper, kernel, tolerance, max_iterations, default_cache_mb() << 20)
}

fn solve_with_cache(
    x: &[Vec<f64>],
    y: &[f64],
    upper: &[f64],
    kernel: Kernel,
    tolerance: f64,
    max_iterations: usize,
    cache_bytes: usize,
) -> Result<DualSolution> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != n || upper.len() != n {
        return Err(Error::DimensionMismatch);
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("binary targets must be +1 or -1"));
    }
    if upper.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParameter("box constraints must be positive"));
    }
    let mut cache = KernelCache::new(x, kernel, cache_bytes);
    let diag: Vec<f64> = x.iter().map(|xi| kernel.eval(xi, xi)).collect();
    let mut alpha = vec![0.0; n];
    // Gradient of the minimization form 1/2 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64, c: f64| if yt > 0.0 { a < c } else { a > 0.0 };
    let in_low = |a: f64, yt: f64, c: f64| if yt > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut converged = false;
    let mut gap;
    loop {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t], upper[t]) {
                let v = -y[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = t;
                }
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_sel != usize::MAX {
            let ki = cache.row(i_sel).to_vec();
            for t in 0..n {
                if !in_low(alpha[t], y[t], upper[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                if v < g_min {
                    g_min = v;
                }
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = diag[i_sel] + diag[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        gap = g_max - g_min;
        if !gap.is_finite() || gap <= tolerance || j_sel == usize::MAX {
            converged = true;
            if !gap.is_finite() {
                gap = 0.0;
            }
            break;
        }
        if iterations >= max_iterations {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let ki = cache.row(i).to_vec();
        let kj = cache.row(j).to_vec();
        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] - 2.0 * ki[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * ki[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // Bias from free variables, or the middle of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };
    // grad = Qa - e, so a'Qa = a'(grad + e).
    let quad: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * (g + 1.0)).sum();
    let objective = alpha.iter().sum::<f64>() - 0.5 * quad;
    Ok(DualSolution {
        alpha,
        bias: -rho,
        objective,
        max_violation: gap,
        iterations,
        converged,
    })
}

/// One binary machine kept as support vectors and their `a_i y_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }
}

/// One-vs-rest soft-margin SVM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub classes: Vec<u8>,
    pub standardizer: Standardizer,
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    /// One decision value per class, in `classes` order.
    pub fn decision_values(&self, row: &[f64]) -> Vec<f64> {
        let x = self.standardizer.transform(row);
        self.machines
            .iter()
            .map(|m| m.decision(&self.params.kernel, &x))
            .collect()
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        self.classes[argmax(&self.decision_values(row))]
    }
}

pub fn train_svm(data: &LabeledSet, p: &SvmParams) -> Result<SvmModel> {
    p.validate()?;
    let classes = data.require_trainable()?;
    let standardizer = if p.standardize {
        Standardizer::fit(data.rows())
    } else {
        Standardizer::identity(data.dimension())
    };
    let x = standardizer.transform_all(data.rows());
    let weights = class_weights(data.labels());
    let upper: Vec<f64> = data
        .labels()
        .iter()
        .map(|l| if p.class_weighted { p.c * weights[l] } else { p.c })
        .collect();
    let max_iterations = p.max_passes.saturating_mul(x.len().max(1));
    let mut machines = Vec::with_capacity(classes.len());
    for &class in &classes {
        let y: Vec<f64> = data
            .labels()
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let sol = solve_with_cache(&x, &y, &upper, p.kernel, p.tolerance, max_iterations, p.cache_mb << 20)?;
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support.push(x[i].clone());
                coef.push(a * y[i]);
            }
        }
        machines.push(BinarySvm {
            support,
            coef,
            bias: sol.bias,
        });
    }
    Ok(SvmModel {
        params: p.clone(),
        classes,
        standardizer,
        machines,
    })
}
