//! Soft-margin RBF support vector machine trained with SMO using the
//! maximal-violating-pair working set.
//!
//! The dual is `min ½ αᵀQα − eᵀα` subject to `0 ≤ α ≤ C` and `yᵀα = 0`,
//! with `Q_ij = y_i y_j k(x_i, x_j)`. The solver keeps the gradient
//! `G = Qα − e` and stops once `max_{I_up} −y G − min_{I_low} −y G` drops
//! below the tolerance.

use std::collections::VecDeque;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{Label, Matrix};

const TAU: f64 = 1e-12;
/// Largest training set whose full kernel matrix is precomputed.
const DENSE_KERNEL_LIMIT: usize = 4096;
/// Rows kept by the LRU cache above that limit.
const CACHE_ROWS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub gamma: f64,
    pub cost: f64,
    pub smo_tolerance: f64,
    /// Iteration budget in units of `n` pair updates.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            gamma: 0.8,
            cost: 8.0,
            smo_tolerance: 1e-3,
            max_passes: 200,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 && self.cost > 0.0 && self.smo_tolerance > 0.0 && self.max_passes > 0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid SVM parameters {self:?}")))
        }
    }
}

/// `exp(−γ‖a − b‖²)`.
#[inline]
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Matrix,
    /// `α_i y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl SvmModel {
    /// `Σ α_i y_i k(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coefs)
            .map(|(sv, &c)| c * rbf_kernel(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

/// Full solver state at exit, for diagnostics.
#[derive(Debug, Clone)]
pub struct SvmSolution {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `m(α) − M(α)` at exit.
    pub kkt_gap: f64,
}

struct KernelRows<'a> {
    x: &'a Matrix,
    gamma: f64,
    dense: Option<Vec<f64>>,
    cache: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, gamma: f64) -> Self {
        let n = x.rows();
        let dense = (n <= DENSE_KERNEL_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = rbf_kernel(x.row(i), x.row(j), gamma);
                }
            });
            k
        });
        KernelRows {
            x,
            gamma,
            cache: if dense.is_some() { Vec::new() } else { vec![None; n] },
            dense,
            order: VecDeque::new(),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.x.rows();
        if let Some(d) = &self.dense {
            return &d[i * n..(i + 1) * n];
        }
        if self.cache[i].is_none() {
            if self.order.len() >= CACHE_ROWS {
                if let Some(old) = self.order.pop_front() {
                    self.cache[old] = None;
                }
            }
            let (x, gamma) = (self.x, self.gamma);
            let xi = x.row(i);
            let row: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|j| rbf_kernel(xi, x.row(j), gamma))
                .collect();
            self.cache[i] = Some(row);
            self.order.push_back(i);
        }
        self.cache[i].as_deref().expect("just filled")
    }
}

fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Maximal violating pair `(i, j, gap)`.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (Option<usize>, Option<usize>, f64) {
    let mut g_max = f64::NEG_INFINITY;
    let mut g_min = f64::INFINITY;
    let (mut i_best, mut j_best) = (None, None);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > g_max {
            g_max = v;
            i_best = Some(t);
        }
        if in_low(alpha[t], y[t], c) && v < g_min {
            g_min = v;
            j_best = Some(t);
        }
    }
    (i_best, j_best, g_max - g_min)
}

pub fn svm_train(x: &Matrix, labels: &[Label], p: &SvmParams) -> Result<SvmModel> {
    Ok(svm_solve(x, labels, p)?.model)
}

pub fn svm_solve(x: &Matrix, labels: &[Label], p: &SvmParams) -> Result<SvmSolution> {
    p.validate()?;
    let n = x.rows();
    if n != labels.len() {
        return Err(Error::InvalidParameter("label count differs from row count".into()));
    }
    if !labels.iter().any(|l| l.is_positive()) || labels.iter().all(|l| l.is_positive()) {
        return Err(Error::SingleClassInput);
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let c = p.cost;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut kernel = KernelRows::new(x, p.gamma);
    let max_iter = p.max_passes.saturating_mul(n.max(1));

    let mut iterations = 0;
    let mut gap;
    loop {
        let (i, j, g) = select_pair(&alpha, &grad, &y, c);
        gap = g;
        let (Some(i), Some(j)) = (i, j) else { break };
        if gap < p.smo_tolerance || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let ki: Vec<f64> = kernel.row(i).to_vec();
        let kj = kernel.row(j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let k_ii = ki[i];
        let k_jj = kj[j];
        let k_ij = ki[j];

        if y[i] != y[j] {
            let quad = (k_ii + k_jj - 2.0 * k_ij).max(TAU);
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
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k_ii + k_jj - 2.0 * k_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_ai = alpha[i] - old_ai;
        let d_aj = alpha[j] - old_aj;
        let (yi, yj) = (y[i], y[j]);
        for t in 0..n {
            grad[t] += y[t] * (yi * ki[t] * d_ai + yj * kj[t] * d_aj);
        }
    }

    let converged = gap < p.smo_tolerance;
    if !converged {
        warn!("SMO stopped after {iterations} iterations with KKT gap {gap:.3e}");
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free_n += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        (ub + lb) / 2.0
    };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = SvmModel {
        support_vectors: x.select_rows(&sv),
        dual_coefs: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias: -rho,
        gamma: p.gamma,
    };
    Ok(SvmSolution {
        model,
        alpha,
        gradient: grad,
        iterations,
        converged,
        kkt_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[0.3, 0.2], &[0.3, 0.2], 0.8), 1.0);
        let v = rbf_kernel(&[0.0], &[1.0], 0.8);
        assert!((v - 0.449_328_964_117_221_6).abs() < 1e-12);
        assert!((rbf_kernel(&[0.0, 5.0], &[3.0, 1.0], 1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            svm_train(&x, &[Label::Positive, Label::Positive], &SvmParams::default()),
            Err(Error::SingleClassInput)
        ));
    }

    #[test]
    fn two_point_symmetry() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let sol = svm_solve(&x, &[Label::Negative, Label::Positive], &SvmParams::default()).unwrap();
        assert!(sol.model.decision(&[0.5]).abs() < 1e-6);
        assert!((sol.model.decision(&[0.0]) + 1.0).abs() < 1e-3);
        assert!((sol.model.decision(&[1.0]) - 1.0).abs() < 1e-3);
        let k = (-0.8f64).exp();
        assert!((sol.alpha[0] - 1.0 / (1.0 - k)).abs() < 1e-9);
    }
}
