use crate::error::{Error, Result};
use crate::types::{Label, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub matrix: Matrix,
    pub labels: Vec<Label>,
    pub params: KnnParams,
}

impl KnnModel {
    pub fn new(matrix: Matrix, labels: Vec<Label>, params: KnnParams) -> Result<Self> {
        if params.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if params.k > matrix.rows() {
            return Err(Error::KExceedsN {
                k: params.k,
                n: matrix.rows(),
            });
        }
        if labels.len() != matrix.rows() {
            return Err(Error::InvalidParameter("label count differs from row count".into()));
        }
        Ok(KnnModel {
            matrix,
            labels,
            params,
        })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        knn_score_unchecked(&self.matrix, &self.labels, x, self.params.k)
    }
}

/// Fraction of positives among the `k` nearest rows (squared Euclidean
/// distance, ties to the lower row index).
pub fn knn_score(train: &Matrix, labels: &[Label], x: &[f64], p: &KnnParams) -> Result<f64> {
    if p.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if p.k > train.rows() {
        return Err(Error::KExceedsN { k: p.k, n: train.rows() });
    }
    Ok(knn_score_unchecked(train, labels, x, p.k))
}

fn knn_score_unchecked(train: &Matrix, labels: &[Label], x: &[f64], k: usize) -> f64 {
    let mut dist: Vec<(f64, usize)> = train
        .iter_rows()
        .enumerate()
        .map(|(i, row)| {
            let d: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, cmp);
    }
    let positives = dist[..k]
        .iter()
        .filter(|&&(_, i)| labels[i].is_positive())
        .count();
    positives as f64 / k as f64
}
