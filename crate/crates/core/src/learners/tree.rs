//! C4.5-style binary decision tree on continuous attributes with
//! pessimistic (confidence-bound) pruning.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::types::{Label, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub confidence: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            confidence: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        positives: u32,
        total: u32,
    },
    Split {
        attribute: usize,
        threshold: f64,
        /// Rows with `x[attribute] <= threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Positive-class fraction at the reached leaf.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { positives, total } => {
                    return if *total == 0 { 0.5 } else { *positives as f64 / *total as f64 };
                }
                TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*attribute] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<(u32, u32)>) {
        match self {
            TreeNode::Leaf { positives, total } => out.push((*positives, *total)),
            TreeNode::Split { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Sum of pessimistic error estimates over the leaves.
    pub fn estimated_errors(&self, confidence: f64) -> f64 {
        self.leaves()
            .iter()
            .map(|&(p, t)| leaf_estimated_errors(p, t, confidence))
            .sum()
    }
}

/// Binary entropy (bits) of a `pos / total` split.
pub fn entropy(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let h = |c: usize| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / total as f64;
            -p * p.log2()
        }
    };
    h(pos) + h(total - pos)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore {
    pub threshold: f64,
    pub gain: f64,
    pub gain_ratio: f64,
}

/// Information gain and gain ratio of splitting at `threshold`.
pub fn split_score(values: &[f64], labels: &[Label], threshold: f64) -> SplitScore {
    let n = values.len();
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    let (mut ln, mut lp) = (0, 0);
    for (v, l) in values.iter().zip(labels) {
        if *v <= threshold {
            ln += 1;
            lp += l.is_positive() as usize;
        }
    }
    score_from_counts(n, pos, ln, lp, threshold)
}

fn score_from_counts(n: usize, pos: usize, ln: usize, lp: usize, threshold: f64) -> SplitScore {
    let rn = n - ln;
    let rp = pos - lp;
    let nf = n as f64;
    let gain = entropy(pos, n) - (ln as f64 / nf) * entropy(lp, ln) - (rn as f64 / nf) * entropy(rp, rn);
    let split_info = entropy(ln, n);
    let gain_ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
    SplitScore {
        threshold,
        gain,
        gain_ratio,
    }
}

/// Best-gain threshold on one attribute among midpoints of adjacent
/// distinct values, both sides keeping at least `min_leaf` rows.
pub fn best_threshold(values: &[f64], labels: &[Label], min_leaf: usize) -> Option<SplitScore> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    best_threshold_sorted(values, labels, &idx, min_leaf)
}

fn best_threshold_sorted(values: &[f64], labels: &[Label], sorted: &[usize], min_leaf: usize) -> Option<SplitScore> {
    let n = sorted.len();
    let pos = sorted.iter().filter(|&&i| labels[i].is_positive()).count();
    let mut best: Option<SplitScore> = None;
    let mut lp = 0;
    for k in 0..n.saturating_sub(1) {
        lp += labels[sorted[k]].is_positive() as usize;
        let (a, b) = (values[sorted[k]], values[sorted[k + 1]]);
        if a == b {
            continue;
        }
        let ln = k + 1;
        if ln < min_leaf || n - ln < min_leaf {
            continue;
        }
        let s = score_from_counts(n, pos, ln, lp, a + (b - a) / 2.0);
        if best.is_none_or(|cur| s.gain > cur.gain) {
            best = Some(s);
        }
    }
    best
}

/// Extra errors of a leaf's upper confidence bound at level `cf`.
pub fn add_errors(n: f64, e: f64, cf: f64) -> f64 {
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (add_errors(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    r * n - e
}

pub fn leaf_estimated_errors(positives: u32, total: u32, cf: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let e = positives.min(total - positives) as f64;
    e + add_errors(total as f64, e, cf)
}

struct Builder<'a> {
    x: &'a Matrix,
    labels: &'a [Label],
    params: TreeParams,
    prune: bool,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        TreeNode::Leaf {
            positives: rows.iter().filter(|&&i| self.labels[i].is_positive()).count() as u32,
            total: rows.len() as u32,
        }
    }

    /// Best split of `rows`: per attribute the best-gain threshold, then,
    /// among attributes with at least average gain, the best gain ratio.
    fn choose_split(&self, rows: &[usize]) -> Option<(usize, SplitScore)> {
        let local_labels: Vec<Label> = rows.iter().map(|&i| self.labels[i]).collect();
        let mut candidates: Vec<(usize, SplitScore)> = Vec::new();
        for j in 0..self.x.cols() {
            let values: Vec<f64> = rows.iter().map(|&i| self.x.row(i)[j]).collect();
            if let Some(s) = best_threshold(&values, &local_labels, self.params.min_leaf) {
                if s.gain > 1e-12 {
                    candidates.push((j, s));
                }
            }
        }
        if candidates.is_empty() {
            return None;
        }
        let avg_gain = candidates.iter().map(|(_, s)| s.gain).sum::<f64>() / candidates.len() as f64;
        let mut best: Option<(usize, SplitScore)> = None;
        for &(j, s) in &candidates {
            if s.gain + 1e-12 < avg_gain {
                continue;
            }
            if best.is_none_or(|(_, b)| s.gain_ratio > b.gain_ratio) {
                best = Some((j, s));
            }
        }
        best
    }

    fn grow(&self, rows: &[usize]) -> TreeNode {
        let pos = rows.iter().filter(|&&i| self.labels[i].is_positive()).count();
        if pos == 0 || pos == rows.len() || rows.len() < 2 * self.params.min_leaf {
            return self.leaf(rows);
        }
        let Some((attribute, split)) = self.choose_split(rows) else {
            return self.leaf(rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x.row(i)[attribute] <= split.threshold);
        let node = TreeNode::Split {
            attribute,
            threshold: split.threshold,
            left: Box::new(self.grow(&left_rows)),
            right: Box::new(self.grow(&right_rows)),
        };
        if self.prune {
            self.collapse_if_not_better(node)
        } else {
            node
        }
    }

    /// Collapses a subtree whose leaf estimate does not exceed the sum of
    /// its leaves' estimates.
    fn collapse_if_not_better(&self, node: TreeNode) -> TreeNode {
        let leaves = node.leaves();
        let positives: u32 = leaves.iter().map(|l| l.0).sum();
        let total: u32 = leaves.iter().map(|l| l.1).sum();
        let cf = self.params.confidence;
        if leaf_estimated_errors(positives, total, cf) <= node.estimated_errors(cf) + 1e-12 {
            TreeNode::Leaf { positives, total }
        } else {
            node
        }
    }
}

fn build(x: &Matrix, labels: &[Label], p: &TreeParams, prune: bool) -> Result<TreeNode> {
    if p.min_leaf < 1 || !(p.confidence > 0.0 && p.confidence < 0.5) {
        return Err(Error::InvalidParameter(format!("invalid tree parameters {p:?}")));
    }
    if x.rows() != labels.len() {
        return Err(Error::InvalidParameter("label count differs from row count".into()));
    }
    if x.rows() < 2 * p.min_leaf {
        return Err(Error::TooFewSamples {
            needed: 2 * p.min_leaf,
            got: x.rows(),
        });
    }
    let builder = Builder {
        x,
        labels,
        params: *p,
        prune,
    };
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(builder.grow(&rows))
}

/// Grows and prunes a tree.
pub fn c45_train(x: &Matrix, labels: &[Label], p: &TreeParams) -> Result<TreeNode> {
    build(x, labels, p, true)
}

/// Grows without pruning.
pub fn c45_grow_unpruned(x: &Matrix, labels: &[Label], p: &TreeParams) -> Result<TreeNode> {
    build(x, labels, p, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[i8]) -> Vec<Label> {
        v.iter().map(|&l| Label::from_i8(l).unwrap()).collect()
    }

    #[test]
    fn balanced_entropy_is_one_bit() {
        assert_eq!(entropy(8, 16), 1.0);
        assert_eq!(entropy(0, 16), 0.0);
        assert_eq!(entropy(16, 16), 0.0);
    }

    #[test]
    fn perfect_split_gain_equals_parent_entropy() {
        let values: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let y: Vec<Label> = (0..16)
            .map(|i| if i < 8 { Label::Negative } else { Label::Positive })
            .collect();
        let s = best_threshold(&values, &y, 2).unwrap();
        assert_eq!(s.threshold, 7.5);
        assert!((s.gain - 1.0).abs() < 1e-12);

        let x = Matrix::new(16, 1, values).unwrap();
        let tree = c45_train(&x, &y, &TreeParams::default()).unwrap();
        match &tree {
            TreeNode::Split { left, right, threshold, .. } => {
                assert_eq!(*threshold, 7.5);
                assert_eq!(**left, TreeNode::Leaf { positives: 0, total: 8 });
                assert_eq!(**right, TreeNode::Leaf { positives: 8, total: 8 });
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
    }

    #[test]
    fn too_few_samples() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            c45_train(&x, &labels(&[1, -1, 1]), &TreeParams::default()),
            Err(Error::TooFewSamples { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn add_errors_matches_reference_values() {
        // Zero observed errors: N(1 - CF^(1/N)).
        let v = add_errors(6.0, 0.0, 0.25);
        assert!((v - 6.0 * (1.0 - 0.25f64.powf(1.0 / 6.0))).abs() < 1e-12);
        // Monotone in observed errors.
        assert!(add_errors(20.0, 2.0, 0.25) > 0.0);
        assert!(leaf_estimated_errors(3, 20, 0.25) > leaf_estimated_errors(2, 20, 0.25));
    }

    #[test]
    fn noise_only_data_is_pruned_to_a_leaf() {
        // Labels alternate with no relation to a spread-out attribute.
        let values: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64).collect();
        let y: Vec<Label> = (0..40)
            .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        let x = Matrix::new(40, 1, values).unwrap();
        let tree = c45_train(&x, &y, &TreeParams::default()).unwrap();
        let raw = c45_grow_unpruned(&x, &y, &TreeParams::default()).unwrap();
        assert!(tree.estimated_errors(0.25) <= raw.estimated_errors(0.25) + 1e-9);
        assert!(tree.depth() <= raw.depth());
    }
}
