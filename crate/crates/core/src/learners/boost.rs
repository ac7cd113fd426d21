//! AdaBoost.M1 over RBF SVMs. Each round fits the base learner to a
//! weighted bootstrap resample of the training set.

use rand::Rng;

use super::svm::{svm_train, SvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::seed::rng;
use crate::types::{Label, Matrix};

/// Resample attempts per round before giving up on getting both classes.
const RESAMPLE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub rounds: usize,
    pub base: SvmParams,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 10,
            base: SvmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub members: Vec<(SvmModel, f64)>,
}

impl BoostModel {
    /// `Σ α_t · sign(f_t(x))`, with a zero decision counted as +1.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.members
            .iter()
            .map(|(m, a)| a * Label::from_sign(m.decision(x)).sign())
            .sum()
    }
}

/// What happened in one boosting round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub epsilon: f64,
    /// `None` when the round was discarded.
    pub alpha: Option<f64>,
    /// Sum of the weight vector after the update.
    pub weight_sum: f64,
}

#[derive(Debug, Clone)]
pub struct BoostRun<W> {
    pub members: Vec<(W, f64)>,
    pub rounds: Vec<RoundRecord>,
}

/// Draws `n` indices with replacement, proportionally to `weights`.
pub fn weighted_resample(weights: &[f64], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cum.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

/// The boosting loop with a pluggable weak learner. `fit` receives the
/// resampled row indices; `predict` gives the weak hypothesis of a training
/// row as a label.
pub fn boost_with<W>(
    labels: &[Label],
    rounds: usize,
    seed: u64,
    mut fit: impl FnMut(&[usize]) -> Result<W>,
    predict: impl Fn(&W, usize) -> Label,
) -> Result<BoostRun<W>> {
    let n = labels.len();
    if rounds == 0 {
        return Err(Error::InvalidParameter("boosting needs at least one round".into()));
    }
    if !labels.iter().any(|l| l.is_positive()) || labels.iter().all(|l| l.is_positive()) {
        return Err(Error::SingleClassInput);
    }
    let mut rng = rng(seed);
    let mut w = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut history = Vec::new();
    let eps_min = 1.0 / (2.0 * n as f64);

    for _ in 0..rounds {
        let Some(idx) = (0..RESAMPLE_ATTEMPTS).find_map(|_| {
            let idx = weighted_resample(&w, n, &mut rng);
            let pos = idx.iter().filter(|&&i| labels[i].is_positive()).count();
            (pos > 0 && pos < n).then_some(idx)
        }) else {
            break;
        };
        let weak = fit(&idx)?;
        let hyp: Vec<Label> = (0..n).map(|i| predict(&weak, i)).collect();
        let epsilon: f64 = (0..n).filter(|&i| hyp[i] != labels[i]).map(|i| w[i]).sum();
        if epsilon >= 0.5 {
            history.push(RoundRecord {
                epsilon,
                alpha: None,
                weight_sum: w.iter().sum(),
            });
            break;
        }
        let perfect = epsilon <= 0.0;
        let e = if perfect { eps_min } else { epsilon };
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        for i in 0..n {
            w[i] *= (-alpha * labels[i].sign() * hyp[i].sign()).exp();
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        history.push(RoundRecord {
            epsilon,
            alpha: Some(alpha),
            weight_sum: w.iter().sum(),
        });
        members.push((weak, alpha));
        if perfect {
            break;
        }
    }
    if members.is_empty() {
        return Err(Error::NoUsefulWeakLearner);
    }
    Ok(BoostRun {
        members,
        rounds: history,
    })
}

/// Trains the ensemble and returns it with the per-round record.
pub fn adaboost_run(
    x: &Matrix,
    labels: &[Label],
    p: &BoostParams,
    seed: u64,
) -> Result<(BoostModel, Vec<RoundRecord>)> {
    p.base.validate()?;
    if x.rows() != labels.len() {
        return Err(Error::InvalidParameter("label count differs from row count".into()));
    }
    let run = boost_with(
        labels,
        p.rounds,
        seed,
        |idx| {
            let sub = x.select_rows(idx);
            let y: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            svm_train(&sub, &y, &p.base)
        },
        |m: &SvmModel, i| Label::from_sign(m.decision(x.row(i))),
    )?;
    Ok((BoostModel { members: run.members }, run.rounds))
}

pub fn adaboost_train(x: &Matrix, labels: &[Label], p: &BoostParams, seed: u64) -> Result<BoostModel> {
    Ok(adaboost_run(x, labels, p, seed)?.0)
}
