//! Naive Bayes with per-attribute class-conditional densities smoothed by
//! LOESS.
//!
//! For each attribute the training range `[lo, hi]` is covered by
//! `loess_points` evenly spaced grid points. Each class's values are binned
//! to their nearest grid point and turned into a histogram density; every
//! grid point is then re-estimated by a tricube-weighted local linear fit
//! over the nearest `ceil(loess_window · loess_points)` grid points. The
//! result is floored at `DENSITY_FLOOR` and rescaled to unit trapezoidal
//! area. Between grid points densities are interpolated linearly; outside
//! the range the nearest endpoint is used.

use crate::error::{Error, Result};
use crate::types::{Label, Matrix};

pub const DENSITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbParams {
    pub loess_window: f64,
    pub loess_points: usize,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            loess_window: 0.5,
            loess_points: 100,
        }
    }
}

/// Densities of one attribute on its grid, per class.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDensity {
    pub lo: f64,
    pub hi: f64,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl AttributeDensity {
    fn eval(&self, curve: &[f64], v: f64) -> f64 {
        let n = curve.len();
        if !(self.hi > self.lo) || n < 2 {
            return curve.first().copied().unwrap_or(1.0);
        }
        let t = (v - self.lo) / (self.hi - self.lo) * (n - 1) as f64;
        if !(t > 0.0) {
            return curve[0];
        }
        if t >= (n - 1) as f64 {
            return curve[n - 1];
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        curve[i] * (1.0 - frac) + curve[i + 1] * frac
    }

    pub fn positive_at(&self, v: f64) -> f64 {
        self.eval(&self.positive, v)
    }

    pub fn negative_at(&self, v: f64) -> f64 {
        self.eval(&self.negative, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub prior_positive: f64,
    pub prior_negative: f64,
    pub attributes: Vec<AttributeDensity>,
}

impl NbModel {
    /// `(P(+1|x), P(−1|x))`.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let mut lp = self.prior_positive.ln();
        let mut ln = self.prior_negative.ln();
        for (a, &v) in self.attributes.iter().zip(x) {
            lp += a.positive_at(v).ln();
            ln += a.negative_at(v).ln();
        }
        let m = lp.max(ln);
        let (ep, en) = ((lp - m).exp(), (ln - m).exp());
        let z = ep + en;
        (ep / z, en / z)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.posterior(x).0
    }
}

/// Tricube-weighted local linear smoothing of `values` sampled at
/// `positions`, using the `q` nearest neighbours of each point.
pub fn loess_smooth(positions: &[f64], values: &[f64], q: usize) -> Vec<f64> {
    let n = positions.len();
    let q = q.clamp(2, n);
    (0..n)
        .map(|i| {
            let x0 = positions[i];
            let mut dists: Vec<f64> = positions.iter().map(|p| (p - x0).abs()).collect();
            dists.sort_by(f64::total_cmp);
            let d = dists[q - 1];
            if !(d > 0.0) {
                return values[i];
            }
            let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (p, v) in positions.iter().zip(values) {
                let u = (p - x0).abs() / d;
                if u >= 1.0 {
                    continue;
                }
                let w = (1.0 - u * u * u).powi(3);
                let dx = p - x0;
                sw += w;
                swx += w * dx;
                swy += w * v;
                swxx += w * dx * dx;
                swxy += w * dx * v;
            }
            if sw <= 0.0 {
                return values[i];
            }
            let denom = sw * swxx - swx * swx;
            if denom.abs() < 1e-300 {
                swy / sw
            } else {
                // Intercept of the fit centred at x0.
                (swxx * swy - swx * swxy) / denom
            }
        })
        .collect()
}

fn class_density(values: &[f64], lo: f64, hi: f64, p: &NbParams) -> Vec<f64> {
    let n = p.loess_points;
    let h = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let mut hist = vec![0.0; n];
    for &v in values {
        let i = (((v - lo) / h).round().max(0.0) as usize).min(n - 1);
        hist[i] += 1.0;
    }
    let total = values.len().max(1) as f64;
    hist.iter_mut().for_each(|c| *c /= total * h);
    let q = (p.loess_window * n as f64).ceil() as usize;
    let mut dens: Vec<f64> = loess_smooth(&grid, &hist, q)
        .into_iter()
        .map(|v| v.max(DENSITY_FLOOR))
        .collect();
    let area: f64 = dens.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
    if area > 0.0 {
        dens.iter_mut().for_each(|v| *v = (*v / area).max(DENSITY_FLOOR));
    }
    dens
}

pub fn nb_train(x: &Matrix, labels: &[Label], p: &NbParams) -> Result<NbModel> {
    if !(p.loess_window > 0.0 && p.loess_window <= 1.0) || p.loess_points < 2 {
        return Err(Error::InvalidParameter(format!("invalid naive Bayes parameters {p:?}")));
    }
    if x.rows() != labels.len() {
        return Err(Error::InvalidParameter("label count differs from row count".into()));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n = labels.len();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClassInput);
    }
    let attributes = (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return AttributeDensity {
                    lo,
                    hi: lo,
                    positive: vec![1.0; p.loess_points],
                    negative: vec![1.0; p.loess_points],
                };
            }
            let (pos, neg): (Vec<(f64, Label)>, Vec<(f64, Label)>) = col
                .iter()
                .copied()
                .zip(labels.iter().copied())
                .partition(|(_, l)| l.is_positive());
            let pos: Vec<f64> = pos.into_iter().map(|(v, _)| v).collect();
            let neg: Vec<f64> = neg.into_iter().map(|(v, _)| v).collect();
            AttributeDensity {
                lo,
                hi,
                positive: class_density(&pos, lo, hi, p),
                negative: class_density(&neg, lo, hi, p),
            }
        })
        .collect();
    Ok(NbModel {
        prior_positive: n_pos as f64 / n as f64,
        prior_negative: (n - n_pos) as f64 / n as f64,
        attributes,
    })
}
