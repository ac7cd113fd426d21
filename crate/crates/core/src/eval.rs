//! Confusion metrics, ROC/AUC, stratified cross-validation, whole-image
//! prediction and comparison reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, TrainedModel};
use crate::sampling::{apply_normalizer, fit_normalizer, NormalizationStats};
use crate::seed::{derive_seed, rng};
use crate::types::{FeatureStack, Label, Matrix, Plane, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_predictions(predicted: &[Label], actual: &[Label]) -> Self {
        let mut c = ConfusionCounts::default();
        for (p, a) in predicted.iter().zip(actual) {
            match (p.is_positive(), a.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub ca: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    /// Set when some denominator was zero and the rate was reported as 0.
    pub degenerate: bool,
}

pub fn confusion_metrics(c: &ConfusionCounts) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let mut degenerate = false;
    let mut rate = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let sensitivity = rate(c.tp, c.tp + c.fn_);
    let specificity = rate(c.tn, c.tn + c.fp);
    let precision = rate(c.tp, c.tp + c.fp);
    Ok(Metrics {
        ca: (c.tp + c.tn) as f64 / total as f64,
        sensitivity,
        specificity,
        precision,
        recall: sensitivity,
        degenerate,
    })
}

/// ROC points from `(0,0)` to `(1,1)`, one per distinct score; tied scores
/// move both rates in a single step.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<Vec<(f64, f64)>> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter("score count differs from label count".into()));
    }
    let p = labels.iter().filter(|l| l.is_positive()).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut roc = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if labels[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        roc.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(roc)
}

/// Trapezoidal area under a ROC polyline.
pub fn auc(roc: &[(f64, f64)]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ca: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub degenerate: bool,
    pub counts: ConfusionCounts,
    pub roc: Vec<(f64, f64)>,
}

/// Builds a report from continuous scores; scores `>= threshold` count as +1.
pub fn evaluate_scores(scores: &[f64], labels: &[Label], threshold: f64) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let predicted: Vec<Label> = scores
        .iter()
        .map(|&s| if s >= threshold { Label::Positive } else { Label::Negative })
        .collect();
    let counts = ConfusionCounts::from_predictions(&predicted, labels);
    let m = confusion_metrics(&counts)?;
    let roc = roc_curve(scores, labels)?;
    Ok(EvalReport {
        ca: m.ca,
        sensitivity: m.sensitivity,
        specificity: m.specificity,
        auc: auc(&roc),
        precision: m.precision,
        recall: m.recall,
        degenerate: m.degenerate,
        counts,
        roc,
    })
}

/// Scores already-normalized rows with a model and evaluates them.
pub fn evaluate_model(model: &TrainedModel, x: &Matrix, labels: &[Label]) -> Result<EvalReport> {
    let scores: Vec<f64> = (0..x.rows()).into_par_iter().map(|i| model.score(x.row(i))).collect();
    evaluate_scores(&scores, labels, model.threshold())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvSpec {
    pub folds: usize,
    pub rng_seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 5,
            rng_seed: 0,
        }
    }
}

/// Fold index of every row. Each class is shuffled with a seeded RNG and
/// dealt round-robin over the folds.
pub fn stratified_folds(labels: &[Label], cv: &CvSpec) -> Result<Vec<usize>> {
    if cv.folds < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least 2 folds".into()));
    }
    let mut assignment = vec![0; labels.len()];
    let mut r = rng(derive_seed(cv.rng_seed, "cv-folds"));
    for class in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < cv.folds {
            return Err(Error::FoldTooSmall { fold: idx.len() });
        }
        idx.shuffle(&mut r);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = k % cv.folds;
        }
    }
    Ok(assignment)
}

/// Trains on every fold but `fold`; the normalizer is fitted on those rows
/// only.
pub fn fit_fold(
    x: &Matrix,
    labels: &[Label],
    spec: &LearnerSpec,
    assignment: &[usize],
    fold: usize,
    seed: u64,
) -> Result<(TrainedModel, NormalizationStats)> {
    let train: Vec<usize> = (0..x.rows()).filter(|&i| assignment[i] != fold).collect();
    let raw = x.select_rows(&train);
    let stats = fit_normalizer(&raw);
    let xt = apply_normalizer(&stats, &raw);
    let yt: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
    let model = spec.train(&xt, &yt, derive_seed(seed, &format!("fold-{fold}")))?;
    Ok((model, stats))
}

/// Stratified k-fold cross-validation with pooled held-out scores.
pub fn kfold_cv(x: &Matrix, labels: &[Label], spec: &LearnerSpec, cv: &CvSpec) -> Result<EvalReport> {
    if x.rows() != labels.len() {
        return Err(Error::InvalidParameter("label count differs from row count".into()));
    }
    let assignment = stratified_folds(labels, cv)?;
    let fold_scores: Vec<Vec<(usize, f64)>> = (0..cv.folds)
        .into_par_iter()
        .map(|fold| {
            let (model, stats) = fit_fold(x, labels, spec, &assignment, fold, cv.rng_seed)?;
            Ok((0..x.rows())
                .filter(|&i| assignment[i] == fold)
                .map(|i| (i, model.score(&stats.apply_row(x.row(i)))))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut scores = vec![0.0; x.rows()];
    for (i, s) in fold_scores.into_iter().flatten() {
        scores[i] = s;
    }
    let threshold = match spec.method {
        crate::learners::Method::Svm | crate::learners::Method::AdaBoost => 0.0,
        _ => 0.5,
    };
    evaluate_scores(&scores, labels, threshold)
}

/// Grid coordinates `0, stride, 2·stride, …` plus the last index.
fn grid_axis(len: usize, stride: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..len).step_by(stride).collect();
    if *g.last().expect("len > 0") != len - 1 {
        g.push(len - 1);
    }
    g
}

/// Scores every `stride`-th pixel, interpolates bilinearly in between and
/// min-max normalizes the result.
pub fn predict_map(
    model: &TrainedModel,
    stack: &FeatureStack,
    stats: &NormalizationStats,
    stride: usize,
) -> Result<SaliencyMap> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let (w, h) = (stack.width(), stack.height());
    let gx = grid_axis(w, stride);
    let gy = grid_axis(h, stride);
    let coarse: Vec<Vec<f64>> = gy
        .par_iter()
        .map(|&y| {
            gx.iter()
                .map(|&x| model.score(&stats.apply_row(&stack.vector_at(x, y))))
                .collect()
        })
        .collect();
    // Segment index and fraction for each full-resolution coordinate.
    let locate = |g: &[usize], v: usize| -> (usize, f64) {
        if g.len() == 1 {
            return (0, 0.0);
        }
        let k = (v / stride).min(g.len() - 2);
        (k, (v - g[k]) as f64 / (g[k + 1] - g[k]) as f64)
    };
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let (ky, fy) = locate(&gy, y);
            let ky1 = (ky + 1).min(gy.len() - 1);
            (0..w)
                .map(|x| {
                    let (kx, fx) = locate(&gx, x);
                    let kx1 = (kx + 1).min(gx.len() - 1);
                    let top = coarse[ky][kx] * (1.0 - fx) + coarse[ky][kx1] * fx;
                    let bot = coarse[ky1][kx] * (1.0 - fx) + coarse[ky1][kx1] * fx;
                    top * (1.0 - fy) + bot * fy
                })
                .collect()
        })
        .collect();
    let plane = Plane::from_vec(w, h, rows.into_iter().flatten().collect())?;
    Ok(SaliencyMap::from_unnormalized(&plane))
}

pub const METRICS_CSV_HEADER: &str = "method,ca,sens,spec,auc,prec,recall";

pub fn format_metrics_csv(reports: &[(String, EvalReport)]) -> String {
    let mut s = format!("{METRICS_CSV_HEADER}\n");
    for (name, r) in reports {
        let _ = writeln!(
            s,
            "{name},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.ca, r.sensitivity, r.specificity, r.auc, r.precision, r.recall
        );
    }
    s
}

/// Parses a metrics table back into `(method, [ca, sens, spec, auc, prec, recall])`.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<(String, [f64; 6])>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_CSV_HEADER => {}
        _ => return Err(Error::MalformedHeader("expected metrics CSV header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(Error::MalformedLine {
                    line: i + 1,
                    message: format!("expected 7 fields, found {}", f.len()),
                });
            }
            let mut v = [0.0; 6];
            for (slot, tok) in v.iter_mut().zip(&f[1..]) {
                *slot = tok.trim().parse().map_err(|_| Error::MalformedLine {
                    line: i + 1,
                    message: format!("bad number '{tok}'"),
                })?;
            }
            Ok((f[0].to_string(), v))
        })
        .collect()
}

pub fn format_roc_csv(reports: &[(String, EvalReport)]) -> String {
    let mut s = String::from("method,fpr,tpr\n");
    for (name, r) in reports {
        for (fpr, tpr) in &r.roc {
            let _ = writeln!(s, "{name},{fpr:.6},{tpr:.6}");
        }
    }
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// ROC curves of all reports in one plot, with the chance diagonal and a
/// legend.
pub fn roc_svg(reports: &[(String, EvalReport)]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let px = |fpr: f64| PAD + fpr * SIZE;
    let py = |tpr: f64| PAD + (1.0 - tpr) * SIZE;
    let full = SIZE + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{full}" viewBox="0 0 {w} {full}">"#,
        w = full + 160.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">False positive rate</text>"#,
        PAD + SIZE / 2.0,
        full - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" font-size="14" transform="rotate(-90 14 {:.1})">True positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    for (k, (name, r)) in reports.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = r.roc.iter().map(|&(f, t)| format!("{:.2},{:.2}", px(f), py(t))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"><title>{name}</title></polyline>"#,
            pts.join(" ")
        );
        let ly = PAD + 20.0 + 22.0 * k as f64;
        let lx = PAD + SIZE + 20.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="13">{name} ({:.4})</text>"#,
            lx + 30.0,
            ly + 4.0,
            r.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Paths written by [`compare_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub metrics_csv: PathBuf,
    pub roc_svg: PathBuf,
    pub roc_csv: PathBuf,
}

/// Writes `metrics.csv`, `roc.svg` and `roc.csv` into `dir`.
pub fn compare_report(reports: &[(String, EvalReport)], dir: &Path) -> Result<ReportFiles> {
    if reports.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        metrics_csv: dir.join("metrics.csv"),
        roc_svg: dir.join("roc.svg"),
        roc_csv: dir.join("roc.csv"),
    };
    let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| Error::io(p, e));
    write(&files.metrics_csv, format_metrics_csv(reports))?;
    write(&files.roc_svg, roc_svg(reports))?;
    write(&files.roc_csv, format_roc_csv(reports))?;
    Ok(files)
}
