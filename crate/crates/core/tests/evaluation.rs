use proptest::prelude::*;

use saliency::eval::{
    auc, compare_report, evaluate_scores, fit_fold, kfold_cv, parse_metrics_csv, predict_map, roc_curve,
    stratified_folds, CvSpec, EvalReport,
};
use saliency::learners::{LearnerSpec, Method, SvmParams, TrainedModel};
use saliency::learners::svm::svm_train;
use saliency::sampling::fit_normalizer;
use saliency::{FeatureStack, Label, Matrix, Plane, SaliencyMap, NUM_CHANNELS};

fn lab(b: bool) -> Label {
    if b {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn mann_whitney(scores: &[f64], y: &[Label]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if y[i].is_positive() && !y[j].is_positive() {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            proptest::collection::vec((0u8..12).prop_map(|v| v as f64 / 4.0 - 1.0), n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(s, f)| {
                let mut y: Vec<Label> = f.into_iter().map(lab).collect();
                y[0] = Label::Positive;
                y[1] = Label::Negative;
                (s, y)
            })
    })
}

proptest! {
    #[test]
    fn auc_equals_mann_whitney_statistic((scores, y) in scored_labels()) {
        let a = auc(&roc_curve(&scores, &y).unwrap());
        prop_assert!((a - mann_whitney(&scores, &y)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms((scores, y) in scored_labels()) {
        let t: Vec<f64> = scores.iter().map(|s| s.powi(3) + 5.0).collect();
        let a = auc(&roc_curve(&scores, &y).unwrap());
        let b = auc(&roc_curve(&t, &y).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn roc_runs_monotonically_from_origin_to_corner((scores, y) in scored_labels()) {
        let roc = roc_curve(&scores, &y).unwrap();
        prop_assert_eq!(roc[0], (0.0, 0.0));
        prop_assert_eq!(*roc.last().unwrap(), (1.0, 1.0));
        for w in roc.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn stratified_folds_balance_each_class(
        flags in proptest::collection::vec(any::<bool>(), 10..200),
        folds in 2usize..6,
        seed in any::<u64>(),
    ) {
        let y: Vec<Label> = flags.into_iter().map(lab).collect();
        let npos = y.iter().filter(|l| l.is_positive()).count();
        let cv = CvSpec { folds, rng_seed: seed };
        match stratified_folds(&y, &cv) {
            Ok(a) => {
                for class in [true, false] {
                    let total = if class { npos } else { y.len() - npos };
                    for k in 0..folds {
                        let c = (0..y.len()).filter(|&i| a[i] == k && y[i].is_positive() == class).count();
                        prop_assert!(c == total / folds || c == total / folds + 1);
                    }
                }
            }
            Err(_) => prop_assert!(npos < folds || y.len() - npos < folds),
        }
    }
}

fn blobs(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
    let mut s = seed;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let pos = i % 2 == 0;
        let c = if pos { 0.65 } else { 0.35 };
        rows.push(vec![c + 0.3 * (next() - 0.5), c + 0.3 * (next() - 0.5), next()]);
        y.push(lab(pos));
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn held_out_rows_never_reach_the_fold_model() {
    let (x, y) = blobs(60, 3);
    let cv = CvSpec { folds: 5, rng_seed: 17 };
    let assignment = stratified_folds(&y, &cv).unwrap();
    for method in Method::ALL {
        let spec = LearnerSpec::new(method);
        for fold in 0..cv.folds {
            let clean = fit_fold(&x, &y, &spec, &assignment, fold, 99).unwrap();
            let mut poisoned = x.clone();
            let mut flipped = y.clone();
            for i in (0..x.rows()).filter(|&i| assignment[i] == fold) {
                poisoned.row_mut(i).iter_mut().for_each(|v| *v = 1e6);
                flipped[i] = flipped[i].flip();
            }
            let dirty = fit_fold(&poisoned, &flipped, &spec, &assignment, fold, 99).unwrap();
            assert_eq!(clean, dirty, "{method} fold {fold}");
        }
    }
}

#[test]
fn cross_validation_is_reproducible_and_informative() {
    let (x, y) = blobs(80, 5);
    let cv = CvSpec { folds: 5, rng_seed: 1 };
    for method in Method::ALL {
        let spec = LearnerSpec::new(method);
        let a = kfold_cv(&x, &y, &spec, &cv).unwrap();
        let b = kfold_cv(&x, &y, &spec, &cv).unwrap();
        assert_eq!(a, b);
        assert!(a.auc > 0.8, "{method}: auc {}", a.auc);
    }
}

fn smooth_stack(w: usize, h: usize) -> FeatureStack {
    let planes = (0..NUM_CHANNELS)
        .map(|c| {
            let (fx, fy, ph) = (0.03 + 0.002 * c as f64, 0.02 + 0.003 * c as f64, c as f64);
            Plane::from_fn(w, h, |x, y| 0.5 + 0.5 * (fx * x as f64 + ph).sin() * (fy * y as f64).cos())
        })
        .collect();
    FeatureStack::new(planes).unwrap()
}

fn stack_model(stack: &FeatureStack) -> (TrainedModel, saliency::sampling::NormalizationStats) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (k, (px, py)) in [(5, 5), (60, 10), (30, 40), (70, 50), (12, 55), (45, 20), (20, 25), (65, 35)]
        .into_iter()
        .enumerate()
    {
        rows.push(stack.vector_at(px, py).to_vec());
        y.push(lab(k % 2 == 0));
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let stats = fit_normalizer(&x);
    let xn = saliency::sampling::apply_normalizer(&stats, &x);
    let p = SvmParams { gamma: 0.02, ..SvmParams::default() };
    (TrainedModel::Svm(svm_train(&xn, &y, &p).unwrap()), stats)
}

#[test]
fn full_resolution_prediction_is_the_normalized_score_plane() {
    let stack = smooth_stack(80, 64);
    let (model, stats) = stack_model(&stack);
    let direct = Plane::from_fn(80, 64, |x, y| model.score(&stats.apply_row(&stack.vector_at(x, y))));
    let want = SaliencyMap::from_unnormalized(&direct);
    let got = predict_map(&model, &stack, &stats, 1).unwrap();
    assert_eq!(got, want);
}

#[test]
fn strided_prediction_stays_close_on_smooth_features() {
    let stack = smooth_stack(80, 64);
    let (model, stats) = stack_model(&stack);
    let fine = predict_map(&model, &stack, &stats, 1).unwrap();
    assert_eq!(fine.min_max(), (0.0, 1.0));
    for stride in [2, 4, 7] {
        let coarse = predict_map(&model, &stack, &stats, stride).unwrap();
        let mad: f64 = fine
            .values()
            .iter()
            .zip(coarse.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / fine.len() as f64;
        assert!(mad <= 0.05, "stride {stride}: mean abs difference {mad}");
    }
}

#[test]
fn report_lists_every_method_once() {
    let (x, y) = blobs(60, 8);
    let reports: Vec<(String, EvalReport)> = Method::ALL
        .iter()
        .map(|&m| {
            let model = LearnerSpec::new(m).train(&x, &y, 4).unwrap();
            let scores: Vec<f64> = x.iter_rows().map(|r| model.score(r)).collect();
            (m.name().to_string(), evaluate_scores(&scores, &y, model.threshold()).unwrap())
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let files = compare_report(&reports, dir.path()).unwrap();
    let table = parse_metrics_csv(&std::fs::read_to_string(&files.metrics_csv).unwrap()).unwrap();
    assert_eq!(table.len(), 5);
    for ((name, r), (row_name, v)) in reports.iter().zip(&table) {
        assert_eq!(name, row_name);
        let want = [r.ca, r.sensitivity, r.specificity, r.auc, r.precision, r.recall];
        for (a, b) in want.iter().zip(v) {
            assert!((a - b).abs() <= 5e-7);
        }
    }
    let svg = std::fs::read_to_string(&files.roc_svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 5);
    let roc = std::fs::read_to_string(&files.roc_csv).unwrap();
    let points: usize = reports.iter().map(|(_, r)| r.roc.len()).sum();
    assert_eq!(roc.lines().count(), points + 1);
}
