//! Command implementations behind the `saliency` binary.
//!
//! Output layout under `out`:
//!
//! ```text
//! features/<id>.fstk      gt/<id>.chan, gt/<id>.png
//! samples/{train,test}.smpl, samples/{train,test}.csv, samples/split.csv
//! models/<method>.smdl    eval/<mode>/{metrics.csv,roc.svg,roc.csv}
//! predict/<method>/<id>.png
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use log::{error, info, warn};
use rayon::prelude::*;

use crate::dataset::{
    default_sigma, ground_truth_map, load_channel_map, load_fixations, load_horizon_overrides, load_manifest,
    save_channel_map, save_gray_png, split_corpus, Corpus, CorpusEntry, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{compare_report, evaluate_model, kfold_cv, predict_map, CvSpec, EvalReport, ReportFiles};
use crate::features::{extract_features, load_stack, save_stack, ExtractOptions};
use crate::learners::{load_model, save_model, LearnerParams, LearnerSpec, Method};
use crate::sampling::{
    apply_normalizer, assemble_matrix, draw_samples, fit_normalizer, format_samples_csv, load_smpl,
    percentile_regions, save_smpl, SamplingSpec,
};
use crate::seed::derive_seed;
use crate::sift::SiftParams;
use crate::types::{LabeledSample, SaliencyMap, NUM_CHANNELS};

const DETECTOR_NAMES: [&str; 3] = ["face", "person", "car"];

/// Every setting a run needs. Built from defaults, then a key=value file,
/// then command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub force: bool,
    pub train_fraction: f64,
    /// Ground-truth blur; `None` means `0.02 · max(width, height)`.
    pub gt_sigma: Option<f64>,
    pub stride: usize,
    pub horizon_overrides: Option<PathBuf>,
    /// Channels replaced by zeros before sampling (ablation runs).
    pub zero_channels: Vec<usize>,
    pub sampling: SamplingSpec,
    pub sift: SiftParams,
    pub learners: LearnerParams,
    pub folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            out: PathBuf::from("out"),
            seed: 0,
            jobs: None,
            force: false,
            train_fraction: 0.8,
            gt_sigma: None,
            stride: 1,
            horizon_overrides: None,
            zero_channels: Vec::new(),
            sampling: SamplingSpec::default(),
            sift: SiftParams::default(),
            learners: LearnerParams::default(),
            folds: 5,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value '{value}' for key '{key}'")))
}

impl RunConfig {
    /// Sets one key. Relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let l = &mut self.learners;
        match key {
            "manifest" => self.manifest = Some(path(value)),
            "out" => self.out = path(value),
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = Some(parse(key, value)?),
            "force" => self.force = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "gt_sigma" => self.gt_sigma = Some(parse(key, value)?),
            "stride" => self.stride = parse(key, value)?,
            "horizon_overrides" => self.horizon_overrides = Some(path(value)),
            "zero_channels" => {
                self.zero_channels = value
                    .split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?;
                if let Some(&c) = self.zero_channels.iter().find(|&&c| c >= NUM_CHANNELS) {
                    return Err(Error::Config(format!("channel {c} out of range")));
                }
            }
            "sampling.pos_per_image" => self.sampling.pos_per_image = parse(key, value)?,
            "sampling.neg_per_image" => self.sampling.neg_per_image = parse(key, value)?,
            "sampling.pos_percentile" => self.sampling.pos_percentile = parse(key, value)?,
            "sampling.neg_percentile" => self.sampling.neg_percentile = parse(key, value)?,
            "sampling.border_margin" => self.sampling.border_margin = parse(key, value)?,
            "sift.octaves" => self.sift.octaves = parse(key, value)?,
            "sift.scales_per_octave" => self.sift.scales_per_octave = parse(key, value)?,
            "sift.base_sigma" => self.sift.base_sigma = parse(key, value)?,
            "sift.contrast_threshold" => self.sift.contrast_threshold = parse(key, value)?,
            "sift.edge_ratio" => self.sift.edge_ratio = parse(key, value)?,
            "sift.density_sigma" => self.sift.density_sigma = Some(parse(key, value)?),
            "svm.gamma" => l.svm.gamma = parse(key, value)?,
            "svm.cost" => l.svm.cost = parse(key, value)?,
            "svm.smo_tolerance" => l.svm.smo_tolerance = parse(key, value)?,
            "svm.max_passes" => l.svm.max_passes = parse(key, value)?,
            "c45.min_leaf" => l.tree.min_leaf = parse(key, value)?,
            "c45.confidence" => l.tree.confidence = parse(key, value)?,
            "knn.k" => l.knn.k = parse(key, value)?,
            "nb.loess_window" => l.nb.loess_window = parse(key, value)?,
            "nb.loess_points" => l.nb.loess_points = parse(key, value)?,
            "adaboost.rounds" => l.boost.rounds = parse(key, value)?,
            "cv.folds" => self.folds = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        l.boost.base = l.svm;
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim(), base)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.sift.validate()?;
        self.learners.svm.validate()?;
        if self.stride == 0 || self.folds < 2 || self.learners.boost.rounds == 0 {
            return Err(Error::Config("stride ≥ 1, cv.folds ≥ 2 and adaboost.rounds ≥ 1 are required".into()));
        }
        Ok(())
    }

    fn corpus(&self) -> Result<Corpus> {
        let m = self
            .manifest
            .as_ref()
            .ok_or_else(|| Error::Config("no manifest given".into()))?;
        load_manifest(m)
    }

    fn learner(&self, method: Method) -> LearnerSpec {
        LearnerSpec {
            method,
            params: self.learners,
        }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.out.join(name);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Ok(d)
    }

    pub fn feature_path(&self, id: &str) -> PathBuf {
        self.out.join("features").join(format!("{id}.fstk"))
    }

    pub fn gt_path(&self, id: &str) -> PathBuf {
        self.out.join("gt").join(format!("{id}.chan"))
    }

    pub fn samples_path(&self, set: &str) -> PathBuf {
        self.out.join("samples").join(format!("{set}.smpl"))
    }

    pub fn model_path(&self, method: Method) -> PathBuf {
        self.out.join("models").join(format!("{method}.smdl"))
    }
}

/// How many items a stage produced, skipped as up to date, or failed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

fn mtime(p: &Path) -> Option<SystemTime> {
    std::fs::metadata(p).and_then(|m| m.modified()).ok()
}

/// True when `output` exists and is at least as new as every input.
fn up_to_date(output: &Path, inputs: &[&Path]) -> bool {
    let Some(out) = mtime(output) else { return false };
    inputs.iter().all(|i| mtime(i).is_some_and(|t| t <= out))
}

fn run_per_entry(
    stage: &'static str,
    corpus: &Corpus,
    f: impl Fn(&CorpusEntry) -> Result<bool> + Sync,
) -> Result<StageSummary> {
    let results: Vec<Result<bool>> = corpus.entries.par_iter().map(&f).collect();
    let mut s = StageSummary::default();
    for (e, r) in corpus.entries.iter().zip(results) {
        match r {
            Ok(true) => s.computed += 1,
            Ok(false) => s.skipped += 1,
            Err(err) => {
                error!("{stage}: image {}: {err}", e.image_id);
                s.failed += 1;
            }
        }
    }
    info!("{stage}: {} computed, {} up to date, {} failed", s.computed, s.skipped, s.failed);
    if s.failed > 0 {
        return Err(Error::StageFailed { stage, failed: s.failed });
    }
    Ok(s)
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<StageSummary> {
    cfg.validate()?;
    let corpus = cfg.corpus()?;
    cfg.dir("features")?;
    let overrides: HashMap<String, f64> = match &cfg.horizon_overrides {
        Some(p) => load_horizon_overrides(p)?.into_iter().collect(),
        None => HashMap::new(),
    };
    run_per_entry("extract", &corpus, |e| {
        let out = cfg.feature_path(&e.image_id);
        let mut inputs: Vec<&Path> = vec![&e.image_path];
        inputs.extend(e.detector_paths.iter().flatten().map(|p| p.as_path()));
        if !cfg.force && up_to_date(&out, &inputs) {
            return Ok(false);
        }
        let img = crate::dataset::load_image(&e.image_path)?;
        let (w, h) = (img.width(), img.height());
        let mut detectors: [Option<_>; 3] = Default::default();
        for (k, p) in e.detector_paths.iter().enumerate() {
            if let Some(p) = p {
                detectors[k] = Some(load_channel_map(p, w, h, DETECTOR_NAMES[k])?);
            }
        }
        let opts = ExtractOptions {
            sift: cfg.sift,
            detectors,
            horizon_row: overrides.get(&e.image_id).copied(),
            ..Default::default()
        };
        save_stack(&out, &extract_features(&img, &opts)?)?;
        Ok(true)
    })
}

fn image_size(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((w as usize, h as usize))
}

pub fn cmd_gt(cfg: &RunConfig) -> Result<StageSummary> {
    cfg.validate()?;
    let corpus = cfg.corpus()?;
    cfg.dir("gt")?;
    run_per_entry("gt", &corpus, |e| {
        let out = cfg.gt_path(&e.image_id);
        if !cfg.force && up_to_date(&out, &[&e.image_path, &e.fixation_path]) {
            return Ok(false);
        }
        let (w, h) = image_size(&e.image_path)?;
        let fix = load_fixations(&e.fixation_path, w, h)?;
        let sigma = cfg.gt_sigma.unwrap_or_else(|| default_sigma(w, h));
        let gt = ground_truth_map(&fix, w, h, sigma)?;
        save_channel_map(&out, &gt)?;
        save_gray_png(&out.with_extension("png"), &gt)?;
        Ok(true)
    })
}

fn sample_entry(cfg: &RunConfig, e: &CorpusEntry, spec: &SamplingSpec) -> Result<Vec<LabeledSample>> {
    let fpath = cfg.feature_path(&e.image_id);
    let gpath = cfg.gt_path(&e.image_id);
    if !fpath.exists() {
        return Err(Error::MissingUpstream(fpath));
    }
    if !gpath.exists() {
        return Err(Error::MissingUpstream(gpath));
    }
    let mut stack = load_stack(&fpath)?;
    for &c in &cfg.zero_channels {
        stack = stack.with_channel_zeroed(c);
    }
    let gt = SaliencyMap::from_plane(load_channel_map(&gpath, stack.width(), stack.height(), "ground truth")?);
    let masks = percentile_regions(&gt, spec)?;
    Ok(draw_samples(&stack, &masks, spec, &e.image_id)?.samples)
}

/// Row counts of the train and test sample files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSummary {
    pub train_rows: usize,
    pub test_rows: usize,
}

pub fn cmd_sample(cfg: &RunConfig) -> Result<SampleSummary> {
    cfg.validate()?;
    let corpus = cfg.corpus()?;
    let split = SplitSpec {
        train_fraction: cfg.train_fraction,
        rng_seed: derive_seed(cfg.seed, "split"),
    };
    let (train, test) = split_corpus(&corpus, &split)?;
    let spec = SamplingSpec {
        rng_seed: derive_seed(cfg.seed, "sample"),
        ..cfg.sampling
    };
    let dir = cfg.dir("samples")?;
    let mut split_csv = String::from("image_id,set\n");
    for e in &corpus.entries {
        let set = if train.entries.iter().any(|t| t.image_id == e.image_id) { "train" } else { "test" };
        let _ = writeln!(split_csv, "{},{set}", e.image_id);
    }
    let write = |p: PathBuf, s: String| std::fs::write(&p, s).map_err(|e| Error::io(&p, e));
    write(dir.join("split.csv"), split_csv)?;

    let mut rows = [0usize; 2];
    for (k, (name, part)) in [("train", &train), ("test", &test)].into_iter().enumerate() {
        let per_image: Vec<Vec<LabeledSample>> = part
            .entries
            .par_iter()
            .map(|e| sample_entry(cfg, e, &spec))
            .collect::<Result<_>>()?;
        let samples: Vec<LabeledSample> = per_image.into_iter().flatten().collect();
        if samples.is_empty() {
            warn!("{name} split produced no samples");
            continue;
        }
        let (m, y) = assemble_matrix(&samples)?;
        save_smpl(&cfg.samples_path(name), &m, &y)?;
        write(dir.join(format!("{name}.csv")), format_samples_csv(&samples))?;
        rows[k] = samples.len();
    }
    info!("sample: {} train rows, {} test rows", rows[0], rows[1]);
    Ok(SampleSummary {
        train_rows: rows[0],
        test_rows: rows[1],
    })
}

pub fn cmd_train(cfg: &RunConfig, methods: &[Method]) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (x, y) = load_smpl(&cfg.samples_path("train"))?;
    let stats = fit_normalizer(&x);
    let xn = apply_normalizer(&stats, &x);
    cfg.dir("models")?;
    methods
        .iter()
        .map(|&m| {
            let model = cfg.learner(m).train(&xn, &y, derive_seed(cfg.seed, &format!("train-{m}")))?;
            let path = cfg.model_path(m);
            save_model(&path, &model, Some(&stats))?;
            info!("train: wrote {}", path.display());
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Trained models scored on the test split.
    Holdout,
    /// Stratified k-fold cross-validation on the training samples.
    Cv,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Holdout => "holdout",
            EvalMode::Cv => "cv",
        }
    }
}

pub fn cmd_eval(cfg: &RunConfig, methods: &[Method], mode: EvalMode) -> Result<ReportFiles> {
    cfg.validate()?;
    let reports: Vec<(String, EvalReport)> = match mode {
        EvalMode::Holdout => {
            let (x, y) = load_smpl(&cfg.samples_path("test"))?;
            methods
                .iter()
                .map(|&m| {
                    let (model, stats) = load_model(&cfg.model_path(m))?;
                    let xn = match &stats {
                        Some(s) => apply_normalizer(s, &x),
                        None => x.clone(),
                    };
                    Ok((m.to_string(), evaluate_model(&model, &xn, &y)?))
                })
                .collect::<Result<_>>()?
        }
        EvalMode::Cv => {
            let (x, y) = load_smpl(&cfg.samples_path("train"))?;
            let cv = CvSpec {
                folds: cfg.folds,
                rng_seed: derive_seed(cfg.seed, "cv"),
            };
            methods
                .iter()
                .map(|&m| Ok((m.to_string(), kfold_cv(&x, &y, &cfg.learner(m), &cv)?)))
                .collect::<Result<_>>()?
        }
    };
    for (name, r) in &reports {
        info!(
            "eval ({}): {name} CA {:.4} AUC {:.4}",
            mode.name(),
            r.ca,
            r.auc
        );
    }
    compare_report(&reports, &cfg.out.join("eval").join(mode.name()))
}

pub fn cmd_predict(cfg: &RunConfig, method: Method) -> Result<StageSummary> {
    cfg.validate()?;
    let model_path = cfg.model_path(method);
    let (model, stats) = load_model(&model_path)?;
    let stats = stats.ok_or_else(|| Error::CorruptFile(format!("{} has no normalizer", model_path.display())))?;
    let corpus = cfg.corpus()?;
    let dir = cfg.dir(&format!("predict/{method}"))?;
    run_per_entry("predict", &corpus, |e| {
        let fpath = cfg.feature_path(&e.image_id);
        if !fpath.exists() {
            return Err(Error::MissingUpstream(fpath));
        }
        let mut stack = load_stack(&fpath)?;
        for &c in &cfg.zero_channels {
            stack = stack.with_channel_zeroed(c);
        }
        let map = predict_map(&model, &stack, &stats, cfg.stride)?;
        save_gray_png(&dir.join(format!("{}.png", e.image_id)), &map)?;
        Ok(true)
    })
}
