use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use saliency::learners::Method;
use saliency::pipeline::{self, EvalMode, RunConfig};
use saliency::Result;

#[derive(Parser)]
#[command(name = "saliency", version, about = "Learned visual saliency pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus manifest CSV
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Global seed; stage seeds are derived from it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical CPUs)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Recompute outputs that look up to date
    #[arg(long, global = true)]
    force: bool,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Svm,
    C45,
    Knn,
    Nb,
    Adaboost,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Svm => Method::Svm,
            MethodArg::C45 => Method::C45,
            MethodArg::Knn => Method::Knn,
            MethodArg::Nb => Method::Nb,
            MethodArg::Adaboost => Method::AdaBoost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Holdout,
    Cv,
}

#[derive(Args)]
struct MethodChoice {
    #[arg(long, value_enum, default_value = "svm")]
    method: MethodArg,
    /// Use all five methods
    #[arg(long, conflicts_with = "method")]
    all_methods: bool,
}

impl MethodChoice {
    fn methods(&self) -> Vec<Method> {
        if self.all_methods {
            Method::ALL.to_vec()
        } else {
            vec![self.method.into()]
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the 34-channel feature stack of every image
    Extract,
    /// Build ground-truth saliency maps from fixations
    Gt {
        /// Gaussian sigma in pixels (default 2% of the larger side)
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Split the corpus and draw labelled pixel samples
    Sample,
    /// Train one or all classifiers on the training samples
    Train(MethodChoice),
    /// Evaluate classifiers and write metrics and ROC curves
    Eval {
        #[command(flatten)]
        methods: MethodChoice,
        #[arg(long, value_enum, default_value = "holdout")]
        mode: ModeArg,
    },
    /// Write a predicted saliency map for every image
    Predict {
        #[arg(long, value_enum, default_value = "svm")]
        method: MethodArg,
        /// Score every n-th pixel and interpolate
        #[arg(long)]
        stride: Option<usize>,
    },
}

fn build_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &c.manifest {
        cfg.manifest = Some(m.clone());
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.force |= c.force;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = build_config(&cli.common)?;
    if let Some(j) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| saliency::Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Extract => pipeline::cmd_extract(&cfg).map(drop),
        Command::Gt { sigma } => {
            if sigma.is_some() {
                cfg.gt_sigma = sigma;
            }
            pipeline::cmd_gt(&cfg).map(drop)
        }
        Command::Sample => pipeline::cmd_sample(&cfg).map(drop),
        Command::Train(m) => pipeline::cmd_train(&cfg, &m.methods()).map(drop),
        Command::Eval { methods, mode } => {
            let mode = match mode {
                ModeArg::Holdout => EvalMode::Holdout,
                ModeArg::Cv => EvalMode::Cv,
            };
            let files = pipeline::cmd_eval(&cfg, &methods.methods(), mode)?;
            println!("{}", files.metrics_csv.display());
            Ok(())
        }
        Command::Predict { method, stride } => {
            if let Some(s) = stride {
                cfg.stride = s;
            }
            pipeline::cmd_predict(&cfg, method.into()).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
