//! The five classifiers and a common model type.

pub mod boost;
pub mod io;
pub mod knn;
pub mod nb;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

pub use boost::{adaboost_run, adaboost_train, BoostModel, BoostParams, RoundRecord};
pub use io::{load_model, read_model, save_model, write_model};
pub use knn::{knn_score, KnnModel, KnnParams};
pub use nb::{nb_train, NbModel, NbParams};
pub use svm::{rbf_kernel, svm_solve, svm_train, SvmModel, SvmParams, SvmSolution};
pub use tree::{c45_train, TreeNode, TreeParams};

use crate::error::{Error, Result};
use crate::types::{Label, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Svm,
    C45,
    Knn,
    Nb,
    AdaBoost,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::AdaBoost, Method::Svm, Method::Knn, Method::C45, Method::Nb];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svm => "svm",
            Method::C45 => "c45",
            Method::Knn => "knn",
            Method::Nb => "nb",
            Method::AdaBoost => "adaboost",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

/// Hyperparameters for every learner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LearnerParams {
    pub svm: SvmParams,
    pub tree: TreeParams,
    pub knn: KnnParams,
    pub nb: NbParams,
    pub boost: BoostParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub method: Method,
    pub params: LearnerParams,
}

impl LearnerSpec {
    pub fn new(method: Method) -> Self {
        LearnerSpec {
            method,
            params: LearnerParams::default(),
        }
    }

    pub fn train(&self, x: &Matrix, labels: &[Label], seed: u64) -> Result<TrainedModel> {
        let p = &self.params;
        Ok(match self.method {
            Method::Svm => TrainedModel::Svm(svm_train(x, labels, &p.svm)?),
            Method::C45 => TrainedModel::Tree(c45_train(x, labels, &p.tree)?),
            Method::Knn => TrainedModel::Knn(KnnModel::new(x.clone(), labels.to_vec(), p.knn)?),
            Method::Nb => TrainedModel::Nb(nb_train(x, labels, &p.nb)?),
            Method::AdaBoost => TrainedModel::Boost(adaboost_train(x, labels, &p.boost, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svm(SvmModel),
    Tree(TreeNode),
    Knn(KnnModel),
    Nb(NbModel),
    Boost(BoostModel),
}

impl TrainedModel {
    pub fn method(&self) -> Method {
        match self {
            TrainedModel::Svm(_) => Method::Svm,
            TrainedModel::Tree(_) => Method::C45,
            TrainedModel::Knn(_) => Method::Knn,
            TrainedModel::Nb(_) => Method::Nb,
            TrainedModel::Boost(_) => Method::AdaBoost,
        }
    }

    /// Continuous score; larger means more likely positive.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            TrainedModel::Svm(m) => m.decision(x),
            TrainedModel::Tree(t) => t.score(x),
            TrainedModel::Knn(m) => m.score(x),
            TrainedModel::Nb(m) => m.score(x),
            TrainedModel::Boost(m) => m.score(x),
        }
    }

    /// Scores at or above this value are labelled +1.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Svm(_) | TrainedModel::Boost(_) => 0.0,
            TrainedModel::Tree(_) | TrainedModel::Knn(_) | TrainedModel::Nb(_) => 0.5,
        }
    }

    pub fn label_for(&self, score: f64) -> Label {
        if score >= self.threshold() {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> Label {
        self.label_for(self.score(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("forest".parse::<Method>().is_err());
    }

    #[test]
    fn ties_go_positive() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = vec![Label::Negative, Label::Positive, Label::Negative, Label::Positive];
        let mut spec = LearnerSpec::new(Method::Knn);
        spec.params.knn.k = 2;
        let m = spec.train(&x, &y, 0).unwrap();
        assert_eq!(m.score(&[1.5]), 0.5);
        assert_eq!(m.predict_label(&[1.5]), Label::Positive);
    }
}
