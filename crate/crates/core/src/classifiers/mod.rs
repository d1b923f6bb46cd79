//! Trainable models behind one contract: rows of reals in, P(deceptive) out.

pub mod artifact;
pub mod boost;
pub mod cnn;
pub mod forest;
pub mod nb;
pub mod svm;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use artifact::{decode_artifact, encode_artifact, load_model, save_model, write_artifact, ArtifactHeader, ARTIFACT_FORMAT_VERSION};
pub use boost::{boost_train, BoostConfig, BoostModel};
pub use cnn::{cnn_train, CnnConfig, CnnModel};
pub use forest::{forest_train, ForestConfig, ForestModel};
pub use nb::{mnb_train, MnbModel, NbConfig};
pub use svm::{kernel_eval, svm_train, Kernel, SvmConfig, SvmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub unit_id: String,
    pub score: f64,
    pub label: Label,
}

impl Prediction {
    pub fn new(unit_id: impl Into<String>, score: f64) -> Prediction {
        Prediction {
            unit_id: unit_id.into(),
            score,
            label: Label::from_score(score),
        }
    }
}

/// Logistic map with the argument clamped so the result stays strictly inside (0, 1).
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-30.0, 30.0)).exp())
}

pub trait Classifier {
    fn input_dim(&self) -> usize;

    /// P(deceptive) for one row.
    fn score(&self, x: &[f64]) -> Result<f64>;

    fn predict(&self, unit_id: &str, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(Prediction::new(unit_id, self.score(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    Mnb,
    Forest,
    Boost,
    Cnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Mnb => "mnb",
            ModelKind::Forest => "forest",
            ModelKind::Boost => "boost",
            ModelKind::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Svm(SvmModel),
    Mnb(MnbModel),
    Forest(ForestModel),
    Boost(BoostModel),
    Cnn(CnnModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Svm(_) => ModelKind::Svm,
            Model::Mnb(_) => ModelKind::Mnb,
            Model::Forest(_) => ModelKind::Forest,
            Model::Boost(_) => ModelKind::Boost,
            Model::Cnn(_) => ModelKind::Cnn,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Svm(m) => m,
            Model::Mnb(m) => m,
            Model::Forest(m) => m,
            Model::Boost(m) => m,
            Model::Cnn(m) => m,
        }
    }

    pub fn config_json(&self) -> serde_json::Value {
        let v = match self {
            Model::Svm(m) => serde_json::to_value(&m.config),
            Model::Mnb(m) => serde_json::to_value(&m.config),
            Model::Forest(m) => serde_json::to_value(&m.config),
            Model::Boost(m) => serde_json::to_value(&m.config),
            Model::Cnn(m) => serde_json::to_value(&m.config),
        };
        v.expect("model configs serialize")
    }
}

impl Classifier for Model {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.inner().score(x)
    }
}

/// Shared training-set checks: matching lengths, equal widths, finite values, both classes.
pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[Label]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::contract(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let dim = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::contract("training rows have differing lengths"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite feature value in training data"));
    }
    for class in Label::BOTH {
        if !y.contains(&class) {
            return Err(Error::data(format!("training data has no {class} examples")));
        }
    }
    Ok(dim)
}

#[cfg(test)]
pub(crate) mod testdata {
    use crate::label::Label;

    /// 1D data: negatives truthful, positives deceptive.
    pub fn line() -> (Vec<Vec<f64>>, Vec<Label>) {
        let xs = [-3.0, -2.2, -1.5, -0.7, -0.2, 0.3, 0.9, 1.4, 2.1, 3.3];
        let y = xs
            .iter()
            .map(|&v| if v < 0.0 { Label::Truthful } else { Label::Deceptive })
            .collect();
        (xs.iter().map(|&v| vec![v]).collect(), y)
    }
}
