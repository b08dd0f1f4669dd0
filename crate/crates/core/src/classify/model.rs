//! Self-describing model container (JSON): format tag, version, the
//! feature normalization the model expects, free-form training metadata,
//! and the model parameters themselves.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifyError, ForestModel, ForestParams, KnnModel, Normalization, Ranker, Sample};

pub const MODEL_FORMAT: &str = "freqscope-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Forest,
}

impl std::str::FromStr for ModelKind {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knn" => Ok(ModelKind::Knn),
            "rf" | "forest" => Ok(ModelKind::Forest),
            other => Err(ClassifyError::InvalidParam(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Knn(KnnModel),
    Forest(ForestModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Knn(_) => ModelKind::Knn,
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn train(kind: ModelKind, k: usize, forest: ForestParams, train: &[Sample]) -> Result<Self, ClassifyError> {
        Ok(match kind {
            ModelKind::Knn => Model::Knn(KnnModel::fit(k, train)?),
            ModelKind::Forest => Model::Forest(ForestModel::train(train, forest)?),
        })
    }

    fn inner(&self) -> &dyn Ranker {
        match self {
            Model::Knn(m) => m,
            Model::Forest(m) => m,
        }
    }
}

impl Ranker for Model {
    fn classes(&self) -> &[String] {
        self.inner().classes()
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn rank(&self, x: &[f64]) -> Result<Vec<(String, f64)>, ClassifyError> {
        self.inner().rank(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub normalization: Normalization,
    pub metadata: BTreeMap<String, String>,
    pub model: Model,
}

impl TrainedModel {
    pub fn new(model: Model, normalization: Normalization) -> Self {
        TrainedModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            normalization,
            metadata: BTreeMap::new(),
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        let text = serde_json::to_string(self).map_err(|e| ClassifyError::ModelFile(e.to_string()))?;
        fs::write(path, text).map_err(|e| ClassifyError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let text =
            fs::read_to_string(path).map_err(|e| ClassifyError::ModelFile(format!("{}: {e}", path.display())))?;
        let m: TrainedModel = serde_json::from_str(&text).map_err(|e| ClassifyError::ModelFile(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(ClassifyError::ModelFile(format!("not a {MODEL_FORMAT} file")));
        }
        if m.version != MODEL_VERSION {
            return Err(ClassifyError::ModelFile(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load() {
        let train = vec![(vec![0.0, 1.0], "a".to_string()), (vec![1.0, 0.0], "b".to_string())];
        let dir = tempfile::tempdir().unwrap();
        for kind in [ModelKind::Knn, ModelKind::Forest] {
            let model = Model::train(kind, 1, ForestParams { n_trees: 3, ..Default::default() }, &train).unwrap();
            let mut tm = TrainedModel::new(model, Normalization::MinmaxPerProfile);
            tm.metadata.insert("dataset".into(), "x".into());
            let path = dir.path().join("m.json");
            tm.save(&path).unwrap();
            let back = TrainedModel::load(&path).unwrap();
            assert_eq!(back, tm);
            assert_eq!(back.model.rank(&[0.0, 1.0]).unwrap()[0].0, "a");
        }
        std::fs::write(dir.path().join("bad.json"), "{\"format\":\"other\"}").unwrap();
        assert!(TrainedModel::load(&dir.path().join("bad.json")).is_err());
    }
}
