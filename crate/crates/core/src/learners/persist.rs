use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::model::{FittedModel, Predictor};
use super::{BoostedEnsemble, ForestEnsemble, ForestParams, KnnModel, RegressionTree, TreeNode, TreeParams};
use crate::dataset::{ColumnEncoding, ColumnRole, ColumnSchema, EncodingSpec};
use crate::matrix::Matrix;

/// Version written into every model file.
pub const FORMAT_VERSION: u32 = 1;
const SUPPORTED_VERSIONS: &[u32] = &[FORMAT_VERSION];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format_version {found}; supported versions: {supported:?}")]
    UnsupportedVersion { found: Value, supported: Vec<u32> },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model_kind: String,
    schema: Vec<ColumnSchema>,
    encoding: EncodingSpec,
    params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shrinkage: Option<f64>,
    #[serde(default)]
    trees: Vec<Vec<TreeNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knn: Option<KnnPayload>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KnnPayload {
    k: usize,
    means: Vec<f64>,
    stds: Vec<f64>,
    targets: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KnnParams {
    k: usize,
}

fn tree_arrays(trees: &[RegressionTree]) -> Vec<Vec<TreeNode>> {
    trees.iter().map(|t| t.nodes().to_vec()).collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("parameters serialize to JSON")
}

/// Serializes a model as a pretty-printed JSON document.
pub fn save_model(model: &FittedModel) -> String {
    let mut doc = ModelDocument {
        format_version: FORMAT_VERSION,
        model_kind: model.model_kind().to_string(),
        schema: model.schema().to_vec(),
        encoding: model.encoding().clone(),
        params: Value::Null,
        base_score: None,
        shrinkage: None,
        trees: Vec::new(),
        knn: None,
    };
    match model.predictor() {
        Predictor::Tree(t) => {
            doc.trees = tree_arrays(std::slice::from_ref(t));
            doc.params = Value::Object(Default::default());
        }
        Predictor::Boosted(b) => {
            doc.params = to_value(b.params());
            doc.base_score = Some(b.base_score());
            doc.shrinkage = Some(b.shrinkage());
            doc.trees = tree_arrays(b.trees());
        }
        Predictor::Forest(f) => {
            doc.params = to_value(f.params());
            doc.trees = tree_arrays(f.trees());
        }
        Predictor::Knn(k) => {
            doc.params = to_value(&KnnParams { k: k.k() });
            doc.knn = Some(KnnPayload {
                k: k.k(),
                means: k.means().to_vec(),
                stds: k.stds().to_vec(),
                targets: k.targets().to_vec(),
                rows: k.training_matrix().rows().map(<[f64]>::to_vec).collect(),
            });
        }
    }
    serde_json::to_string_pretty(&doc).expect("model serializes to JSON")
}

fn malformed(msg: impl Into<String>) -> ModelError {
    ModelError::Malformed(msg.into())
}

fn check_version(raw: &Value) -> Result<(), ModelError> {
    let found = raw
        .get("format_version")
        .ok_or_else(|| malformed("missing format_version"))?;
    let ok = found
        .as_u64()
        .is_some_and(|v| SUPPORTED_VERSIONS.iter().any(|&s| u64::from(s) == v));
    if !ok {
        return Err(ModelError::UnsupportedVersion {
            found: found.clone(),
            supported: SUPPORTED_VERSIONS.to_vec(),
        });
    }
    Ok(())
}

fn check_schema(schema: &[ColumnSchema], encoding: &EncodingSpec) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for c in schema {
        if !seen.insert(c.name.as_str()) {
            return Err(malformed(format!("duplicate schema column `{}`", c.name)));
        }
    }
    let find = |name: &str| schema.iter().find(|c| c.name == name);
    match find(&encoding.target) {
        Some(c) if c.role == ColumnRole::Target => {}
        _ => {
            return Err(malformed(format!(
                "encoding target `{}` is not a target column of the schema",
                encoding.target
            )))
        }
    }
    for col in &encoding.columns {
        if find(&col.name).is_none() {
            return Err(malformed(format!("encoded column `{}` is not in the schema", col.name)));
        }
        if let ColumnEncoding::OneHot { levels } = &col.encoding {
            if levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(malformed(format!(
                    "levels of `{}` are not sorted and distinct",
                    col.name
                )));
            }
        }
    }
    Ok(())
}

fn params<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, ModelError> {
    serde_json::from_value(v).map_err(|e| malformed(format!("bad params: {e}")))
}

fn build_trees(arrays: Vec<Vec<TreeNode>>, width: usize) -> Result<Vec<RegressionTree>, ModelError> {
    arrays
        .into_iter()
        .enumerate()
        .map(|(i, nodes)| RegressionTree::from_nodes(nodes, width).map_err(|e| malformed(format!("tree {i}: {e}"))))
        .collect()
}

fn finite(name: &str, v: Option<f64>) -> Result<f64, ModelError> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(_) => Err(malformed(format!("{name} is not finite"))),
        None => Err(malformed(format!("missing {name}"))),
    }
}

/// Parses and validates a model document written by [`save_model`].
///
/// The version is checked before anything else, so a file from a newer
/// format fails with [`ModelError::UnsupportedVersion`] even if its layout
/// changed.
pub fn load_model(text: &str) -> Result<FittedModel, ModelError> {
    let raw: Value = serde_json::from_str(text)?;
    check_version(&raw)?;
    let doc: ModelDocument = serde_json::from_value(raw)?;
    check_schema(&doc.schema, &doc.encoding)?;
    let width = doc.encoding.width();

    let predictor = match doc.model_kind.as_str() {
        "tree" => {
            let mut trees = build_trees(doc.trees, width)?;
            if trees.len() != 1 {
                return Err(malformed(format!("tree model holds {} trees", trees.len())));
            }
            Predictor::Tree(trees.remove(0))
        }
        "boosted" => {
            let p: TreeParams = params(doc.params)?;
            let trees = build_trees(doc.trees, width)?;
            if trees.len() != p.num_trees {
                return Err(malformed(format!(
                    "{} trees but num_trees = {}",
                    trees.len(),
                    p.num_trees
                )));
            }
            let base = finite("base_score", doc.base_score)?;
            let nu = finite("shrinkage", doc.shrinkage)?;
            Predictor::Boosted(BoostedEnsemble::from_parts(base, nu, trees, p, width))
        }
        "forest" => {
            let p: ForestParams = params(doc.params)?;
            let trees = build_trees(doc.trees, width)?;
            if trees.is_empty() || trees.len() != p.n_trees {
                return Err(malformed(format!("{} trees but n_trees = {}", trees.len(), p.n_trees)));
            }
            Predictor::Forest(ForestEnsemble::from_parts(trees, p, width))
        }
        "knn" => {
            let payload = doc.knn.ok_or_else(|| malformed("missing knn payload"))?;
            let x = Matrix::from_rows(width, &payload.rows)
                .ok_or_else(|| malformed(format!("knn rows do not all have width {width}")))?;
            let model =
                KnnModel::from_parts(x, payload.targets, payload.k, payload.means, payload.stds).map_err(malformed)?;
            Predictor::Knn(model)
        }
        other => return Err(malformed(format!("unknown model_kind `{other}`"))),
    };
    Ok(FittedModel::from_parts(doc.schema, doc.encoding, predictor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;
    use crate::learners::{train, LearnerConfig};

    fn small(config: LearnerConfig) -> FittedModel {
        train(&config, &synthesize(120, 4)).unwrap()
    }

    fn configs() -> Vec<LearnerConfig> {
        vec![
            LearnerConfig::Tree(TreeParams::default()),
            LearnerConfig::Boosted(TreeParams {
                num_trees: 8,
                ..Default::default()
            }),
            LearnerConfig::Forest(ForestParams {
                n_trees: 4,
                ..Default::default()
            }),
            LearnerConfig::Knn { k: 3 },
            LearnerConfig::Mean,
        ]
    }

    #[test]
    fn round_trip_is_identical() {
        for c in configs() {
            let m = small(c);
            let text = save_model(&m);
            let back = load_model(&text).unwrap();
            assert_eq!(back, m, "{}", c.name());
            assert_eq!(save_model(&back), text);
        }
    }

    #[test]
    fn document_layout() {
        let m = small(LearnerConfig::Boosted(TreeParams {
            num_trees: 2,
            ..Default::default()
        }));
        let v: Value = serde_json::from_str(&save_model(&m)).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            [
                "format_version",
                "model_kind",
                "schema",
                "encoding",
                "params",
                "base_score",
                "shrinkage",
                "trees"
            ]
        );
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["trees"].as_array().unwrap().len(), 2);
        assert!(v["trees"][0][0].get("f").is_some() || v["trees"][0][0].get("v").is_some());
    }

    #[test]
    fn unsupported_version_is_reported_first() {
        let m = small(LearnerConfig::Mean);
        let mut v: Value = serde_json::from_str(&save_model(&m)).unwrap();
        v["format_version"] = Value::from(2);
        v["trees"] = Value::from("garbage");
        let err = load_model(&v.to_string()).unwrap_err();
        assert!(matches!(err, ModelError::UnsupportedVersion { .. }));
        assert!(err.to_string().contains("[1]"), "{err}");
    }

    #[test]
    fn rejects_truncated_or_inconsistent_files() {
        let text = save_model(&small(LearnerConfig::Boosted(TreeParams {
            num_trees: 3,
            ..Default::default()
        })));
        assert!(matches!(load_model(&text[..text.len() / 2]), Err(ModelError::Json(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["trees"].as_array_mut().unwrap().pop();
        assert!(matches!(load_model(&v.to_string()), Err(ModelError::Malformed(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["trees"][0][0] = serde_json::json!({"f": 0, "t": 1.0, "l": 0, "r": 0});
        assert!(matches!(load_model(&v.to_string()), Err(ModelError::Malformed(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["model_kind"] = Value::from("svm");
        assert!(matches!(load_model(&v.to_string()), Err(ModelError::Malformed(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("format_version");
        assert!(matches!(load_model(&v.to_string()), Err(ModelError::Malformed(_))));
    }
}
