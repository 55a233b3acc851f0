use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::graph::{ImportSource, NodeOp, PipelineGraph};
use super::PipelineError;
use crate::dataset::{
    add_rows, clean_missing, edit_metadata, parse_csv, select_columns, split_data, to_csv, ColumnRole, Dataset,
    SCORED_LABELS,
};
use crate::learners::{evaluate_scored, train, FittedModel};
use crate::metrics::EvaluationReport;
use crate::Error;

/// A value produced on an output port.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Dataset(Dataset),
    Model(Arc<FittedModel>),
    Report(EvaluationReport),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NodeStatus {
    Succeeded,
    Failed {
        error: String,
    },
    /// Not run because an upstream node failed or was skipped.
    Skipped {
        blocked_by: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRun {
    pub id: String,
    pub kind: &'static str,
    pub status: NodeStatus,
    /// Output port name → value, empty unless the node succeeded.
    pub outputs: BTreeMap<&'static str, Artifact>,
}

/// Per-node results in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub nodes: Vec<NodeRun>,
}

impl RunResult {
    pub fn node(&self, id: &str) -> Option<&NodeRun> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn output(&self, id: &str, port: &str) -> Option<&Artifact> {
        self.node(id)?.outputs.get(port)
    }

    pub fn succeeded(&self) -> bool {
        self.nodes.iter().all(|n| n.status == NodeStatus::Succeeded)
    }

    /// `(node, error)` for every failed node.
    pub fn failures(&self) -> Vec<(&str, &str)> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.status {
                NodeStatus::Failed { error } => Some((n.id.as_str(), error.as_str())),
                _ => None,
            })
            .collect()
    }
}

type Outputs = BTreeMap<&'static str, Artifact>;

fn one(port: &'static str, a: Artifact) -> Outputs {
    BTreeMap::from([(port, a)])
}

fn dataset_in<'a>(inputs: &'a BTreeMap<&'static str, &'a Artifact>, port: &str) -> &'a Dataset {
    match inputs.get(port) {
        Some(Artifact::Dataset(d)) => d,
        other => unreachable!("port types are checked at parse time, got {other:?}"),
    }
}

fn execute(
    op: &NodeOp,
    inputs: &BTreeMap<&'static str, &Artifact>,
    sources: &BTreeMap<String, Dataset>,
) -> Result<Outputs, String> {
    let lookup = |name: &str| {
        sources
            .get(name)
            .cloned()
            .ok_or_else(|| format!("no run input named `{name}`"))
    };
    let err = |e: Error| e.to_string();
    let ds = |port| dataset_in(inputs, port);
    Ok(match op {
        NodeOp::ImportCsv(ImportSource::Input(name)) => one("dataset", Artifact::Dataset(lookup(name)?)),
        NodeOp::ImportCsv(ImportSource::Path(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            one(
                "dataset",
                Artifact::Dataset(parse_csv(&text, None).map_err(|e| e.to_string())?),
            )
        }
        NodeOp::AddRows => one(
            "dataset",
            Artifact::Dataset(add_rows(ds("left"), ds("right")).map_err(|e| e.to_string())?),
        ),
        NodeOp::SelectColumns(cols) => one(
            "dataset",
            Artifact::Dataset(select_columns(ds("dataset"), cols).map_err(|e| e.to_string())?),
        ),
        NodeOp::CleanMissing => one("dataset", Artifact::Dataset(clean_missing(ds("dataset")).0)),
        NodeOp::EditMetadata { column, kind } => one(
            "dataset",
            Artifact::Dataset(edit_metadata(ds("dataset"), column, *kind).map_err(|e| e.to_string())?),
        ),
        NodeOp::SplitData { fraction, seed } => {
            let (a, b) = split_data(ds("dataset"), *fraction, *seed).map_err(|e| e.to_string())?;
            BTreeMap::from([("first", Artifact::Dataset(a)), ("second", Artifact::Dataset(b))])
        }
        NodeOp::TrainModel { learner, include_date } => {
            let data = if *include_date {
                ds("dataset")
                    .with_role("Date", ColumnRole::Feature)
                    .map_err(|e| e.to_string())?
            } else {
                ds("dataset").clone()
            };
            one("model", Artifact::Model(Arc::new(train(learner, &data).map_err(err)?)))
        }
        NodeOp::ScoreModel => {
            let Some(Artifact::Model(m)) = inputs.get("model") else {
                unreachable!("port types are checked at parse time")
            };
            one("dataset", Artifact::Dataset(m.score(ds("dataset")).map_err(err)?))
        }
        NodeOp::EvaluateModel => one("report", Artifact::Report(evaluate_scored(ds("dataset")).map_err(err)?)),
        NodeOp::ConvertToCsv => one("text", Artifact::Text(to_csv(ds("dataset")))),
        NodeOp::WebInput { source } => match inputs.get("dataset") {
            Some(a) => one("dataset", (*a).clone()),
            None => one(
                "dataset",
                Artifact::Dataset(lookup(
                    source
                        .as_deref()
                        .expect("validated: unconnected web_input has a source"),
                )?),
            ),
        },
        NodeOp::WebOutput => one("dataset", Artifact::Dataset(ds("dataset").clone())),
    })
}

/// Executes every node in topological order. A failing node marks its
/// dependents skipped; independent branches still run.
pub fn run_graph(g: &PipelineGraph, sources: &BTreeMap<String, Dataset>) -> RunResult {
    let mut runs: Vec<Option<NodeRun>> = vec![None; g.nodes.len()];
    let mut order_pos = Vec::with_capacity(g.order.len());
    for &i in &g.order {
        let node = &g.nodes[i];
        let mut inputs = BTreeMap::new();
        let mut blocked = None;
        for e in g.edges.iter().filter(|e| e.to == i) {
            let upstream = runs[e.from].as_ref().expect("topological order runs producers first");
            match &upstream.status {
                NodeStatus::Succeeded => {
                    inputs.insert(e.to_port, &upstream.outputs[e.from_port]);
                }
                NodeStatus::Failed { .. } => blocked = blocked.or(Some(upstream.id.clone())),
                NodeStatus::Skipped { blocked_by } => blocked = blocked.or(Some(blocked_by.clone())),
            }
        }
        let (status, outputs) = match blocked {
            Some(b) => (NodeStatus::Skipped { blocked_by: b }, BTreeMap::new()),
            None => match execute(&node.op, &inputs, sources) {
                Ok(out) => (NodeStatus::Succeeded, out),
                Err(error) => (NodeStatus::Failed { error }, BTreeMap::new()),
            },
        };
        runs[i] = Some(NodeRun {
            id: node.id.clone(),
            kind: node.op.kind(),
            status,
            outputs,
        });
        order_pos.push(i);
    }
    RunResult {
        nodes: order_pos
            .into_iter()
            .map(|i| runs[i].take().expect("every node ran"))
            .collect(),
    }
}

/// CSV text of a scored dataset output. `endpoint` is `node.port`, or just
/// `node` when the node has a single dataset output.
pub fn export_scored_csv(run: &RunResult, endpoint: &str) -> Result<String, PipelineError> {
    let (id, port) = match endpoint.rsplit_once('.') {
        Some((n, p)) if run.node(n).is_some() => (n, Some(p)),
        _ => (endpoint, None),
    };
    let node = run.node(id).ok_or_else(|| PipelineError::UnknownNode(id.to_string()))?;
    if node.status != NodeStatus::Succeeded {
        return Err(PipelineError::NoOutput(id.to_string()));
    }
    let artifact = match port {
        Some(p) => node.outputs.get(p),
        None if node.outputs.len() == 1 => node.outputs.values().next(),
        None => None,
    };
    match artifact {
        Some(Artifact::Dataset(ds)) if ds.schema().last().is_some_and(|c| c.name == SCORED_LABELS) => Ok(to_csv(ds)),
        Some(Artifact::Dataset(_)) => Err(PipelineError::NotScored(endpoint.to_string())),
        _ => Err(PipelineError::NotADataset(endpoint.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;
    use crate::pipeline::{parse_graph, WEB_PASSTHROUGH};

    fn sources(pairs: &[(&str, Dataset)]) -> BTreeMap<String, Dataset> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn web_passthrough_returns_its_input() {
        let g = parse_graph(WEB_PASSTHROUGH).unwrap();
        let ds = synthesize(10, 3);
        let run = run_graph(&g, &sources(&[("request", ds.clone())]));
        assert!(run.succeeded());
        assert_eq!(run.output("output", "dataset"), Some(&Artifact::Dataset(ds)));
    }

    #[test]
    fn failure_skips_dependents_only() {
        let g = parse_graph(
            r#"{"nodes":[
                {"id":"in","kind":"import_csv","params":{"source":"d"}},
                {"id":"clean","kind":"clean_missing"},
                {"id":"train","kind":"train_model","params":{"learner":{"algo":"tree"}}},
                {"id":"score","kind":"score_model"},
                {"id":"csv","kind":"convert_to_csv"}
            ],"edges":[
                {"from":"in.dataset","to":"clean.dataset"},
                {"from":"clean.dataset","to":"train.dataset"},
                {"from":"train.model","to":"score.model"},
                {"from":"clean.dataset","to":"score.dataset"},
                {"from":"in.dataset","to":"csv.dataset"}
            ]}"#,
        )
        .unwrap();
        let all_missing = parse_csv("Model,Year,Battery,Price,Miles\n,,,,\n,,,,\n", None).unwrap();
        let run = run_graph(&g, &sources(&[("d", all_missing)]));
        assert_eq!(run.failures().len(), 1);
        let (node, error) = run.failures()[0];
        assert_eq!(node, "train");
        assert!(error.contains("empty training set"), "{error}");
        assert_eq!(
            run.node("score").unwrap().status,
            NodeStatus::Skipped {
                blocked_by: "train".into()
            }
        );
        assert_eq!(run.node("csv").unwrap().status, NodeStatus::Succeeded);
    }

    #[test]
    fn missing_source_fails_the_import_node() {
        let g = parse_graph(r#"{"nodes":[{"id":"a","kind":"import_csv","params":{"source":"nope"}}]}"#).unwrap();
        let run = run_graph(&g, &BTreeMap::new());
        assert_eq!(run.failures(), vec![("a", "no run input named `nope`")]);
    }

    #[test]
    fn export_checks_artifact() {
        let g = parse_graph(
            r#"{"nodes":[
                {"id":"in","kind":"import_csv","params":{"source":"d"}},
                {"id":"train","kind":"train_model","params":{"learner":{"algo":"mean"}}},
                {"id":"score","kind":"score_model"}
            ],"edges":[
                {"from":"in.dataset","to":"train.dataset"},
                {"from":"train.model","to":"score.model"},
                {"from":"in.dataset","to":"score.dataset"}
            ]}"#,
        )
        .unwrap();
        let empty = Dataset::empty(crate::dataset::vehicle_schema(false)).unwrap();
        let ds = synthesize(12, 1);
        let run = run_graph(&g, &sources(&[("d", ds)]));
        let csv = export_scored_csv(&run, "score").unwrap();
        assert!(csv.lines().next().unwrap().ends_with(",Scored Labels"));
        assert_eq!(csv.lines().count(), 13);
        assert_eq!(export_scored_csv(&run, "score.dataset").unwrap(), csv);
        assert!(matches!(
            export_scored_csv(&run, "in"),
            Err(PipelineError::NotScored(_))
        ));
        assert!(matches!(
            export_scored_csv(&run, "train"),
            Err(PipelineError::NotADataset(_))
        ));
        assert!(matches!(
            export_scored_csv(&run, "zzz"),
            Err(PipelineError::UnknownNode(_))
        ));

        // An empty scoring set still trains on nothing and fails; score an
        // empty frame through a model trained elsewhere instead.
        let Some(Artifact::Model(m)) = run.output("train", "model") else {
            panic!()
        };
        let scored = m.score(&empty).unwrap();
        assert_eq!(to_csv(&scored), "Model,Year,Battery,Price,Miles,Scored Labels\n");
    }
}
