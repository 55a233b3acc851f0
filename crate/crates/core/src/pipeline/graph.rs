use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;
use std::path::PathBuf;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::dataset::ColumnKind;
use crate::learners::{LearnerConfig, TreeParams};

/// Value type carried by a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PortType {
    Dataset,
    Model,
    Report,
    Text,
}

impl fmt::Display for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortType::Dataset => "dataset",
            PortType::Model => "model",
            PortType::Report => "report",
            PortType::Text => "text",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImportSource {
    /// A dataset supplied to the run under this name.
    Input(String),
    Path(PathBuf),
}

/// A node's module kind with its validated parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeOp {
    ImportCsv(ImportSource),
    AddRows,
    SelectColumns(Vec<String>),
    CleanMissing,
    EditMetadata {
        column: String,
        kind: ColumnKind,
    },
    SplitData {
        fraction: f64,
        seed: u64,
    },
    TrainModel {
        learner: LearnerConfig,
        include_date: bool,
    },
    ScoreModel,
    EvaluateModel,
    ConvertToCsv,
    /// Pass-through marker; reads `source` from the run inputs when its
    /// input port is not connected.
    WebInput {
        source: Option<String>,
    },
    WebOutput,
}

pub const NODE_KINDS: &[&str] = &[
    "import_csv",
    "add_rows",
    "select_columns",
    "clean_missing",
    "edit_metadata",
    "split_data",
    "train_model",
    "score_model",
    "evaluate_model",
    "convert_to_csv",
    "web_input",
    "web_output",
];

/// Named, typed ports of one direction.
pub type PortList = &'static [(&'static str, PortType)];

/// Input and output ports of a kind, in declaration order.
pub fn ports(kind: &str) -> Option<(PortList, PortList)> {
    use PortType::*;
    const DS_IN: &[(&str, PortType)] = &[("dataset", Dataset)];
    const DS_OUT: &[(&str, PortType)] = &[("dataset", Dataset)];
    Some(match kind {
        "import_csv" => (&[], DS_OUT),
        "add_rows" => (&[("left", Dataset), ("right", Dataset)], DS_OUT),
        "select_columns" | "clean_missing" | "edit_metadata" | "web_input" | "web_output" => (DS_IN, DS_OUT),
        "split_data" => (DS_IN, &[("first", Dataset), ("second", Dataset)]),
        "train_model" => (DS_IN, &[("model", Model)]),
        "score_model" => (&[("model", Model), ("dataset", Dataset)], DS_OUT),
        "evaluate_model" => (DS_IN, &[("report", Report)]),
        "convert_to_csv" => (DS_IN, &[("text", Text)]),
        _ => return None,
    })
}

impl NodeOp {
    pub fn kind(&self) -> &'static str {
        match self {
            NodeOp::ImportCsv(_) => "import_csv",
            NodeOp::AddRows => "add_rows",
            NodeOp::SelectColumns(_) => "select_columns",
            NodeOp::CleanMissing => "clean_missing",
            NodeOp::EditMetadata { .. } => "edit_metadata",
            NodeOp::SplitData { .. } => "split_data",
            NodeOp::TrainModel { .. } => "train_model",
            NodeOp::ScoreModel => "score_model",
            NodeOp::EvaluateModel => "evaluate_model",
            NodeOp::ConvertToCsv => "convert_to_csv",
            NodeOp::WebInput { .. } => "web_input",
            NodeOp::WebOutput => "web_output",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub op: NodeOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub from_port: &'static str,
    pub to: usize,
    pub to_port: &'static str,
}

/// A validated pipeline: nodes in declaration order plus a deterministic
/// topological execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineGraph {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub order: Vec<usize>,
}

impl PipelineGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// The edge feeding `(node, port)`, if any.
    pub fn incoming(&self, node: usize, port: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.to == node && e.to_port == port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum GraphProblem {
    DuplicateNode {
        node: String,
    },
    UnknownKind {
        node: String,
        kind: String,
    },
    BadParams {
        node: String,
        message: String,
    },
    MalformedEndpoint {
        endpoint: String,
    },
    UnknownNode {
        endpoint: String,
    },
    UnknownPort {
        node: String,
        port: String,
        direction: &'static str,
    },
    TypeMismatch {
        from: String,
        to: String,
        produced: PortType,
        expected: PortType,
    },
    DuplicateInput {
        node: String,
        port: String,
    },
    UnconnectedInput {
        node: String,
        port: String,
    },
    Cycle {
        nodes: Vec<String>,
    },
}

impl fmt::Display for GraphProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphProblem::DuplicateNode { node } => write!(f, "node id `{node}` is declared more than once"),
            GraphProblem::UnknownKind { node, kind } => {
                write!(
                    f,
                    "node `{node}` has unknown kind `{kind}` (known: {})",
                    NODE_KINDS.join(", ")
                )
            }
            GraphProblem::BadParams { node, message } => write!(f, "node `{node}`: {message}"),
            GraphProblem::MalformedEndpoint { endpoint } => {
                write!(f, "edge endpoint `{endpoint}` is not of the form `node.port`")
            }
            GraphProblem::UnknownNode { endpoint } => write!(f, "edge endpoint `{endpoint}` names no node"),
            GraphProblem::UnknownPort { node, port, direction } => {
                write!(f, "node `{node}` has no {direction} port `{port}`")
            }
            GraphProblem::TypeMismatch {
                from,
                to,
                produced,
                expected,
            } => {
                write!(
                    f,
                    "edge {from} -> {to} carries a {produced} but the input expects a {expected}"
                )
            }
            GraphProblem::DuplicateInput { node, port } => {
                write!(f, "input `{node}.{port}` is connected more than once")
            }
            GraphProblem::UnconnectedInput { node, port } => write!(f, "input `{node}.{port}` is not connected"),
            GraphProblem::Cycle { nodes } => write!(f, "cycle through nodes {}", nodes.join(", ")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    #[serde(default)]
    name: String,
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    kind: String,
    #[serde(default)]
    params: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: String,
    to: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportParams {
    source: Option<String>,
    path: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectParams {
    columns: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditParams {
    column: String,
    kind: ColumnKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitParams {
    fraction: f64,
    #[serde(default = "default_seed")]
    seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainParams {
    #[serde(default = "default_learner")]
    learner: LearnerConfig,
    #[serde(default)]
    include_date: bool,
}

fn default_learner() -> LearnerConfig {
    LearnerConfig::Boosted(TreeParams::default())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WebInputParams {
    source: Option<String>,
}

fn decode<T: DeserializeOwned>(params: &Value) -> Result<T, String> {
    let v = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(v).map_err(|e| format!("bad params: {e}"))
}

fn build_op(kind: &str, params: &Value) -> Result<NodeOp, String> {
    Ok(match kind {
        "import_csv" => {
            let p: ImportParams = decode(params)?;
            match (p.source, p.path) {
                (Some(s), None) => NodeOp::ImportCsv(ImportSource::Input(s)),
                (None, Some(p)) => NodeOp::ImportCsv(ImportSource::Path(p)),
                _ => return Err("import_csv needs exactly one of `source` or `path`".into()),
            }
        }
        "select_columns" => {
            let p: SelectParams = decode(params)?;
            if p.columns.is_empty() {
                return Err("select_columns needs at least one column".into());
            }
            NodeOp::SelectColumns(p.columns)
        }
        "edit_metadata" => {
            let p: EditParams = decode(params)?;
            NodeOp::EditMetadata {
                column: p.column,
                kind: p.kind,
            }
        }
        "split_data" => {
            let p: SplitParams = decode(params)?;
            if !(0.0..=1.0).contains(&p.fraction) {
                return Err(format!("fraction must lie in [0, 1], got {}", p.fraction));
            }
            NodeOp::SplitData {
                fraction: p.fraction,
                seed: p.seed,
            }
        }
        "train_model" => {
            let p: TrainParams = decode(params)?;
            NodeOp::TrainModel {
                learner: p.learner,
                include_date: p.include_date,
            }
        }
        "web_input" => {
            let p: WebInputParams = decode(params)?;
            NodeOp::WebInput { source: p.source }
        }
        other => {
            decode::<NoParams>(params)?;
            match other {
                "add_rows" => NodeOp::AddRows,
                "clean_missing" => NodeOp::CleanMissing,
                "score_model" => NodeOp::ScoreModel,
                "evaluate_model" => NodeOp::EvaluateModel,
                "convert_to_csv" => NodeOp::ConvertToCsv,
                "web_output" => NodeOp::WebOutput,
                _ => unreachable!("kind checked against NODE_KINDS"),
            }
        }
    })
}

fn split_endpoint(s: &str) -> Option<(&str, &str)> {
    s.rsplit_once('.').filter(|(n, p)| !n.is_empty() && !p.is_empty())
}

/// Parses and validates a pipeline document, reporting every problem found.
/// Nothing is executed.
pub fn parse_graph(text: &str) -> Result<PipelineGraph, PipelineError> {
    let raw: RawGraph = serde_json::from_str(text).map_err(PipelineError::Syntax)?;
    let mut problems = Vec::new();

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut kinds: Vec<&str> = Vec::with_capacity(raw.nodes.len());
    let mut ops: Vec<Option<NodeOp>> = Vec::with_capacity(raw.nodes.len());
    for (i, n) in raw.nodes.iter().enumerate() {
        if index.insert(&n.id, i).is_some() {
            problems.push(GraphProblem::DuplicateNode { node: n.id.clone() });
        }
        kinds.push(&n.kind);
        if ports(&n.kind).is_none() {
            problems.push(GraphProblem::UnknownKind {
                node: n.id.clone(),
                kind: n.kind.clone(),
            });
            ops.push(None);
            continue;
        }
        match build_op(&n.kind, &n.params) {
            Ok(op) => ops.push(Some(op)),
            Err(message) => {
                problems.push(GraphProblem::BadParams {
                    node: n.id.clone(),
                    message,
                });
                ops.push(None);
            }
        }
    }
    // Later duplicates shadow earlier ones in `index`; point at the first.
    for (i, n) in raw.nodes.iter().enumerate().rev() {
        index.insert(&n.id, i);
    }

    let mut edges = Vec::new();
    let mut fed: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    for e in &raw.edges {
        let resolve = |endpoint: &str, outgoing: bool, problems: &mut Vec<GraphProblem>| {
            let Some((node, port)) = split_endpoint(endpoint) else {
                problems.push(GraphProblem::MalformedEndpoint {
                    endpoint: endpoint.to_string(),
                });
                return None;
            };
            let Some(&i) = index.get(node) else {
                problems.push(GraphProblem::UnknownNode {
                    endpoint: endpoint.to_string(),
                });
                return None;
            };
            let (ins, outs) = ports(kinds[i])?;
            let list = if outgoing { outs } else { ins };
            match list.iter().find(|(p, _)| *p == port) {
                Some(&(p, t)) => Some((i, p, t)),
                None => {
                    problems.push(GraphProblem::UnknownPort {
                        node: node.to_string(),
                        port: port.to_string(),
                        direction: if outgoing { "output" } else { "input" },
                    });
                    None
                }
            }
        };
        let from = resolve(&e.from, true, &mut problems);
        let to = resolve(&e.to, false, &mut problems);
        let (Some((fi, fp, ft)), Some((ti, tp, tt))) = (from, to) else {
            continue;
        };
        if ft != tt {
            problems.push(GraphProblem::TypeMismatch {
                from: e.from.clone(),
                to: e.to.clone(),
                produced: ft,
                expected: tt,
            });
            continue;
        }
        *fed.entry((ti, tp)).or_default() += 1;
        edges.push(Edge {
            from: fi,
            from_port: fp,
            to: ti,
            to_port: tp,
        });
    }

    for (i, n) in raw.nodes.iter().enumerate() {
        let Some((ins, _)) = ports(&n.kind) else { continue };
        for &(port, _) in ins {
            match fed.get(&(i, port)).copied().unwrap_or(0) {
                0 => {
                    let optional = matches!(&ops[i], Some(NodeOp::WebInput { source: Some(_) }));
                    if !optional {
                        problems.push(GraphProblem::UnconnectedInput {
                            node: n.id.clone(),
                            port: port.into(),
                        });
                    }
                }
                1 => {}
                _ => problems.push(GraphProblem::DuplicateInput {
                    node: n.id.clone(),
                    port: port.into(),
                }),
            }
        }
    }

    let mut g = DiGraph::<usize, ()>::new();
    let handles: Vec<_> = (0..raw.nodes.len()).map(|i| g.add_node(i)).collect();
    for e in &edges {
        g.add_edge(handles[e.from], handles[e.to], ());
    }
    let mut cycles: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .filter(|c| c.len() > 1 || edges.iter().any(|e| e.from == g[c[0]] && e.to == g[c[0]]))
        .map(|c| {
            let mut members: Vec<usize> = c.into_iter().map(|h| g[h]).collect();
            members.sort_unstable();
            members
        })
        .collect();
    cycles.sort();
    for c in cycles {
        problems.push(GraphProblem::Cycle {
            nodes: c.into_iter().map(|i| raw.nodes[i].id.clone()).collect(),
        });
    }

    if !problems.is_empty() {
        return Err(PipelineError::Invalid(problems));
    }

    let order = topological_order(raw.nodes.len(), &edges);
    let nodes = raw
        .nodes
        .into_iter()
        .zip(ops)
        .map(|(n, op)| Node {
            id: n.id,
            op: op.expect("valid node has an op"),
        })
        .collect();
    Ok(PipelineGraph {
        name: raw.name,
        nodes,
        edges,
        order,
    })
}

/// Kahn's algorithm, always releasing the earliest-declared ready node.
fn topological_order(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut indegree = vec![0usize; n];
    for e in edges {
        indegree[e.to] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for e in edges.iter().filter(|e| e.from == i) {
            indegree[e.to] -= 1;
            if indegree[e.to] == 0 {
                ready.push(Reverse(e.to));
            }
        }
    }
    order
}
