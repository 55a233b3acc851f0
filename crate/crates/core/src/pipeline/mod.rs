//! Declarative dataflow graphs over the dataset, learner and metric
//! functions.
//!
//! A config document is JSON with a `name`, a `nodes` list
//! (`{"id", "kind", "params"}`) and an `edges` list
//! (`{"from": "node.port", "to": "node.port"}`). See `pipelines/` in this
//! crate for complete examples.

mod graph;
mod run;

pub use graph::{
    parse_graph, ports, Edge, GraphProblem, ImportSource, Node, NodeOp, PipelineGraph, PortList, PortType, NODE_KINDS,
};
pub use run::{export_scored_csv, run_graph, Artifact, NodeRun, NodeStatus, RunResult};

use thiserror::Error;

/// Three monthly imports merged, cleaned, split 75/25, boosted, scored,
/// evaluated and exported.
pub const PAPER_EXPERIMENT: &str = include_str!("../../pipelines/paper_experiment.json");
/// `web_input` wired straight to `web_output`.
pub const WEB_PASSTHROUGH: &str = include_str!("../../pipelines/web_passthrough.json");

/// Bundled graphs by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("paper_experiment", PAPER_EXPERIMENT),
    ("web_passthrough", WEB_PASSTHROUGH),
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline config is not valid JSON: {0}")]
    Syntax(serde_json::Error),
    #[error("invalid pipeline ({} problem(s)):\n{}", .0.len(), render_problems(.0))]
    Invalid(Vec<GraphProblem>),
    #[error("no node `{0}` in the run")]
    UnknownNode(String),
    #[error("node `{0}` produced no output")]
    NoOutput(String),
    #[error("`{0}` is not a dataset output")]
    NotADataset(String),
    #[error("`{0}` is a dataset without a trailing `Scored Labels` column")]
    NotScored(String),
}

fn render_problems(problems: &[GraphProblem]) -> String {
    problems
        .iter()
        .map(|p| format!("  - {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problems(text: &str) -> Vec<GraphProblem> {
        match parse_graph(text) {
            Err(PipelineError::Invalid(p)) => p,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn bundled_graphs_parse() {
        for (name, text) in BUNDLED {
            let g = parse_graph(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&g.name, name);
            assert_eq!(g.order.len(), g.nodes.len());
        }
    }

    #[test]
    fn paper_experiment_shape() {
        let g = parse_graph(PAPER_EXPERIMENT).unwrap();
        let count = |k: &str| g.nodes.iter().filter(|n| n.op.kind() == k).count();
        assert_eq!(count("import_csv"), 3);
        assert_eq!(count("add_rows"), 2);
        for k in [
            "select_columns",
            "clean_missing",
            "split_data",
            "train_model",
            "score_model",
            "evaluate_model",
            "convert_to_csv",
        ] {
            assert_eq!(count(k), 1, "{k}");
        }
        let split = g.nodes.iter().find(|n| n.op.kind() == "split_data").unwrap();
        assert_eq!(
            split.op,
            NodeOp::SplitData {
                fraction: 0.75,
                seed: 42
            }
        );
    }

    #[test]
    fn single_import_is_valid() {
        let g =
            parse_graph(r#"{"nodes":[{"id":"a","kind":"import_csv","params":{"path":"x.csv"}}],"edges":[]}"#).unwrap();
        assert_eq!(g.order, vec![0]);
    }

    #[test]
    fn cycle_is_named() {
        let p = problems(
            r#"{"nodes":[{"id":"A","kind":"web_output"},{"id":"B","kind":"web_output"}],
                "edges":[{"from":"A.dataset","to":"B.dataset"},{"from":"B.dataset","to":"A.dataset"}]}"#,
        );
        assert_eq!(
            p,
            vec![GraphProblem::Cycle {
                nodes: vec!["A".into(), "B".into()]
            }]
        );
        assert_eq!(p[0].to_string(), "cycle through nodes A, B");
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let p =
            problems(r#"{"nodes":[{"id":"A","kind":"web_output"}],"edges":[{"from":"A.dataset","to":"A.dataset"}]}"#);
        assert_eq!(
            p,
            vec![GraphProblem::Cycle {
                nodes: vec!["A".into()]
            }]
        );
    }

    #[test]
    fn all_problems_are_reported() {
        let p = problems(
            r#"{"nodes":[
                {"id":"a","kind":"import_csv","params":{"source":"s"}},
                {"id":"b","kind":"teleport"},
                {"id":"t","kind":"train_model"},
                {"id":"e","kind":"evaluate_model"},
                {"id":"s","kind":"split_data","params":{"fraction":1.5}},
                {"id":"a","kind":"clean_missing"}
            ],"edges":[
                {"from":"t.model","to":"e.dataset"},
                {"from":"a.nope","to":"t.dataset"},
                {"from":"ghost.dataset","to":"t.dataset"},
                {"from":"nodot","to":"t.dataset"}
            ]}"#,
        );
        let has = |f: &dyn Fn(&GraphProblem) -> bool| p.iter().any(f);
        assert!(has(
            &|x| matches!(x, GraphProblem::DuplicateNode { node } if node == "a")
        ));
        assert!(has(
            &|x| matches!(x, GraphProblem::UnknownKind { kind, .. } if kind == "teleport")
        ));
        assert!(has(
            &|x| matches!(x, GraphProblem::BadParams { node, .. } if node == "s")
        ));
        assert!(has(&|x| matches!(
            x,
            GraphProblem::TypeMismatch {
                produced: PortType::Model,
                expected: PortType::Dataset,
                ..
            }
        )));
        assert!(has(
            &|x| matches!(x, GraphProblem::UnknownPort { port, direction: "output", .. } if port == "nope")
        ));
        assert!(has(
            &|x| matches!(x, GraphProblem::UnknownNode { endpoint } if endpoint == "ghost.dataset")
        ));
        assert!(has(&|x| matches!(x, GraphProblem::MalformedEndpoint { .. })));
        assert!(has(
            &|x| matches!(x, GraphProblem::UnconnectedInput { node, port } if node == "t" && port == "dataset")
        ));
        assert!(p.len() >= 8, "{p:#?}");
    }

    #[test]
    fn double_fed_input_is_rejected() {
        let p = problems(
            r#"{"nodes":[{"id":"a","kind":"import_csv","params":{"source":"s"}},{"id":"o","kind":"web_output"}],
                "edges":[{"from":"a.dataset","to":"o.dataset"},{"from":"a.dataset","to":"o.dataset"}]}"#,
        );
        assert_eq!(
            p,
            vec![GraphProblem::DuplicateInput {
                node: "o".into(),
                port: "dataset".into()
            }]
        );
    }

    #[test]
    fn unknown_params_are_rejected() {
        let p = problems(r#"{"nodes":[{"id":"c","kind":"clean_missing","params":{"mode":"mean"}}]}"#);
        assert!(
            matches!(
                &p[..],
                [GraphProblem::BadParams { .. }, GraphProblem::UnconnectedInput { .. }]
            ),
            "{p:?}"
        );
    }

    #[test]
    fn syntax_errors_are_distinct() {
        assert!(matches!(parse_graph("{"), Err(PipelineError::Syntax(_))));
    }

    #[test]
    fn order_is_declaration_stable() {
        let g = parse_graph(
            r#"{"nodes":[
                {"id":"z","kind":"web_output"},
                {"id":"b","kind":"import_csv","params":{"source":"x"}},
                {"id":"a","kind":"import_csv","params":{"source":"y"}}
            ],"edges":[{"from":"a.dataset","to":"z.dataset"}]}"#,
        )
        .unwrap();
        assert_eq!(g.order, vec![1, 2, 0]);
    }
}
