use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use evprice_core::dataset::{
    clean_missing, parse_csv, partition_by_month, split_data, summarize, synthesize, to_csv, ColumnRole, Dataset,
};
use evprice_core::learners::{
    compare_models, evaluate_scored, load_model, save_model, train, ForestParams, LearnerConfig, TreeParams,
};
use evprice_core::metrics::{EvaluationReport, MetricsError};
use evprice_core::pipeline::{export_scored_csv, parse_graph, run_graph, Artifact, NodeStatus, BUNDLED};
use evprice_core::Error;
use evprice_service::{batch_score, load_model_file, load_token_file, score_request, serve, AppState};
use serde_json::{json, Map, Value};

use super::{Algo, Command, LearnerArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T = ()> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| data(format!("cannot read stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result {
    std::fs::write(path, text).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_csv(&read_text(path)?, None).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn learner_config(args: &LearnerArgs, algo: Algo, seed: u64) -> Result<LearnerConfig> {
    let tree = TreeParams {
        max_leaves: args.max_leaves,
        min_samples_leaf: args.min_leaf,
        learning_rate: args.lr,
        num_trees: args.trees,
    };
    tree.validate()
        .map_err(|e| usage(format!("{e} (see --max-leaves, --min-leaf, --lr, --trees)")))?;
    if args.k < 1 {
        return Err(usage("--k must be at least 1"));
    }
    Ok(match algo {
        Algo::Boosted => LearnerConfig::Boosted(tree),
        Algo::Tree => LearnerConfig::Tree(tree),
        Algo::Forest => LearnerConfig::Forest(ForestParams {
            tree,
            n_trees: args.trees,
            seed,
            ..ForestParams::default()
        }),
        Algo::Knn => LearnerConfig::Knn { k: args.k },
        Algo::Mean => LearnerConfig::Mean,
    })
}

fn check_split(split: f64, allow_all: bool) -> Result {
    let ok = split > 0.0 && (split < 1.0 || (allow_all && split == 1.0));
    if !ok {
        let range = if allow_all { "(0, 1]" } else { "(0, 1)" };
        return Err(usage(format!("--split must lie in {range}, got {split}")));
    }
    Ok(())
}

fn render_report(report: &std::result::Result<EvaluationReport, MetricsError>) -> Result<String> {
    match report {
        Ok(r) => Ok(r.to_string()),
        Err(MetricsError::DegenerateVariance { mae, rmse }) => Ok(format!(
            "{:<30}{rmse:.6}\n{:<30}{mae:.6}\nRelative errors are undefined: every target is equal.\n",
            "Root Mean Squared Error", "Mean Absolute Error"
        )),
        Err(e) => Err(data(e.to_string())),
    }
}

fn role_name(role: ColumnRole) -> &'static str {
    match role {
        ColumnRole::Feature => "feature",
        ColumnRole::Target => "target",
        ColumnRole::Passthrough => "passthrough",
    }
}

pub fn run(command: Command) -> Result {
    let mut out = std::io::stdout().lock();
    let text = match command {
        Command::Import { data, out: dest } => import(&data, dest.as_deref())?,
        Command::Stats { data } => summarize(&read_dataset(&data)?).map_err(Error::from)?.to_string(),
        Command::Synth { rows, seed, out: dest } => {
            let csv = to_csv(&synthesize(rows, seed));
            match dest {
                Some(p) => {
                    write_text(&p, &csv)?;
                    format!("Wrote {rows} rows to {}\n", p.display())
                }
                None => csv,
            }
        }
        Command::Train {
            data,
            learner,
            algo,
            split,
            seed,
            include_date,
            model,
        } => {
            let config = learner_config(&learner, algo, seed)?;
            check_split(split, true)?;
            train_command(&data, &config, split, seed, include_date, model.as_deref())?
        }
        Command::Evaluate { model, data, out: dest } => {
            let m = load_model_file(&model).map_err(|e| self::data(e.to_string()))?;
            let scored = batch_score(&m, &read_text(&data)?)?;
            if let Some(p) = dest {
                write_text(&p, &scored.csv)?;
            }
            format!(
                "Evaluated {} rows with {} model\n\n{}",
                scored.scored.n_rows(),
                m.model_kind(),
                render_report(&scored.report)?
            )
        }
        Command::Compare {
            data,
            algos,
            learner,
            split,
            seed,
        } => {
            let configs = algos
                .iter()
                .map(|&a| learner_config(&learner, a, seed))
                .collect::<Result<Vec<_>>>()?;
            check_split(split, false)?;
            compare_command(&data, &configs, split, seed)?
        }
        Command::Predict {
            model,
            request,
            vehicle,
            year,
            battery,
            miles,
            price,
            date,
        } => {
            let m = load_model(&read_text(&model)?).map_err(|e| self::data(format!("{}: {e}", model.display())))?;
            match request {
                Some(path) => {
                    let body = read_text(&path)?;
                    let resp = score_request(&m, body.as_bytes()).map_err(|e| self::data(e.0))?;
                    pretty(&resp)
                }
                None => {
                    let mut record = Map::new();
                    let fields = [
                        ("Model", vehicle),
                        ("Year", year),
                        ("Battery", battery),
                        ("Price", price),
                        ("Miles", miles),
                        ("Date", date),
                    ];
                    for (k, v) in fields {
                        if let Some(v) = v {
                            record.insert(k.to_string(), Value::String(v));
                        }
                    }
                    let body = json!({"Inputs": {"input1": [record]}, "GlobalParameters": {}});
                    let resp = score_request(&m, body.to_string().as_bytes()).map_err(|e| usage(e.0))?;
                    pretty(&resp["Results"]["output1"][0])
                }
            }
        }
        Command::Serve {
            model,
            port,
            host,
            token_file,
        } => {
            let token = match token_file {
                Some(p) => load_token_file(&p).map_err(|e| usage(e.to_string()))?,
                None => std::env::var("EVPRICE_TOKEN")
                    .ok()
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| t.trim().to_string())
                    .ok_or_else(|| usage("serve needs a bearer token: pass --token-file or set EVPRICE_TOKEN"))?,
            };
            let m = load_model_file(&model).map_err(|e| data(e.to_string()))?;
            let state = AppState::new(m, &token).map_err(|e| usage(e.to_string()))?;
            return serve_command(state, &host, port, &mut out);
        }
        Command::PipelineRun {
            graph,
            inputs,
            synth,
            seed,
            export,
            out: dest,
        } => pipeline_command(
            &graph,
            &inputs,
            synth,
            seed,
            export.as_deref(),
            dest.as_deref(),
            &mut out,
        )?,
    };
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| data(format!("cannot write output: {e}")))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn import(path: &Path, dest: Option<&Path>) -> Result<String> {
    let ds = read_dataset(path)?;
    if let Some(p) = dest {
        write_text(p, &to_csv(&ds))?;
    }
    let width = ds.schema().iter().map(|c| c.name.len()).max().unwrap_or(0).max(6) + 2;
    let mut s = format!("Rows     {}\nColumns  {}\n\n", ds.n_rows(), ds.schema().len());
    s += &format!("{:<width$}{:<13}{:<13}{}\n", "Column", "Kind", "Role", "Missing");
    for (j, c) in ds.schema().iter().enumerate() {
        let missing = ds.rows().iter().filter(|r| r[j].is_missing()).count();
        s += &format!(
            "{:<width$}{:<13}{:<13}{missing}\n",
            c.name,
            c.kind.to_string(),
            role_name(c.role)
        );
    }
    Ok(s)
}

fn prepared(path: &Path) -> Result<(Dataset, usize)> {
    Ok(clean_missing(&read_dataset(path)?))
}

fn train_command(
    path: &Path,
    config: &LearnerConfig,
    split: f64,
    seed: u64,
    include_date: bool,
    model_path: Option<&Path>,
) -> Result<String> {
    let (mut ds, dropped) = prepared(path)?;
    if include_date {
        ds = ds.with_role("Date", ColumnRole::Feature).map_err(Error::from)?;
    }
    let (train_ds, test) = split_data(&ds, split, seed).map_err(Error::from)?;
    let model = train(config, &train_ds)?;
    if let Some(p) = model_path {
        write_text(p, &save_model(&model))?;
        eprintln!("model written to {}", p.display());
    }
    let mut s = format!(
        "Trained {} on {} rows ({} held out, {} incomplete rows dropped)\n",
        config.name(),
        train_ds.n_rows(),
        test.n_rows(),
        dropped
    );
    if !test.is_empty() {
        let report = match evaluate_scored(&model.score(&test)?) {
            Ok(r) => Ok(r),
            Err(Error::Metrics(m)) => Err(m),
            Err(e) => return Err(e.into()),
        };
        s += "\n";
        s += &render_report(&report)?;
    }
    Ok(s)
}

fn compare_command(path: &Path, configs: &[LearnerConfig], split: f64, seed: u64) -> Result<String> {
    let (ds, _) = prepared(path)?;
    let (train_ds, test) = split_data(&ds, split, seed).map_err(Error::from)?;
    if test.is_empty() {
        return Err(data("the held-out split is empty; lower --split or add rows"));
    }
    let rows = compare_models(&train_ds, &test, configs)?;
    let mut s = format!(
        "{:<26}{:<26}{}\n",
        "Model", "Root Mean Squared Error", "Standard Deviation"
    );
    for r in rows {
        s += &format!(
            "{:<26}{:<26}{:.1}\n",
            r.display_name,
            format!("{:.1}", r.rmse),
            r.residual_std
        );
    }
    Ok(s)
}

fn serve_command(state: AppState, host: &str, port: u16, out: &mut impl Write) -> Result {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| data(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| data(format!("cannot bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| data(e.to_string()))?;
        writeln!(out, "listening on http://{addr}")
            .and_then(|_| out.flush())
            .map_err(|e| data(e.to_string()))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, state, shutdown)
            .await
            .map_err(|e| data(format!("server error: {e}")))
    })
}

fn pipeline_command(
    graph: &str,
    inputs: &[(String, std::path::PathBuf)],
    synth: Option<usize>,
    seed: u64,
    export: Option<&str>,
    dest: Option<&Path>,
    out: &mut impl Write,
) -> Result<String> {
    let text = match BUNDLED.iter().find(|(name, _)| *name == graph) {
        Some((_, t)) => t.to_string(),
        None => read_text(Path::new(graph))?,
    };
    let g = parse_graph(&text).map_err(|e| data(e.to_string()))?;

    let mut sources = BTreeMap::new();
    if let Some(rows) = synth {
        sources.extend(partition_by_month(&synthesize(rows, seed), "Date").map_err(Error::from)?);
    }
    for (name, path) in inputs {
        sources.insert(name.clone(), read_dataset(path)?);
    }

    let run = run_graph(&g, &sources);
    let mut s = String::new();
    let mut reports = String::new();
    for node in &run.nodes {
        match &node.status {
            NodeStatus::Succeeded => s += &format!("ok       {} ({})\n", node.id, node.kind),
            NodeStatus::Failed { error } => s += &format!("failed   {} ({}): {error}\n", node.id, node.kind),
            NodeStatus::Skipped { blocked_by } => {
                s += &format!("skipped  {} ({}): blocked by {blocked_by}\n", node.id, node.kind)
            }
        }
        for (port, artifact) in &node.outputs {
            if let Artifact::Report(r) = artifact {
                reports += &format!("\n{}.{port}\n{r}", node.id);
            }
        }
    }
    s += &reports;

    if !run.succeeded() {
        out.write_all(s.as_bytes()).ok();
        let n = run.failures().len();
        return Err(data(format!("{n} pipeline node(s) failed")));
    }
    if let (Some(endpoint), Some(p)) = (export, dest) {
        let csv = export_scored_csv(&run, endpoint).map_err(|e| data(e.to_string()))?;
        write_text(p, &csv)?;
    }
    Ok(s)
}
