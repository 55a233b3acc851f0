use chrono::{Datelike, NaiveDate};
use evprice_core::dataset::{Cell, ColumnKind, Dataset, SCORED_LABELS};
use evprice_core::learners::FittedModel;
use serde_json::{Map, Value};
use thiserror::Error;

/// Response key carrying the reformatted `Date`.
pub const DATE_CREATED: &str = "DateCreated";

/// A request the scorer cannot answer; the message names the first problem.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct BadRequest(pub String);

fn bad(msg: impl Into<String>) -> BadRequest {
    BadRequest(msg.into())
}

/// `2019-01-01` → `1/1/2019 12:00:00 AM`.
pub fn date_created(date: NaiveDate) -> String {
    format!("{}/{}/{} 12:00:00 AM", date.month(), date.day(), date.year())
}

/// Shortest decimal text that parses back to exactly `v`.
pub fn render_label(v: f64) -> String {
    v.to_string()
}

/// Validates a request body of the form
/// `{"Inputs": {"input1": [record, ...]}, "GlobalParameters": {}}` and
/// returns `{"Results": {"output1": [...]}}`.
///
/// Each output record echoes every input field with its original text,
/// schema columns first, then any other fields in request order, then
/// `DateCreated` (when a `Date` was given) and `Scored Labels`.
pub fn score_request(model: &FittedModel, body: &[u8]) -> Result<Value, BadRequest> {
    let request: Value = serde_json::from_slice(body).map_err(|e| bad(format!("body is not valid JSON: {e}")))?;
    let root = request.as_object().ok_or_else(|| bad("body must be a JSON object"))?;
    let inputs = root
        .get("Inputs")
        .ok_or_else(|| bad("missing `Inputs`"))?
        .as_object()
        .ok_or_else(|| bad("`Inputs` must be an object"))?;
    if let Some(g) = root.get("GlobalParameters") {
        if !g.is_object() {
            return Err(bad("`GlobalParameters` must be an object"));
        }
    }
    let records = inputs
        .get("input1")
        .ok_or_else(|| bad("missing `Inputs.input1`"))?
        .as_array()
        .ok_or_else(|| bad("`Inputs.input1` must be an array"))?;
    if records.is_empty() {
        return Err(bad("`Inputs.input1` must contain at least one record"));
    }

    let records: Vec<Map<String, Value>> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.as_object()
                .cloned()
                .ok_or_else(|| bad(format!("Inputs.input1[{i}] must be an object")))
        })
        .collect::<Result<_, _>>()?;

    let schema = model.schema();
    let required: Vec<&str> = model.encoding().columns.iter().map(|c| c.name.as_str()).collect();
    let mut rows = Vec::with_capacity(records.len());
    let mut created = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        for (key, value) in record {
            if key == SCORED_LABELS || key == DATE_CREATED {
                return Err(bad(format!(
                    "Inputs.input1[{i}]: field `{key}` is reserved for the response"
                )));
            }
            if !value.is_string() {
                return Err(bad(format!("Inputs.input1[{i}].{key} must be a string")));
            }
        }
        let text = |k: &str| record.get(k).and_then(Value::as_str);
        if let Some(missing) = required.iter().find(|k| text(k).is_none()) {
            return Err(bad(format!("Inputs.input1[{i}] is missing field `{missing}`")));
        }
        let row = schema
            .iter()
            .map(|col| match text(&col.name) {
                None => Ok(Cell::Missing),
                Some(raw) => Cell::parse(raw, col.kind).ok_or_else(|| {
                    let expected = match col.kind {
                        ColumnKind::Numeric => "a number",
                        ColumnKind::Month => "a YYYY-MM-DD date",
                        ColumnKind::Categorical => "text",
                    };
                    bad(format!("Inputs.input1[{i}].{}: `{raw}` is not {expected}", col.name))
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);

        created.push(match text("Date").filter(|d| !d.is_empty()) {
            None => None,
            Some(raw) => {
                let d = NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
                    .map_err(|_| bad(format!("Inputs.input1[{i}].Date: `{raw}` is not a YYYY-MM-DD date")))?;
                Some(date_created(d))
            }
        });
    }

    let ds = Dataset::new(schema.to_vec(), rows).map_err(|e| bad(e.to_string()))?;
    let preds = model.predict_dataset(&ds).map_err(|e| bad(e.to_string()))?;

    let output: Vec<Value> = records
        .into_iter()
        .zip(created)
        .zip(preds)
        .map(|((mut record, created), pred)| {
            let mut out = Map::new();
            for col in schema {
                if let Some(v) = record.shift_remove(&col.name) {
                    out.insert(col.name.clone(), v);
                }
            }
            out.extend(record);
            if let Some(c) = created {
                out.insert(DATE_CREATED.into(), Value::String(c));
            }
            out.insert(SCORED_LABELS.into(), Value::String(render_label(pred)));
            Value::Object(out)
        })
        .collect();

    let mut results = Map::new();
    results.insert("output1".into(), Value::Array(output));
    let mut root = Map::new();
    root.insert("Results".into(), Value::Object(results));
    Ok(Value::Object(root))
}
