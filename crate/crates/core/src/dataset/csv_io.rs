use super::{check_unique_names, parse_number, Cell, ColumnKind, ColumnSchema, Dataset, DatasetError, Result};

/// Parses comma-separated text whose first line is the header.
///
/// Column kinds come from `schema_hint` when it names the column, otherwise
/// from the header name (`Price`, `Miles`, `Year` numeric; `Date` month;
/// `Model`, `Battery` categorical) and finally from the values: a column is
/// numeric iff every non-missing value parses as a number.
pub fn parse_csv(text: &str, schema_hint: Option<&[ColumnSchema]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_error)?,
        None => {
            return Err(DatasetError::Parse {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();

    let mut raw_rows: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(DatasetError::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        raw_rows.push((line, rec.iter().map(str::to_string).collect()));
    }

    let schema: Vec<ColumnSchema> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            if let Some(hinted) = schema_hint.and_then(|h| h.iter().find(|c| &c.name == name)) {
                return hinted.clone();
            }
            let kind = ColumnSchema::default_kind_for(name)
                .unwrap_or_else(|| infer_kind(raw_rows.iter().map(|(_, r)| r[j].as_str())));
            ColumnSchema::new(name.clone(), kind, ColumnSchema::default_role_for(name))
        })
        .collect();
    check_unique_names(&schema)?;

    let mut rows = Vec::with_capacity(raw_rows.len());
    for (line, raw) in raw_rows {
        let mut row = Vec::with_capacity(schema.len());
        for (field, col) in raw.iter().zip(&schema) {
            let cell = Cell::parse(field, col.kind).ok_or_else(|| DatasetError::Parse {
                line,
                message: format!("`{field}` is not a valid {} value for `{}`", col.kind, col.name),
            })?;
            if cell.is_missing() && !col.missing_allowed {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("`{}` may not be empty", col.name),
                });
            }
            row.push(cell);
        }
        rows.push(row);
    }
    Ok(Dataset::from_parts_unchecked(schema, rows))
}

fn infer_kind<'a>(values: impl Iterator<Item = &'a str>) -> ColumnKind {
    let mut seen_value = false;
    for v in values.filter(|v| !v.is_empty()) {
        seen_value = true;
        if parse_number(v).is_none() {
            return ColumnKind::Categorical;
        }
    }
    if seen_value {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

fn csv_error(e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    DatasetError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Header line followed by one line per row; missing cells are empty fields.
pub fn to_csv(ds: &Dataset) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    writer
        .write_record(ds.schema().iter().map(|c| c.name.as_str()))
        .expect("in-memory write");
    for row in ds.rows() {
        writer
            .write_record(row.iter().map(Cell::render))
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("fields are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnRole;
    use proptest::prelude::*;

    const SAMPLE: &str = "Model,Year,Battery,Price,Miles
Model S,2013,Base,34200,36800
Model 3,2018,75,46995,2193
Model S,2018,75D,64900,1095
Model X,2016,P90D,84984,20680
Model S,2016,75D,58989,20303
";

    #[test]
    fn parses_sample_rows() {
        let ds = parse_csv(SAMPLE, None).unwrap();
        assert_eq!(ds.n_rows(), 5);
        let price = ds.column_index("Price").unwrap();
        let miles = ds.column_index("Miles").unwrap();
        assert_eq!(ds.rows()[0][price], Cell::Number(34200.0));
        assert_eq!(ds.rows()[0][miles], Cell::Number(36800.0));
        assert_eq!(ds.rows()[1][2], Cell::Text("75".into()));
        assert_eq!(ds.schema()[1].kind, ColumnKind::Numeric);
        assert_eq!(ds.schema()[3].role, ColumnRole::Target);
    }

    #[test]
    fn sample_round_trips() {
        let ds = parse_csv(SAMPLE, None).unwrap();
        assert_eq!(to_csv(&ds), SAMPLE);
        assert_eq!(parse_csv(&to_csv(&ds), None).unwrap(), ds);
    }

    #[test]
    fn header_only() {
        let ds = parse_csv("Model,Year,Battery,Price,Miles,Date\n", None).unwrap();
        assert_eq!(ds.n_rows(), 0);
        assert_eq!(ds.schema().len(), 6);
        assert_eq!(ds.schema()[5].kind, ColumnKind::Month);
        assert_eq!(to_csv(&ds), "Model,Year,Battery,Price,Miles,Date\n");
    }

    #[test]
    fn short_row_reports_line() {
        let text = "Model,Year,Battery,Price,Miles\nModel S,2013,Base,34200,36800\nModel 3,2018,75,46995\n";
        match parse_csv(text, None) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_header() {
        let err = parse_csv("Model,Model\na,b\n", None).unwrap_err();
        assert_eq!(err, DatasetError::DuplicateColumn("Model".into()));
    }

    #[test]
    fn empty_field_is_missing_and_writes_adjacent_commas() {
        let ds = parse_csv("Model,Year,Battery,Price,Miles\nModel S,2013,,34200,36800\n", None).unwrap();
        assert!(ds.rows()[0][2].is_missing());
        assert!(to_csv(&ds).contains("Model S,2013,,34200,36800"));
    }

    #[test]
    fn unknown_columns_are_inferred() {
        let ds = parse_csv("Trim,Color\n1.5,red\n2,\n", None).unwrap();
        assert_eq!(ds.schema()[0].kind, ColumnKind::Numeric);
        assert_eq!(ds.schema()[1].kind, ColumnKind::Categorical);
    }

    #[test]
    fn bad_numeric_value_reports_line() {
        let err = parse_csv("Model,Price\nModel S,cheap\n", None).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }));
    }

    #[test]
    fn hint_overrides_defaults() {
        let hint = [ColumnSchema::new("Year", ColumnKind::Categorical, ColumnRole::Feature)];
        let ds = parse_csv("Year\n2013\n", Some(&hint)).unwrap();
        assert_eq!(ds.rows()[0][0], Cell::Text("2013".into()));
    }

    fn arb_cell(kind: ColumnKind) -> BoxedStrategy<Cell> {
        let value = match kind {
            ColumnKind::Numeric => any::<f64>()
                .prop_filter("finite", |v| v.is_finite())
                .prop_map(Cell::Number)
                .boxed(),
            ColumnKind::Categorical => "[A-Za-z0-9 ,\"]{1,8}".prop_map(Cell::Text).boxed(),
            ColumnKind::Month => (2000i32..2030, 1u32..=12, 1u32..=28)
                .prop_map(|(y, m, d)| Cell::Date(chrono::NaiveDate::from_ymd_opt(y, m, d).unwrap()))
                .boxed(),
        };
        prop_oneof![1 => Just(Cell::Missing), 4 => value].boxed()
    }

    proptest! {
        #[test]
        fn csv_round_trip_preserves_schema_and_cells(
            rows in proptest::collection::vec(
                (arb_cell(ColumnKind::Categorical), arb_cell(ColumnKind::Numeric), arb_cell(ColumnKind::Month)),
                0..20,
            )
        ) {
            let schema = vec![
                ColumnSchema::new("Model", ColumnKind::Categorical, ColumnRole::Feature),
                ColumnSchema::new("Price", ColumnKind::Numeric, ColumnRole::Target),
                ColumnSchema::new("Date", ColumnKind::Month, ColumnRole::Passthrough),
            ];
            let rows = rows.into_iter().map(|(a, b, c)| vec![a, b, c]).collect();
            let ds = Dataset::new(schema.clone(), rows).unwrap();
            let back = parse_csv(&to_csv(&ds), Some(&schema)).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
