//! Dataset and schema file formats.
//!
//! Datasets are CSV with one column per schema variable plus the reserved
//! columns `_origin` (`panel`/`refresh`), `_w` (`1`/`0`/`NA`), and optional
//! `_weight`. Missing cells are the single sentinel `NA`; levels are written
//! 1-based. Schemas are JSON lists of `{name, role, levels}`.

use std::io::Write;
use std::path::Path;

use crate::data::{DatasetKind, Origin, PanelDataset, RowRecord, Schema, VariableSchema};
use crate::error::{Error, Result};

const MISSING: &str = "NA";

/// Read a schema from a JSON file.
pub fn read_schema(path: &Path) -> Result<Schema> {
    let text = std::fs::read_to_string(path)?;
    let vars: Vec<VariableSchema> = serde_json::from_str(&text)?;
    Schema::new(vars)
}

/// Write a schema as a JSON file.
pub fn write_schema(schema: &Schema, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(schema.vars())?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Write a dataset in the CSV contract. Works for both collected and
/// completed datasets; missing values serialize as `NA`.
pub fn write_dataset(ds: &PanelDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    let schema = ds.schema();
    let mut header: Vec<&str> = schema.vars().iter().map(|v| v.name.as_str()).collect();
    header.push("_origin");
    header.push("_w");
    if ds.has_weights() {
        header.push("_weight");
    }
    writeln!(out, "{}", header.join(","))?;

    let q = schema.q();
    let mut line = String::new();
    for i in 0..ds.n() {
        line.clear();
        for j in 0..q {
            if j > 0 {
                line.push(',');
            }
            match ds.cell(i, j) {
                Some(level) => line.push_str(&(level as usize + 1).to_string()),
                None => line.push_str(MISSING),
            }
        }
        line.push(',');
        line.push_str(match ds.origin(i) {
            Origin::Panel => "panel",
            Origin::Refresh => "refresh",
        });
        line.push(',');
        match ds.w(i) {
            Some(true) => line.push('1'),
            Some(false) => line.push('0'),
            None => line.push_str(MISSING),
        }
        if ds.has_weights() {
            line.push(',');
            line.push_str(&ds.weight(i).to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a dataset under the CSV contract. `kind` selects the validation
/// regime: `Collected` enforces the structural missingness rules,
/// `Completed` requires every cell present.
pub fn read_dataset(path: &Path, schema: &Schema, kind: DatasetKind) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let q = schema.q();
    let mut var_cols: Vec<Option<usize>> = vec![None; q];
    let mut origin_col = None;
    let mut w_col = None;
    let mut weight_col = None;
    for (c, name) in headers.iter().enumerate() {
        match name {
            "_origin" => origin_col = Some(c),
            "_w" => w_col = Some(c),
            "_weight" => weight_col = Some(c),
            other => {
                let j = schema.index_of(other).map_err(|_| Error::Parse {
                    row: 0,
                    column: other.to_string(),
                    detail: "column not in schema".into(),
                })?;
                var_cols[j] = Some(c);
            }
        }
    }
    let origin_col = origin_col.ok_or_else(|| missing_column("_origin"))?;
    let w_col = w_col.ok_or_else(|| missing_column("_w"))?;
    for (j, col) in var_cols.iter().enumerate() {
        if col.is_none() {
            return Err(missing_column(&schema.var(j).name));
        }
    }

    let mut origins = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut cells = Vec::with_capacity(q);
        for j in 0..q {
            let v = schema.var(j);
            let raw = &record[var_cols[j].unwrap()];
            if raw == MISSING {
                cells.push(None);
            } else {
                let level: usize = raw.parse().map_err(|_| Error::Parse {
                    row: i,
                    column: v.name.clone(),
                    detail: format!("expected level 1..={} or NA, got {raw:?}", v.levels),
                })?;
                if level < 1 || level > v.levels {
                    return Err(Error::SchemaMismatch {
                        row: i,
                        column: v.name.clone(),
                        detail: format!("level {level} out of 1..={}", v.levels),
                    });
                }
                cells.push(Some((level - 1) as u8));
            }
        }
        let origin = match &record[origin_col] {
            "panel" => Origin::Panel,
            "refresh" => Origin::Refresh,
            other => {
                return Err(Error::Parse {
                    row: i,
                    column: "_origin".into(),
                    detail: format!("expected panel or refresh, got {other:?}"),
                })
            }
        };
        let w = match &record[w_col] {
            "1" => Some(true),
            "0" => Some(false),
            MISSING => None,
            other => {
                return Err(Error::Parse {
                    row: i,
                    column: "_w".into(),
                    detail: format!("expected 1, 0, or NA, got {other:?}"),
                })
            }
        };
        let weight = match weight_col {
            Some(c) => {
                let raw = &record[c];
                Some(raw.parse::<f64>().map_err(|_| Error::Parse {
                    row: i,
                    column: "_weight".into(),
                    detail: format!("expected positive decimal, got {raw:?}"),
                })?)
            }
            None => None,
        };
        origins.push(origin);
        rows.push(RowRecord { cells, w, weight });
    }

    PanelDataset::from_rows(schema.clone(), origins, rows, kind)
}

fn missing_column(name: &str) -> Error {
    Error::Parse {
        row: 0,
        column: name.to_string(),
        detail: "required column missing from header".into(),
    }
}
