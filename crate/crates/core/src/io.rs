//! Files: CSV data, the schema sidecar, and the JSON model document.
//!
//! Data CSVs carry a header row. Continuous cells are decimal numbers, binary
//! cells are `0` or `1`, and an empty cell is missing; nothing else (`NA`,
//! `?`, `nan`, `inf`) is accepted. The schema sidecar is itself a CSV with
//! columns `name,kind`. Numbers are written in shortest round-trip form, so
//! writing and re-reading is lossless.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset, Row, Schema};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::states::check_capacity;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Formats a float so that parsing it back gives the same bits.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn read_schema<R: Read>(reader: R) -> Result<Schema> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "name" || &header[1] != "kind" {
        return Err(Error::Schema("schema file header must be 'name,kind'".into()));
    }
    let mut columns = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let kind: ColumnKind = rec[1].parse().map_err(|_| Error::Parse {
            row: i + 1,
            column: "kind".into(),
            message: format!("unknown kind '{}' (expected continuous or binary)", &rec[1]),
        })?;
        columns.push(Column {
            name: rec[0].to_string(),
            kind,
        });
    }
    Schema::new(columns)
}

pub fn read_schema_file(path: &Path) -> Result<Schema> {
    read_schema(File::open(path)?)
}

pub fn write_schema<W: Write>(schema: &Schema, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["name", "kind"])?;
    for c in schema.columns() {
        w.write_record([c.name.as_str(), &c.kind.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_schema_file(schema: &Schema, path: &Path) -> Result<()> {
    write_schema(schema, File::create(path)?)
}

/// Options applied while reading data.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Continuous columns replaced by their natural logarithm; every observed
    /// value must be positive.
    pub log_columns: Vec<String>,
}

/// Reads a data CSV whose header lists every schema column exactly once.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, options: &LoadOptions) -> Result<Dataset> {
    check_capacity(schema.q())?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();
    let columns = schema.columns();
    if header.len() != columns.len() {
        return Err(Error::Format(format!(
            "header has {} columns, schema has {}",
            header.len(),
            columns.len()
        )));
    }
    // For each header position: (is_binary, index within its block).
    let cont: Vec<&str> = schema.continuous_names();
    let bin: Vec<&str> = schema.binary_names();
    let mut slots = Vec::with_capacity(header.len());
    for name in header.iter() {
        let name = name.trim();
        let slot = if let Some(j) = cont.iter().position(|c| *c == name) {
            (false, j)
        } else if let Some(j) = bin.iter().position(|c| *c == name) {
            (true, j)
        } else {
            return Err(Error::Format(format!("column '{name}' is not in the schema")));
        };
        if slots.contains(&slot) {
            return Err(Error::Format(format!("column '{name}' appears twice")));
        }
        slots.push(slot);
    }
    for name in &options.log_columns {
        if !cont.contains(&name.as_str()) {
            return Err(Error::Schema(format!("log column '{name}' is not a continuous column")));
        }
    }
    let log_mask: Vec<bool> = cont.iter().map(|c| options.log_columns.iter().any(|l| l == c)).collect();

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row: row_no,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut row = Row {
            x: vec![None; cont.len()],
            y: vec![None; bin.len()],
        };
        for (k, cell) in rec.iter().enumerate() {
            let (is_bin, j) = slots[k];
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                row: row_no,
                column: header[k].to_string(),
                message,
            };
            if is_bin {
                row.y[j] = Some(match cell {
                    "0" => false,
                    "1" => true,
                    other => return Err(err(format!("binary cell '{other}' is not 0 or 1"))),
                });
            } else {
                let v: f64 = cell.parse().map_err(|_| err(format!("'{cell}' is not a number")))?;
                if !v.is_finite() {
                    return Err(err(format!("'{cell}' is not finite")));
                }
                let v = if log_mask[j] {
                    if !(v > 0.0) {
                        return Err(err(format!("log transform needs a positive value, got {cell}")));
                    }
                    v.ln()
                } else {
                    v
                };
                row.x[j] = Some(v);
            }
        }
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows)
}

pub fn load_csv(data_path: &Path, schema_path: &Path) -> Result<Dataset> {
    let schema = read_schema_file(schema_path)?;
    load_csv_with_schema(data_path, &schema, &LoadOptions::default())
}

pub fn load_csv_with_schema(data_path: &Path, schema: &Schema, options: &LoadOptions) -> Result<Dataset> {
    read_csv(File::open(data_path)?, schema, options)
}

/// Writes the data with columns in schema order.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let schema = &dataset.schema;
    let cont = schema.continuous_names();
    let bin = schema.binary_names();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.columns().iter().map(|c| c.name.as_str()))?;
    for row in &dataset.rows {
        let rec: Vec<String> = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Continuous => {
                    let j = cont.iter().position(|n| *n == c.name).expect("schema column");
                    row.x[j].map(format_f64).unwrap_or_default()
                }
                ColumnKind::Binary => {
                    let j = bin.iter().position(|n| *n == c.name).expect("schema column");
                    row.y[j].map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default()
                }
            })
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    write_csv(dataset, File::create(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub log_lik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub seed: u64,
    pub restarts: usize,
}

/// Versioned JSON document holding a model and the schema its parameters
/// refer to. Parameters are in internal order (continuous block first);
/// loadings are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub schema: Vec<Column>,
    pub p_z: usize,
    pub mu_x: Vec<f64>,
    pub psi: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub w_hat: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub canonical: bool,
    pub fit: Option<FitMetadata>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

impl ModelFile {
    pub fn new(schema: &Schema, params: &ModelParams, canonical: bool, fit: Option<FitMetadata>) -> Result<Self> {
        if schema.p_x() != params.p_x() || schema.q() != params.q() {
            return Err(Error::Dimension("schema does not match the model".into()));
        }
        Ok(ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            schema: schema.columns().to_vec(),
            p_z: params.p_z(),
            mu_x: params.mu_x.iter().copied().collect(),
            psi: params.psi.iter().copied().collect(),
            b: params.b.iter().copied().collect(),
            c: params.c,
            w_hat: row_major(&params.w_hat),
            g_hat: row_major(&params.g_hat),
            canonical,
            fit,
        })
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::new(self.schema.clone())
    }

    pub fn params(&self) -> Result<ModelParams> {
        let schema = self.schema()?;
        let (p_x, q, p_z) = (schema.p_x(), schema.q(), self.p_z);
        if self.w_hat.len() != p_x * p_z || self.g_hat.len() != q * p_z {
            return Err(Error::Format("loading matrices do not match the schema and p_z".into()));
        }
        ModelParams::new(
            DVector::from_vec(self.mu_x.clone()),
            DVector::from_vec(self.psi.clone()),
            DVector::from_vec(self.b.clone()),
            self.c,
            DMatrix::from_row_slice(p_x, p_z, &self.w_hat),
            DMatrix::from_row_slice(q, p_z, &self.g_hat),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        file.params()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
