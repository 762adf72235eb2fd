//! Mixed-type datasets with per-cell missing masks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::states::BitState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(ColumnKind::Continuous),
            "binary" => Ok(ColumnKind::Binary),
            other => Err(Error::Schema(format!(
                "unknown column kind '{other}' (expected 'continuous' or 'binary')"
            ))),
        }
    }
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnKind::Continuous => f.write_str("continuous"),
            ColumnKind::Binary => f.write_str("binary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered column list. Rows store continuous cells in the order the
/// continuous columns appear here, binary cells likewise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("schema must have at least one column".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", c.name)));
            }
        }
        Ok(Schema { columns })
    }

    /// Schema with generated names `x1..`, `y1..`.
    pub fn generated(p_x: usize, q: usize) -> Result<Self> {
        let cols = (1..=p_x)
            .map(|i| Column {
                name: format!("x{i}"),
                kind: ColumnKind::Continuous,
            })
            .chain((1..=q).map(|i| Column {
                name: format!("y{i}"),
                kind: ColumnKind::Binary,
            }))
            .collect();
        Schema::new(cols)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn continuous_names(&self) -> Vec<&str> {
        self.names_of(ColumnKind::Continuous)
    }

    pub fn binary_names(&self) -> Vec<&str> {
        self.names_of(ColumnKind::Binary)
    }

    fn names_of(&self, kind: ColumnKind) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Continuous names followed by binary names.
    pub fn internal_names(&self) -> Vec<&str> {
        let mut names = self.continuous_names();
        names.extend(self.binary_names());
        names
    }

    /// The same columns, reordered continuous block first then binary block.
    pub fn internal_order(&self) -> Schema {
        let mut cols: Vec<Column> = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Continuous)
            .cloned()
            .collect();
        cols.extend(
            self.columns
                .iter()
                .filter(|c| c.kind == ColumnKind::Binary)
                .cloned(),
        );
        Schema { columns: cols }
    }

    pub fn p_x(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Continuous)
            .count()
    }

    pub fn q(&self) -> usize {
        self.columns.len() - self.p_x()
    }
}

/// One observation; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub x: Vec<Option<f64>>,
    pub y: Vec<Option<bool>>,
}

impl Row {
    pub fn complete(x: &[f64], y: &[bool]) -> Self {
        Row {
            x: x.iter().map(|&v| Some(v)).collect(),
            y: y.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.x.iter().all(Option::is_some) && self.y.iter().all(Option::is_some)
    }

    pub fn n_observed(&self) -> usize {
        self.x.iter().filter(|v| v.is_some()).count() + self.y.iter().filter(|v| v.is_some()).count()
    }

    /// Continuous cells of a complete row.
    pub fn x_values(&self) -> Option<DVector<f64>> {
        self.x
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(DVector::from_vec)
    }

    /// Binary cells of a complete row.
    pub fn y_state(&self) -> Option<BitState> {
        self.y
            .iter()
            .copied()
            .collect::<Option<Vec<bool>>>()
            .and_then(|b| BitState::from_bits(&b).ok())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub rows: Vec<Row>,
}

/// Means, covariances and correlations of the data in internal column order
/// (continuous then binary, binary cells as 0/1 dummies).
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub corr: DMatrix<f64>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Self> {
        let (p_x, q) = (schema.p_x(), schema.q());
        for (i, r) in rows.iter().enumerate() {
            if r.x.len() != p_x || r.y.len() != q {
                return Err(Error::Dimension(format!(
                    "row {i} has {} continuous and {} binary cells, schema expects {p_x} and {q}",
                    r.x.len(),
                    r.y.len()
                )));
            }
            if let Some(v) = r.x.iter().flatten().find(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} contains non-finite value {v}")));
            }
        }
        Ok(Dataset { schema, rows })
    }

    /// Builds a complete dataset from a continuous matrix and a 0/1 matrix.
    pub fn from_matrices(schema: Schema, x: &DMatrix<f64>, y: &DMatrix<u8>) -> Result<Self> {
        if x.nrows() != y.nrows() && schema.p_x() > 0 && schema.q() > 0 {
            return Err(Error::Dimension("x and y row counts differ".into()));
        }
        let n = if schema.p_x() > 0 { x.nrows() } else { y.nrows() };
        let rows = (0..n)
            .map(|i| {
                let xs: Vec<Option<f64>> = (0..schema.p_x()).map(|j| Some(x[(i, j)])).collect();
                let ys = (0..schema.q())
                    .map(|j| match y[(i, j)] {
                        0 => Ok(Some(false)),
                        1 => Ok(Some(true)),
                        v => Err(Error::InvalidInput(format!("binary cell value {v}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Row { x: xs, y: ys })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(schema, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn p_x(&self) -> usize {
        self.schema.p_x()
    }

    pub fn q(&self) -> usize {
        self.schema.q()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(Row::is_complete)
    }

    /// Mean and (population) variance of each continuous column over observed cells.
    pub fn continuous_column_stats(&self) -> Vec<(f64, f64)> {
        (0..self.p_x())
            .map(|j| {
                let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.x[j]).collect();
                mean_var(&vals)
            })
            .collect()
    }

    /// Mean of each binary column over observed cells.
    pub fn binary_column_means(&self) -> Vec<f64> {
        (0..self.q())
            .map(|j| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter_map(|r| r.y[j].map(|b| b as u8 as f64))
                    .collect();
                mean_var(&vals).0
            })
            .collect()
    }

    /// Moments of a complete dataset. Zero-variance columns make the
    /// correlation undefined and are reported as errors.
    pub fn empirical_moments(&self) -> Result<EmpiricalMoments> {
        if !self.is_complete() {
            return Err(Error::InvalidInput(
                "empirical moments require a complete dataset".into(),
            ));
        }
        if self.is_empty() {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        let p = self.p_x() + self.q();
        let n = self.len() as f64;
        let data = self.to_matrix();
        let mean = DVector::from_iterator(p, (0..p).map(|j| data.column(j).sum() / n));
        let mut centered = data;
        for j in 0..p {
            let m = mean[j];
            centered.column_mut(j).add_scalar_mut(-m);
        }
        let cov = centered.transpose() * &centered / n;
        let corr = correlation_from_cov(&cov)?;
        Ok(EmpiricalMoments { mean, cov, corr })
    }

    /// Complete data as an `N x (p_x + q)` matrix, binary cells as 0/1.
    /// Missing cells become NaN.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let (p_x, q) = (self.p_x(), self.q());
        DMatrix::from_fn(self.len(), p_x + q, |i, j| {
            let r = &self.rows[i];
            if j < p_x {
                r.x[j].unwrap_or(f64::NAN)
            } else {
                r.y[j - p_x].map(|b| b as u8 as f64).unwrap_or(f64::NAN)
            }
        })
    }
}

pub(crate) fn mean_var(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Standardizes a covariance matrix; any non-positive variance is an error.
pub fn correlation_from_cov(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = cov.nrows();
    let sd: Vec<f64> = (0..p)
        .map(|i| {
            let v = cov[(i, i)];
            if v > 0.0 && v.is_finite() {
                Ok(v.sqrt())
            } else {
                Err(Error::DegenerateCorrelation { index: i })
            }
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (sd[i] * sd[j])
        }
    }))
}
