//! Quantification baseline: binary columns treated as continuous 0/1 dummies
//! and fitted with an ordinary norm-constrained Gaussian factor model.

use nalgebra::{DMatrix, DVector};

use crate::data::{correlation_from_cov, Column, ColumnKind, Dataset, Row, Schema};
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig, FitResult};
use crate::model::{Gaussian, Model};
use crate::params::ModelParams;
use crate::states::CompensatedSum;

/// Gaussian factor model in marginal-variance form. The implied covariance is
/// `[I - diag(W W^T)] D + D^{1/2} W W^T D^{1/2}` with `D = diag(sigma_diag)`
/// and `W = w_bar`, so its diagonal is `sigma_diag` whatever `w_bar` is.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    pub mu: DVector<f64>,
    pub sigma_diag: DVector<f64>,
    pub w_bar: DMatrix<f64>,
}

impl QuantModel {
    /// Converts a continuous-only fitted model: `sigma_diag = (1 + c^2) psi`,
    /// `w_bar = sqrt(c^2 / (1 + c^2)) W_hat`.
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        if params.q() != 0 {
            return Err(Error::InvalidInput("quantified models have no binary block".into()));
        }
        let c2 = params.c * params.c;
        Ok(QuantModel {
            mu: params.mu_x.clone(),
            sigma_diag: &params.psi * (1.0 + c2),
            w_bar: &params.w_hat * (c2 / (1.0 + c2)).sqrt(),
        })
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn p_z(&self) -> usize {
        self.w_bar.ncols()
    }

    pub fn implied_cov(&self) -> DMatrix<f64> {
        let p = self.p();
        let sd = self.sigma_diag.map(f64::sqrt);
        let ww = &self.w_bar * self.w_bar.transpose();
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                self.sigma_diag[i]
            } else {
                sd[i] * ww[(i, j)] * sd[j]
            }
        })
    }

    /// Gaussian log-likelihood of a complete continuous dataset.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        if data.q() != 0 || data.p_x() != self.p() {
            return Err(Error::Dimension("dataset does not match the quantified model".into()));
        }
        let g = Gaussian::new(self.implied_cov())?;
        let mut sum = CompensatedSum::default();
        for row in &data.rows {
            let x = row
                .x_values()
                .ok_or_else(|| Error::InvalidInput("quantified likelihood needs complete rows".into()))?;
            sum.add(g.log_pdf(&(x - &self.mu)));
        }
        Ok(sum.value())
    }
}

/// Reinterprets binary columns as real 0/1 columns. Columns keep the
/// internal order (continuous block, then binary block).
pub fn quantify(dataset: &Dataset) -> Result<Dataset> {
    if !dataset.is_complete() {
        return Err(Error::InvalidInput("the quantification baseline does not support missing cells".into()));
    }
    let columns = dataset
        .schema
        .internal_names()
        .into_iter()
        .map(|name| Column {
            name: name.to_string(),
            kind: ColumnKind::Continuous,
        })
        .collect();
    let schema = Schema::new(columns)?;
    let rows = dataset
        .rows
        .iter()
        .map(|r| Row {
            x: r.x.iter().copied().chain(r.y.iter().map(|b| b.map(|v| v as u8 as f64))).collect(),
            y: Vec::new(),
        })
        .collect();
    Dataset::new(schema, rows)
}

#[derive(Debug, Clone)]
pub struct QuantFit {
    pub model: QuantModel,
    pub fit: FitResult,
}

/// Quantifies the data and fits the continuous-only model.
pub fn fit_quant(dataset: &Dataset, p_z: usize, config: &FitConfig) -> Result<QuantFit> {
    let quantified = quantify(dataset)?;
    let fit = fit(&quantified, p_z, config)?;
    Ok(QuantFit {
        model: QuantModel::from_params(&fit.params)?,
        fit,
    })
}

/// Keeps the `d` leading singular directions of `w_bar`. The covariance
/// diagonal is unchanged; off-diagonal entries shrink.
pub fn reduce_dims(model: &QuantModel, d: usize) -> Result<QuantModel> {
    let p_z = model.p_z();
    if d == 0 || d > p_z {
        return Err(Error::LatentDimOutOfRange { p_z: d, max: p_z });
    }
    if d == p_z {
        return Ok(model.clone());
    }
    let svd = model.w_bar.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut w = DMatrix::zeros(model.p(), d);
    for (k, &i) in order.iter().take(d).enumerate() {
        w.set_column(k, &(u.column(i) * svd.singular_values[i]));
    }
    Ok(QuantModel {
        mu: model.mu.clone(),
        sigma_diag: model.sigma_diag.clone(),
        w_bar: w,
    })
}

/// `1 - sum (r - r_hat)^2 / sum (r - r_bar)^2` over the strict lower triangle.
pub fn r_squared(empirical: &DMatrix<f64>, model: &DMatrix<f64>) -> Result<f64> {
    let p = empirical.nrows();
    if empirical.shape() != model.shape() || empirical.ncols() != p {
        return Err(Error::Dimension("correlation matrices must be square and of equal size".into()));
    }
    if p < 2 {
        return Err(Error::InvalidInput("need at least two variables".into()));
    }
    let pairs: Vec<(f64, f64)> = (0..p)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (empirical[(i, j)], model[(i, j)]))
        .collect();
    let mean = pairs.iter().map(|(r, _)| r).sum::<f64>() / pairs.len() as f64;
    let ss_tot: f64 = pairs.iter().map(|(r, _)| (r - mean).powi(2)).sum();
    let ss_res: f64 = pairs.iter().map(|(r, m)| (r - m).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::InvalidInput("empirical correlations are all equal".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Models that imply a correlation matrix over the observed variables
/// (internal order: continuous then binary).
pub trait ReproducesCorrelation {
    fn reproduced_corr(&self) -> Result<DMatrix<f64>>;
}

impl ReproducesCorrelation for ModelParams {
    fn reproduced_corr(&self) -> Result<DMatrix<f64>> {
        Ok(Model::new(self.clone())?.moments()?.corr)
    }
}

impl ReproducesCorrelation for QuantModel {
    fn reproduced_corr(&self) -> Result<DMatrix<f64>> {
        correlation_from_cov(&self.implied_cov())
    }
}

pub fn reproduced_corr<M: ReproducesCorrelation + ?Sized>(model: &M) -> Result<DMatrix<f64>> {
    model.reproduced_corr()
}
