//! Drawing synthetic datasets from a fitted or hand-specified model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Row, Schema};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::ModelParams;

/// Draws `n` complete rows: `y` by inverse CDF over the mixing weights, then
/// `x ~ N(mu_x + W G^T y, Sigma_x)`. Columns are named `x1.., y1..`.
pub fn sample(params: &ModelParams, n: usize, seed: u64) -> Result<Dataset> {
    let schema = Schema::generated(params.p_x(), params.q())?;
    sample_with_schema(params, schema, n, seed)
}

pub fn sample_with_schema(params: &ModelParams, schema: Schema, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    if schema.p_x() != params.p_x() || schema.q() != params.q() {
        return Err(Error::Dimension("schema does not match model".into()));
    }
    let model = Model::new(params.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = draw_rows(&model, n, &mut rng);
    Dataset::new(schema, rows)
}

pub(crate) fn draw_rows<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Vec<Row> {
    let p = model.params();
    let (p_x, q) = (p.p_x(), p.q());
    let mut cdf = Vec::with_capacity(1 << q);
    let mut acc = 0.0;
    for lp in &model.mixing_table().log_pi {
        acc += lp.exp();
        cdf.push(acc);
    }
    let l: &DMatrix<f64> = model.obs_gaussian().factor();
    let means: Vec<DVector<f64>> = (0..cdf.len()).map(|k| model.state_mean(k)).collect();

    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let eps = DVector::from_fn(p_x, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &means[k] + l * eps;
            Row {
                x: x.iter().map(|&v| Some(v)).collect(),
                y: (0..q).map(|s| Some((k >> s) & 1 == 1)).collect(),
            }
        })
        .collect()
}
