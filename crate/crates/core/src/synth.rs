//! Synthetic mixed data and the simulation studies built on it.
//!
//! Datasets are drawn from a random correlation matrix (Gamma eigenvalues,
//! Gram-Schmidt eigenvectors), and the last `p_bin` columns are dichotomized
//! at standard-normal quantiles drawn uniformly. Two experiments are provided:
//! correlation reproducibility of the proposed model against the
//! quantification baseline, and the sampling distribution of the estimator
//! under a known truth.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baseline::{fit_quant, r_squared, reduce_dims, ReproducesCorrelation};
use crate::canon::canonicalize;
use crate::data::{Dataset, Row, Schema};
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig};
use crate::params::ModelParams;
use crate::sample::sample_with_schema;

pub const MAX_ATTEMPTS: usize = 1000;
/// With the default filters roughly one draw in a few hundred is accepted.
pub const MAX_DATASET_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub p_cont: usize,
    pub p_bin: usize,
    pub n: usize,
    pub n_datasets: usize,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub seed: u64,
    pub min_xy_corr: f64,
    pub min_yy_corr: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            p_cont: 5,
            p_bin: 5,
            n: 1000,
            n_datasets: 500,
            gamma_shape: 1.0,
            gamma_rate: 1.0,
            seed: 0,
            min_xy_corr: 0.5,
            min_yy_corr: 0.5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let thresholds = [self.min_xy_corr, self.min_yy_corr];
        if self.p_cont + self.p_bin == 0 || self.n == 0 || self.n_datasets == 0 {
            return Err(Error::InvalidInput("counts must be positive".into()));
        }
        if !(self.gamma_shape > 0.0 && self.gamma_rate > 0.0) {
            return Err(Error::InvalidInput("Gamma shape and rate must be positive".into()));
        }
        if thresholds.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(Error::InvalidInput("correlation thresholds must lie in [0, 1)".into()));
        }
        crate::states::check_capacity(self.p_bin)
    }
}

/// Per-index RNG stream, independent of evaluation order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Modified Gram-Schmidt on the columns; `None` if a column collapses.
fn gram_schmidt(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        let original = a.column(j).norm();
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).into_owned();
            q.column_mut(j).axpy(-proj, &qk, 1.0);
        }
        let n = q.column(j).norm();
        if !(n > 1e-10 * original) {
            return None;
        }
        q.column_mut(j).scale_mut(1.0 / n);
    }
    Some(q)
}

/// Random correlation matrix: `Q diag(lambda) Q^T` standardized to unit
/// diagonal, with Gamma-distributed `lambda`.
pub fn gen_correlation_matrix<R: Rng + ?Sized>(p: usize, spec: &SynthSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let gamma = Gamma::new(spec.gamma_shape, 1.0 / spec.gamma_rate)
        .map_err(|e| Error::InvalidInput(format!("Gamma distribution: {e}")))?;
    for _ in 0..MAX_ATTEMPTS {
        let lambda: Vec<f64> = (0..p).map(|_| gamma.sample(rng)).collect();
        if lambda.iter().any(|&l| !(l >= 1e-10)) {
            continue;
        }
        let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let Some(q) = gram_schmidt(&a) else { continue };
        let cov = &q * DMatrix::from_diagonal(&DVector::from_vec(lambda)) * q.transpose();
        let sd: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
        let corr = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else {
                let (a, b) = (i.min(j), i.max(j));
                cov[(a, b)] / (sd[a] * sd[b])
            }
        });
        if corr.clone().cholesky().is_some() {
            return Ok(corr);
        }
    }
    Err(Error::Numerical(format!(
        "no positive definite correlation matrix after {MAX_ATTEMPTS} draws"
    )))
}

/// A generated dataset with its latent ground truth.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub dataset: Dataset,
    /// Correlation of the underlying Gaussian vector.
    pub corr: DMatrix<f64>,
    /// Quantile levels `u`; binary column `j` is `1{x > Phi^{-1}(u_j)}`.
    pub quantiles: Vec<f64>,
    pub attempts: usize,
}

/// Why a draw was rejected; `None` when it passes every filter.
fn rejection_reason(data: &Dataset, spec: &SynthSpec) -> Option<String> {
    for (j, m) in data.binary_column_means().iter().enumerate() {
        if *m <= 0.0 || *m >= 1.0 {
            return Some(format!("binary column {} is constant", j + 1));
        }
    }
    let corr = match data.empirical_moments() {
        Ok(m) => m.corr,
        Err(e) => return Some(e.to_string()),
    };
    let (p_x, q) = (spec.p_cont, spec.p_bin);
    if p_x > 0 && q > 0 {
        let xy = (0..p_x)
            .flat_map(|i| (0..q).map(move |j| (i, p_x + j)))
            .map(|(i, j)| corr[(i, j)].abs())
            .fold(0.0, f64::max);
        if xy <= spec.min_xy_corr {
            return Some(format!("max |corr(x, y)| = {xy:.3} does not exceed {}", spec.min_xy_corr));
        }
    }
    if q > 1 {
        let yy = (0..q)
            .flat_map(|i| (0..i).map(move |j| (p_x + i, p_x + j)))
            .map(|(i, j)| corr[(i, j)].abs())
            .fold(0.0, f64::max);
        if yy <= spec.min_yy_corr {
            return Some(format!("max |corr(y, y)| = {yy:.3} does not exceed {}", spec.min_yy_corr));
        }
    }
    None
}

/// Draws one dataset passing the acceptance filters.
pub fn gen_mixed_dataset<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Result<SynthDataset> {
    spec.validate()?;
    let (p_x, q) = (spec.p_cont, spec.p_bin);
    let p = p_x + q;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let schema = Schema::generated(p_x, q)?;
    let mut last = String::new();
    for attempt in 1..=MAX_DATASET_ATTEMPTS {
        let corr = gen_correlation_matrix(p, spec, rng)?;
        let l = corr.clone().cholesky().expect("generated matrix is positive definite").unpack();
        let quantiles: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
        let cuts: Vec<f64> = quantiles.iter().map(|&u| normal.inverse_cdf(u)).collect();
        let rows = (0..spec.n)
            .map(|_| {
                let e = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                let z = &l * e;
                Row {
                    x: (0..p_x).map(|j| Some(z[j])).collect(),
                    y: (0..q).map(|j| Some(z[p_x + j] > cuts[j])).collect(),
                }
            })
            .collect();
        let dataset = Dataset::new(schema.clone(), rows)?;
        match rejection_reason(&dataset, spec) {
            None => {
                return Ok(SynthDataset {
                    dataset,
                    corr,
                    quantiles,
                    attempts: attempt,
                })
            }
            Some(reason) => last = reason,
        }
    }
    Err(Error::Numerical(format!(
        "no dataset accepted after {MAX_DATASET_ATTEMPTS} attempts; last rejection: {last}"
    )))
}

/// Latent dimension of the full quantified model that the reduced variant
/// starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FullDims {
    /// `p_x + q`.
    Full,
    /// `p_x + q - 1`.
    FullMinusOne,
}

#[derive(Debug, Clone)]
pub struct ReproConfig {
    pub fit: FitConfig,
    pub full_dims: FullDims,
}

pub const MODEL_PROPOSED: &str = "proposed";
pub const MODEL_QUANT: &str = "quant";
pub const MODEL_QUANT_REDUCED: &str = "quant_reduced";

#[derive(Debug, Clone, PartialEq)]
pub struct ReproRow {
    pub dataset: usize,
    pub model: &'static str,
    pub p_z: usize,
    pub r_squared: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub dataset: usize,
    pub model: &'static str,
    pub p_z: usize,
    pub i: usize,
    pub j: usize,
    pub pair_type: &'static str,
    pub variance_bucket: &'static str,
    pub empirical: f64,
    pub reproduced: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ReproReport {
    pub rows: Vec<ReproRow>,
    pub pairs: Vec<PairRecord>,
    /// Datasets that could not be generated, with the reason.
    pub failed_datasets: Vec<(usize, String)>,
}

impl ReproReport {
    /// Mean R-squared over datasets for one model and latent dimension.
    pub fn mean_r_squared(&self, model: &str, p_z: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.model == model && r.p_z == p_z)
            .filter_map(|r| r.r_squared)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Bucket of the smallest binary variance `m (1 - m)` in a pair.
fn variance_bucket(var: Option<f64>) -> &'static str {
    match var {
        None => "none",
        Some(v) if v < 0.1 => "lt0.1",
        Some(v) if v < 0.2 => "0.1-0.2",
        Some(_) => "ge0.2",
    }
}

fn pair_records(
    dataset: usize,
    model: &'static str,
    p_z: usize,
    p_x: usize,
    empirical: &DMatrix<f64>,
    reproduced: &DMatrix<f64>,
    binary_var: &[f64],
) -> Vec<PairRecord> {
    let p = empirical.nrows();
    let mut out = Vec::new();
    for i in 0..p {
        for j in 0..i {
            let (bi, bj) = (i >= p_x, j >= p_x);
            let pair_type = match (bj, bi) {
                (false, false) => "cont-cont",
                (false, true) | (true, false) => "cont-bin",
                (true, true) => "bin-bin",
            };
            let var = [i, j]
                .iter()
                .filter(|&&k| k >= p_x)
                .map(|&k| binary_var[k - p_x])
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
            out.push(PairRecord {
                dataset,
                model,
                p_z,
                i,
                j,
                pair_type,
                variance_bucket: variance_bucket(var),
                empirical: empirical[(i, j)],
                reproduced: reproduced[(i, j)],
            });
        }
    }
    out
}

/// Correlation reproducibility of the proposed model, the quantification
/// baseline, and the baseline reduced from a full-rank fit, for every
/// latent dimension in `p_z_list`.
pub fn run_reproducibility_experiment(spec: &SynthSpec, p_z_list: &[usize], config: &ReproConfig) -> Result<ReproReport> {
    spec.validate()?;
    let p = spec.p_cont + spec.p_bin;
    if p_z_list.iter().any(|&d| d == 0 || d > p) {
        return Err(Error::LatentDimOutOfRange {
            p_z: p_z_list.iter().copied().find(|&d| d == 0 || d > p).unwrap_or(0),
            max: p,
        });
    }
    let full = match config.full_dims {
        FullDims::Full => p,
        FullDims::FullMinusOne => (p - 1).max(1),
    };

    let per_dataset: Vec<std::result::Result<(Vec<ReproRow>, Vec<PairRecord>), String>> = (0..spec.n_datasets)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(spec.seed, k as u64);
            let synth = gen_mixed_dataset(spec, &mut rng).map_err(|e| e.to_string())?;
            let data = &synth.dataset;
            let empirical = data.empirical_moments().map_err(|e| e.to_string())?.corr;
            let binary_var: Vec<f64> = data.binary_column_means().iter().map(|m| m * (1.0 - m)).collect();
            let mut fit_cfg = config.fit.clone();
            fit_cfg.seed = rng.random();

            let mut rows = Vec::new();
            let mut pairs = Vec::new();
            let mut record = |model: &'static str, p_z: usize, corr: Result<DMatrix<f64>>| {
                let outcome = corr.and_then(|c| r_squared(&empirical, &c).map(|r2| (c, r2)));
                match outcome {
                    Ok((c, r2)) => {
                        pairs.extend(pair_records(k, model, p_z, spec.p_cont, &empirical, &c, &binary_var));
                        rows.push(ReproRow {
                            dataset: k,
                            model,
                            p_z,
                            r_squared: Some(r2),
                            error: None,
                        });
                    }
                    Err(e) => rows.push(ReproRow {
                        dataset: k,
                        model,
                        p_z,
                        r_squared: None,
                        error: Some(e.to_string()),
                    }),
                }
            };
            let full_fit = fit_quant(data, full, &fit_cfg);
            for &p_z in p_z_list {
                record(
                    MODEL_PROPOSED,
                    p_z,
                    fit(data, p_z, &fit_cfg).and_then(|f| f.params.reproduced_corr()),
                );
                record(
                    MODEL_QUANT,
                    p_z,
                    fit_quant(data, p_z, &fit_cfg).and_then(|f| f.model.reproduced_corr()),
                );
                let reduced = match &full_fit {
                    Ok(f) if p_z <= full => reduce_dims(&f.model, p_z).and_then(|m| m.reproduced_corr()),
                    Ok(_) => Err(Error::LatentDimOutOfRange { p_z, max: full }),
                    Err(e) => Err(Error::Numerical(format!("full-rank fit failed: {e}"))),
                };
                record(MODEL_QUANT_REDUCED, p_z, reduced);
            }
            Ok((rows, pairs))
        })
        .collect();

    let mut report = ReproReport::default();
    for (k, res) in per_dataset.into_iter().enumerate() {
        match res {
            Ok((rows, pairs)) => {
                report.rows.extend(rows);
                report.pairs.extend(pairs);
            }
            Err(e) => report.failed_datasets.push((k, e)),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SamplingDistSpec {
    pub truth: ModelParams,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

impl SamplingDistSpec {
    pub fn new(truth: ModelParams) -> Self {
        SamplingDistSpec {
            truth,
            sizes: vec![1000, 3000, 9000],
            replicates: 1000,
            seed: 0,
        }
    }
}

/// Canonical parameter vector `[mu_x, psi, b, c, W_hat, G_hat]` (loadings
/// row-major) with matching names.
pub fn parameter_vector(params: &ModelParams, schema: &Schema) -> (Vec<String>, Vec<f64>) {
    let cont = schema.continuous_names();
    let bin = schema.binary_names();
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (j, n) in cont.iter().enumerate() {
        names.push(format!("mu_x[{n}]"));
        values.push(params.mu_x[j]);
    }
    for (j, n) in cont.iter().enumerate() {
        names.push(format!("psi[{n}]"));
        values.push(params.psi[j]);
    }
    for (j, n) in bin.iter().enumerate() {
        names.push(format!("b[{n}]"));
        values.push(params.b[j]);
    }
    names.push("c".into());
    values.push(params.c);
    for (m, labels, tag) in [(&params.w_hat, &cont, "w_hat"), (&params.g_hat, &bin, "g_hat")] {
        for (j, n) in labels.iter().enumerate() {
            for s in 0..params.p_z() {
                names.push(format!("{tag}[{n},{}]", s + 1));
                values.push(m[(j, s)]);
            }
        }
    }
    (names, values)
}

#[derive(Debug, Clone)]
pub struct SamplingDistReport {
    pub names: Vec<String>,
    /// Canonical truth in the layout of [`parameter_vector`].
    pub truth: Vec<f64>,
    pub sizes: Vec<usize>,
    /// `estimates[size][replicate]`; `None` for failed replicates.
    pub estimates: Vec<Vec<Option<Vec<f64>>>>,
    pub failures: Vec<(usize, usize, String)>,
}

impl SamplingDistReport {
    /// Median absolute error of each parameter at each size.
    pub fn median_abs_error(&self) -> Vec<Vec<f64>> {
        self.estimates
            .iter()
            .map(|reps| {
                (0..self.truth.len())
                    .map(|k| {
                        let mut errs: Vec<f64> = reps
                            .iter()
                            .flatten()
                            .map(|v| (v[k] - self.truth[k]).abs())
                            .collect();
                        median(&mut errs)
                    })
                    .collect()
            })
            .collect()
    }

    /// Mean and standard error of each parameter at each size.
    pub fn mean_and_se(&self) -> Vec<Vec<(f64, f64)>> {
        self.estimates
            .iter()
            .map(|reps| {
                let ok: Vec<&Vec<f64>> = reps.iter().flatten().collect();
                let n = ok.len() as f64;
                (0..self.truth.len())
                    .map(|k| {
                        let mean = ok.iter().map(|v| v[k]).sum::<f64>() / n;
                        let var = ok.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        (mean, (var / n).sqrt())
                    })
                    .collect()
            })
            .collect()
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Repeatedly samples from the truth, fits and canonicalizes. The truth is
/// canonicalized first so estimates and truth share one orientation.
pub fn run_sampling_distribution(spec: &SamplingDistSpec, config: &FitConfig) -> Result<SamplingDistReport> {
    if spec.sizes.is_empty() || spec.sizes.windows(2).any(|w| w[0] >= w[1]) || spec.sizes[0] == 0 {
        return Err(Error::InvalidInput("sizes must be positive and strictly ascending".into()));
    }
    if spec.replicates == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let truth = canonicalize(&spec.truth)?.params;
    let schema = Schema::generated(truth.p_x(), truth.q())?;
    let (names, truth_vec) = parameter_vector(&truth, &schema);
    let p_z = truth.p_z();

    let jobs: Vec<(usize, usize)> = (0..spec.sizes.len())
        .flat_map(|s| (0..spec.replicates).map(move |r| (s, r)))
        .collect();
    let results: Vec<std::result::Result<Vec<f64>, String>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let mut rng = stream_rng(spec.seed, ((s as u64) << 32) | r as u64);
            let data = sample_with_schema(&truth, schema.clone(), spec.sizes[s], rng.random())
                .map_err(|e| e.to_string())?;
            let mut cfg = config.clone();
            cfg.seed = rng.random();
            let fitted = fit(&data, p_z, &cfg).map_err(|e| e.to_string())?;
            let canon = canonicalize(&fitted.params).map_err(|e| e.to_string())?;
            Ok(parameter_vector(&canon.params, &schema).1)
        })
        .collect();

    let mut estimates = vec![vec![None; spec.replicates]; spec.sizes.len()];
    let mut failures = Vec::new();
    for (&(s, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(v) => estimates[s][r] = Some(v),
            Err(e) => failures.push((s, r, e)),
        }
    }
    Ok(SamplingDistReport {
        names,
        truth: truth_vec,
        sizes: spec.sizes.clone(),
        estimates,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_model::random_params;

    #[test]
    fn correlation_matrices_are_valid() {
        let spec = SynthSpec::default();
        let mut rng = stream_rng(1, 0);
        assert_eq!(gen_correlation_matrix(1, &spec, &mut rng).unwrap(), DMatrix::identity(1, 1));
        for _ in 0..1000 {
            let r = gen_correlation_matrix(6, &spec, &mut rng).unwrap();
            for i in 0..6 {
                assert_eq!(r[(i, i)], 1.0);
                for j in 0..6 {
                    assert_eq!(r[(i, j)], r[(j, i)]);
                }
            }
            let min = r.symmetric_eigenvalues().min();
            assert!(min > 0.0);
        }
    }

    #[test]
    fn accepted_datasets_pass_filters() {
        let spec = SynthSpec {
            n: 400,
            ..Default::default()
        };
        let mut rng = stream_rng(2, 0);
        for _ in 0..5 {
            let s = gen_mixed_dataset(&spec, &mut rng).unwrap();
            assert_eq!(s.dataset.len(), 400);
            assert!(rejection_reason(&s.dataset, &spec).is_none());
            for m in s.dataset.binary_column_means() {
                assert!(m > 0.0 && m < 1.0);
            }
        }
    }

    #[test]
    fn dichotomization_marginal() {
        // with the filters off, P(y = 1) = 1 - u
        let spec = SynthSpec {
            p_cont: 1,
            p_bin: 3,
            n: 20000,
            min_xy_corr: 0.0,
            min_yy_corr: 0.0,
            ..Default::default()
        };
        let mut rng = stream_rng(3, 0);
        for _ in 0..3 {
            let s = gen_mixed_dataset(&spec, &mut rng).unwrap();
            for (m, u) in s.dataset.binary_column_means().iter().zip(&s.quantiles) {
                let p = 1.0 - u;
                let se = (p * (1.0 - p) / spec.n as f64).sqrt();
                assert!((m - p).abs() <= 4.0 * se + 1e-12, "{m} vs {p}");
            }
        }
    }

    #[test]
    // a thresholded Gaussian cannot correlate with its source above about 0.8
    fn impossible_filters_report_last_reason() {
        let spec = SynthSpec {
            p_cont: 1,
            p_bin: 1,
            n: 50,
            min_xy_corr: 0.999,
            ..Default::default()
        };
        let err = gen_mixed_dataset(&spec, &mut stream_rng(4, 0)).unwrap_err();
        assert!(err.to_string().contains("last rejection"));
    }

    #[test]
    fn reproducibility_table_shape() {
        let spec = SynthSpec {
            n: 300,
            n_datasets: 2,
            p_cont: 3,
            p_bin: 2,
            ..Default::default()
        };
        let cfg = ReproConfig {
            fit: FitConfig {
                n_restarts: 2,
                ..Default::default()
            },
            full_dims: FullDims::Full,
        };
        let report = run_reproducibility_experiment(&spec, &[1, 2], &cfg).unwrap();
        let accepted = spec.n_datasets - report.failed_datasets.len();
        assert_eq!(report.rows.len(), accepted * 2 * 3);
        let per_fit = 5 * 4 / 2;
        let ok = report.rows.iter().filter(|r| r.r_squared.is_some()).count();
        assert_eq!(report.pairs.len(), ok * per_fit);
        assert!(report.rows.iter().all(|r| r.r_squared.is_none_or(|v| v <= 1.0)));
    }

    #[test]
    fn sampling_distribution_is_deterministic() {
        let mut rng = stream_rng(5, 0);
        let truth = random_params(&mut rng, 2, 2, 1);
        let spec = SamplingDistSpec {
            truth,
            sizes: vec![200, 400],
            replicates: 3,
            seed: 9,
        };
        let cfg = FitConfig {
            n_restarts: 2,
            ..Default::default()
        };
        let a = run_sampling_distribution(&spec, &cfg).unwrap();
        let b = run_sampling_distribution(&spec, &cfg).unwrap();
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.names.len(), a.truth.len());
        assert_eq!(a.names[0], "mu_x[x1]");
        assert_eq!(a.median_abs_error().len(), 2);
    }
}
