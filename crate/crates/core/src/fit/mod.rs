//! Maximum-likelihood fitting under the norm constraint.
//!
//! The optimizer works on [`FreeParams`], where positivity and the unit row
//! norms hold by construction. Each restart runs L-BFGS with a backtracking
//! (Armijo) line search on the per-observation negative log-likelihood, so
//! accepted steps never decrease the likelihood. Restarts run in parallel and
//! the best one wins, ties going to the lowest restart index.

mod free;
mod lbfgs;
mod objective;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use free::FreeParams;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::ModelParams;
use crate::states::{check_capacity, CompensatedSum};
use lbfgs::Lbfgs;
use objective::Objective;

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const REL_WINDOW: usize = 5;
/// Unique variances may not drop below this fraction of the column variance.
pub const PSI_FLOOR_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Tolerance on the Euclidean norm of the gradient of the
    /// per-observation log-likelihood.
    pub grad_tol: f64,
    /// Tolerance on the relative change of the log-likelihood over five
    /// iterations.
    pub rel_ll_tol: f64,
    pub init_scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_restarts: 100,
            seed: 0,
            max_iters: 2000,
            grad_tol: 1e-6,
            rel_ll_tol: 1e-9,
            init_scale: 0.5,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.n_restarts > 0
            && self.max_iters > 0
            && self.grad_tol > 0.0
            && self.rel_ll_tol > 0.0
            && self.init_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "restarts, iterations, tolerances and init scale must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub log_lik: f64,
    pub bic: f64,
    pub n_params: usize,
    /// Final log-likelihood of each restart; `-inf` for failed restarts.
    pub restart_logliks: Vec<f64>,
    pub best_restart: usize,
    /// Iterations used by the best restart.
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted step, per restart.
    pub restart_traces: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Sum of per-row log densities; rows with missing cells are marginalized.
pub fn log_likelihood(dataset: &Dataset, params: &ModelParams) -> Result<f64> {
    check_dims(dataset, params.p_x(), params.q())?;
    let model = Model::new(params.clone())?;
    let mut sum = CompensatedSum::default();
    for (i, row) in dataset.rows.iter().enumerate() {
        let lp = match (row.x_values(), row.y_state()) {
            (Some(x), Some(y)) => model.log_joint_unchecked(&x, y.index()),
            _ => model.log_marginal_partial(row).map_err(|e| match e {
                Error::NoObservedCells { .. } => Error::NoObservedCells { row: i + 1 },
                other => other,
            })?,
        };
        sum.add(lp);
    }
    Ok(sum.value())
}

/// Gradient of [`log_likelihood`] with respect to the free coordinates, in
/// the layout of [`FreeParams::to_vec`].
pub fn grad_log_likelihood(dataset: &Dataset, free: &FreeParams) -> Result<DVector<f64>> {
    check_dims(dataset, free.p_x(), free.q())?;
    let floor = DVector::from_element(free.p_x(), f64::NEG_INFINITY);
    let obj = Objective::new(dataset, free.p_z(), floor);
    obj.evaluate(free, true)
        .and_then(|e| e.grad)
        .ok_or_else(|| Error::Numerical("log-likelihood is not finite at these parameters".into()))
}

fn check_dims(dataset: &Dataset, p_x: usize, q: usize) -> Result<()> {
    if dataset.p_x() != p_x || dataset.q() != q {
        return Err(Error::Dimension(format!(
            "dataset has {} continuous and {} binary columns, model has {p_x} and {q}",
            dataset.p_x(),
            dataset.q()
        )));
    }
    Ok(())
}

/// `-2 log_lik + n_params ln N`.
pub fn bic(log_lik: f64, n_params: usize, n: usize) -> f64 {
    -2.0 * log_lik + n_params as f64 * (n as f64).ln()
}

/// Means, unique variances, biases, `c`, and unit-norm loading rows, less
/// the `p_z (p_z - 1) / 2` rotational degrees of freedom.
pub fn count_free_params(p_x: usize, q: usize, p_z: usize) -> usize {
    let p = p_x + q;
    2 * p_x + q + 1 + p * p_z - p - p_z * p_z.saturating_sub(1) / 2
}

struct RestartOutcome {
    free: Option<FreeParams>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    floor_active: bool,
    failure: Option<String>,
}

fn validate_fit_input(dataset: &Dataset, p_z: usize) -> Result<Vec<(f64, f64)>> {
    let (p_x, q) = (dataset.p_x(), dataset.q());
    check_capacity(q)?;
    if p_z == 0 || p_z > p_x + q {
        return Err(Error::LatentDimOutOfRange { p_z, max: p_x + q });
    }
    if dataset.len() < p_x + q {
        return Err(Error::InvalidInput(format!(
            "{} rows is fewer than the {} observed variables",
            dataset.len(),
            p_x + q
        )));
    }
    for (i, row) in dataset.rows.iter().enumerate() {
        if row.n_observed() == 0 {
            return Err(Error::NoObservedCells { row: i + 1 });
        }
    }
    let names = dataset.schema.binary_names();
    for (j, name) in names.iter().enumerate() {
        let mut seen = [false; 2];
        for row in &dataset.rows {
            if let Some(v) = row.y[j] {
                seen[v as usize] = true;
            }
        }
        if !(seen[0] && seen[1]) {
            return Err(Error::ConstantBinaryColumn {
                name: name.to_string(),
            });
        }
    }
    let stats = dataset.continuous_column_stats();
    let cont = dataset.schema.continuous_names();
    for (j, (m, _)) in stats.iter().enumerate() {
        if !m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "continuous column '{}' has no observed values",
                cont[j]
            )));
        }
    }
    Ok(stats)
}

fn log_psi_floor(stats: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(
        stats.len(),
        stats.iter().map(|&(_, v)| {
            let scale = if v > 0.0 { v } else { 1.0 };
            (PSI_FLOOR_FRACTION * scale).ln()
        }),
    )
}

fn random_row<R: Rng>(rng: &mut R, p_z: usize, scale: f64) -> Vec<f64> {
    loop {
        let row: Vec<f64> = (0..p_z).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        if row.iter().map(|v| v * v).sum::<f64>().sqrt() >= 1e-8 {
            return row;
        }
    }
}

fn initial_point<R: Rng>(
    rng: &mut R,
    stats: &[(f64, f64)],
    floor: &DVector<f64>,
    q: usize,
    p_z: usize,
    scale: f64,
) -> FreeParams {
    let p_x = stats.len();
    let rho = scale * rng.sample::<f64, _>(StandardNormal);
    let b = DVector::from_fn(q, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let mut v_w = nalgebra::DMatrix::zeros(p_x, p_z);
    for j in 0..p_x {
        let row = random_row(rng, p_z, scale);
        v_w.row_mut(j).copy_from_slice(&row);
    }
    let mut v_g = nalgebra::DMatrix::zeros(q, p_z);
    for j in 0..q {
        let row = random_row(rng, p_z, scale);
        v_g.row_mut(j).copy_from_slice(&row);
    }
    let c0 = rho.exp();
    // start with the model's marginal variances (1 + c^2) psi near the data's
    let shrink = (1.0 + c0 * c0).ln();
    let log_psi = DVector::from_fn(p_x, |j, _| {
        let v = stats[j].1;
        let lv = if v > 0.0 { v.ln() } else { floor[j] };
        (lv - shrink).max(floor[j])
    });
    let mu_x = DVector::from_fn(p_x, |j, _| stats[j].0);
    FreeParams {
        mu_x,
        log_psi,
        b,
        rho,
        v_w,
        v_g,
    }
}

/// Keeps loading rows away from zero (re-randomized) and from extreme
/// scales (rescaled to unit norm, which leaves the model unchanged).
fn maintain_rows<R: Rng>(x: &mut DVector<f64>, p_x: usize, q: usize, p_z: usize, rng: &mut R, scale: f64) -> bool {
    let offset = FreeParams::loading_offset(p_x, q);
    let mut changed = false;
    for r in 0..p_x + q {
        let mut row = x.rows_mut(offset + r * p_z, p_z);
        let n = row.norm();
        if n < 1e-8 {
            let fresh = random_row(rng, p_z, scale);
            row.copy_from_slice(&fresh);
            changed = true;
        } else if !(1e-3..=1e3).contains(&n) {
            row /= n;
            changed = true;
        }
    }
    changed
}

fn run_restart(obj: &Objective, stats: &[(f64, f64)], floor: &DVector<f64>, config: &FitConfig, restart: usize) -> RestartOutcome {
    let (p_x, q, p_z) = obj.dims();
    let n = obj.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ restart as u64);
    let init = initial_point(&mut rng, stats, floor, q, p_z, config.init_scale);

    let eval = |x: &DVector<f64>| -> Option<(f64, DVector<f64>, bool)> {
        let free = FreeParams::from_slice(p_x, q, p_z, x.as_slice()).ok()?;
        let e = obj.evaluate(&free, true)?;
        Some((-e.ll / n, -e.grad? / n, e.floor_active))
    };
    let failed = |msg: &str| RestartOutcome {
        free: None,
        trace: Vec::new(),
        iterations: 0,
        converged: false,
        floor_active: false,
        failure: Some(format!("restart {restart}: {msg}")),
    };

    let mut x = init.to_vec();
    let Some((mut f, mut g, mut floor_active)) = eval(&x) else {
        return failed("likelihood not finite at the initial point");
    };
    let mut trace = vec![-f * n];
    let mut history = vec![f];
    let mut memory = Lbfgs::new(LBFGS_MEMORY);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if g.norm() <= config.grad_tol {
            converged = true;
            break;
        }
        let mut d = memory.direction(&g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            memory.reset();
            d = -&g;
            slope = g.dot(&d);
        }
        let mut step = if memory.is_empty() { (1.0 / g.norm()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xn = &x + &d * step;
            if let Some((fn_, gn, fa)) = eval(&xn) {
                if fn_ <= f + ARMIJO_C1 * step * slope {
                    accepted = Some((xn, fn_, gn, fa));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn, fa)) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.reset();
            continue;
        };
        iterations += 1;
        memory.push(&xn - &x, &gn - &g);
        x = xn;
        f = fn_;
        g = gn;
        floor_active = fa;
        trace.push(-f * n);
        history.push(f);

        if maintain_rows(&mut x, p_x, q, p_z, &mut rng, config.init_scale) {
            match eval(&x) {
                Some((f2, g2, fa2)) => {
                    f = f2;
                    g = g2;
                    floor_active = fa2;
                }
                None => return failed("likelihood not finite after loading row maintenance"),
            }
            memory.reset();
        }

        if history.len() > REL_WINDOW {
            let old = history[history.len() - 1 - REL_WINDOW];
            if (old - f).abs() <= config.rel_ll_tol * f.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }

    let free = FreeParams::from_slice(p_x, q, p_z, x.as_slice()).expect("layout is consistent");
    let (free, _) = obj.clamp(&free);
    RestartOutcome {
        free: Some(free),
        trace,
        iterations,
        converged,
        floor_active,
        failure: None,
    }
}

/// Multi-start maximum-likelihood fit. The result is not canonicalized.
pub fn fit(dataset: &Dataset, p_z: usize, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let stats = validate_fit_input(dataset, p_z)?;
    let floor = log_psi_floor(&stats);
    let obj = Objective::new(dataset, p_z, floor.clone());

    let outcomes: Vec<RestartOutcome> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(&obj, &stats, &floor, config, r))
        .collect();

    let mut restart_logliks = Vec::with_capacity(outcomes.len());
    let mut candidates: Vec<Option<ModelParams>> = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for out in &outcomes {
        let evaluated = out
            .free
            .as_ref()
            .ok_or_else(|| out.failure.clone().unwrap_or_default())
            .and_then(|f| f.to_model().map_err(|e| e.to_string()))
            .and_then(|p| {
                let ll = log_likelihood(dataset, &p).map_err(|e| e.to_string())?;
                if ll.is_finite() {
                    Ok((p, ll))
                } else {
                    Err("non-finite final log-likelihood".to_string())
                }
            });
        match evaluated {
            Ok((p, ll)) => {
                restart_logliks.push(ll);
                candidates.push(Some(p));
            }
            Err(msg) => {
                failures.push(msg);
                restart_logliks.push(f64::NEG_INFINITY);
                candidates.push(None);
            }
        }
    }

    let mut best: Option<usize> = None;
    for (r, &ll) in restart_logliks.iter().enumerate() {
        if candidates[r].is_some() && best.is_none_or(|b| ll > restart_logliks[b]) {
            best = Some(r);
        }
    }
    let Some(best) = best else {
        let diagnostics = failures.iter().take(5).cloned().collect::<Vec<_>>().join("; ");
        return Err(Error::AllRestartsFailed {
            restarts: config.n_restarts,
            diagnostics,
        });
    };

    let mut warnings = Vec::new();
    if outcomes[best].floor_active {
        let msg = "unique-variance floor is binding in the best restart".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if !failures.is_empty() {
        warnings.push(format!("{} of {} restarts failed", failures.len(), config.n_restarts));
    }

    let log_lik = restart_logliks[best];
    let n_params = count_free_params(dataset.p_x(), dataset.q(), p_z);
    Ok(FitResult {
        params: candidates[best].take().expect("best restart has parameters"),
        log_lik,
        bic: bic(log_lik, n_params, dataset.len()),
        n_params,
        restart_logliks,
        best_restart: best,
        iterations: outcomes[best].iterations,
        converged: outcomes[best].converged,
        restart_traces: outcomes.into_iter().map(|o| o.trace).collect(),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct BicEntry {
    pub p_z: usize,
    pub fit: std::result::Result<FitResult, String>,
}

impl BicEntry {
    pub fn log_lik(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.log_lik)
    }

    pub fn bic(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.bic)
    }
}

#[derive(Debug, Clone)]
pub struct BicScan {
    pub entries: Vec<BicEntry>,
    /// Latent dimension with the smallest BIC; ties go to the smaller one.
    pub best_p_z: Option<usize>,
}

/// Fits every latent dimension in `p_z_values`; failures are recorded per entry.
pub fn bic_scan(dataset: &Dataset, p_z_values: &[usize], config: &FitConfig) -> BicScan {
    let mut dims = p_z_values.to_vec();
    dims.sort_unstable();
    dims.dedup();
    let entries: Vec<BicEntry> = dims
        .iter()
        .map(|&p_z| BicEntry {
            p_z,
            fit: fit(dataset, p_z, config).map_err(|e| e.to_string()),
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for e in &entries {
        if let Some(b) = e.bic() {
            if best.is_none_or(|(_, v)| b < v) {
                best = Some((e.p_z, b));
            }
        }
    }
    BicScan {
        entries,
        best_p_z: best.map(|(p, _)| p),
    }
}
