//! Canonical rotation of the latent space.
//!
//! The likelihood is invariant under `W_hat -> W_hat R`, `G_hat -> G_hat R`
//! for orthogonal `R`. The canonical representative makes `M^T M` diagonal
//! with descending entries and gives every column of `M` a nonnegative sum;
//! with distinct nonzero eigenvalues and nonzero column sums it is unique.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Relative eigengap below which two eigenvalues count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CanonicalModel {
    pub params: ModelParams,
    /// Eigenvalues of `M^T M`, descending.
    pub omega_sq: DVector<f64>,
    /// Contribution ratios.
    pub p: DVector<f64>,
    /// Cumulative contribution ratios.
    pub c: DVector<f64>,
    /// Communality of each continuous variable.
    pub h: DVector<f64>,
    /// The rotation applied: canonical `M` is the input `M` times `rotation`.
    pub rotation: DMatrix<f64>,
    /// False when degenerate eigenvalues or zero column sums made the
    /// orientation depend on a tie-break rule.
    pub unique: bool,
    pub notes: Vec<String>,
}

/// Rotates `params` into canonical form.
pub fn canonicalize(params: &ModelParams) -> Result<CanonicalModel> {
    params.validate()?;
    let p_z = params.p_z();
    let m_hat = params.m_hat();
    let gram = m_hat.transpose() * &m_hat;
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..p_z).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors: Vec<DVector<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();

    let mut notes = Vec::new();
    let mut unique = true;

    for (s, v) in vectors.iter_mut().enumerate() {
        let col = &m_hat * &*v;
        let sum = col.sum();
        let l1: f64 = col.iter().map(|x| x.abs()).sum();
        if sum.abs() <= 1e-12 * l1 {
            let largest = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
            if largest < 0.0 {
                v.neg_mut();
            }
            unique = false;
            notes.push(format!("column {} has zero sum; oriented by its largest entry", s + 1));
        } else if sum < 0.0 {
            v.neg_mut();
        }
    }

    // Degenerate blocks: order by the first row of M v, descending.
    let scale = lambda.first().copied().unwrap_or(0.0);
    let mut start = 0;
    while start < p_z {
        let mut end = start + 1;
        while end < p_z && lambda[end - 1] - lambda[end] < DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE) {
            end += 1;
        }
        if end - start > 1 {
            unique = false;
            notes.push(format!(
                "eigenvalues {}..={} are degenerate; canonical form not unique",
                start + 1,
                end
            ));
            if m_hat.nrows() > 0 {
                vectors[start..end].sort_by(|a, b| {
                    let fa = m_hat.row(0).dot(&a.transpose());
                    let fb = m_hat.row(0).dot(&b.transpose());
                    fb.total_cmp(&fa)
                });
            }
        }
        start = end;
    }

    let rotation = DMatrix::from_columns(&vectors);
    let rotated = params.rotated(&rotation)?;
    let c2 = params.c * params.c;
    let omega_sq = DVector::from_iterator(p_z, lambda.iter().map(|l| c2 * l));
    let (p, c) = contribution_ratios(&DVector::from_vec(lambda))?;
    let h = communalities(&rotated);
    Ok(CanonicalModel {
        params: rotated,
        omega_sq,
        p,
        c,
        h,
        rotation,
        unique,
        notes,
    })
}

/// `P_s = w_s / sum w`, `C_s = P_1 + ... + P_s`.
pub fn contribution_ratios(omega_sq: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if omega_sq.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("eigenvalues must be finite and nonnegative".into()));
    }
    let total = omega_sq.sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("all eigenvalues are zero".into()));
    }
    let p = omega_sq / total;
    let mut c = p.clone();
    for s in 1..c.len() {
        c[s] += c[s - 1];
    }
    Ok((p, c))
}

/// Communalities of the continuous variables; under the norm constraint all
/// equal `sqrt(c^2 / (1 + c^2))`.
pub fn communalities(params: &ModelParams) -> DVector<f64> {
    communalities_from_rows(&(&params.w_hat * params.c))
}

/// `h_j = sqrt(|r_j|^2 / (1 + |r_j|^2))` for each row `r_j` of the
/// dimensionless loadings `Psi^{-1/2} W`.
pub fn communalities_from_rows(rows: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        rows.nrows(),
        rows.row_iter().map(|r| {
            let n2 = r.norm_squared();
            (n2 / (1.0 + n2)).sqrt()
        }),
    )
}

/// Factor scores in the limit of vanishing unique variances (continuous-only
/// models): `mu_z + (W_hat^T W_hat)^{-1} W_hat^T diag(Sigma_x)^{-1/2} (x - mu_x)`.
pub fn pca_limit_scores(params: &ModelParams, x: &DVector<f64>) -> Result<DVector<f64>> {
    if params.q() != 0 {
        return Err(Error::InvalidInput("the projection limit is defined for continuous-only models".into()));
    }
    if x.len() != params.p_x() {
        return Err(Error::Dimension("x does not match the model".into()));
    }
    let w_hat = &params.w_hat;
    let gram = w_hat.transpose() * w_hat;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("normalized loadings are rank deficient".into()))?;
    let scale = 1.0 + params.c * params.c;
    let std = DVector::from_fn(params.p_x(), |j, _| (x[j] - params.mu_x[j]) / (scale * params.psi[j]).sqrt());
    Ok(params.mu_z() + chol.solve(&(w_hat.transpose() * std)))
}

/// Outcome of checking the identifiability conditions on (canonical) parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub latent_dim_ok: bool,
    pub row_norms_equal: bool,
    pub orthogonal_columns: bool,
    pub descending_nondegenerate: bool,
    pub column_sums_nonnegative: bool,
    /// Smallest eigenvalue of `M M^T - c^2 I`; `None` when `p_z = p_x + q`.
    pub lemma_smallest_eigenvalue: Option<f64>,
    pub lemma_ok: Option<bool>,
}

impl IdentifiabilityReport {
    pub fn all_ok(&self) -> bool {
        self.latent_dim_ok
            && self.row_norms_equal
            && self.orthogonal_columns
            && self.descending_nondegenerate
            && self.column_sums_nonnegative
            && self.lemma_ok.unwrap_or(true)
    }
}

pub fn verify_identifiability_conditions(params: &ModelParams) -> IdentifiabilityReport {
    let p = params.p_x() + params.q();
    let p_z = params.p_z();
    let c2 = params.c * params.c;
    let m = params.m();

    let row_norms_equal = m.row_iter().all(|r| (r.norm_squared() - c2).abs() <= 1e-9 * c2.max(1.0));

    let gram = m.transpose() * &m;
    let diag: Vec<f64> = (0..p_z).map(|s| gram[(s, s)]).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    let mut orthogonal_columns = true;
    for i in 0..p_z {
        for j in 0..i {
            if gram[(i, j)].abs() > 1e-8 * top.max(1.0) {
                orthogonal_columns = false;
            }
        }
    }
    let descending_nondegenerate = diag.iter().all(|&d| d > 1e-12 * top.max(f64::MIN_POSITIVE))
        && diag.windows(2).all(|w| w[0] - w[1] >= DEGENERACY_TOL * top);
    let column_sums_nonnegative = (0..p_z).all(|s| m.column(s).sum() >= -1e-9);

    let (lemma_smallest_eigenvalue, lemma_ok) = if p_z < p {
        let mut outer = &m * m.transpose();
        for i in 0..p {
            outer[(i, i)] -= c2;
        }
        let smallest = outer.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        (Some(smallest), Some((smallest + c2).abs() <= 1e-8 * c2.max(1.0)))
    } else {
        (None, None)
    };

    IdentifiabilityReport {
        latent_dim_ok: p_z <= p,
        row_norms_equal,
        orthogonal_columns,
        descending_nondegenerate,
        column_sums_nonnegative,
        lemma_smallest_eigenvalue,
        lemma_ok,
    }
}
