//! Exact densities of the mixed-data factor model.
//!
//! Given the latent variable `z`, continuous variables are Gaussian around
//! `mu_x + W (z - mu_z)` with diagonal noise `Psi`, and binary variables are
//! independent Bernoulli with logits `b + G (z - mu_z)`. The latent prior is
//! a `2^q`-component Gaussian mixture with Ising mixing weights, which makes
//! the observed distribution closed form:
//!
//! ```text
//! p(x, y) = pi_y N(x | mu_x + W G^T y, Psi + W W^T)
//! log pi_y = b^T y + 1/2 |G^T y|^2 - log Z
//! ```
//!
//! [`Model`] caches the factorizations and the mixing table for one
//! parameter set; the free functions build a `Model` per call.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::{correlation_from_cov, Dataset, Row};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::states::{check_capacity, softplus, BitState, LogSumExp};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Log mixing weights over all `2^q` binary states, indexed by [`BitState::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixingTable {
    pub log_pi: Vec<f64>,
    pub log_partition: f64,
}

impl MixingTable {
    /// Builds the table from the biases and binary loadings `G` (`q x p_z`).
    pub fn compute(b: &DVector<f64>, g: &DMatrix<f64>) -> Result<Self> {
        let q = b.len();
        check_capacity(q)?;
        let k = g * g.transpose();
        let n_states = 1usize << q;
        // Unnormalized log weights b^T s + 1/2 s^T K s, built by adding the
        // highest set bit to an already computed state.
        let mut energy = vec![0.0; n_states];
        for idx in 1..n_states {
            let h = usize::BITS as usize - 1 - idx.leading_zeros() as usize;
            let rest = idx ^ (1 << h);
            let mut e = energy[rest] + b[h] + 0.5 * k[(h, h)];
            let mut bits = rest;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                e += k[(i, h)];
                bits &= bits - 1;
            }
            energy[idx] = e;
        }
        let mut acc = LogSumExp::new();
        for &e in &energy {
            acc.push(e);
        }
        let log_partition = acc.value();
        if !log_partition.is_finite() {
            return Err(Error::Numerical("mixing table partition function overflowed".into()));
        }
        for e in energy.iter_mut() {
            *e -= log_partition;
        }
        Ok(MixingTable {
            log_pi: energy,
            log_partition,
        })
    }

    pub fn q(&self) -> usize {
        self.log_pi.len().trailing_zeros() as usize
    }

    /// Expected state `E[y]` and second moment `E[y y^T]` under the weights.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let q = self.q();
        let mut mean = DVector::zeros(q);
        let mut second = DMatrix::zeros(q, q);
        for (idx, &lp) in self.log_pi.iter().enumerate() {
            let p = lp.exp();
            if p == 0.0 {
                continue;
            }
            let mut bits = idx;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                mean[i] += p;
                let mut rest = bits;
                while rest != 0 {
                    let j = rest.trailing_zeros() as usize;
                    second[(i, j)] += p;
                    rest &= rest - 1;
                }
                bits &= bits - 1;
            }
        }
        for i in 0..q {
            for j in 0..i {
                second[(i, j)] = second[(j, i)];
            }
        }
        (mean, second)
    }
}

/// Multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub(crate) struct Gaussian {
    l: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let p = cov.nrows();
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
        let l = chol.unpack();
        let log_det_half: f64 = (0..p).map(|i| l[(i, i)].ln()).sum();
        Ok(Gaussian {
            l,
            log_norm: -0.5 * p as f64 * LN_2PI - log_det_half,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Log density of the residual `r = x - mean`.
    pub fn log_pdf(&self, r: &DVector<f64>) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let mut u = r.clone();
        self.l.solve_lower_triangular_mut(&mut u);
        self.log_norm - 0.5 * u.norm_squared()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }
}

/// Posterior of the latent variable given a complete row.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    /// Factor score (posterior mean).
    pub m: DVector<f64>,
    /// Posterior covariance; shared by all rows.
    pub cov: DMatrix<f64>,
}

/// Model-implied moments in internal order (continuous then binary).
#[derive(Debug, Clone)]
pub struct MomentSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub corr: DMatrix<f64>,
}

/// A parameter set with its derived quantities cached.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    w: DMatrix<f64>,
    g: DMatrix<f64>,
    mu_z: DVector<f64>,
    /// `W G^T`, the shift of the continuous mean per unit of each binary.
    wgt: DMatrix<f64>,
    /// `W^T Psi^{-1}`.
    wt_psi_inv: DMatrix<f64>,
    sigma_x: DMatrix<f64>,
    obs: Gaussian,
    table: MixingTable,
    post_cov: DMatrix<f64>,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let w = params.w();
        let g = params.g();
        let mu_z = params.mu_z();
        let wgt = &w * g.transpose();
        let mut wt_psi_inv = w.transpose();
        for j in 0..params.p_x() {
            let inv = 1.0 / params.psi[j];
            wt_psi_inv.column_mut(j).scale_mut(inv);
        }
        let sigma_x = params.sigma_x();
        let obs = Gaussian::new(sigma_x.clone())?;
        let table = MixingTable::compute(&params.b, &g)?;

        let p_z = params.p_z();
        let prec = DMatrix::identity(p_z, p_z) + &wt_psi_inv * &w;
        let post_cov = Cholesky::new(prec)
            .ok_or_else(|| Error::Numerical("posterior precision not positive definite".into()))?
            .inverse();
        let post_cov = (&post_cov + post_cov.transpose()) * 0.5;

        Ok(Model {
            params,
            w,
            g,
            mu_z,
            wgt,
            wt_psi_inv,
            sigma_x,
            obs,
            table,
            post_cov,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mixing_table(&self) -> &MixingTable {
        &self.table
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn mu_z(&self) -> &DVector<f64> {
        &self.mu_z
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.params.p_x() {
            return Err(Error::Dimension(format!(
                "x has length {}, model expects {}",
                x.len(),
                self.params.p_x()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite continuous value".into()));
        }
        Ok(())
    }

    fn check_y(&self, y: &BitState) -> Result<()> {
        if y.len() != self.params.q() {
            return Err(Error::Dimension(format!(
                "y has {} bits, model expects {}",
                y.len(),
                self.params.q()
            )));
        }
        Ok(())
    }

    fn check_z(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.params.p_z() {
            return Err(Error::Dimension(format!(
                "z has length {}, model expects {}",
                z.len(),
                self.params.p_z()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite latent value".into()));
        }
        Ok(())
    }

    /// `mu_x + W G^T y` for the state with the given index.
    pub(crate) fn state_mean(&self, idx: usize) -> DVector<f64> {
        let mut m = self.params.mu_x.clone();
        let mut bits = idx;
        while bits != 0 {
            let s = bits.trailing_zeros() as usize;
            m += self.wgt.column(s);
            bits &= bits - 1;
        }
        m
    }

    /// `G^T y` for the state with the given index.
    fn g_sum(&self, idx: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.params.p_z());
        let mut bits = idx;
        while bits != 0 {
            let s = bits.trailing_zeros() as usize;
            v += self.g.row(s).transpose();
            bits &= bits - 1;
        }
        v
    }

    /// `log p(x, y)`.
    pub fn log_joint_observed(&self, x: &DVector<f64>, y: &BitState) -> Result<f64> {
        self.check_x(x)?;
        self.check_y(y)?;
        Ok(self.log_joint_unchecked(x, y.index()))
    }

    pub(crate) fn log_joint_unchecked(&self, x: &DVector<f64>, idx: usize) -> f64 {
        let r = x - self.state_mean(idx);
        self.table.log_pi[idx] + self.obs.log_pdf(&r)
    }

    /// `log p(x, y | z)`.
    pub fn log_conditional_given_z(
        &self,
        x: &DVector<f64>,
        y: &BitState,
        z: &DVector<f64>,
    ) -> Result<f64> {
        self.check_x(x)?;
        self.check_y(y)?;
        self.check_z(z)?;
        let u = z - &self.mu_z;
        let mut lp = 0.0;
        let mean = &self.params.mu_x + &self.w * &u;
        for j in 0..self.params.p_x() {
            let psi = self.params.psi[j];
            let r = x[j] - mean[j];
            lp += -0.5 * (LN_2PI + psi.ln()) - 0.5 * r * r / psi;
        }
        let eta = &self.params.b + &self.g * &u;
        for s in 0..self.params.q() {
            // log sigm(eta) = -softplus(-eta), log(1 - sigm(eta)) = -softplus(eta)
            lp -= if y.bit(s) {
                softplus(-eta[s])
            } else {
                softplus(eta[s])
            };
        }
        Ok(lp)
    }

    /// `log p(z)` of the Ising-weighted Gaussian mixture prior.
    pub fn log_prior_z(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_z(z)?;
        let u = z - &self.mu_z;
        let p_z = self.params.p_z() as f64;
        let mut acc = LogSumExp::new();
        for (idx, &lp) in self.table.log_pi.iter().enumerate() {
            let r = &u - self.g_sum(idx);
            acc.push(lp - 0.5 * p_z * LN_2PI - 0.5 * r.norm_squared());
        }
        Ok(acc.value())
    }

    /// Gaussian posterior of `z` given a complete row.
    pub fn posterior(&self, x: &DVector<f64>, y: &BitState) -> Result<PosteriorResult> {
        self.check_x(x)?;
        self.check_y(y)?;
        Ok(PosteriorResult {
            m: self.posterior_mean_unchecked(x, y.index()),
            cov: self.post_cov.clone(),
        })
    }

    pub(crate) fn posterior_mean_unchecked(&self, x: &DVector<f64>, idx: usize) -> DVector<f64> {
        let centered = x - &self.params.mu_x;
        let rhs = &self.wt_psi_inv * centered + self.g_sum(idx);
        &self.mu_z + &self.post_cov * rhs
    }

    /// Posterior covariance `(I + W^T Psi^{-1} W)^{-1}`.
    pub fn posterior_cov(&self) -> &DMatrix<f64> {
        &self.post_cov
    }

    /// `log p(x, z, y)`.
    pub fn log_joint_full(&self, x: &DVector<f64>, z: &DVector<f64>, y: &BitState) -> Result<f64> {
        self.check_x(x)?;
        self.check_y(y)?;
        self.check_z(z)?;
        let u = z - &self.mu_z;
        let mean_x = &self.params.mu_x + &self.w * &u;
        let mut lp = self.table.log_pi[y.index()];
        for j in 0..self.params.p_x() {
            let psi = self.params.psi[j];
            let r = x[j] - mean_x[j];
            lp += -0.5 * (LN_2PI + psi.ln()) - 0.5 * r * r / psi;
        }
        let r = u - self.g_sum(y.index());
        lp += -0.5 * self.params.p_z() as f64 * LN_2PI - 0.5 * r.norm_squared();
        Ok(lp)
    }

    fn check_row(&self, row: &Row) -> Result<()> {
        if row.x.len() != self.params.p_x() || row.y.len() != self.params.q() {
            return Err(Error::Dimension("row does not match model dimensions".into()));
        }
        Ok(())
    }

    /// Log density of the observed cells of a row, marginalizing the
    /// missing ones. A complete row gives exactly [`Model::log_joint_observed`].
    pub fn log_marginal_partial(&self, row: &Row) -> Result<f64> {
        self.check_row(row)?;
        if row.n_observed() == 0 {
            return Err(Error::NoObservedCells { row: 0 });
        }
        if let (Some(x), Some(y)) = (row.x_values(), row.y_state()) {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite continuous value".into()));
            }
            return Ok(self.log_joint_unchecked(&x, y.index()));
        }
        let part = PartialRow::new(self, row)?;
        let mut acc = LogSumExp::new();
        for idx in part.completions() {
            acc.push(part.component_log_density(self, idx));
        }
        Ok(acc.value())
    }

    /// Posterior mean for a row with missing cells: the responsibility-weighted
    /// mean of the per-completion Gaussian posteriors.
    pub fn posterior_mean_partial(&self, row: &Row) -> Result<DVector<f64>> {
        self.check_row(row)?;
        if row.n_observed() == 0 {
            return Err(Error::NoObservedCells { row: 0 });
        }
        if let (Some(x), Some(y)) = (row.x_values(), row.y_state()) {
            return Ok(self.posterior_mean_unchecked(&x, y.index()));
        }
        let part = PartialRow::new(self, row)?;
        let p_z = self.params.p_z();
        let w_k = self.w.select_rows(&part.obs_x);
        let mut prec = DMatrix::identity(p_z, p_z);
        let mut wt_psi_inv_k = w_k.transpose();
        for (col, &j) in part.obs_x.iter().enumerate() {
            wt_psi_inv_k.column_mut(col).scale_mut(1.0 / self.params.psi[j]);
        }
        prec += &wt_psi_inv_k * &w_k;
        let cov_k = Cholesky::new(prec)
            .ok_or_else(|| Error::Numerical("posterior precision not positive definite".into()))?
            .inverse();
        let centered = &part.x_k - self.params.mu_x.select_rows(&part.obs_x);
        let base = &wt_psi_inv_k * centered;

        let comps: Vec<(usize, f64)> = part
            .completions()
            .map(|idx| (idx, part.component_log_density(self, idx)))
            .collect();
        let mut acc = LogSumExp::new();
        for &(_, l) in &comps {
            acc.push(l);
        }
        let total = acc.value();
        let mut m = DVector::zeros(p_z);
        for (idx, l) in comps {
            let wgt = (l - total).exp();
            m += (&self.mu_z + &cov_k * (&base + self.g_sum(idx))) * wgt;
        }
        Ok(m)
    }

    /// Mean, covariance and correlation implied by the model.
    pub fn moments(&self) -> Result<MomentSummary> {
        let (p_x, q) = (self.params.p_x(), self.params.q());
        let (ey, eyy) = self.table.moments();
        let cov_y = eyy - &ey * ey.transpose();
        let mean_x = &self.params.mu_x + &self.wgt * &ey;
        let cov_x = &self.sigma_x + &self.wgt * &cov_y * self.wgt.transpose();
        let cov_xy = &self.wgt * &cov_y;

        let p = p_x + q;
        let mut mean = DVector::zeros(p);
        mean.rows_mut(0, p_x).copy_from(&mean_x);
        mean.rows_mut(p_x, q).copy_from(&ey);
        let mut cov = DMatrix::zeros(p, p);
        cov.view_mut((0, 0), (p_x, p_x)).copy_from(&cov_x);
        cov.view_mut((0, p_x), (p_x, q)).copy_from(&cov_xy);
        cov.view_mut((p_x, 0), (q, p_x)).copy_from(&cov_xy.transpose());
        cov.view_mut((p_x, p_x), (q, q)).copy_from(&cov_y);
        let cov = (&cov + cov.transpose()) * 0.5;
        for s in 0..q {
            let m = ey[s];
            if m <= 0.0 || m >= 1.0 {
                return Err(Error::DegenerateCorrelation { index: p_x + s });
            }
        }
        let corr = correlation_from_cov(&cov)?;
        Ok(MomentSummary { mean, cov, corr })
    }

    pub(crate) fn obs_gaussian(&self) -> &Gaussian {
        &self.obs
    }
}

/// The observed part of a row with missing cells.
struct PartialRow {
    obs_x: Vec<usize>,
    x_k: DVector<f64>,
    /// Index bits fixed by observed binary cells.
    base: usize,
    missing_bits: Vec<usize>,
    gauss: Option<Gaussian>,
}

impl PartialRow {
    fn new(model: &Model, row: &Row) -> Result<Self> {
        let obs_x: Vec<usize> = (0..row.x.len()).filter(|&j| row.x[j].is_some()).collect();
        let x_k = DVector::from_iterator(obs_x.len(), obs_x.iter().map(|&j| row.x[j].unwrap()));
        if x_k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite continuous value".into()));
        }
        let mut base = 0usize;
        let mut missing_bits = Vec::new();
        for (s, v) in row.y.iter().enumerate() {
            match v {
                Some(true) => base |= 1 << s,
                Some(false) => {}
                None => missing_bits.push(s),
            }
        }
        let gauss = if obs_x.is_empty() {
            None
        } else {
            let sub = model.sigma_x.select_rows(&obs_x).select_columns(&obs_x);
            Some(Gaussian::new(sub)?)
        };
        Ok(PartialRow {
            obs_x,
            x_k,
            base,
            missing_bits,
            gauss,
        })
    }

    /// State indices consistent with the observed binary cells.
    fn completions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..1usize << self.missing_bits.len()).map(move |mask| {
            let mut idx = self.base;
            for (k, &s) in self.missing_bits.iter().enumerate() {
                if (mask >> k) & 1 == 1 {
                    idx |= 1 << s;
                }
            }
            idx
        })
    }

    fn component_log_density(&self, model: &Model, idx: usize) -> f64 {
        let lp = model.table.log_pi[idx];
        match &self.gauss {
            None => lp,
            Some(g) => {
                let mean = model.state_mean(idx).select_rows(&self.obs_x);
                lp + g.log_pdf(&(&self.x_k - mean))
            }
        }
    }
}

/// Mixing weights for a parameter set.
pub fn mixing_table(params: &ModelParams) -> Result<MixingTable> {
    params.validate()?;
    MixingTable::compute(&params.b, &params.g())
}

pub fn log_joint_observed(params: &ModelParams, x: &DVector<f64>, y: &BitState) -> Result<f64> {
    Model::new(params.clone())?.log_joint_observed(x, y)
}

pub fn log_conditional_given_z(
    params: &ModelParams,
    x: &DVector<f64>,
    y: &BitState,
    z: &DVector<f64>,
) -> Result<f64> {
    Model::new(params.clone())?.log_conditional_given_z(x, y, z)
}

pub fn log_prior_z(params: &ModelParams, z: &DVector<f64>) -> Result<f64> {
    Model::new(params.clone())?.log_prior_z(z)
}

pub fn posterior(params: &ModelParams, x: &DVector<f64>, y: &BitState) -> Result<PosteriorResult> {
    Model::new(params.clone())?.posterior(x, y)
}

pub fn log_joint_full(
    params: &ModelParams,
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &BitState,
) -> Result<f64> {
    Model::new(params.clone())?.log_joint_full(x, z, y)
}

pub fn log_marginal_partial(params: &ModelParams, row: &Row) -> Result<f64> {
    Model::new(params.clone())?.log_marginal_partial(row)
}

pub fn model_moments(params: &ModelParams) -> Result<MomentSummary> {
    Model::new(params.clone())?.moments()
}

/// Log density of `N(z | mean, cov)`; used for posterior checks.
pub fn log_normal_density(z: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let g = Gaussian::new(cov.clone())?;
    Ok(g.log_pdf(&(z - mean)))
}

/// Factor score of one data row.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorScore {
    pub m: DVector<f64>,
    /// True when the row had missing cells and `m` is a mixture mean.
    pub partial: bool,
}

/// Posterior means for every row; complete rows share [`Model::posterior_cov`].
pub fn factor_scores(model: &Model, data: &Dataset) -> Result<Vec<FactorScore>> {
    if data.p_x() != model.params().p_x() || data.q() != model.params().q() {
        return Err(Error::Dimension("dataset does not match model dimensions".into()));
    }
    data.rows
        .iter()
        .enumerate()
        .map(|(i, row)| match (row.x_values(), row.y_state()) {
            (Some(x), Some(y)) => Ok(FactorScore {
                m: model.posterior(&x, &y)?.m,
                partial: false,
            }),
            _ => match model.posterior_mean_partial(row) {
                Ok(m) => Ok(FactorScore { m, partial: true }),
                Err(Error::NoObservedCells { .. }) => Err(Error::NoObservedCells { row: i + 1 }),
                Err(e) => Err(e),
            },
        })
        .collect()
}

#[cfg(test)]
fn state_vector(idx: usize, q: usize) -> DVector<f64> {
    DVector::from_iterator(q, (0..q).map(|s| crate::states::bit_f64(idx, s)))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{enumerate_states, logsumexp};
    use crate::testutil::random_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_coupling(p_x: usize, q: usize, b: Vec<f64>) -> ModelParams {
        let p_z = 1;
        ModelParams::new(
            DVector::zeros(p_x),
            DVector::from_element(p_x, 1.0),
            DVector::from_vec(b),
            0.0,
            DMatrix::from_element(p_x, p_z, 1.0),
            DMatrix::from_element(q, p_z, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn uniform_table_without_couplings() {
        let t = mixing_table(&zero_coupling(0, 2, vec![0.0, 0.0])).unwrap();
        for lp in t.log_pi {
            assert!((lp - 0.25f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_binary_is_logistic() {
        let beta = 0.7;
        let t = mixing_table(&zero_coupling(0, 1, vec![beta])).unwrap();
        let sigm = 1.0 / (1.0 + (-beta).exp());
        assert!((t.log_pi[1].exp() - sigm).abs() < 1e-15);
    }

    #[test]
    fn table_matches_direct_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_params(&mut rng, 1, 3, 2);
            let t = mixing_table(&p).unwrap();
            let g = p.g();
            // direct: 1^T b + 1/2 |G^T 1|^2, normalized by a plain sum
            let raw: Vec<f64> = (0..8)
                .map(|k| {
                    let s = state_vector(k, 3);
                    (s.dot(&p.b) + 0.5 * (g.transpose() * &s).norm_squared()).exp()
                })
                .collect();
            let z: f64 = raw.iter().sum();
            for k in 0..8 {
                let expect = raw[k] / z;
                assert!(((t.log_pi[k].exp() - expect) / expect).abs() < 1e-12);
            }
            assert!(logsumexp(&t.log_pi).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_only_fair_coin_density() {
        let p = zero_coupling(0, 1, vec![0.0]);
        let x = DVector::zeros(0);
        for s in enumerate_states(1).unwrap() {
            let lp = log_joint_observed(&p, &x, &s).unwrap();
            assert!((lp + 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn continuous_only_standard_normal() {
        let p = zero_coupling(1, 0, vec![]);
        let y = BitState::from_bits(&[]).unwrap();
        let x = DVector::from_vec(vec![0.3]);
        let lp = log_joint_observed(&p, &x, &y).unwrap();
        assert!((lp - (-0.5 * LN_2PI - 0.045)).abs() < 1e-15);
    }

    #[test]
    fn conditional_at_latent_mean_without_coupling() {
        let p = zero_coupling(0, 3, vec![0.0; 3]);
        let y = BitState::from_bits(&[true, false, true]).unwrap();
        let z = p.mu_z();
        let lp = log_conditional_given_z(&p, &DVector::zeros(0), &y, &z).unwrap();
        assert!((lp + 3.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn conditional_with_zero_loading_is_noise_density() {
        let mut p = zero_coupling(1, 0, vec![]);
        p.psi[0] = 4.0;
        p.mu_x[0] = 1.0;
        let y = BitState::from_bits(&[]).unwrap();
        let x = DVector::from_vec(vec![2.5]);
        let lp = log_conditional_given_z(&p, &x, &y, &DVector::from_vec(vec![0.4])).unwrap();
        let expect = -0.5 * (LN_2PI + 4f64.ln()) - 0.5 * 1.5 * 1.5 / 4.0;
        assert!((lp - expect).abs() < 1e-14);
    }

    #[test]
    fn prior_collapses_without_coupling() {
        let p = zero_coupling(1, 2, vec![0.4, -1.0]);
        let z = DVector::from_vec(vec![0.8]);
        let lp = log_prior_z(&p, &z).unwrap();
        assert!((lp - (-0.5 * LN_2PI - 0.32)).abs() < 1e-14);
    }

    #[test]
    fn posterior_without_coupling_is_prior() {
        let p = zero_coupling(2, 1, vec![0.1]);
        let y = BitState::from_bits(&[true]).unwrap();
        let r = posterior(&p, &DVector::from_vec(vec![3.0, -2.0]), &y).unwrap();
        assert!((r.m - p.mu_z()).norm() < 1e-15);
        assert!((r.cov - DMatrix::identity(1, 1)).norm() < 1e-15);
    }

    #[test]
    fn scalar_posterior() {
        let mut p = zero_coupling(1, 0, vec![]);
        p.c = 1.0;
        p.mu_x[0] = 0.5;
        let y = BitState::from_bits(&[]).unwrap();
        let r = posterior(&p, &DVector::from_vec(vec![2.5]), &y).unwrap();
        assert!((r.cov[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((r.m[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn full_joint_separates_without_coupling() {
        let p = zero_coupling(1, 1, vec![0.3]);
        let y = BitState::from_bits(&[true]).unwrap();
        let x = DVector::from_vec(vec![0.2]);
        let z = DVector::from_vec(vec![-0.6]);
        let lp = log_joint_full(&p, &x, &z, &y).unwrap();
        let t = mixing_table(&p).unwrap();
        let expect = t.log_pi[1] + (-0.5 * LN_2PI - 0.02) + (-0.5 * LN_2PI - 0.18);
        assert!((lp - expect).abs() < 1e-14);
    }

    #[test]
    fn full_joint_matches_conditional_plus_prior_when_no_binaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 3, 0, 2);
        let y = BitState::from_bits(&[]).unwrap();
        let x = DVector::from_vec(vec![0.1, -0.4, 1.2]);
        let z = DVector::from_vec(vec![0.3, 0.7]);
        let m = Model::new(p).unwrap();
        let a = m.log_joint_full(&x, &z, &y).unwrap();
        let b = m.log_conditional_given_z(&x, &y, &z).unwrap() + m.log_prior_z(&z).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn partial_row_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 2, 3, 2);
        let m = Model::new(p).unwrap();
        let x = DVector::from_vec(vec![0.4, -1.1]);
        let y = BitState::from_bits(&[true, false, true]).unwrap();
        let full = Row::complete(x.as_slice(), &y.bits());
        assert_eq!(
            m.log_marginal_partial(&full).unwrap(),
            m.log_joint_observed(&x, &y).unwrap()
        );

        // all binaries missing
        let row = Row {
            x: vec![Some(0.4), Some(-1.1)],
            y: vec![None; 3],
        };
        let oracle: Vec<f64> = enumerate_states(3)
            .unwrap()
            .iter()
            .map(|s| m.log_joint_observed(&x, s).unwrap())
            .collect();
        assert!((m.log_marginal_partial(&row).unwrap() - logsumexp(&oracle)).abs() < 1e-12);

        // all continuous missing: Ising marginal of observed bit 0 = 1
        let row = Row {
            x: vec![None, None],
            y: vec![Some(true), None, None],
        };
        let t = m.mixing_table();
        let oracle: Vec<f64> = (0..8).filter(|k| k & 1 == 1).map(|k| t.log_pi[k]).collect();
        assert!((m.log_marginal_partial(&row).unwrap() - logsumexp(&oracle)).abs() < 1e-12);

        let empty = Row {
            x: vec![None, None],
            y: vec![None; 3],
        };
        assert!(matches!(
            m.log_marginal_partial(&empty),
            Err(Error::NoObservedCells { .. })
        ));
    }

    #[test]
    fn moments_without_coupling() {
        let p = zero_coupling(2, 2, vec![0.5, -1.0]);
        let s = model_moments(&p).unwrap();
        let sigm = |b: f64| 1.0 / (1.0 + (-b).exp());
        assert!((s.mean[2] - sigm(0.5)).abs() < 1e-14);
        assert!((s.mean[3] - sigm(-1.0)).abs() < 1e-14);
        for i in 0..2 {
            for j in 2..4 {
                assert!(s.cov[(i, j)].abs() < 1e-15);
            }
        }
        assert!((s.cov.view((0, 0), (2, 2)) - DMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn moments_continuous_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_params(&mut rng, 3, 0, 2);
        let s = model_moments(&p).unwrap();
        assert!((&s.mean - &p.mu_x).norm() < 1e-15);
        assert!((&s.cov - p.sigma_x()).norm() < 1e-12);
        for i in 0..3 {
            assert_eq!(s.corr[(i, i)], 1.0);
        }
    }

    #[test]
    fn degenerate_binary_reported() {
        let p = zero_coupling(0, 1, vec![-800.0]);
        assert!(matches!(
            model_moments(&p),
            Err(Error::DegenerateCorrelation { .. })
        ));
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let p = zero_coupling(1, 0, vec![]);
        let y = BitState::from_bits(&[]).unwrap();
        assert!(log_joint_observed(&p, &DVector::from_vec(vec![f64::NAN]), &y).is_err());
    }
}
