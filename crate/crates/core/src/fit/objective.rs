//! Log-likelihood and its gradient over the free parameterization.
//!
//! Complete rows are summarized by binary pattern (count, mean and centered
//! scatter of `x`), so one evaluation costs `O(2^q p_x^2)` regardless of the
//! number of complete rows. Rows with missing cells are handled one at a time
//! by enumerating the completions of their missing bits.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::free::FreeParams;
use crate::data::{Dataset, Row};
use crate::model::{MixingTable, LN_2PI};
use crate::params::normalize_rows;
use crate::states::LogSumExp;

struct Group {
    state: usize,
    n: f64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

struct Partial {
    obs_x: Vec<usize>,
    x_k: DVector<f64>,
    base: usize,
    missing_bits: Vec<usize>,
}

pub(crate) struct Objective {
    p_x: usize,
    q: usize,
    p_z: usize,
    n_rows: f64,
    groups: Vec<Group>,
    partial: Vec<Partial>,
    log_psi_floor: DVector<f64>,
}

/// Gradient pieces with respect to the model-space quantities.
pub(crate) struct Evaluation {
    pub ll: f64,
    pub grad: Option<DVector<f64>>,
    pub floor_active: bool,
}

fn for_each_bit(mut bits: usize, mut f: impl FnMut(usize)) {
    while bits != 0 {
        f(bits.trailing_zeros() as usize);
        bits &= bits - 1;
    }
}

impl Objective {
    /// `log_psi_floor` entries of `-inf` disable the floor.
    pub fn new(data: &Dataset, p_z: usize, log_psi_floor: DVector<f64>) -> Self {
        let (p_x, q) = (data.p_x(), data.q());
        let mut by_state: BTreeMap<usize, Vec<DVector<f64>>> = BTreeMap::new();
        let mut partial = Vec::new();
        for row in &data.rows {
            match (row.x_values(), row.y_state()) {
                (Some(x), Some(y)) => by_state.entry(y.index()).or_default().push(x),
                _ => partial.push(Self::partial(row)),
            }
        }
        let groups = by_state
            .into_iter()
            .map(|(state, xs)| {
                let n = xs.len() as f64;
                let mut mean = DVector::zeros(p_x);
                for x in &xs {
                    mean += x;
                }
                mean /= n;
                let mut scatter = DMatrix::zeros(p_x, p_x);
                for x in &xs {
                    let d = x - &mean;
                    scatter.ger(1.0, &d, &d, 1.0);
                }
                Group {
                    state,
                    n,
                    mean,
                    scatter,
                }
            })
            .collect();
        Objective {
            p_x,
            q,
            p_z,
            n_rows: data.len() as f64,
            groups,
            partial,
            log_psi_floor,
        }
    }

    fn partial(row: &Row) -> Partial {
        let obs_x: Vec<usize> = (0..row.x.len()).filter(|&j| row.x[j].is_some()).collect();
        let x_k = DVector::from_iterator(obs_x.len(), obs_x.iter().map(|&j| row.x[j].unwrap()));
        let mut base = 0;
        let mut missing_bits = Vec::new();
        for (s, v) in row.y.iter().enumerate() {
            match v {
                Some(true) => base |= 1 << s,
                Some(false) => {}
                None => missing_bits.push(s),
            }
        }
        Partial {
            obs_x,
            x_k,
            base,
            missing_bits,
        }
    }

    pub fn n_rows(&self) -> f64 {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        FreeParams::dim(self.p_x, self.q, self.p_z)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p_x, self.q, self.p_z)
    }

    /// Free parameters with the unique-variance floor applied.
    pub fn clamp(&self, free: &FreeParams) -> (FreeParams, bool) {
        let mut out = free.clone();
        let mut active = false;
        for j in 0..self.p_x {
            if out.log_psi[j] < self.log_psi_floor[j] {
                out.log_psi[j] = self.log_psi_floor[j];
                active = true;
            }
        }
        (out, active)
    }

    /// Log-likelihood and optionally its gradient in the flat free layout.
    /// Returns `None` when the parameters are numerically unusable.
    pub fn evaluate(&self, free: &FreeParams, want_grad: bool) -> Option<Evaluation> {
        let (p_x, q, p_z) = (self.p_x, self.q, self.p_z);
        let (eff, floor_active) = self.clamp(free);
        let psi = eff.log_psi.map(f64::exp);
        let c = eff.rho.exp();
        if !c.is_finite() || psi.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return None;
        }
        let w_hat = normalize_rows(&eff.v_w).ok()?;
        let g_hat = normalize_rows(&eff.v_g).ok()?;
        let mut w = &w_hat * c;
        for j in 0..p_x {
            w.row_mut(j).scale_mut(psi[j].sqrt());
        }
        let g = &g_hat * c;

        let mut sigma = &w * w.transpose();
        for j in 0..p_x {
            sigma[(j, j)] += psi[j];
        }
        let chol = Cholesky::new(sigma.clone())?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let prec = chol.inverse();
        let table = MixingTable::compute(&eff.b, &g).ok()?;
        let wgt = &w * g.transpose();

        let state_mean = |idx: usize| {
            let mut m = eff.mu_x.clone();
            for_each_bit(idx, |s| m += wgt.column(s));
            m
        };
        let g_sum = |idx: usize| {
            let mut v = DVector::zeros(p_z);
            for_each_bit(idx, |s| v += g.row(s).transpose());
            v
        };

        let mut ll = 0.0;
        let mut grad_sigma = DMatrix::zeros(p_x, p_x);
        let mut acc_g = MeanGrad::new(p_x, q, p_z);

        let const_term = -0.5 * (p_x as f64 * LN_2PI + log_det);
        let mut a_total = DMatrix::zeros(p_x, p_x);
        let mut n_complete = 0.0;
        for grp in &self.groups {
            let d = &grp.mean - state_mean(grp.state);
            let pd = &prec * &d;
            let quad = prec.component_mul(&grp.scatter).sum() + grp.n * d.dot(&pd);
            ll += grp.n * (table.log_pi[grp.state] + const_term) - 0.5 * quad;
            n_complete += grp.n;
            if want_grad {
                a_total += &grp.scatter;
                a_total.ger(grp.n, &d, &d, 1.0);
                let a = pd * grp.n;
                acc_g.push(&a, grp.state, grp.n, &w, &g_sum(grp.state));
            }
        }
        if want_grad && p_x > 0 {
            grad_sigma += (&prec * &a_total * &prec - &prec * n_complete) * 0.5;
        }

        for row in &self.partial {
            let k = row.obs_x.len();
            let (prec_k, const_k) = if k > 0 {
                let sub = sigma.select_rows(&row.obs_x).select_columns(&row.obs_x);
                let ch = Cholesky::new(sub)?;
                let ld: f64 = 2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                (ch.inverse(), -0.5 * (k as f64 * LN_2PI + ld))
            } else {
                (DMatrix::zeros(0, 0), 0.0)
            };
            let comps: Vec<(usize, DVector<f64>, f64)> = (0..1usize << row.missing_bits.len())
                .map(|mask| {
                    let mut idx = row.base;
                    for (t, &s) in row.missing_bits.iter().enumerate() {
                        if (mask >> t) & 1 == 1 {
                            idx |= 1 << s;
                        }
                    }
                    let d = &row.x_k - state_mean(idx).select_rows(&row.obs_x);
                    let l = table.log_pi[idx] + const_k - 0.5 * d.dot(&(&prec_k * &d));
                    (idx, d, l)
                })
                .collect();
            let mut acc = LogSumExp::new();
            for (_, _, l) in &comps {
                acc.push(*l);
            }
            let total = acc.value();
            if !total.is_finite() {
                return None;
            }
            ll += total;
            if want_grad {
                let mut b_k = DMatrix::zeros(k, k);
                for (idx, d, l) in &comps {
                    let r = (l - total).exp();
                    if r == 0.0 {
                        continue;
                    }
                    let mut a = DVector::zeros(p_x);
                    if k > 0 {
                        b_k.ger(r, d, d, 1.0);
                        let a_k = &prec_k * d * r;
                        for (t, &j) in row.obs_x.iter().enumerate() {
                            a[j] = a_k[t];
                        }
                    }
                    acc_g.push(&a, *idx, r, &w, &g_sum(*idx));
                }
                if k > 0 {
                    let gs = (&prec_k * &b_k * &prec_k - &prec_k) * 0.5;
                    for (t, &i) in row.obs_x.iter().enumerate() {
                        for (u, &j) in row.obs_x.iter().enumerate() {
                            grad_sigma[(i, j)] += gs[(t, u)];
                        }
                    }
                }
            }
        }

        if !ll.is_finite() {
            return None;
        }
        if !want_grad {
            return Some(Evaluation {
                ll,
                grad: None,
                floor_active,
            });
        }

        let MeanGrad {
            grad_mu,
            grad_w,
            mut grad_g,
            s1,
            s2,
        } = acc_g;
        let mut grad_b = DVector::zeros(q);
        if q > 0 {
            let (ey, eyy) = table.moments();
            grad_b = &s1 - &ey * self.n_rows;
            grad_g += (&s2 - &eyy * self.n_rows) * &g;
        }
        let grad_w_total = &grad_w + (&grad_sigma * &w) * 2.0;

        let mut out = Vec::with_capacity(self.dim());
        out.extend(grad_mu.iter());
        for j in 0..p_x {
            if free.log_psi[j] < self.log_psi_floor[j] {
                out.push(0.0);
            } else {
                let cross: f64 = grad_w_total.row(j).dot(&w.row(j));
                out.push(psi[j] * grad_sigma[(j, j)] + 0.5 * cross);
            }
        }
        out.extend(grad_b.iter());
        out.push(grad_w_total.component_mul(&w).sum() + grad_g.component_mul(&g).sum());
        for j in 0..p_x {
            let d_hat = grad_w_total.row(j) * (c * psi[j].sqrt());
            project_row(&d_hat, &w_hat.row(j), eff.v_w.row(j).norm(), &mut out);
        }
        for j in 0..q {
            let d_hat = grad_g.row(j) * c;
            project_row(&d_hat, &g_hat.row(j), eff.v_g.row(j).norm(), &mut out);
        }
        let grad = DVector::from_vec(out);
        if grad.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Evaluation {
            ll,
            grad: Some(grad),
            floor_active,
        })
    }
}

/// Gradient with respect to component means, accumulated over components.
struct MeanGrad {
    grad_mu: DVector<f64>,
    grad_w: DMatrix<f64>,
    grad_g: DMatrix<f64>,
    /// Weighted counts of each bit and of each bit pair.
    s1: DVector<f64>,
    s2: DMatrix<f64>,
}

impl MeanGrad {
    fn new(p_x: usize, q: usize, p_z: usize) -> Self {
        MeanGrad {
            grad_mu: DVector::zeros(p_x),
            grad_w: DMatrix::zeros(p_x, p_z),
            grad_g: DMatrix::zeros(q, p_z),
            s1: DVector::zeros(q),
            s2: DMatrix::zeros(q, q),
        }
    }

    /// `a` is d ll / d mean of the component with pattern `idx`, whose mean
    /// is `mu_x + W g_sum`.
    fn push(&mut self, a: &DVector<f64>, idx: usize, weight: f64, w: &DMatrix<f64>, g_sum: &DVector<f64>) {
        if !a.is_empty() {
            self.grad_mu += a;
            self.grad_w.ger(1.0, a, g_sum, 1.0);
            let wta = w.transpose() * a;
            for_each_bit(idx, |s| {
                let mut row = self.grad_g.row_mut(s);
                row += wta.transpose();
            });
        }
        for_each_bit(idx, |i| {
            self.s1[i] += weight;
            for_each_bit(idx, |j| self.s2[(i, j)] += weight);
        });
    }
}

/// Gradient through `u = v / |v|`: `(I - u u^T) d / |v|`.
fn project_row<S1, S2>(
    d_hat: &nalgebra::Matrix<f64, nalgebra::U1, nalgebra::Dyn, S1>,
    u: &nalgebra::Matrix<f64, nalgebra::U1, nalgebra::Dyn, S2>,
    norm: f64,
    out: &mut Vec<f64>,
) where
    S1: nalgebra::storage::Storage<f64, nalgebra::U1, nalgebra::Dyn>,
    S2: nalgebra::storage::Storage<f64, nalgebra::U1, nalgebra::Dyn>,
{
    let along = d_hat.dot(u);
    for k in 0..u.len() {
        out.push((d_hat[k] - along * u[k]) / norm);
    }
}
