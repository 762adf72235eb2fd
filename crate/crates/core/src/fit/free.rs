//! Unconstrained parameterization used by the optimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::{normalize_rows, ModelParams};

/// Unconstrained coordinates: `psi = exp(log_psi)`, `c = exp(rho)`, and the
/// normalized loadings are the rows of `v_w`, `v_g` scaled to unit norm.
///
/// The flat vector layout used by [`FreeParams::to_vec`] and the gradient is
/// `[mu_x, log_psi, b, rho, v_w (row-major), v_g (row-major)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParams {
    pub mu_x: DVector<f64>,
    pub log_psi: DVector<f64>,
    pub b: DVector<f64>,
    pub rho: f64,
    pub v_w: DMatrix<f64>,
    pub v_g: DMatrix<f64>,
}

impl FreeParams {
    pub fn p_x(&self) -> usize {
        self.mu_x.len()
    }

    pub fn q(&self) -> usize {
        self.b.len()
    }

    pub fn p_z(&self) -> usize {
        self.v_w.ncols()
    }

    pub fn dim(p_x: usize, q: usize, p_z: usize) -> usize {
        2 * p_x + q + 1 + (p_x + q) * p_z
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.mu_x.clone(),
            self.log_psi.map(f64::exp),
            self.b.clone(),
            self.rho.exp(),
            normalize_rows(&self.v_w)?,
            normalize_rows(&self.v_g)?,
        )
    }

    /// Inverse of [`FreeParams::to_model`]; requires `c > 0`.
    pub fn from_model(params: &ModelParams) -> Result<Self> {
        if !(params.c > 0.0) {
            return Err(Error::InvalidParams("c = 0 has no log-scale representation".into()));
        }
        Ok(FreeParams {
            mu_x: params.mu_x.clone(),
            log_psi: params.psi.map(f64::ln),
            b: params.b.clone(),
            rho: params.c.ln(),
            v_w: params.w_hat.clone(),
            v_g: params.g_hat.clone(),
        })
    }

    pub fn to_vec(&self) -> DVector<f64> {
        let (p_x, q, p_z) = (self.p_x(), self.q(), self.p_z());
        let mut v = Vec::with_capacity(Self::dim(p_x, q, p_z));
        v.extend(self.mu_x.iter());
        v.extend(self.log_psi.iter());
        v.extend(self.b.iter());
        v.push(self.rho);
        for m in [&self.v_w, &self.v_g] {
            for row in m.row_iter() {
                v.extend(row.iter());
            }
        }
        DVector::from_vec(v)
    }

    pub fn from_slice(p_x: usize, q: usize, p_z: usize, v: &[f64]) -> Result<Self> {
        if v.len() != Self::dim(p_x, q, p_z) {
            return Err(Error::Dimension(format!(
                "free parameter vector has length {}, expected {}",
                v.len(),
                Self::dim(p_x, q, p_z)
            )));
        }
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &v[at..at + n];
            at += n;
            s
        };
        let mu_x = DVector::from_column_slice(take(p_x));
        let log_psi = DVector::from_column_slice(take(p_x));
        let b = DVector::from_column_slice(take(q));
        let rho = take(1)[0];
        let v_w = DMatrix::from_row_slice(p_x, p_z, take(p_x * p_z));
        let v_g = DMatrix::from_row_slice(q, p_z, take(q * p_z));
        Ok(FreeParams {
            mu_x,
            log_psi,
            b,
            rho,
            v_w,
            v_g,
        })
    }

    /// Offsets of the loading rows in the flat layout, for row maintenance.
    pub(crate) fn loading_offset(p_x: usize, q: usize) -> usize {
        2 * p_x + q + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vector_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_params(&mut rng, 3, 2, 2);
        let f = FreeParams::from_model(&p).unwrap();
        let v = f.to_vec();
        assert_eq!(v.len(), FreeParams::dim(3, 2, 2));
        let back = FreeParams::from_slice(3, 2, 2, v.as_slice()).unwrap();
        assert_eq!(back, f);
        let m = back.to_model().unwrap();
        assert!((m.c - p.c).abs() < 1e-14);
        assert!((&m.w_hat - &p.w_hat).norm() < 1e-14);
    }

    #[test]
    fn to_model_normalizes_rows_exactly() {
        let f = FreeParams {
            mu_x: DVector::zeros(2),
            log_psi: DVector::zeros(2),
            b: DVector::zeros(1),
            rho: 0.0,
            v_w: DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 1e-3, -2e-3]),
            v_g: DMatrix::from_row_slice(1, 2, &[-7.0, 0.5]),
        };
        let m = f.to_model().unwrap();
        for row in m.m_hat().row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }
}
