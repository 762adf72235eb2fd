//! Norm-constrained model parameters.
//!
//! The loadings are stored as a common row norm `c` times unit-norm row
//! matrices `w_hat` (continuous) and `g_hat` (binary). The latent covariance
//! is fixed to the identity and the latent mean is derived from the binary
//! loadings, so neither is stored.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::states::check_capacity;

/// Tolerance on the unit row norms of the normalized loadings.
pub const ROW_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu_x: DVector<f64>,
    pub psi: DVector<f64>,
    pub b: DVector<f64>,
    pub c: f64,
    pub w_hat: DMatrix<f64>,
    pub g_hat: DMatrix<f64>,
}

impl ModelParams {
    pub fn new(
        mu_x: DVector<f64>,
        psi: DVector<f64>,
        b: DVector<f64>,
        c: f64,
        w_hat: DMatrix<f64>,
        g_hat: DMatrix<f64>,
    ) -> Result<Self> {
        let p = ModelParams {
            mu_x,
            psi,
            b,
            c,
            w_hat,
            g_hat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let p_x = self.mu_x.len();
        let q = self.b.len();
        let p_z = self.w_hat.ncols();
        if p_x + q == 0 {
            return Err(Error::InvalidParams("model has no observed variables".into()));
        }
        check_capacity(q)?;
        if self.psi.len() != p_x || self.w_hat.nrows() != p_x {
            return Err(Error::Dimension(format!(
                "continuous block: mu_x {}, psi {}, w_hat {}x{}",
                p_x,
                self.psi.len(),
                self.w_hat.nrows(),
                self.w_hat.ncols()
            )));
        }
        if self.g_hat.nrows() != q || self.g_hat.ncols() != p_z {
            return Err(Error::Dimension(format!(
                "binary block: b {}, g_hat {}x{} (expected {}x{})",
                q,
                self.g_hat.nrows(),
                self.g_hat.ncols(),
                q,
                p_z
            )));
        }
        if p_z == 0 || p_z > p_x + q {
            return Err(Error::LatentDimOutOfRange { p_z, max: p_x + q });
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!("c = {} must be finite and >= 0", self.c)));
        }
        if let Some(j) = self.psi.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParams(format!("psi[{j}] = {} must be positive", self.psi[j])));
        }
        let finite = self.mu_x.iter().chain(self.b.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite mean or bias".into()));
        }
        for (name, m) in [("w_hat", &self.w_hat), ("g_hat", &self.g_hat)] {
            for (i, row) in m.row_iter().enumerate() {
                let n = row.norm();
                if (n - 1.0).abs() > ROW_NORM_TOL {
                    return Err(Error::InvalidParams(format!(
                        "{name} row {i} has norm {n}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn p_x(&self) -> usize {
        self.mu_x.len()
    }

    pub fn q(&self) -> usize {
        self.b.len()
    }

    pub fn p_z(&self) -> usize {
        self.w_hat.ncols()
    }

    /// `W = Psi^{1/2} c W_hat`.
    pub fn w(&self) -> DMatrix<f64> {
        let mut w = &self.w_hat * self.c;
        for (j, mut row) in w.row_iter_mut().enumerate() {
            row *= self.psi[j].sqrt();
        }
        w
    }

    /// `G = c G_hat`.
    pub fn g(&self) -> DMatrix<f64> {
        &self.g_hat * self.c
    }

    /// Normalized combined loadings `[W_hat; G_hat]`.
    pub fn m_hat(&self) -> DMatrix<f64> {
        let (p_x, q, p_z) = (self.p_x(), self.q(), self.p_z());
        let mut m = DMatrix::zeros(p_x + q, p_z);
        m.rows_mut(0, p_x).copy_from(&self.w_hat);
        m.rows_mut(p_x, q).copy_from(&self.g_hat);
        m
    }

    /// Dimensionless combined loadings `M = c [W_hat; G_hat]`.
    pub fn m(&self) -> DMatrix<f64> {
        self.m_hat() * self.c
    }

    /// Latent mean `-1/2 sum_j g_j`.
    pub fn mu_z(&self) -> DVector<f64> {
        let g = self.g();
        let mut mu = DVector::zeros(self.p_z());
        for row in g.row_iter() {
            mu -= row.transpose() * 0.5;
        }
        mu
    }

    /// `Sigma_x = Psi + W W^T`.
    pub fn sigma_x(&self) -> DMatrix<f64> {
        let w = self.w();
        let mut s = &w * w.transpose();
        for j in 0..self.p_x() {
            s[(j, j)] += self.psi[j];
        }
        s
    }

    /// Rotates the latent space: `W_hat <- W_hat R`, `G_hat <- G_hat R`.
    /// Rows are renormalized to absorb rounding.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        if r.nrows() != self.p_z() || r.ncols() != self.p_z() {
            return Err(Error::Dimension("rotation must be p_z x p_z".into()));
        }
        let mut out = self.clone();
        out.w_hat = normalize_rows(&(&self.w_hat * r))?;
        out.g_hat = normalize_rows(&(&self.g_hat * r))?;
        Ok(out)
    }
}

/// Scales every row of `m` to unit Euclidean norm.
pub fn normalize_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let n = row.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical(format!("row {i} has norm {n}, cannot normalize")));
        }
        row /= n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelParams {
        let s = 0.5f64.sqrt();
        ModelParams::new(
            DVector::from_vec(vec![1.0, -1.0]),
            DVector::from_vec(vec![2.0, 0.5]),
            DVector::from_vec(vec![0.3]),
            1.5,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, s, s]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn combined_loading_rows_have_norm_c() {
        let p = sample();
        let m = p.m();
        for row in m.row_iter() {
            assert!((row.norm_squared() - p.c * p.c).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_x_diagonal_identity() {
        let p = sample();
        let s = p.sigma_x();
        for j in 0..2 {
            let expect = (1.0 + p.c * p.c) * p.psi[j];
            assert!(((s[(j, j)] - expect) / expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_z_is_minus_half_sum_of_g_rows() {
        let p = sample();
        let mu = p.mu_z();
        assert!((mu[0] - 0.0).abs() < 1e-15);
        assert!((mu[1] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_rows_and_psi() {
        let mut p = sample();
        p.w_hat[(0, 0)] = 0.9;
        assert!(p.validate().is_err());
        let mut p = sample();
        p.psi[1] = 0.0;
        assert!(p.validate().is_err());
        let mut p = sample();
        p.c = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn latent_dim_bounds() {
        let r = ModelParams::new(
            DVector::zeros(1),
            DVector::from_element(1, 1.0),
            DVector::zeros(0),
            1.0,
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(0, 2),
        );
        assert!(matches!(r, Err(Error::LatentDimOutOfRange { .. })));
    }
}
