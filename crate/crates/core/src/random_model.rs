//! Random parameter draws for tests, benchmarks and simulation studies.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::params::{normalize_rows, ModelParams};

/// Unit-norm rows with standard-normal directions.
pub fn random_unit_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(n) = normalize_rows(&m) {
            return n;
        }
    }
}

/// A valid parameter set with moderate values: `c` in `[0.3, 1.5)`,
/// log unique variances and biases roughly standard normal.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, p_x: usize, q: usize, p_z: usize) -> ModelParams {
    let mut normal = |scale: f64| scale * rng.sample::<f64, _>(StandardNormal);
    let mu_x = DVector::from_fn(p_x, |_, _| normal(1.0));
    let psi = DVector::from_fn(p_x, |_, _| normal(0.5).exp());
    let b = DVector::from_fn(q, |_, _| normal(0.7));
    let c = rng.random_range(0.3..1.5);
    let w_hat = random_unit_rows(rng, p_x, p_z);
    let g_hat = random_unit_rows(rng, q, p_z);
    ModelParams::new(mu_x, psi, b, c, w_hat, g_hat).expect("random parameters are valid")
}

/// A uniformly distributed orthogonal matrix (QR of a Gaussian matrix with
/// the sign of `R`'s diagonal absorbed).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
