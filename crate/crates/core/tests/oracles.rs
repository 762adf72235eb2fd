//! Model densities checked against independent computations: brute-force
//! enumeration, numerical quadrature, Bayes' rule and Monte Carlo.

use ggfa::random_model::random_params;
use ggfa::sample::sample;
use ggfa::{enumerate_states, BitState, Model, ModelParams, Row};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss_vec(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal))
}

fn random_state(r: &mut ChaCha8Rng, q: usize) -> BitState {
    let bits: Vec<bool> = (0..q).map(|_| r.random::<bool>()).collect();
    BitState::from_bits(&bits).unwrap()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn log_normal_pdf(z: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let k = z.len() as f64;
    let inv = cov.clone().try_inverse().unwrap();
    let d = z - mean;
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + quad)
}

#[test]
fn bayes_rule_gives_the_gaussian_posterior() {
    let mut r = rng(1);
    for _ in 0..30 {
        let (p_x, q) = (r.random_range(0..=4), r.random_range(0..=4));
        if p_x + q == 0 {
            continue;
        }
        let p_z = r.random_range(1..=3).min(p_x + q);
        let model = Model::new(random_params(&mut r, p_x, q, p_z)).unwrap();
        let x = gauss_vec(&mut r, p_x);
        let y = random_state(&mut r, q);
        let post = model.posterior(&x, &y).unwrap();
        let marginal = model.log_joint_observed(&x, &y).unwrap();
        for _ in 0..10 {
            let z = gauss_vec(&mut r, p_z) * 1.5;
            let lhs = model.log_joint_full(&x, &z, &y).unwrap() - marginal;
            let rhs = log_normal_pdf(&z, &post.m, &post.cov);
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn binary_marginal_is_an_ising_model() {
    let mut r = rng(2);
    for q in 1..=6 {
        let p = random_params(&mut r, 0, q, q.min(2));
        let model = Model::new(p.clone()).unwrap();
        let k = p.g() * p.g().transpose();
        let energy = |s: &BitState| {
            let y = s.to_f64();
            let mut e = 0.0;
            for a in 0..q {
                e += y[a] * (p.b[a] + 0.5 * k[(a, a)]);
                for b in 0..a {
                    e += y[a] * y[b] * k[(a, b)];
                }
            }
            e
        };
        let states = enumerate_states(q).unwrap();
        let log_z = states.iter().map(|s| energy(s).exp()).sum::<f64>().ln();
        let x = DVector::zeros(0);
        for s in &states {
            let got = model.log_joint_observed(&x, s).unwrap();
            assert!((got - (energy(s) - log_z)).abs() <= 1e-12 * got.abs().max(1.0));
        }
    }
}

#[test]
fn latent_integral_recovers_marginal_and_posterior_mean() {
    let mut r = rng(3);
    for _ in 0..5 {
        let model = Model::new(random_params(&mut r, 2, 3, 1)).unwrap();
        let x = gauss_vec(&mut r, 2);
        let y = random_state(&mut r, 3);
        let joint = |t: f64| model.log_joint_full(&x, &DVector::from_element(1, t), &y).unwrap().exp();
        let mass = simpson(&joint, -15.0, 15.0, 6000);
        let first = simpson(|t| t * joint(t), -15.0, 15.0, 6000);
        let marginal = model.log_joint_observed(&x, &y).unwrap();
        assert!((mass.ln() - marginal).abs() < 1e-9);
        let m = model.posterior(&x, &y).unwrap().m[0];
        assert!((first / mass - m).abs() < 1e-9);
    }
}

#[test]
fn missing_continuous_cell_is_integrated_out() {
    let mut r = rng(4);
    for _ in 0..5 {
        let p = random_params(&mut r, 3, 2, 2);
        let model = Model::new(p.clone()).unwrap();
        let x = gauss_vec(&mut r, 3);
        let y = random_state(&mut r, 2);
        let j = r.random_range(0..3);
        let sd = p.sigma_x()[(j, j)].sqrt();
        let centre = p.mu_x[j];
        let at = |t: f64| {
            let mut xt = x.clone();
            xt[j] = t;
            xt
        };
        let dens = |t: f64| model.log_joint_observed(&at(t), &y).unwrap().exp();
        let expect = simpson(&dens, centre - 14.0 * sd, centre + 14.0 * sd, 6000).ln();

        let mut row = Row::complete(x.as_slice(), &y.bits());
        row.x[j] = None;
        let got = model.log_marginal_partial(&row).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");

        // posterior mean: average the complete-row mean over p(x_j | rest)
        let mean = model.posterior_mean_partial(&row).unwrap();
        let norm = expect.exp();
        for s in 0..2 {
            let weighted = simpson(
                |t| model.posterior(&at(t), &y).unwrap().m[s] * dens(t),
                centre - 14.0 * sd,
                centre + 14.0 * sd,
                6000,
            );
            assert!((weighted / norm - mean[s]).abs() < 1e-8);
        }
    }
}

#[test]
fn missing_binary_cells_are_summed_out() {
    let mut r = rng(5);
    for _ in 0..10 {
        let model = Model::new(random_params(&mut r, 2, 3, 2)).unwrap();
        let x = gauss_vec(&mut r, 2);
        let row = Row {
            x: x.iter().map(|&v| Some(v)).collect(),
            y: vec![None, Some(true), None],
        };
        let completions: Vec<BitState> = enumerate_states(3).unwrap().into_iter().filter(|s| s.bit(1)).collect();
        let logs: Vec<f64> = completions.iter().map(|s| model.log_joint_observed(&x, s).unwrap()).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        assert!((model.log_marginal_partial(&row).unwrap() - total).abs() < 1e-12 * total.abs().max(1.0));

        let mut m = DVector::zeros(2);
        for (s, l) in completions.iter().zip(&logs) {
            m += model.posterior(&x, s).unwrap().m * (l - total).exp();
        }
        let got = model.posterior_mean_partial(&row).unwrap();
        assert!((got - m).amax() < 1e-12);
    }
}

#[test]
fn sampled_moments_match_model_moments() {
    let mut r = rng(6);
    let p: ModelParams = random_params(&mut r, 3, 3, 2);
    let n = 200_000;
    let data = sample(&p, n, 11).unwrap();
    let emp = data.empirical_moments().unwrap();
    let model = Model::new(p).unwrap().moments().unwrap();
    for i in 0..6 {
        let se = (model.cov[(i, i)] / n as f64).sqrt();
        assert!((emp.mean[i] - model.mean[i]).abs() < 5.0 * se, "mean {i}");
        for j in 0..=i {
            // variance of a product moment is bounded by the fourth moment; use a loose scale
            let scale = (model.cov[(i, i)] * model.cov[(j, j)]).sqrt();
            assert!((emp.cov[(i, j)] - model.cov[(i, j)]).abs() < 5.0 * scale * (3.0 / n as f64).sqrt(), "cov {i},{j}");
        }
    }
}
