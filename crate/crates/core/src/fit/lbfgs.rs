//! Limited-memory BFGS direction with a small curvature-pair history.

use std::collections::VecDeque;

use nalgebra::DVector;

pub(crate) struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)>,
}

impl Lbfgs {
    pub fn new(memory: usize) -> Self {
        Lbfgs {
            memory,
            pairs: VecDeque::with_capacity(memory),
        }
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores the pair unless the curvature condition `s^T y > 0` fails.
    pub fn push(&mut self, s: DVector<f64>, y: DVector<f64>) {
        let sy = s.dot(&y);
        if !(sy > 1e-12 * s.norm() * y.norm()) {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: returns `-H g`.
    pub fn direction(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut q = g.clone();
        let mut alpha = vec![0.0; self.pairs.len()];
        for (i, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            let a = rho * s.dot(&q);
            alpha[i] = a;
            q.axpy(-a, y, 1.0);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            q *= s.dot(y) / y.norm_squared();
        }
        for (i, (s, y, rho)) in self.pairs.iter().enumerate() {
            let beta = rho * y.dot(&q);
            q.axpy(alpha[i] - beta, s, 1.0);
        }
        -q
    }
}
