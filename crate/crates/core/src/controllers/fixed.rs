use rand::Rng;

use super::HIDDEN_UNITS;
use crate::error::{Error, Result};

/// Feed-forward network `n → 6 → m` with tanh units, parameters frozen at
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedController {
    n: usize,
    m: usize,
    /// `W1 (6×n, row-major) | b1 (6) | W2 (m×6, row-major) | b2 (m)`
    params: Vec<f64>,
}

impl FixedController {
    pub fn param_count(n: usize, m: usize) -> usize {
        HIDDEN_UNITS * n + HIDDEN_UNITS + m * HIDDEN_UNITS + m
    }

    /// Weights and biases drawn from `U[-0.5, 0.5]`.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        let params = (0..Self::param_count(n, m)).map(|_| rng.random_range(-0.5..=0.5)).collect();
        Self { n, m, params }
    }

    pub fn from_flat(n: usize, m: usize, params: &[f64]) -> Result<Self> {
        let want = Self::param_count(n, m);
        if params.len() != want {
            return Err(Error::ShapeMismatch { expected: want, actual: params.len() });
        }
        Ok(Self { n, m, params: params.to_vec() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn flat(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.n {
            return Err(Error::ShapeMismatch { expected: self.n, actual: s.len() });
        }
        let (w1, rest) = self.params.split_at(HIDDEN_UNITS * self.n);
        let (b1, rest) = rest.split_at(HIDDEN_UNITS);
        let (w2, b2) = rest.split_at(self.m * HIDDEN_UNITS);
        let mut hidden = [0.0; HIDDEN_UNITS];
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &w1[j * self.n..(j + 1) * self.n];
            *h = row.iter().zip(s).fold(b1[j], |acc, (w, x)| acc + w * x).tanh();
        }
        Ok((0..self.m)
            .map(|k| {
                let row = &w2[k * HIDDEN_UNITS..(k + 1) * HIDDEN_UNITS];
                row.iter().zip(&hidden).fold(b2[k], |acc, (w, h)| acc + w * h).tanh()
            })
            .collect())
    }
}
