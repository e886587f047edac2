use super::HIDDEN_UNITS;
use crate::error::{Error, Result};

const H: usize = HIDDEN_UNITS;

/// Elman network `n → 6 → m`:
/// `h_t = tanh(W_in s_t + W_rec h_{t-1} + b_h)`, `a_t = tanh(W_out h_t + b_out)`.
///
/// Flat layout: `W_in (6×n) | W_rec (6×6) | b_h (6) | W_out (m×6) | b_out (m)`,
/// matrices row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ElmanController {
    n: usize,
    m: usize,
    params: Vec<f64>,
    hidden: [f64; H],
}

impl ElmanController {
    pub fn param_count(n: usize, m: usize) -> usize {
        H * n + H * H + H + m * H + m
    }

    pub fn from_flat(n: usize, m: usize, params: &[f64]) -> Result<Self> {
        let want = Self::param_count(n, m);
        if params.len() != want {
            return Err(Error::ShapeMismatch { expected: want, actual: params.len() });
        }
        Ok(Self { n, m, params: params.to_vec(), hidden: [0.0; H] })
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

    pub fn hidden(&self) -> &[f64; H] {
        &self.hidden
    }

    pub fn reset(&mut self) {
        self.hidden = [0.0; H];
    }

    pub fn forward(&mut self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.n {
            return Err(Error::ShapeMismatch { expected: self.n, actual: s.len() });
        }
        let (w_in, rest) = self.params.split_at(H * self.n);
        let (w_rec, rest) = rest.split_at(H * H);
        let (b_h, rest) = rest.split_at(H);
        let (w_out, b_out) = rest.split_at(self.m * H);
        let prev = self.hidden;
        for j in 0..H {
            let input = w_in[j * self.n..(j + 1) * self.n].iter().zip(s).map(|(w, x)| w * x).sum::<f64>();
            let rec = w_rec[j * H..(j + 1) * H].iter().zip(&prev).map(|(w, h)| w * h).sum::<f64>();
            self.hidden[j] = (input + rec + b_h[j]).tanh();
        }
        let hidden = self.hidden;
        Ok((0..self.m)
            .map(|k| {
                let row = &w_out[k * H..(k + 1) * H];
                (row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b_out[k]).tanh()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let mut c = ElmanController::from_flat(2, 3, &vec![0.0; ElmanController::param_count(2, 3)]).unwrap();
        for _ in 0..5 {
            assert_eq!(c.forward(&[1.0, -1.0]).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn reset_restores_sequence() {
        let p: Vec<f64> = (0..ElmanController::param_count(2, 1)).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
        let mut c = ElmanController::from_flat(2, 1, &p).unwrap();
        let inputs = [[0.1, 0.2], [0.5, -0.3], [-1.0, 1.0]];
        let first: Vec<_> = inputs.iter().map(|s| c.forward(s).unwrap()).collect();
        c.reset();
        let second: Vec<_> = inputs.iter().map(|s| c.forward(s).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn flat_round_trip() {
        let p: Vec<f64> = (0..ElmanController::param_count(3, 2)).map(|i| i as f64 * 0.01).collect();
        let c = ElmanController::from_flat(3, 2, &p).unwrap();
        assert_eq!(c.flat(), p);
        assert!(ElmanController::from_flat(3, 2, &p[1..]).is_err());
    }
}
