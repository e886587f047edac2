//! Homeokinetic controller.
//!
//! Controller `a = tanh(C s + c)`, forward model in action space
//! `s̃ = A a + b`. The loop map `Ψ(s) = A tanh(C s + c) + b` has the Jacobian
//! `L = A diag(g'(C s + c)) C`. With the prediction error
//! `E = s_t - (A a_{t-1} + b)`, the time-loop error is `‖ξ‖²` where
//! `ξ = (LᵀL + λI)⁻¹ Lᵀ E` is the ridge-regularised solution of `L ξ = E`.
//! Each step descends `TLE` in `(C, c)` and `‖E‖²` in `(A, b)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::io::IoLayout;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HkParams {
    pub eps_c: f64,
    pub eps_a: f64,
    pub lambda: f64,
    /// Box bound applied to every parameter after each update.
    pub clip: f64,
    /// Half-width of the uniform noise added to the initial `C`.
    pub init_noise: f64,
    /// Diagonal gain linking each actuator to its own proprioceptive channel.
    pub init_gain: f64,
    /// Standard deviation of the Gaussian perturbation added to every sensor
    /// value the controller reads. A noiseless loop at rest has zero
    /// prediction error and never starts learning.
    pub input_noise: f64,
}

impl Default for HkParams {
    fn default() -> Self {
        Self { eps_c: 2.0, eps_a: 0.05, lambda: 1e-4, clip: 10.0, init_noise: 0.1, init_gain: 0.5, input_noise: 0.008 }
    }
}

impl HkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_c > 0.0 && self.eps_a > 0.0) {
            return Err(Error::Config("homeokinetic learning rates must be positive".into()));
        }
        if !(self.input_noise >= 0.0) || !self.input_noise.is_finite() {
            return Err(Error::Config("homeokinetic input noise must be non-negative".into()));
        }
        if !(self.lambda > 0.0) || !(self.clip > 0.0) {
            return Err(Error::Config("homeokinetic lambda and clip must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HkStep {
    pub action: Vec<f64>,
    pub tle: Option<f64>,
    pub error_norm: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct HkController {
    c_mat: DMatrix<f64>,
    c_bias: DVector<f64>,
    a_mat: DMatrix<f64>,
    b_bias: DVector<f64>,
    init: (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>),
    params: HkParams,
    last_action: Option<DVector<f64>>,
    faults: u32,
    noise_rng: ChaCha8Rng,
}

impl HkController {
    /// Controller with the given initial parameters (`C` is m×n, `A` is n×m).
    pub fn with_parameters(
        c_mat: DMatrix<f64>,
        c_bias: DVector<f64>,
        a_mat: DMatrix<f64>,
        b_bias: DVector<f64>,
        params: HkParams,
    ) -> Result<Self> {
        let (m, n) = c_mat.shape();
        if c_bias.len() != m {
            return Err(Error::ShapeMismatch { expected: m, actual: c_bias.len() });
        }
        if a_mat.shape() != (n, m) {
            return Err(Error::ShapeMismatch { expected: n * m, actual: a_mat.len() });
        }
        if b_bias.len() != n {
            return Err(Error::ShapeMismatch { expected: n, actual: b_bias.len() });
        }
        let init = (c_mat.clone(), c_bias.clone(), a_mat.clone(), b_bias.clone());
        Ok(Self { c_mat, c_bias, a_mat, b_bias, init, params, last_action: None, faults: 0, noise_rng: ChaCha8Rng::seed_from_u64(0) })
    }

    /// Bootstrapped controller for a design layout: `C` is small uniform noise
    /// plus `init_gain` on each actuator's own proprioceptive channel, `A` is
    /// the matching pseudo-identity and both biases are zero.
    pub fn for_layout<R: Rng + ?Sized>(layout: &IoLayout, params: HkParams, rng: &mut R) -> Self {
        let (n, m) = (layout.n(), layout.m());
        let noise = params.init_noise;
        let mut c_mat = DMatrix::from_fn(m, n, |_, _| if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 });
        let mut a_mat = DMatrix::zeros(n, m);
        for (ai, si) in layout.proprioceptive_pairs() {
            c_mat[(ai, si)] += params.init_gain;
            a_mat[(si, ai)] = 1.0;
        }
        let mut ctrl = Self::with_parameters(c_mat, DVector::zeros(m), a_mat, DVector::zeros(n), params)
            .expect("layout shapes are consistent");
        ctrl.noise_rng = ChaCha8Rng::seed_from_u64(rng.random());
        ctrl
    }

    pub fn n(&self) -> usize {
        self.c_mat.ncols()
    }

    pub fn m(&self) -> usize {
        self.c_mat.nrows()
    }

    pub fn controller_matrix(&self) -> &DMatrix<f64> {
        &self.c_mat
    }

    pub fn controller_bias(&self) -> &DVector<f64> {
        &self.c_bias
    }

    pub fn model_matrix(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    pub fn model_bias(&self) -> &DVector<f64> {
        &self.b_bias
    }

    pub fn faults(&self) -> u32 {
        self.faults
    }

    pub fn reset_faults(&mut self) {
        self.faults = 0;
    }

    /// Forget the cached action; the next step performs no update.
    pub fn reset_episode(&mut self) {
        self.last_action = None;
    }

    /// Seed the cache as if `a_prev` had been emitted on the previous step.
    pub fn set_last_action(&mut self, a_prev: &[f64]) -> Result<()> {
        if a_prev.len() != self.m() {
            return Err(Error::ShapeMismatch { expected: self.m(), actual: a_prev.len() });
        }
        self.last_action = Some(DVector::from_column_slice(a_prev));
        Ok(())
    }

    /// Parameters flattened as `C | c | A | b` (column-major matrices).
    pub fn flat(&self) -> Vec<f64> {
        self.c_mat
            .iter()
            .chain(self.c_bias.iter())
            .chain(self.a_mat.iter())
            .chain(self.b_bias.iter())
            .copied()
            .collect()
    }

    pub fn step(&mut self, s: &[f64]) -> Result<HkStep> {
        let n = self.n();
        if s.len() != n {
            return Err(Error::ShapeMismatch { expected: n, actual: s.len() });
        }
        let mut s = DVector::from_column_slice(s);
        if self.params.input_noise > 0.0 {
            let normal = Normal::new(0.0, self.params.input_noise).expect("validated noise level");
            for v in s.iter_mut() {
                *v += normal.sample(&mut self.noise_rng);
            }
        }
        let mut tle = None;
        let mut error_norm = None;

        if let Some(a_prev) = self.last_action.take() {
            let e = &s - (&self.a_mat * &a_prev + &self.b_bias);
            error_norm = Some(e.norm());
            let grads = tle_gradients(&self.c_mat, &self.c_bias, &self.a_mat, &s, &e, self.params.lambda);
            let (_, d_a, d_b) = model_error_gradients(&self.a_mat, &self.b_bias, &a_prev, &s);
            let finite = grads.tle.is_finite()
                && grads.d_c.iter().all(|v| v.is_finite())
                && grads.d_c_bias.iter().all(|v| v.is_finite());
            if finite {
                tle = Some(grads.tle);
                let (eps_c, eps_a, clip) = (self.params.eps_c, self.params.eps_a, self.params.clip);
                self.c_mat -= grads.d_c * eps_c;
                self.c_bias -= grads.d_c_bias * eps_c;
                self.a_mat -= d_a * eps_a;
                self.b_bias -= d_b * eps_a;
                for v in self
                    .c_mat
                    .iter_mut()
                    .chain(self.c_bias.iter_mut())
                    .chain(self.a_mat.iter_mut())
                    .chain(self.b_bias.iter_mut())
                {
                    *v = v.clamp(-clip, clip);
                }
            }
            if !finite || self.flat().iter().any(|v| !v.is_finite()) {
                self.restore_initial();
                self.faults += 1;
            }
        }

        let z = &self.c_mat * &s + &self.c_bias;
        let action = z.map(f64::tanh);
        self.last_action = Some(action.clone());
        Ok(HkStep { action: action.as_slice().to_vec(), tle, error_norm })
    }

    fn restore_initial(&mut self) {
        let (c, cb, a, b) = self.init.clone();
        self.c_mat = c;
        self.c_bias = cb;
        self.a_mat = a;
        self.b_bias = b;
    }
}

#[derive(Clone, Debug)]
pub struct TleGradients {
    pub tle: f64,
    /// Jacobian of the loop map at `s`.
    pub jacobian: DMatrix<f64>,
    pub d_c: DMatrix<f64>,
    pub d_c_bias: DVector<f64>,
}

/// Time-loop error at `s` for a given prediction error `e`, and its analytic
/// gradient with respect to the controller parameters `(C, c)`.
///
/// With `M = LᵀL + λI`, `ξ = M⁻¹LᵀE` and `v = M⁻¹ξ`, the gradient with
/// respect to `L` is `2[(E - Lξ)vᵀ - (Lv)ξᵀ]`, which is pulled back through
/// `L = A diag(g'(z)) C`, `z = C s + c`.
pub fn tle_gradients(
    c_mat: &DMatrix<f64>,
    c_bias: &DVector<f64>,
    a_mat: &DMatrix<f64>,
    s: &DVector<f64>,
    e: &DVector<f64>,
    lambda: f64,
) -> TleGradients {
    let (m, n) = c_mat.shape();
    let z = c_mat * s + c_bias;
    let g1 = z.map(|v| {
        let t = v.tanh();
        1.0 - t * t
    });
    let g2 = z.map(|v| {
        let t = v.tanh();
        -2.0 * t * (1.0 - t * t)
    });
    // A diag(g') and L.
    let mut ad = a_mat.clone();
    for k in 0..m {
        ad.column_mut(k).scale_mut(g1[k]);
    }
    let l = &ad * c_mat;
    let mut mtx = l.transpose() * &l;
    for i in 0..n {
        mtx[(i, i)] += lambda;
    }
    let rhs = l.transpose() * e;
    let solved = match mtx.clone().cholesky() {
        Some(ch) => Some((ch.solve(&rhs), ch)),
        None => None,
    };
    let (xi, v) = match solved {
        Some((xi, ch)) => {
            let v = ch.solve(&xi);
            (xi, v)
        }
        None => match mtx.lu().try_inverse() {
            Some(inv) => {
                let xi = &inv * &rhs;
                let v = &inv * &xi;
                (xi, v)
            }
            None => {
                let nan = DVector::from_element(n, f64::NAN);
                (nan.clone(), nan)
            }
        },
    };
    let tle = xi.norm_squared();
    let lv = &l * &v;
    let resid = e - &l * &xi;
    let g_l = (resid * v.transpose() - lv * xi.transpose()) * 2.0;

    // Direct dependence through the trailing C.
    let at_gl = a_mat.transpose() * &g_l;
    let mut d_c = at_gl.clone();
    for k in 0..m {
        d_c.row_mut(k).scale_mut(g1[k]);
    }
    // Dependence through g'(z).
    let diag_terms = &at_gl * c_mat.transpose();
    let h = DVector::from_fn(m, |k, _| g2[k] * diag_terms[(k, k)]);
    d_c += &h * s.transpose();
    TleGradients { tle, jacobian: l, d_c, d_c_bias: h }
}

/// `‖E‖²` with `E = s - (A a_prev + b)` and its gradients in `(A, b)`.
pub fn model_error_gradients(
    a_mat: &DMatrix<f64>,
    b_bias: &DVector<f64>,
    a_prev: &DVector<f64>,
    s: &DVector<f64>,
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let e = s - (a_mat * a_prev + b_bias);
    let d_a = &e * a_prev.transpose() * -2.0;
    let d_b = &e * -2.0;
    (e.norm_squared(), d_a, d_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn scalar(c: f64, a: f64) -> HkController {
        let p = HkParams { lambda: 1e-4, input_noise: 0.0, ..Default::default() };
        HkController::with_parameters(
            DMatrix::from_element(1, 1, c),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, a),
            DVector::zeros(1),
            p,
        )
        .unwrap()
    }

    #[test]
    fn scalar_loop_tle_equals_error_squared() {
        let e = 0.3;
        let g = tle_gradients(
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::zeros(1),
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::zeros(1),
            &DVector::from_element(1, e),
            0.0,
        );
        assert_eq!(g.jacobian[(0, 0)], 1.0);
        assert!((g.tle - e * e).abs() < 1e-15);
    }

    #[test]
    fn perfect_model_gives_zero_update() {
        let mut hk = scalar(0.7, 1.0);
        hk.set_last_action(&[0.2]).unwrap();
        // s equals the prediction A a_prev + b = 0.2.
        let before = hk.controller_matrix().clone();
        let out = hk.step(&[0.2]).unwrap();
        assert_eq!(out.tle, Some(0.0));
        assert_eq!(out.error_norm, Some(0.0));
        assert_eq!(hk.controller_matrix(), &before);
    }

    #[test]
    fn first_step_has_no_update() {
        let mut hk = scalar(0.7, 1.0);
        let out = hk.step(&[0.4]).unwrap();
        assert_eq!(out.tle, None);
        assert_eq!(hk.controller_matrix()[(0, 0)], 0.7);
        assert_eq!(out.action, vec![(0.7f64 * 0.4).tanh()]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut hk = scalar(1.0, 1.0);
        assert!(matches!(hk.step(&[0.0, 1.0]), Err(Error::ShapeMismatch { expected: 1, actual: 2 })));
    }

    #[test]
    fn singular_jacobian_stays_finite() {
        let g = tle_gradients(
            &DMatrix::zeros(2, 3),
            &DVector::zeros(2),
            &DMatrix::zeros(3, 2),
            &DVector::from_vec(vec![0.1, -0.4, 0.9]),
            &DVector::from_vec(vec![0.5, 0.5, -1.0]),
            1e-4,
        );
        assert!(g.tle.is_finite());
        assert!(g.d_c.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn parameters_stay_clipped() {
        let layout_n = 3;
        let mut rng = seeds::rng(1);
        let c = DMatrix::from_fn(2, layout_n, |_, _| rng.random_range(-1.0..1.0));
        let a = DMatrix::from_fn(layout_n, 2, |_, _| rng.random_range(-1.0..1.0));
        let mut hk = HkController::with_parameters(c, DVector::zeros(2), a, DVector::zeros(layout_n), HkParams::default()).unwrap();
        for i in 0..5000 {
            let s: Vec<f64> = (0..layout_n).map(|k| if (i + k) % 3 == 0 { 1.0 } else { -1.0 }).collect();
            hk.step(&s).unwrap();
            assert!(hk.flat().iter().all(|v| v.abs() <= 10.0));
        }
    }
}
