use mehk_core::controllers::{model_error_gradients, tle_gradients, HkParams};
use mehk_core::seeds;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const H: f64 = 1e-6;

fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().chain(analytic).fold(1e-8_f64, |m, v| m.max(v.abs()));
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn tle_gradient_matches_central_differences() {
    let mut worst = 0.0_f64;
    for trial in 0..100u64 {
        let mut rng = seeds::rng(trial);
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=4);
        let c = random_matrix(&mut rng, m, n, 1.0);
        let cb = random_vector(&mut rng, m, 0.5);
        let a = random_matrix(&mut rng, n, m, 1.0);
        let s = random_vector(&mut rng, n, 1.0);
        let e = random_vector(&mut rng, n, 0.2);
        let lambda = HkParams::default().lambda;
        let g = tle_gradients(&c, &cb, &a, &s, &e, lambda);
        let tle = |c: &DMatrix<f64>, cb: &DVector<f64>| tle_gradients(c, cb, &a, &s, &e, lambda).tle;

        let mut numeric = Vec::new();
        let mut analytic = Vec::new();
        for i in 0..m {
            for j in 0..n {
                let (mut cp, mut cm) = (c.clone(), c.clone());
                cp[(i, j)] += H;
                cm[(i, j)] -= H;
                numeric.push((tle(&cp, &cb) - tle(&cm, &cb)) / (2.0 * H));
                analytic.push(g.d_c[(i, j)]);
            }
            let (mut bp, mut bm) = (cb.clone(), cb.clone());
            bp[i] += H;
            bm[i] -= H;
            numeric.push((tle(&c, &bp) - tle(&c, &bm)) / (2.0 * H));
            analytic.push(g.d_c_bias[i]);
        }
        let err = rel_err(&analytic, &numeric);
        worst = worst.max(err);
        assert!(err < 1e-4, "trial {trial} (n={n}, m={m}): relative error {err:e}");
    }
    eprintln!("worst TLE gradient relative error {worst:e}");
}

#[test]
fn prediction_error_gradient_matches_central_differences() {
    for trial in 0..100u64 {
        let mut rng = seeds::rng(1000 + trial);
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=4);
        let a = random_matrix(&mut rng, n, m, 1.0);
        let b = random_vector(&mut rng, n, 0.5);
        let a_prev = random_vector(&mut rng, m, 1.0);
        let s = random_vector(&mut rng, n, 1.0);
        let (_, d_a, d_b) = model_error_gradients(&a, &b, &a_prev, &s);
        let f = |a: &DMatrix<f64>, b: &DVector<f64>| model_error_gradients(a, b, &a_prev, &s).0;

        let mut numeric = Vec::new();
        let mut analytic = Vec::new();
        for i in 0..n {
            for j in 0..m {
                let (mut ap, mut am) = (a.clone(), a.clone());
                ap[(i, j)] += H;
                am[(i, j)] -= H;
                numeric.push((f(&ap, &b) - f(&am, &b)) / (2.0 * H));
                analytic.push(d_a[(i, j)]);
            }
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[i] += H;
            bm[i] -= H;
            numeric.push((f(&a, &bp) - f(&a, &bm)) / (2.0 * H));
            analytic.push(d_b[i]);
        }
        let err = rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "trial {trial}: relative error {err:e}");
    }
}
