//! Analytic gradients against central finite differences, in f64.

#[path = "support/gradcheck.rs"]
mod gradcheck;

use audiolrp::nn::softmax_cross_entropy;
use audiolrp::Tensor;
use gradcheck::{check, instances, rel_err, TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_layer_kind_matches_finite_differences() {
    let cases = instances();
    assert!(cases.len() >= 50, "only {} instances", cases.len());
    let mut failures = Vec::new();
    for (i, (name, spec, dropout)) in cases.into_iter().enumerate() {
        let err = check(spec, 1000 + i as u64, dropout);
        if !(err < TOL) {
            failures.push(format!("{name}: relative error {err:e}"));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn softmax_cross_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.random_range(2..12);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let label = rng.random_range(0..n);
        let t = Tensor::new(vec![n], z.clone()).unwrap();
        let (_, g) = softmax_cross_entropy(&t, label).unwrap();
        let numeric: Vec<f64> = (0..n)
            .map(|i| {
                let mut p = z.clone();
                p[i] += 1e-5;
                let up = softmax_cross_entropy(&Tensor::new(vec![n], p.clone()).unwrap(), label).unwrap().0;
                p[i] -= 2e-5;
                let down = softmax_cross_entropy(&Tensor::new(vec![n], p).unwrap(), label).unwrap().0;
                (up - down) / 2e-5
            })
            .collect();
        assert!(rel_err(g.data(), &numeric) < 1e-8);
    }
}
