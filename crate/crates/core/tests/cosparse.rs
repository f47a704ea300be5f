mod common;

use common::*;
use l1analysis::cosparse::{
    certificate, check_h0, cospace_dim, detect_cosupport, enumerate_exact_solve, prediction_jacobian, CosupportModel,
};
use l1analysis::{DictionarySpec, LinearMap, Problem};
use rand::seq::index::sample;

fn random_subsets(p: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let mut v = sample(&mut r, p, k % (p + 1)).into_vec();
            v.sort_unstable();
            v
        })
        .collect()
}

#[test]
fn cospace_dimension_matches_dense_null_space() {
    let dicts = [
        DictionarySpec::finite_diff_1d(9).unwrap(),
        DictionarySpec::finite_diff_2d(3, 4).unwrap(),
        DictionarySpec::haar_shift_invariant(8, 2).unwrap(),
        DictionarySpec::dense_analysis(gaussian_matrix(&mut rng(5), 10, 7)),
    ];
    for (i, dict) in dicts.iter().enumerate() {
        let dstar = dense_dstar(dict);
        for j in random_subsets(dict.p(), 30, i as u64) {
            assert_eq!(cospace_dim(dict, &j).unwrap(), cospace(&dstar, &j).ncols(), "dictionary {i}, J = {j:?}");
        }
    }
}

#[test]
fn h0_matches_dense_check() {
    let tv = DictionarySpec::finite_diff_1d(16).unwrap();
    let dtv = dense_dstar(&tv);
    for seed in 0..12 {
        let phi = LinearMap::partial_dct(8, 16, seed).unwrap();
        assert_eq!(check_h0(&phi, &tv).unwrap(), h0_dense(&dense(&phi), &dtv), "seed {seed}");
    }
    let sub = LinearMap::subsample(16, 2).unwrap();
    assert!(check_h0(&sub, &tv).unwrap());
    let diff = LinearMap::finite_diff_1d(16).unwrap();
    assert!(!check_h0(&diff, &tv).unwrap());
}

#[test]
fn enumeration_matches_brute_force() {
    for seed in 0..40 {
        let p = tiny_instance(seed);
        let (phi, dstar) = (dense(&p.phi), dense_dstar(&p.dict));
        if !h0_dense(&phi, &dstar) {
            assert!(enumerate_exact_solve(&p).is_err(), "seed {seed}");
            continue;
        }
        let (f, mu, _) = brute_force(&phi, &dstar, &p.y, p.lambda);
        let s = enumerate_exact_solve(&p).unwrap();
        assert!((s.objective - f).abs() <= 1e-10 * f.max(1.0), "seed {seed}");
        assert!(max_abs_diff(&s.mu, mu.as_slice()) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn jacobian_is_projector_product() {
    let phi = gaussian_matrix(&mut rng(31), 6, 9);
    let dict = DictionarySpec::finite_diff_1d(9).unwrap();
    let j = vec![0, 1, 4, 5, 6];
    let u = cospace(&dense_dstar(&dict), &j);
    let expect = &phi * a_j(&phi, &u).unwrap() * phi.transpose();
    let got = prediction_jacobian(&LinearMap::dense(phi), &dict, &j).unwrap();
    assert!((got.clone() - &expect).amax() < 1e-10);
    // ΦU has full column rank, so the Jacobian is the orthogonal projector on Im ΦU
    assert!((&got * &got - &got).amax() < 1e-10);
    assert!((got.trace() - u.ncols() as f64).abs() < 1e-10);
}

#[test]
fn tv_denoising_certificate_is_cumulative_residual() {
    // Φ = Id with forward differences: x − y + Du = 0 forces u_k = −Σ_{i ≤ k} (y_i − x_i)
    let y = vec![0.0, 0.1, 1.2, 1.0, 0.9, 0.2, 0.0];
    let lambda = 0.3;
    let dict = DictionarySpec::finite_diff_1d(y.len()).unwrap();
    let p = Problem::new(y.clone(), LinearMap::identity(y.len()), dict, lambda).unwrap();
    let sol = enumerate_exact_solve(&p).unwrap();
    let model: CosupportModel = detect_cosupport(&p.phi, &p.dict, &sol.x, 1e-8).unwrap();
    let cert = certificate(&p, &sol.x, &model, None).unwrap();
    let mut cum = 0.0;
    let mut expected = Vec::new();
    for i in 0..y.len() - 1 {
        cum += y[i] - sol.x[i];
        expected.push(-cum / lambda);
    }
    let on_j: Vec<f64> = model.cosupport.iter().map(|&j| expected[j]).collect();
    assert!(max_abs_diff(&cert.sigma, &on_j) < 1e-8);
    for (&i, &s) in model.support.iter().zip(&model.signs) {
        assert!((expected[i] - s).abs() < 1e-8);
    }
    assert!(cert.inf_norm <= 1.0 + 1e-9);
}
