mod common;

use common::*;
use l1analysis::cosparse::{certificate, check_h0, detect_cosupport, enumerate_exact_solve};
use l1analysis::prox::{solve_denoising_dual, solve_primal_dual};
use l1analysis::{DictionarySpec, LinearMap, Problem, SolverParams};

#[test]
fn primal_dual_matches_enumeration_on_tiny_instances() {
    let params = SolverParams::default();
    let mut checked = 0;
    for seed in 0..60 {
        let p = tiny_instance(seed);
        if !check_h0(&p.phi, &p.dict).unwrap() {
            continue;
        }
        let exact = enumerate_exact_solve(&p).unwrap();
        let s = solve_primal_dual(&p, &params).unwrap();
        let dmu = max_abs_diff(&s.mu, &exact.mu);
        let dobj = (s.objective - exact.objective).abs() / exact.objective.abs().max(1.0);
        assert!(dmu <= 1e-6 && dobj <= 1e-8, "seed {seed}: Δμ={dmu:e} Δobj={dobj:e} iters={} polished={}", s.iterations, s.polished);
        checked += 1;
    }
    assert!(checked >= 40);
}
