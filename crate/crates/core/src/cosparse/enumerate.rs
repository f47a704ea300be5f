use super::{certificate, CosupportModel, DenseCospace};
use crate::error::{Error, Result};
use crate::linops::{dense_mul, LinearOperator};
use crate::prox::{Problem, Solution};

/// Largest number of atoms accepted by [`enumerate_exact_solve`].
pub const MAX_ENUMERATION_P: usize = 12;

const SIGN_TOL: f64 = 1e-10;
const RES_TOL: f64 = 1e-9;
const CERT_TOL: f64 = 1e-9;

/// Exhaustive search over cosupports and sign patterns.
///
/// Every `(J, s_I)` with injective `Φ` on `G_J` yields one candidate
/// `A^[J](Φ*y − λD_I s_I)`; it is kept when its analysis coefficients carry
/// exactly the signs `s_I` and a certificate proves optimality. The kept
/// candidate of lowest objective is returned, ties going to the
/// lexicographically smallest `J`.
pub fn enumerate_exact_solve(problem: &Problem) -> Result<Solution> {
    let p = problem.p();
    if p > MAX_ENUMERATION_P {
        return Err(Error::EnumerationBound { p, max: MAX_ENUMERATION_P });
    }
    if !(problem.lambda > 0.0) {
        return Err(Error::InvalidArgument("enumeration needs lambda > 0".into()));
    }
    let lambda = problem.lambda;
    let dstar = problem.dict.dense_analysis_matrix()?;
    let phit_y = problem.phi.adjoint(&problem.y)?;
    let res_tol = RES_TOL * (lambda * problem.dict.norm()).max(crate::vecops::norm2(&phit_y));

    let mut best: Option<(f64, Vec<usize>, Vec<f64>, Vec<f64>)> = None;
    let mut examined = 0usize;
    let mut cosupports: Vec<Vec<usize>> = (0u32..(1u32 << p))
        .map(|mask| (0..p).filter(|&j| mask & (1 << j) != 0).collect())
        .collect();
    cosupports.sort();

    for cosupport in cosupports {
        let cs = DenseCospace::new(&problem.phi, &problem.dict, &cosupport)?;
        if !cs.hj_holds() {
            continue;
        }
        let support: Vec<usize> = (0..p).filter(|j| !cosupport.contains(j)).collect();
        let base = cs.apply(&phit_y)?;
        let base_c = dense_mul(&dstar, &base);
        let mut drifts = Vec::with_capacity(support.len());
        let mut drifts_c = Vec::with_capacity(support.len());
        for &i in &support {
            let atom: Vec<f64> = dstar.row(i).iter().copied().collect();
            let b = cs.apply(&atom)?;
            drifts_c.push(dense_mul(&dstar, &b));
            drifts.push(b);
        }
        let k = support.len();
        for pattern in 0u32..(1u32 << k) {
            examined += 1;
            let signs: Vec<f64> = (0..k).map(|t| if pattern & (1 << t) != 0 { -1.0 } else { 1.0 }).collect();
            let mut c = base_c.clone();
            for (t, dc) in drifts_c.iter().enumerate() {
                for (ci, di) in c.iter_mut().zip(dc) {
                    *ci -= lambda * signs[t] * di;
                }
            }
            let scale = c.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            if !support.iter().zip(&signs).all(|(&i, &s)| c[i] * s > SIGN_TOL * scale) {
                continue;
            }
            let mut x = base.clone();
            for (t, b) in drifts.iter().enumerate() {
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= lambda * signs[t] * bi;
                }
            }
            let model = CosupportModel {
                support: support.clone(),
                cosupport: cosupport.clone(),
                signs: signs.clone(),
                dim: cs.dim(),
                hj_holds: true,
                hj_conditioning: cs.conditioning(),
                eps_used: 0.0,
                ambiguous: Vec::new(),
            };
            let cert = certificate(problem, &x, &model, None)?;
            if !cert.is_valid_with(res_tol, CERT_TOL) {
                continue;
            }
            let obj = problem.objective(&x)?;
            let better = match &best {
                None => true,
                Some((b, ..)) => obj < *b - 1e-12 * b.abs().max(1.0),
            };
            if better {
                let mut u = vec![0.0; p];
                for (&i, &s) in support.iter().zip(&signs) {
                    u[i] = lambda * s;
                }
                for (&j, &s) in cosupport.iter().zip(&cert.sigma) {
                    u[j] = lambda * s;
                }
                best = Some((obj, cosupport.clone(), x, u));
            }
        }
    }
    let (_, _, x, u) = best.ok_or(Error::NoCertifiedCandidate { candidates: examined })?;
    let mut sol = Solution::from_point(problem, x, u)?;
    sol.iterations = examined;
    sol.polished = true;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{DictionarySpec, LinearMap};

    #[test]
    fn soft_threshold() {
        let p = Problem::new(vec![3.0, 0.5, -2.0], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).unwrap();
        let s = enumerate_exact_solve(&p).unwrap();
        for (a, b) in s.x.iter().zip(&[2.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_lambda_tv_is_mean() {
        let y = vec![0.3, -1.0, 2.0, 0.7, 1.1];
        let dict = DictionarySpec::finite_diff_1d(5).unwrap();
        let p = Problem::new(y.clone(), LinearMap::identity(5), dict, 100.0).unwrap();
        let s = enumerate_exact_solve(&p).unwrap();
        let mean = y.iter().sum::<f64>() / 5.0;
        assert!(s.x.iter().all(|v| (v - mean).abs() < 1e-10));
    }

    #[test]
    fn bound_enforced() {
        let p = Problem::new(vec![0.0; 13], LinearMap::identity(13), DictionarySpec::identity(13), 1.0).unwrap();
        assert!(matches!(enumerate_exact_solve(&p), Err(Error::EnumerationBound { .. })));
    }
}
