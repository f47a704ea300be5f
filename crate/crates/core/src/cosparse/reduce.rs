use nalgebra::DMatrix;

use super::{CosupportModel, DenseCospace};
use crate::error::{check_len, Error, Result};
use crate::linops::LinearOperator;
use crate::prox::Problem;
use crate::vecops::{dist2, norm1, norm2};

/// Relative change of `‖D*x‖₁` tolerated over the whole reduction.
const L1_TOL: f64 = 1e-8;

/// Coefficients at or below this fraction of `‖D*x‖∞` after a step have vanished.
const VANISH_TOL: f64 = 1e-10;

/// Moves `x` along `Ker Φ ∩ G_J` until an atom of the support vanishes,
/// repeating until `(H_J)` holds. `Φx` and `‖D*x‖₁` are preserved, so a
/// minimizer stays a minimizer.
///
/// The kernel of `Φ` on the initial cospace is computed once; each step
/// then only restricts that basis by the atoms that vanished.
pub fn reduce_to_hj(problem: &Problem, x: &[f64], model: &CosupportModel) -> Result<(Vec<f64>, CosupportModel)> {
    reduce(problem, x, model, true)
}

/// As [`reduce_to_hj`] for approximate minimizers: each step goes the way
/// `‖D*x‖₁` does not increase, so `Φx` is preserved and the objective can
/// only drop. On a minimizer both variants take the same steps.
pub fn reduce_to_hj_descent(problem: &Problem, x: &[f64], model: &CosupportModel) -> Result<(Vec<f64>, CosupportModel)> {
    reduce(problem, x, model, false)
}

fn reduce(problem: &Problem, x: &[f64], model: &CosupportModel, strict: bool) -> Result<(Vec<f64>, CosupportModel)> {
    check_len("point", problem.n(), x.len())?;
    if model.hj_holds {
        return Ok((x.to_vec(), model.clone()));
    }
    let phi = &problem.phi;
    let dict = &problem.dict;
    let analysis = dict.analysis();
    let mu0 = phi.apply(x)?;
    let l1_0 = norm1(&analysis.apply(x)?);
    let mut v = x.to_vec();
    let mut support = model.support.clone();
    let mut signs = model.signs.clone();

    let cs = DenseCospace::new(phi, dict, &model.cosupport)?;
    let mut z_basis = cs.basis() * kernel_coordinates(cs.phi_basis())?;
    let mut steps = 0;
    while z_basis.ncols() > 0 {
        if steps > dict.p() {
            return Err(Error::Logic("cosupport reduction did not terminate".into()));
        }
        steps += 1;
        let z: Vec<f64> = z_basis.column(0).iter().copied().collect();
        let coeffs = analysis.apply(&v)?;
        let dz = analysis.apply(&z)?;
        let t_of = |sign: f64| {
            support
                .iter()
                .filter_map(|&i| {
                    let g = sign * dz[i];
                    let t = -coeffs[i] / g;
                    (g != 0.0 && t > 0.0).then_some(t)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let (tp, tm) = (t_of(1.0), t_of(-1.0));
        if !tp.is_finite() && !tm.is_finite() {
            return Err(Error::Precondition(
                "a direction in Ker Φ ∩ Ker D* exists; the kernel condition on (Φ, D) fails".into(),
            ));
        }
        let shorter = if tp <= tm { (1.0, tp) } else { (-1.0, tm) };
        // ‖D*x‖₁ is affine along the step; a nonzero slope means x is not a minimizer
        let slope: f64 = support.iter().zip(&signs).map(|(&i, s)| s * dz[i]).sum();
        let flat = shorter.1 * slope.abs() <= L1_TOL * l1_0.max(1.0);
        let (sign, t0) = if flat {
            shorter
        } else if strict {
            return Err(Error::Logic(format!(
                "cosupport reduction would change ‖D*x‖₁ by {:.3e}; the input is not a minimizer",
                shorter.1 * slope.abs()
            )));
        } else if slope > 0.0 {
            (-1.0, tm)
        } else {
            (1.0, tp)
        };
        if !t0.is_finite() {
            return Err(Error::Logic("descent direction never reaches a support boundary".into()));
        }
        for (vi, zi) in v.iter_mut().zip(&z) {
            *vi += sign * t0 * zi;
        }
        let new_coeffs = analysis.apply(&v)?;
        let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let mut kept = Vec::with_capacity(support.len());
        let mut kept_signs = Vec::with_capacity(support.len());
        let mut removed = Vec::new();
        for (&i, &s) in support.iter().zip(&signs) {
            let hit = {
                let g = sign * dz[i];
                g != 0.0 && (-coeffs[i] / g - t0).abs() <= 1e-12 * t0.max(1e-300)
            };
            // ties hit at t0 land at round-off level, possibly with flipped sign
            if !hit && new_coeffs[i] * s > VANISH_TOL * scale {
                kept.push(i);
                kept_signs.push(s);
            } else {
                removed.push(i);
            }
        }
        if removed.is_empty() {
            return Err(Error::Logic("cosupport reduction failed to shrink the support".into()));
        }
        support = kept;
        signs = kept_signs;
        // restrict the kernel basis to directions keeping the removed atoms at zero
        let k = z_basis.ncols();
        let mut constraints = DMatrix::zeros(removed.len(), k);
        for c in 0..k {
            let col: Vec<f64> = z_basis.column(c).iter().copied().collect();
            let dc = analysis.apply(&col)?;
            for (r, &i) in removed.iter().enumerate() {
                constraints[(r, c)] = dc[i];
            }
        }
        z_basis = &z_basis * null_space(&constraints, k)?;
    }
    let model = CosupportModel::from_support(phi, dict, support, signs)?;
    if !model.hj_holds {
        return Err(Error::Logic("cosupport reduction ended without (H_J); check Ker Φ ∩ Ker D* = {0}".into()));
    }
    let mu = phi.apply(&v)?;
    let l1 = norm1(&analysis.apply(&v)?);
    let mu_scale = norm2(&mu0).max(1.0);
    let l1_change = if strict { (l1 - l1_0).abs() } else { l1 - l1_0 };
    if dist2(&mu, &mu0) > 1e-8 * mu_scale || l1_change > L1_TOL * l1_0.max(1.0) {
        return Err(Error::Logic(format!(
            "cosupport reduction changed Φx by {:.3e} or ‖D*x‖₁ by {:.3e}; the input is not a minimizer",
            dist2(&mu, &mu0),
            l1_change
        )));
    }
    Ok((v, model))
}

/// Orthonormal basis (as columns) of the numerical kernel of `a`.
fn kernel_coordinates(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (q, d) = (a.nrows(), a.ncols());
    if d == 0 {
        return Err(Error::Logic("empty cospace cannot violate injectivity".into()));
    }
    let mut padded = DMatrix::zeros(q.max(d), d);
    padded.rows_mut(0, q).copy_from(a);
    let w = null_space(&padded, d)?;
    if w.ncols() == 0 {
        return Err(Error::Logic("no kernel direction: Φ is injective on the cospace".into()));
    }
    Ok(w)
}

/// Right singular vectors of `a` (`· × k`) for singular values below `RANK_TOL·σ_max`.
fn null_space(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if a.nrows() < k {
        let mut padded = DMatrix::zeros(k, k);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        return null_space(&padded, k);
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::NumericalFailure("SVD failed".into()))?;
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..k)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= super::RANK_TOL * smax)
        .collect();
    let mut out = DMatrix::zeros(k, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{DictionarySpec, LinearMap};

    #[test]
    fn single_row_example() {
        let phi = LinearMap::dense(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        let p = Problem::new(vec![3.0], phi.clone(), DictionarySpec::identity(2), 1.0).unwrap();
        let x = [1.0, 1.0];
        let m = super::super::detect_cosupport(&phi, &p.dict, &x, 1e-5).unwrap();
        assert!(!m.hj_holds);
        let (v, m2) = reduce_to_hj(&p, &x, &m).unwrap();
        assert!(m2.hj_holds);
        assert_eq!(m2.support.len(), 1);
        assert!((v[0] + v[1] - 2.0).abs() < 1e-12);
        assert!((v[0].abs() + v[1].abs() - 2.0).abs() < 1e-12);
        assert!(v[0].abs() < 1e-12 || v[1].abs() < 1e-12);
    }

    #[test]
    fn noop_when_hj_holds() {
        let p = Problem::new(vec![3.0, 0.5], LinearMap::identity(2), DictionarySpec::identity(2), 1.0).unwrap();
        let m = super::super::detect_cosupport(&p.phi, &p.dict, &[2.0, 0.0], 1e-5).unwrap();
        let (v, m2) = reduce_to_hj(&p, &[2.0, 0.0], &m).unwrap();
        assert_eq!(v, vec![2.0, 0.0]);
        assert_eq!(m2, m);
    }

    #[test]
    fn descent_accepts_non_minimizer() {
        let phi = LinearMap::dense(DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        let p = Problem::new(vec![3.0], phi, DictionarySpec::identity(2), 0.5).unwrap();
        let x = [1.0, 1.0];
        let m = super::super::detect_cosupport(&p.phi, &p.dict, &x, 1e-8).unwrap();
        assert!(matches!(reduce_to_hj(&p, &x, &m), Err(Error::Logic(_))));
        let (v, m2) = reduce_to_hj_descent(&p, &x, &m).unwrap();
        assert!(m2.hj_holds);
        assert_eq!(m2.support, vec![1]);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.5).abs() < 1e-12);
        assert!(p.objective(&v).unwrap() < p.objective(&x).unwrap());
    }
}
