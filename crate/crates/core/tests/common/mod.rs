#![allow(dead_code)]

use l1analysis::{DictionarySpec, LinearMap, Problem};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random dense instance with `N ≤ 6`, `P ≤ 8`, `Q ≤ 6`.
pub fn tiny_instance(seed: u64) -> Problem {
    use rand::RngExt;
    let mut r = rng(seed);
    let n = r.random_range(2..=6usize);
    let p = r.random_range(1..=8usize);
    let q = r.random_range(1..=6usize);
    let phi = gaussian_matrix(&mut r, q, n);
    let dstar = gaussian_matrix(&mut r, p, n);
    let y = gaussian_vec(&mut r, q);
    let phit_y = &phi.transpose() * DVector::from_vec(y.clone());
    let scale = phit_y.amax().max(1e-3);
    let lambda = scale * r.random_range(0.05..0.8);
    Problem::new(y, LinearMap::dense(phi), DictionarySpec::dense_analysis(dstar), lambda).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    max_abs_diff(a, b) / scale
}

/// Dense matrix of an operator, column by column from its action on unit vectors.
pub fn dense<O: l1analysis::LinearOperator + ?Sized>(op: &O) -> DMatrix<f64> {
    let (m, n) = (op.rows(), op.cols());
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e).unwrap();
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

/// `D*` as a dense `P × N` matrix.
pub fn dense_dstar(dict: &DictionarySpec) -> DMatrix<f64> {
    dense(dict.analysis())
}

/// Orthonormal basis of `{x : a x = 0}` from a full SVD.
pub fn null_space(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let mut padded = DMatrix::zeros(a.nrows().max(n), n);
    padded.rows_mut(0, a.nrows()).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let cols: Vec<_> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= 1e-10 * smax)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Rows of `m` indexed by `idx`.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

/// `U_J` with `Ker D_J* = span U_J`.
pub fn cospace(dstar: &DMatrix<f64>, cosupport: &[usize]) -> DMatrix<f64> {
    null_space(&select_rows(dstar, cosupport), dstar.ncols())
}

/// `A^[J] = U (U*Φ*ΦU)^{-1} U*`, or `None` when `ΦU` is rank deficient.
pub fn a_j(phi: &DMatrix<f64>, u: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if u.ncols() == 0 {
        return Some(DMatrix::zeros(phi.ncols(), phi.ncols()));
    }
    let pu = phi * u;
    let sv = pu.singular_values();
    if sv.min() <= 1e-10 * sv.max() {
        return None;
    }
    let g = (pu.transpose() * &pu).try_inverse()?;
    Some(u * g * u.transpose())
}

pub fn objective(phi: &DMatrix<f64>, dstar: &DMatrix<f64>, y: &[f64], lambda: f64, x: &DVector<f64>) -> f64 {
    let r = phi * x - DVector::from_column_slice(y);
    0.5 * r.norm_squared() + lambda * (dstar * x).abs().sum()
}

/// Global minimum `(f, Φx, x)` by enumerating every `(I, s_I)`: on each pattern the
/// minimizer of the smooth surrogate over `Ker D_J*` is formed in closed
/// form and scored with the true objective. The best score is the minimum
/// because some minimizer has a cosupport on which `Φ` is injective.
pub fn brute_force(phi: &DMatrix<f64>, dstar: &DMatrix<f64>, y: &[f64], lambda: f64) -> (f64, DVector<f64>, DVector<f64>) {
    let p = dstar.nrows();
    let yv = DVector::from_column_slice(y);
    let phit_y = phi.transpose() * &yv;
    let mut best = (f64::INFINITY, DVector::zeros(phi.nrows()), DVector::zeros(phi.ncols()));
    let mut pattern = vec![0i8; p];
    loop {
        let support: Vec<usize> = (0..p).filter(|&i| pattern[i] != 0).collect();
        let cosupport: Vec<usize> = (0..p).filter(|&i| pattern[i] == 0).collect();
        let u = cospace(dstar, &cosupport);
        if let Some(a) = a_j(phi, &u) {
            let mut ds = DVector::zeros(phi.ncols());
            for &i in &support {
                ds += dstar.row(i).transpose() * f64::from(pattern[i]);
            }
            let x = &a * (&phit_y - ds * lambda);
            let f = objective(phi, dstar, y, lambda, &x);
            if f < best.0 {
                best = (f, phi * &x, x);
            }
        }
        // next pattern in {-1, 0, 1}^P
        let mut k = 0;
        while k < p {
            pattern[k] = match pattern[k] {
                0 => 1,
                1 => -1,
                _ => 0,
            };
            if pattern[k] != 0 {
                break;
            }
            k += 1;
        }
        if k == p {
            return best;
        }
    }
}

/// `Ker Φ ∩ Ker D* = {0}` from the stacked singular values.
pub fn h0_dense(phi: &DMatrix<f64>, dstar: &DMatrix<f64>) -> bool {
    let n = phi.ncols();
    if phi.nrows() + dstar.nrows() < n {
        return false;
    }
    let mut s = DMatrix::zeros(phi.nrows() + dstar.nrows(), n);
    s.rows_mut(0, phi.nrows()).copy_from(phi);
    s.rows_mut(phi.nrows(), dstar.nrows()).copy_from(dstar);
    let sv = s.singular_values();
    sv.min() > 1e-10 * sv.max()
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}
