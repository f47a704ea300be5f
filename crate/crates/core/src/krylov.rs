//! Krylov solvers for the symmetric systems behind `A^[J]` and the
//! Monte Carlo divergence estimator.

use crate::error::{check_len, Error, Result};
use crate::linops::{Gram, LinearMap, LinearOperator};
use crate::vecops::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovParams {
    /// Relative residual target `‖Ax - b‖ <= tol ‖b‖`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 10_000 }
    }
}

impl KrylovParams {
    pub fn new(tol: f64, max_iters: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("Krylov tol must be > 0, got {tol}")));
        }
        Ok(Self { tol, max_iters })
    }
}

#[derive(Debug, Clone)]
pub struct KrylovSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `‖Ax - b‖ / ‖b‖` at exit.
    pub residual: f64,
}

fn true_residual<O: LinearOperator + ?Sized>(op: &O, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; b.len()];
    op.apply_into(x, &mut ax);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

fn check_square<O: LinearOperator + ?Sized>(op: &O, b: &[f64]) -> Result<()> {
    check_len("symmetric operator", op.rows(), op.cols())?;
    check_len("right-hand side", op.rows(), b.len())
}

/// Conjugate gradients for symmetric positive (semi-)definite systems.
pub fn cg<O: LinearOperator + ?Sized>(op: &O, b: &[f64], params: &KrylovParams) -> Result<KrylovSolution> {
    check_square(op, b)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovSolution { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    // a few restarts from the true residual guard against recurrence drift
    for _restart in 0..4 {
        while iterations < params.max_iters && rr.sqrt() > params.tol * bnorm {
            op.apply_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !pap.is_finite() {
                return Err(Error::NumericalFailure("non-finite value in CG".into()));
            }
            if pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            iterations += 1;
        }
        r = true_residual(op, &x, b);
        rr = dot(&r, &r);
        if rr.sqrt() <= params.tol * bnorm || iterations >= params.max_iters {
            break;
        }
        p.copy_from_slice(&r);
    }
    let residual = rr.sqrt() / bnorm;
    if !residual.is_finite() {
        return Err(Error::NumericalFailure("non-finite residual in CG".into()));
    }
    if residual > params.tol {
        return Err(Error::NonConvergence { iterations, residual });
    }
    Ok(KrylovSolution { x, iterations, residual })
}

/// MINRES (Paige–Saunders) for symmetric, possibly indefinite or singular
/// but consistent, systems.
pub fn minres<O: LinearOperator + ?Sized>(op: &O, b: &[f64], params: &KrylovParams) -> Result<KrylovSolution> {
    check_square(op, b)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovSolution { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = 1.0;
    for _restart in 0..4 {
        let r0 = true_residual(op, &x, b);
        residual = norm2(&r0) / bnorm;
        if residual <= params.tol || iterations >= params.max_iters {
            break;
        }
        let (dx, used) = minres_pass(op, &r0, params.tol * bnorm, params.max_iters - iterations)?;
        iterations += used;
        axpy(1.0, &dx, &mut x);
        if used == 0 {
            break;
        }
    }
    if !residual.is_finite() || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite value in MINRES".into()));
    }
    residual = norm2(&true_residual(op, &x, b)) / bnorm;
    if residual > params.tol {
        return Err(Error::NonConvergence { iterations, residual });
    }
    Ok(KrylovSolution { x, iterations, residual })
}

/// One MINRES pass from a zero initial guess; returns the iterate and the
/// number of iterations.
fn minres_pass<O: LinearOperator + ?Sized>(
    op: &O,
    b: &[f64],
    abs_tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm2(b);
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut w = vec![0.0; n];
    let mut w1;
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln) = (0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut itn = 0;
    while itn < max_iters {
        itn += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        op.apply_into(&v, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm2(&y);
        if !beta.is_finite() || !alfa.is_finite() {
            return Err(Error::NumericalFailure("non-finite Lanczos coefficient in MINRES".into()));
        }
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        w1 = std::mem::take(&mut w2);
        w2 = std::mem::take(&mut w);
        w = v
            .iter()
            .zip(w1.iter().zip(&w2))
            .map(|(vi, (a, b))| (vi - oldeps * a - delta * b) / gamma)
            .collect();
        axpy(phi, &w, &mut x);
        if phibar <= abs_tol || beta <= f64::EPSILON * beta1 {
            break;
        }
    }
    Ok((x, itn))
}

/// CGLS: minimum-norm least-squares solution of `min ‖Ax - b‖` starting
/// from zero. `tol` applies to the normal-equation residual `‖A*(b - Ax)‖`
/// relative to `‖A*b‖`.
pub fn cgls<O: LinearOperator + ?Sized>(op: &O, b: &[f64], params: &KrylovParams) -> Result<KrylovSolution> {
    let sol = cgls_best_effort(op, b, params)?;
    if sol.residual > params.tol {
        return Err(Error::NonConvergence { iterations: sol.iterations, residual: sol.residual });
    }
    Ok(sol)
}

/// As [`cgls`], but returns the last iterate instead of failing when the
/// tolerance is not met.
pub(crate) fn cgls_best_effort<O: LinearOperator + ?Sized>(
    op: &O,
    b: &[f64],
    params: &KrylovParams,
) -> Result<KrylovSolution> {
    check_len("least-squares rhs", op.rows(), b.len())?;
    let n = op.cols();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = vec![0.0; n];
    op.adjoint_into(&r, &mut s);
    let s0 = norm2(&s);
    if s0 == 0.0 {
        return Ok(KrylovSolution { x, iterations: 0, residual: 0.0 });
    }
    let mut p = s.clone();
    let mut q = vec![0.0; op.rows()];
    let mut gamma = dot(&s, &s);
    let mut iterations = 0;
    while iterations < params.max_iters && gamma.sqrt() > params.tol * s0 {
        op.apply_into(&p, &mut q);
        let qq = dot(&q, &q);
        if !qq.is_finite() {
            return Err(Error::NumericalFailure("non-finite value in CGLS".into()));
        }
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        op.adjoint_into(&r, &mut s);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        iterations += 1;
    }
    Ok(KrylovSolution { x, iterations, residual: gamma.sqrt() / s0 })
}

/// The saddle-point operator `[[Φ*Φ, D_J], [D_J*, 0]]`.
pub struct KktOperator<'a> {
    phi: &'a LinearMap,
    atoms: &'a LinearMap,
}

impl<'a> KktOperator<'a> {
    /// `atoms` is `D_J` (`N × |J|`).
    pub fn new(phi: &'a LinearMap, atoms: &'a LinearMap) -> Result<Self> {
        check_len("KKT block rows", phi.cols(), atoms.rows())?;
        Ok(Self { phi, atoms })
    }

    fn n(&self) -> usize {
        self.phi.cols()
    }
}

impl LinearOperator for KktOperator<'_> {
    fn rows(&self) -> usize {
        self.n() + self.atoms.cols()
    }
    fn cols(&self) -> usize {
        self.rows()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        let (nu, mult) = x.split_at(n);
        let (top, bottom) = out.split_at_mut(n);
        let mut tmp = vec![0.0; self.phi.rows()];
        self.phi.apply_into(nu, &mut tmp);
        self.phi.adjoint_into(&tmp, top);
        let mut dj = vec![0.0; n];
        self.atoms.apply_into(mult, &mut dj);
        axpy(1.0, &dj, top);
        self.atoms.adjoint_into(nu, bottom);
    }
    fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        self.apply_into(u, out)
    }
}

#[derive(Debug, Clone)]
pub struct KktSolution {
    pub nu: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// `‖Φ*Φν + D_J ν̃ - rhs‖ / ‖rhs‖`
    pub top_residual: f64,
    /// `‖D_J* ν‖ / ‖rhs‖`
    pub feasibility: f64,
}

/// Solves `Φ*Φν + D_J ν̃ = rhs`, `D_J* ν = 0`; under `(H_J)`, `ν = A^[J] rhs`.
pub fn kkt_solve(phi: &LinearMap, atoms: &LinearMap, rhs_top: &[f64], params: &KrylovParams) -> Result<KktSolution> {
    check_len("KKT rhs", phi.cols(), rhs_top.len())?;
    let n = phi.cols();
    let rn = norm2(rhs_top);
    if rn == 0.0 {
        return Ok(KktSolution {
            nu: vec![0.0; n],
            multipliers: vec![0.0; atoms.cols()],
            iterations: 0,
            top_residual: 0.0,
            feasibility: 0.0,
        });
    }
    if atoms.cols() == 0 {
        let sol = cg(&Gram::new(phi), rhs_top, params).map_err(stagnation)?;
        return Ok(KktSolution {
            nu: sol.x,
            multipliers: Vec::new(),
            iterations: sol.iterations,
            top_residual: sol.residual,
            feasibility: 0.0,
        });
    }
    let kkt = KktOperator::new(phi, atoms)?;
    let mut rhs = rhs_top.to_vec();
    rhs.resize(kkt.rows(), 0.0);
    let sol = minres(&kkt, &rhs, params).map_err(stagnation)?;
    let mut full = vec![0.0; kkt.rows()];
    kkt.apply_into(&sol.x, &mut full);
    let top_residual = norm2(&full[..n].iter().zip(rhs_top).map(|(a, b)| a - b).collect::<Vec<_>>()) / rn;
    let feasibility = norm2(&full[n..]) / rn;
    let mut nu = sol.x;
    let multipliers = nu.split_off(n);
    Ok(KktSolution { nu, multipliers, iterations: sol.iterations, top_residual, feasibility })
}

fn stagnation(e: Error) -> Error {
    match e {
        Error::NonConvergence { iterations, residual } => Error::RankDeficient(format!(
            "KKT solve stagnated at relative residual {residual:.3e} after {iterations} iterations; (H_J) may be violated"
        )),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn cg_identity_one_iteration() {
        let id = LinearMap::identity(4);
        let b = [1.0, -2.0, 3.0, 0.5];
        let sol = cg(&id, &b, &KrylovParams::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.x, b.to_vec());
    }

    #[test]
    fn cg_diagonal() {
        let d = LinearMap::dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 4.0])));
        let sol = cg(&d, &[1.0, 2.0, 4.0], &KrylovParams::default()).unwrap();
        for v in sol.x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let d = LinearMap::identity(3);
        assert_eq!(minres(&d, &[0.0; 3], &KrylovParams::default()).unwrap().x, vec![0.0; 3]);
        assert_eq!(cg(&d, &[0.0; 3], &KrylovParams::default()).unwrap().iterations, 0);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let m = DMatrix::from_fn(30, 30, |i, j| if i == j { (i + 1) as f64 * 100.0 } else { 0.0 });
        let op = LinearMap::dense(m);
        let err = cg(&op, &[1.0; 30], &KrylovParams { tol: 1e-14, max_iters: 2 }).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn kkt_empty_cosupport_orthonormal_phi() {
        let phi = LinearMap::identity(3);
        let atoms = LinearMap::mask(3, vec![]).unwrap().adjoint_map();
        let rhs = [1.0, 2.0, 3.0];
        let s = kkt_solve(&phi, &atoms, &rhs, &KrylovParams::default()).unwrap();
        for (a, b) in s.nu.iter().zip(rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kkt_single_constraint_zeroes_coordinate() {
        let phi = LinearMap::identity(3);
        // D_J = e_1 as a single atom
        let atoms = LinearMap::mask(3, vec![0]).unwrap().adjoint_map();
        let rhs = [1.0, 2.0, 3.0];
        let s = kkt_solve(&phi, &atoms, &rhs, &KrylovParams::default()).unwrap();
        let expected = [0.0, 2.0, 3.0];
        for (a, b) in s.nu.iter().zip(expected) {
            assert!((a - b).abs() < 1e-10, "{:?}", s.nu);
        }
        assert!(s.feasibility < 1e-10);
    }
}
