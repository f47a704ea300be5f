//! Cosupport machinery for analysis-sparse solutions.
//!
//! For a point `x`, the D-support `I` collects the atoms with
//! `(D*x)_i ≠ 0` and the cosupport `J` its complement. Solutions live on the
//! cospace `G_J = Ker D_J*`, and whenever `Φ` is injective there (`H_J`)
//! the solution is the affine function of `(y, λ)`
//!
//! ```text
//! x(ȳ, λ̄) = A^[J] Φ*ȳ − λ̄ A^[J] D_I s_I,    A^[J] = U_J (U_J*Φ*ΦU_J)^{-1} U_J*.
//! ```
//!
//! Optimality of a candidate is decided by a dual certificate `σ` on `J`
//! solving `Φ*(Φx − y) + λ D_I s_I + λ D_J σ = 0` with `‖σ‖∞ ≤ 1`.

pub mod cospace;
mod enumerate;
mod reduce;

pub use cospace::{
    apply_aj, cospace_basis, cospace_dim, prediction_jacobian, CospaceSolver, DenseCospace, RANK_TOL,
    SVD_COSPACE_LIMIT,
};
pub use enumerate::{enumerate_exact_solve, MAX_ENUMERATION_P};
pub use reduce::{reduce_to_hj, reduce_to_hj_descent};

use minilp::{ComparisonOp, OptimizationDirection};

use crate::error::{check_len, Error, Result};
use crate::krylov::{cgls_best_effort, KrylovParams};
use crate::linops::{to_dense, DictionarySpec, LinearMap, LinearOperator, DEFAULT_DENSE_LIMIT};
use crate::prox::Problem;
use crate::vecops::{norm2, norm_inf};

/// Default support threshold relative to `‖D*x‖∞`.
pub const DEFAULT_EPS_REL: f64 = 1e-5;
/// Slack on `‖σ‖∞ ≤ 1`.
pub const CERT_TOL: f64 = 1e-3;
/// First-order residual bound, relative to `λ‖D‖`.
pub const CERT_RES_TOL: f64 = 1e-6;
/// Below this certificate margin local-map guarantees are withheld.
pub const MARGIN_FLOOR: f64 = 1e-3;
/// Largest cosupport for which the ℓ∞-minimal certificate LP is attempted.
pub const LP_MAX_COSUPPORT: usize = 4000;

/// Support/cosupport split of `D*x` and the cospace it defines.
#[derive(Debug, Clone, PartialEq)]
pub struct CosupportModel {
    /// `I`, sorted.
    pub support: Vec<usize>,
    /// `J = I^c`, sorted.
    pub cosupport: Vec<usize>,
    /// `s_I ∈ {−1, +1}^|I|`, aligned with `support`.
    pub signs: Vec<f64>,
    /// `d = dim G_J`.
    pub dim: usize,
    pub hj_holds: bool,
    /// `σ_min(ΦU_J)/σ_max(ΦU_J)`, 0 when `Φ` cannot be injective on `G_J`.
    pub hj_conditioning: f64,
    pub eps_used: f64,
    /// Atoms with `eps < |(D*x)_i| ≤ 10·eps`.
    pub ambiguous: Vec<usize>,
}

impl CosupportModel {
    /// Model for a prescribed support and sign pattern.
    pub fn from_support(phi: &LinearMap, dict: &DictionarySpec, support: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        check_len("sign vector", support.len(), signs.len())?;
        let p = dict.p();
        let mut in_support = vec![false; p];
        for &i in &support {
            if i >= p {
                return Err(Error::InvalidArgument(format!("atom index {i} out of range")));
            }
            in_support[i] = true;
        }
        let cosupport: Vec<usize> = (0..p).filter(|&j| !in_support[j]).collect();
        let cs = DenseCospace::new(phi, dict, &cosupport)?;
        Ok(Self {
            support,
            cosupport,
            signs,
            dim: cs.dim(),
            hj_holds: cs.hj_holds(),
            hj_conditioning: cs.conditioning(),
            eps_used: 0.0,
            ambiguous: Vec::new(),
        })
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

/// Decides `Ker Φ ∩ Ker D* = {0}` from the singular values of the stacked `(Φ; D*)`.
pub fn check_h0(phi: &LinearMap, dict: &DictionarySpec) -> Result<bool> {
    check_len("Φ columns vs dictionary", dict.n(), phi.cols())?;
    let (q, p, n) = (phi.rows(), dict.p(), dict.n());
    if q + p < n {
        return Ok(false);
    }
    if (q + p).saturating_mul(n) > DEFAULT_DENSE_LIMIT {
        return Err(Error::Capacity { entries: (q + p) * n, limit: DEFAULT_DENSE_LIMIT });
    }
    let a = to_dense(phi, DEFAULT_DENSE_LIMIT)?;
    let b = dict.dense_analysis_matrix()?;
    let mut stacked = nalgebra::DMatrix::zeros(q + p, n);
    stacked.rows_mut(0, q).copy_from(&a);
    stacked.rows_mut(q, p).copy_from(&*b);
    let sv = stacked.singular_values();
    let smax = sv.max();
    Ok(smax > 0.0 && sv.min() > RANK_TOL * smax)
}

/// Coefficients below `NULL_FLOOR·‖D‖·‖x‖` count as zero whatever `eps_rel` is.
pub const NULL_FLOOR: f64 = 1e-10;

/// Thresholds `D*x` at `max(eps_rel·‖D*x‖∞, NULL_FLOOR·‖D‖·‖x‖)` and
/// evaluates the resulting cospace.
pub fn detect_cosupport(phi: &LinearMap, dict: &DictionarySpec, x: &[f64], eps_rel: f64) -> Result<CosupportModel> {
    detect_cosupport_scaled(phi, dict, x, eps_rel, 0.0)
}

/// As [`detect_cosupport`] with the floor taken relative to
/// `max(‖x‖, ‖y‖²/‖Φ*y‖)`, so that a round-off solution near `x = 0` is
/// recognised as zero.
pub fn detect_cosupport_in(problem: &Problem, x: &[f64], eps_rel: f64) -> Result<CosupportModel> {
    detect_cosupport_scaled(&problem.phi, &problem.dict, x, eps_rel, signal_scale(problem)?)
}

/// `‖y‖²/‖Φ*y‖`, the size of `x` that `y` suggests (`‖y‖/c` for `Φ = c·Id`).
fn signal_scale(problem: &Problem) -> Result<f64> {
    let adj = norm2(&problem.phi.adjoint(&problem.y)?);
    let yy = norm2(&problem.y);
    Ok(if adj > 0.0 { yy * yy / adj } else { 0.0 })
}

fn detect_cosupport_scaled(
    phi: &LinearMap,
    dict: &DictionarySpec,
    x: &[f64],
    eps_rel: f64,
    x_scale: f64,
) -> Result<CosupportModel> {
    if !(eps_rel >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps_rel must be >= 0, got {eps_rel}")));
    }
    let coeffs = dict.analysis().apply(x)?;
    let eps = (eps_rel * norm_inf(&coeffs)).max(NULL_FLOOR * dict.norm() * norm2(x).max(x_scale));
    let mut support = Vec::new();
    let mut signs = Vec::new();
    let mut ambiguous = Vec::new();
    for (i, &c) in coeffs.iter().enumerate() {
        if c.abs() > eps && c != 0.0 {
            support.push(i);
            signs.push(c.signum());
            if c.abs() <= 10.0 * eps {
                ambiguous.push(i);
            }
        }
    }
    let mut model = CosupportModel::from_support(phi, dict, support, signs)?;
    model.eps_used = eps;
    model.ambiguous = ambiguous;
    Ok(model)
}

/// Dual certificate on the cosupport.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// `σ`, aligned with the model's cosupport.
    pub sigma: Vec<f64>,
    /// `‖Φ*(Φx − y) + λD_I s_I + λD_J σ‖`.
    pub residual: f64,
    pub inf_norm: f64,
    /// `1 − ‖σ‖∞`; 1 when the cosupport is empty.
    pub margin: f64,
}

impl Certificate {
    /// Valid under the default tolerances (`CERT_TOL`, `CERT_RES_TOL·λ‖D‖`).
    pub fn is_valid(&self, problem: &Problem) -> bool {
        self.is_valid_with(CERT_RES_TOL * problem.lambda * problem.dict.norm(), CERT_TOL)
    }

    pub fn is_valid_with(&self, residual_tol: f64, cert_tol: f64) -> bool {
        self.residual <= residual_tol && self.inf_norm <= 1.0 + cert_tol
    }
}

/// `Φ*(Φx − y) + λ D_I s_I`.
fn first_order_offset(problem: &Problem, x: &[f64], model: &CosupportModel) -> Result<Vec<f64>> {
    let mu = problem.phi.apply(x)?;
    let r: Vec<f64> = mu.iter().zip(&problem.y).map(|(m, y)| m - y).collect();
    let mut g = problem.phi.adjoint(&r)?;
    let ds = problem.dict.synthesize_signs(&model.support, &model.signs)?;
    for (gi, di) in g.iter_mut().zip(&ds) {
        *gi += problem.lambda * di;
    }
    Ok(g)
}

fn certificate_residual(offset: &[f64], atoms: &LinearMap, lambda: f64, sigma: &[f64]) -> Result<f64> {
    let dj = atoms.apply(sigma)?;
    Ok(norm2(&offset.iter().zip(&dj).map(|(o, d)| o + lambda * d).collect::<Vec<_>>()))
}

/// Fits `σ` in `min ‖Φ*(Φx − y) + λD_I s_I + λD_J σ‖`.
///
/// Among the minimizers the one closest to `hint` (a guess for `σ`, e.g.
/// `u_J/λ` from a primal-dual solver) is taken; when `D_J` has a kernel
/// and that point is not comfortably inside the unit ball, an LP picks the
/// minimizer of smallest `‖σ‖∞`.
pub fn certificate(problem: &Problem, x: &[f64], model: &CosupportModel, hint: Option<&[f64]>) -> Result<Certificate> {
    certificate_lp_above(problem, x, model, hint, 1.0 - MARGIN_FLOOR)
}

/// As [`certificate`], running the LP only when `‖σ‖∞` exceeds `lp_above`.
fn certificate_lp_above(
    problem: &Problem,
    x: &[f64],
    model: &CosupportModel,
    hint: Option<&[f64]>,
    lp_above: f64,
) -> Result<Certificate> {
    check_len("point", problem.n(), x.len())?;
    let offset = first_order_offset(problem, x, model)?;
    let m = model.cosupport.len();
    if m == 0 {
        return Ok(Certificate { sigma: Vec::new(), residual: norm2(&offset), inf_norm: 0.0, margin: 1.0 });
    }
    let lambda = problem.lambda;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("certificates need lambda > 0".into()));
    }
    let atoms = problem.dict.atoms(&model.cosupport)?;
    let res_tol = CERT_RES_TOL * lambda * problem.dict.norm();
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::with_capacity(3);
    let sigma0 = match hint {
        Some(h) => {
            check_len("certificate hint", m, h.len())?;
            let r = certificate_residual(&offset, &atoms, lambda, h)?;
            candidates.push((h.to_vec(), r));
            h.to_vec()
        }
        None => vec![0.0; m],
    };
    // correction δ minimizing ‖(offset + λD_Jσ₀) + λD_J δ‖ with minimal norm,
    // skipped when σ₀ already fits far below tolerance (CGLS would chase round-off)
    let hint_fits = candidates.first().is_some_and(|c| c.1 <= 1e-3 * res_tol);
    if !hint_fits {
        let dj0 = atoms.apply(&sigma0)?;
        let b: Vec<f64> = offset.iter().zip(&dj0).map(|(o, d)| -(o + lambda * d) / lambda).collect();
        let n = problem.n();
        let params = KrylovParams { tol: 1e-14, max_iters: 20 * (n + m) + 200 };
        let delta = cgls_best_effort(&atoms, &b, &params)?;
        let corrected: Vec<f64> = sigma0.iter().zip(&delta.x).map(|(s, d)| s + d).collect();
        let r = certificate_residual(&offset, &atoms, lambda, &corrected)?;
        candidates.push((corrected, r));
    }
    let (mut sigma, mut residual) = pick_certificate(&candidates, res_tol);
    let mut inf_norm = norm_inf(&sigma);

    let kernel_nontrivial = m + model.dim > problem.n();
    if kernel_nontrivial && inf_norm > lp_above && m <= LP_MAX_COSUPPORT {
        if let Some(lp_sigma) = min_inf_norm_in_fiber(problem.dict.dense_analysis_matrix()?.as_ref(), &model.cosupport, &sigma) {
            let lp_res = certificate_residual(&offset, &atoms, lambda, &lp_sigma)?;
            let lp_inf = norm_inf(&lp_sigma);
            let res_floor = 1e-12 * (lambda * problem.dict.norm()).max(norm2(&offset));
            if lp_inf < inf_norm && lp_res <= residual.max(res_floor) * 10.0 {
                sigma = lp_sigma;
                residual = lp_res;
                inf_norm = lp_inf;
            }
        }
    }
    Ok(Certificate { margin: 1.0 - inf_norm, sigma, residual, inf_norm })
}

/// Smallest `‖σ‖∞` among candidates within `res_tol`, else smallest residual.
fn pick_certificate(candidates: &[(Vec<f64>, f64)], res_tol: f64) -> (Vec<f64>, f64) {
    let within = candidates
        .iter()
        .filter(|c| c.1 <= res_tol)
        .min_by(|a, b| norm_inf(&a.0).total_cmp(&norm_inf(&b.0)));
    let best = within.or_else(|| candidates.iter().min_by(|a, b| a.1.total_cmp(&b.1))).expect("at least one candidate");
    (best.0.clone(), best.1)
}

/// `argmin ‖σ‖∞` subject to `D_J σ = D_J σ₀`.
fn min_inf_norm_in_fiber(dstar: &nalgebra::DMatrix<f64>, cosupport: &[usize], sigma0: &[f64]) -> Option<Vec<f64>> {
    let n = dstar.ncols();
    let mut lp = minilp::Problem::new(OptimizationDirection::Minimize);
    let bound = lp.add_var(1.0, (0.0, f64::INFINITY));
    let vars: Vec<_> = cosupport.iter().map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for &v in &vars {
        lp.add_constraint([(v, 1.0), (bound, -1.0)], ComparisonOp::Le, 0.0);
        lp.add_constraint([(v, -1.0), (bound, -1.0)], ComparisonOp::Le, 0.0);
    }
    for i in 0..n {
        let terms: Vec<_> = cosupport
            .iter()
            .zip(&vars)
            .filter_map(|(&j, &v)| {
                let c = dstar[(j, i)];
                (c != 0.0).then_some((v, c))
            })
            .collect();
        if terms.is_empty() {
            continue;
        }
        let rhs: f64 = cosupport.iter().zip(sigma0).map(|(&j, s)| dstar[(j, i)] * s).sum();
        lp.add_constraint(terms, ComparisonOp::Eq, rhs);
    }
    match lp.solve() {
        Ok(sol) => Some(vars.iter().map(|&v| *sol.var_value(v)).collect()),
        Err(e) => {
            log::debug!("certificate LP failed: {e}");
            None
        }
    }
}

/// `A^[J](Φ*ȳ − λ̄ D_I s_I)`.
pub fn local_solution(
    phi: &LinearMap,
    dict: &DictionarySpec,
    model: &CosupportModel,
    y_bar: &[f64],
    lambda_bar: f64,
) -> Result<Vec<f64>> {
    LocalAffineMap::new(phi, dict, model)?.eval(y_bar, lambda_bar)
}

/// The affine map `(ȳ, λ̄) ↦ A^[J]Φ*ȳ − λ̄A^[J]D_I s_I` with `A^[J]` factored once.
pub struct LocalAffineMap<'a> {
    phi: &'a LinearMap,
    solver: CospaceSolver<'a>,
    /// `A^[J] D_I s_I`
    drift: Vec<f64>,
}

impl<'a> LocalAffineMap<'a> {
    pub fn new(phi: &'a LinearMap, dict: &DictionarySpec, model: &CosupportModel) -> Result<Self> {
        if !model.hj_holds {
            return Err(Error::RankDeficient("(H_J) fails on this cosupport; reduce it first".into()));
        }
        let solver = CospaceSolver::new(phi, dict, &model.cosupport, KrylovParams::default())?;
        let ds = dict.synthesize_signs(&model.support, &model.signs)?;
        let drift = solver.apply(&ds)?;
        Ok(Self { phi, solver, drift })
    }

    pub fn eval(&self, y_bar: &[f64], lambda_bar: f64) -> Result<Vec<f64>> {
        let rhs = self.phi.adjoint(y_bar)?;
        let mut x = self.solver.apply(&rhs)?;
        for (xi, di) in x.iter_mut().zip(&self.drift) {
            *xi -= lambda_bar * di;
        }
        Ok(x)
    }

    /// `A^[J] D_I s_I`, i.e. `−∂x/∂λ`.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }
}

/// Output of [`polish`].
#[derive(Debug, Clone)]
pub struct Polished {
    pub x: Vec<f64>,
    /// `u` with `u_I = λ s_I`, `u_J = λσ`.
    pub dual: Vec<f64>,
    pub certificate: Certificate,
    pub model: CosupportModel,
}

/// Tolerances used to accept a polished point.
const POLISH_RES_TOL: f64 = 1e-8;
const POLISH_CERT_TOL: f64 = 1e-7;

/// Replaces an approximate minimizer by the exact minimizer on its detected
/// cosupport, provided the sign pattern is reproduced and a certificate
/// validates it. Returns `None` when the point is not yet accurate enough.
pub fn polish(problem: &Problem, x: &[f64], dual: Option<&[f64]>, eps_rel: f64) -> Result<Option<Polished>> {
    if !(problem.lambda > 0.0) {
        return Ok(None);
    }
    let mut model = detect_cosupport_in(problem, x, eps_rel)?;
    if !model.hj_holds {
        model = reduce_to_hj_descent(problem, x, &model)?.1;
    }
    let map = LocalAffineMap::new(&problem.phi, &problem.dict, &model)?;
    let xs = map.eval(&problem.y, problem.lambda)?;
    let coeffs = problem.dict.analysis().apply(&xs)?;
    let scale = norm_inf(&coeffs);
    for (&i, &s) in model.support.iter().zip(&model.signs) {
        let c = coeffs[i];
        if c * s <= 1e-12 * scale {
            return Ok(None);
        }
    }
    let hint = dual.map(|u| model.cosupport.iter().map(|&j| u[j] / problem.lambda).collect::<Vec<_>>());
    let cert = certificate_lp_above(problem, &xs, &model, hint.as_deref(), 1.0 + POLISH_CERT_TOL)?;
    let res_tol = POLISH_RES_TOL * problem.lambda * problem.dict.norm();
    if !cert.is_valid_with(res_tol, POLISH_CERT_TOL) {
        return Ok(None);
    }
    let mut u = vec![0.0; problem.p()];
    for (&i, &s) in model.support.iter().zip(&model.signs) {
        u[i] = problem.lambda * s;
    }
    for (&j, &s) in model.cosupport.iter().zip(&cert.sigma) {
        u[j] = problem.lambda * s;
    }
    model.eps_used = 0.0;
    model.ambiguous.clear();
    Ok(Some(Polished { x: xs, dual: u, certificate: cert, model }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn soft_problem() -> Problem {
        Problem::new(vec![3.0, 0.5, -2.0], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).unwrap()
    }

    #[test]
    fn h0_examples() {
        let tv = DictionarySpec::finite_diff_1d(5).unwrap();
        assert!(check_h0(&LinearMap::identity(5), &tv).unwrap());
        let sum = LinearMap::dense(DMatrix::from_element(1, 5, 1.0));
        assert!(check_h0(&sum, &tv).unwrap());
        assert!(!check_h0(&LinearMap::finite_diff_1d(5).unwrap(), &tv).unwrap());
    }

    #[test]
    fn detect_soft_threshold_support() {
        let m = detect_cosupport(&LinearMap::identity(3), &DictionarySpec::identity(3), &[2.0, 0.0, -1.0], 1e-5).unwrap();
        assert_eq!(m.support, vec![0, 2]);
        assert_eq!(m.signs, vec![1.0, -1.0]);
        assert_eq!(m.cosupport, vec![1]);
        assert_eq!(m.dim, 2);
        assert!(m.hj_holds);
    }

    #[test]
    fn detect_constant_tv() {
        let dict = DictionarySpec::finite_diff_1d(6).unwrap();
        let m = detect_cosupport(&LinearMap::identity(6), &dict, &[2.0; 6], 1e-5).unwrap();
        assert!(m.support.is_empty());
        assert_eq!(m.cosupport.len(), 5);
        assert_eq!(m.dim, 1);
    }

    #[test]
    fn soft_threshold_certificate() {
        let p = soft_problem();
        let x = [2.0, 0.0, -1.0];
        let m = detect_cosupport(&p.phi, &p.dict, &x, 1e-5).unwrap();
        let c = certificate(&p, &x, &m, None).unwrap();
        assert!(c.residual <= 1e-12);
        assert!((c.sigma[0] - 0.5).abs() < 1e-12);
        assert!(c.is_valid(&p));
        let bad = [2.1, 0.0, -1.0];
        let m = detect_cosupport(&p.phi, &p.dict, &bad, 1e-5).unwrap();
        assert!(!certificate(&p, &bad, &m, None).unwrap().is_valid(&p));
    }

    #[test]
    fn local_solution_frozen_support() {
        let p = soft_problem();
        let m = detect_cosupport(&p.phi, &p.dict, &[2.0, 0.0, -1.0], 1e-5).unwrap();
        let x = local_solution(&p.phi, &p.dict, &m, &[1.0, 7.0, 4.0], 0.25).unwrap();
        let expect = [0.75, 0.0, 4.25];
        for (a, b) in x.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn polish_snaps_near_solution() {
        let p = soft_problem();
        let near = [2.0 + 1e-9, 1e-11, -1.0 - 1e-9];
        let out = polish(&p, &near, None, 1e-5).unwrap().unwrap();
        for (a, b) in out.x.iter().zip(&[2.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in out.dual.iter().zip(&[1.0, 0.5, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lp_recovers_interior_certificate() {
        // two identical atoms: any σ₁ + σ₂ = c works; the LP must split it
        let dstar = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let dict = DictionarySpec::dense_analysis(dstar);
        let p = Problem::new(vec![1.5], LinearMap::identity(1), dict, 1.0).unwrap();
        let m = detect_cosupport(&p.phi, &p.dict, &[0.0], 1e-5).unwrap();
        let c = certificate(&p, &[0.0], &m, Some(&[1.5, 0.0])).unwrap();
        assert!(c.residual < 1e-12, "{c:?}");
        assert!((c.inf_norm - 0.75).abs() < 1e-9, "{c:?}");
    }
}
