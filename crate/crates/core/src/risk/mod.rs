//! Degrees of freedom and Generalized SURE for analysis-lasso estimates.
//!
//! With `y = Φx₀ + w`, `w ~ N(0, σ²Id)`, and a solution `x★` whose
//! cosupport `J` satisfies `(H_J)`:
//!
//! ```text
//! GSURE_Φ  = ‖y − Φx★‖² − Qσ² + 2σ² dim G_J
//! GSURE_Π  = ‖x_ML(y) − Πx★‖² − σ² tr((ΦΦ*)⁺) + 2σ² tr(ΠA^[J])
//! GSURE_Id = ‖x_ML(y) − x★‖² − σ² tr((Φ*Φ)⁻¹) + 2σ² tr(A^[J])
//! ```
//!
//! unbiasedly estimate `‖Φ(x₀ − x★)‖²`, `‖Π(x₀ − x★)‖²` and `‖x₀ − x★‖²`.
//! The `A^[J]` traces are computed densely or by Monte Carlo over the
//! saddle-point system; the `λ`-independent traces are computed once per
//! [`RiskContext`].

mod harness;
mod trace;

pub use harness::{
    reliability_mc, unbiasedness_mc, HarnessOptions, ReliabilityPoint, ReliabilityReport, RiskStat, TermwiseCheck,
    UnbiasednessReport,
};
pub use trace::{hutchinson, mc_trace, ProbeSide, ProbeStream, TraceEstimate};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::cosparse::{certificate, detect_cosupport_in, reduce_to_hj_descent, CosupportModel, DenseCospace, DEFAULT_EPS_REL, RANK_TOL};
use crate::error::{check_len, Error, Result};
use crate::krylov::{cg, cgls, KrylovParams};
use crate::linops::{to_dense, CoGram, DictionarySpec, Gram, KindTag, LinearMap, LinearOperator, DEFAULT_DENSE_LIMIT};
use crate::prox::{Problem, Solution};
use crate::vecops::{dist2_sq, dot};

/// Sizes up to which `λ`-independent traces are computed densely.
pub const DENSE_TRACE_MAX: usize = 512;
/// Hutchinson probes used for `λ`-independent traces beyond [`DENSE_TRACE_MAX`].
pub const HUTCHINSON_PROBES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskKind {
    Prediction,
    Projection,
    Estimation,
}

impl fmt::Display for RiskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskKind::Prediction => "pred",
            RiskKind::Projection => "proj",
            RiskKind::Estimation => "est",
        })
    }
}

/// Which risks to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiskSelection {
    pub prediction: bool,
    pub projection: bool,
    pub estimation: bool,
}

impl RiskSelection {
    pub const ALL: Self = Self { prediction: true, projection: true, estimation: true };

    pub fn only(kind: RiskKind) -> Self {
        Self {
            prediction: kind == RiskKind::Prediction,
            projection: kind == RiskKind::Projection,
            estimation: kind == RiskKind::Estimation,
        }
    }

    pub fn contains(&self, kind: RiskKind) -> bool {
        match kind {
            RiskKind::Prediction => self.prediction,
            RiskKind::Projection => self.projection,
            RiskKind::Estimation => self.estimation,
        }
    }
}

impl FromStr for RiskSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pred" => Ok(Self::only(RiskKind::Prediction)),
            "proj" => Ok(Self::only(RiskKind::Projection)),
            "est" => Ok(Self::only(RiskKind::Estimation)),
            "all" => Ok(Self::ALL),
            other => Err(Error::InvalidArgument(format!("unknown risk '{other}' (pred|proj|est|all)"))),
        }
    }
}

impl fmt::Display for RiskSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.prediction, self.projection, self.estimation) {
            (true, true, true) => write!(f, "all"),
            (true, false, false) => write!(f, "pred"),
            (false, true, false) => write!(f, "proj"),
            (false, false, true) => write!(f, "est"),
            (a, b, c) => write!(f, "pred={a},proj={b},est={c}"),
        }
    }
}

/// How traces involving `A^[J]` are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceMode {
    /// Through a materialized cospace basis.
    Dense,
    /// Gaussian probes through the saddle-point system.
    MonteCarlo { seed: u64, probes: usize },
}

/// A risk estimate together with the trace it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsureValue {
    pub value: f64,
    pub trace: TraceEstimate,
}

/// Per-`λ` risk record.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub lambda: f64,
    pub dof: usize,
    pub gsure_pred: f64,
    pub gsure_proj: Option<f64>,
    pub gsure_est: Option<f64>,
    pub se_pred: Option<f64>,
    pub se_proj: Option<f64>,
    pub se_est: Option<f64>,
    /// Standard errors of the Monte Carlo terms, when estimated with ≥ 2 probes.
    pub stderr_proj: Option<f64>,
    pub stderr_est: Option<f64>,
    pub mc_probes: usize,
    pub seed: Option<u64>,
    /// `1 − ‖σ‖∞` of the certificate at the evaluated point.
    pub cert_margin: f64,
    /// Whether the cosupport had to be reduced to satisfy `(H_J)`.
    pub reduced: bool,
}

/// `|I|`-free DOF estimate `dim G_J`.
pub fn dof_estimate(model: &CosupportModel) -> Result<usize> {
    if !model.hj_holds {
        return Err(Error::Precondition(
            "Φ is not injective on the cospace; apply reduce_to_hj (or reduce_to_hj_descent) before estimating the DOF".into(),
        ));
    }
    Ok(model.dim)
}

/// `‖y − μ‖² − Qσ² + 2σ²·dof`.
pub fn sure_prediction(y: &[f64], mu: &[f64], sigma2: f64, dof: usize) -> f64 {
    dist2_sq(y, mu) - y.len() as f64 * sigma2 + 2.0 * sigma2 * dof as f64
}

/// `Φ⁺y = Φ*(ΦΦ*)⁺y` (equal to `(Φ*Φ)⁻¹Φ*y` for injective `Φ`).
pub fn x_ml(phi: &LinearMap, y: &[f64], params: &KrylovParams) -> Result<Vec<f64>> {
    check_len("observation", phi.rows(), y.len())?;
    if phi.kind() == KindTag::Identity {
        return Ok(y.to_vec());
    }
    if phi.has_orthonormal_rows() {
        return phi.adjoint(y);
    }
    Ok(cgls(phi, y, params)?.x)
}

/// Dense spectral data of `Φ`.
struct Spectrum {
    /// Orthonormal basis of `Ker(Φ)^⊥` (`N × r`).
    row_space: DMatrix<f64>,
    /// Squared nonzero singular values.
    sq_values: Vec<f64>,
}

impl Spectrum {
    fn of(phi: &LinearMap) -> Result<Option<Self>> {
        let (q, n) = (phi.rows(), phi.cols());
        if q.saturating_mul(n) > DEFAULT_DENSE_LIMIT {
            return Ok(None);
        }
        let m = to_dense(phi, DEFAULT_DENSE_LIMIT)?;
        // SVD of Φ* (N × Q) gives the row space of Φ in its left factor
        let svd = m.transpose().svd(true, false);
        let u = svd.u.as_ref().ok_or_else(|| Error::NumericalFailure("SVD of Φ failed".into()))?;
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| smax > 0.0 && svd.singular_values[k] > RANK_TOL * smax)
            .collect();
        let mut row_space = DMatrix::zeros(n, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            row_space.set_column(c, &u.column(k));
        }
        let sq_values = keep.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
        Ok(Some(Self { row_space, sq_values }))
    }

    fn exact(value: f64) -> TraceEstimate {
        TraceEstimate { value, stderr: None, probes_used: 0, dropped: 0 }
    }
}

/// Operator-level quantities shared by every `λ` of a sweep.
pub struct RiskContext<'a> {
    phi: &'a LinearMap,
    dict: &'a DictionarySpec,
    sigma2: f64,
    mode: TraceMode,
    krylov: KrylovParams,
    spectrum: Option<Spectrum>,
    tr_cogram_pinv: Option<TraceEstimate>,
    tr_gram_inv: Option<TraceEstimate>,
}

impl<'a> RiskContext<'a> {
    pub fn new(phi: &'a LinearMap, dict: &'a DictionarySpec, sigma2: f64, mode: TraceMode) -> Result<Self> {
        check_len("Φ columns vs dictionary", dict.n(), phi.cols())?;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma² must be finite and > 0, got {sigma2}")));
        }
        let krylov = KrylovParams::default();
        let (q, n) = (phi.rows(), phi.cols());
        let structured = phi.kind() == KindTag::Identity || phi.has_orthonormal_rows();
        let spectrum = if structured { None } else { Spectrum::of(phi)? };
        let hutch_seed = match mode {
            TraceMode::MonteCarlo { seed, .. } => seed,
            TraceMode::Dense => 0,
        };
        let (tr_cogram_pinv, tr_gram_inv) = if structured {
            let full = q == n;
            (Some(Spectrum::exact(q as f64)), full.then(|| Spectrum::exact(n as f64)))
        } else {
            let cogram = match &spectrum {
                Some(s) if q <= DENSE_TRACE_MAX => Some(Spectrum::exact(s.sq_values.iter().map(|v| 1.0 / v).sum())),
                _ => {
                    let stream = ProbeStream::new(hutch_seed, HUTCHINSON_PROBES, q).derived(1);
                    let op = CoGram::new(phi);
                    hutchinson(&stream, |z| Ok(dot(z, &cg(&op, z, &krylov)?.x))).ok()
                }
            };
            let gram = if q < n {
                None
            } else {
                match &spectrum {
                    Some(s) if n <= DENSE_TRACE_MAX => {
                        (s.sq_values.len() == n).then(|| Spectrum::exact(s.sq_values.iter().map(|v| 1.0 / v).sum()))
                    }
                    _ => {
                        let stream = ProbeStream::new(hutch_seed, HUTCHINSON_PROBES, n).derived(2);
                        let op = Gram::new(phi);
                        hutchinson(&stream, |z| Ok(dot(z, &cg(&op, z, &krylov)?.x))).ok()
                    }
                }
            };
            (cogram, gram)
        };
        Ok(Self { phi, dict, sigma2, mode, krylov, spectrum, tr_cogram_pinv, tr_gram_inv })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn mode(&self) -> TraceMode {
        self.mode
    }

    /// `tr((ΦΦ*)⁺)`, when computable.
    pub fn trace_cogram_pinv(&self) -> Option<TraceEstimate> {
        self.tr_cogram_pinv
    }

    /// `tr((Φ*Φ)⁻¹)`; `None` unless `Φ` has full column rank.
    pub fn trace_gram_inv(&self) -> Option<TraceEstimate> {
        self.tr_gram_inv
    }

    pub fn supports_estimation(&self) -> bool {
        self.tr_gram_inv.is_some()
    }

    fn a_trace(&self, model: &CosupportModel, kind: RiskKind, mode: TraceMode) -> Result<TraceEstimate> {
        let side = match kind {
            RiskKind::Prediction => return Ok(Spectrum::exact(model.dim as f64)),
            RiskKind::Projection => ProbeSide::Projection,
            RiskKind::Estimation => ProbeSide::Estimation,
        };
        let mc = |seed: u64, probes: usize| {
            let stream = ProbeStream::new(seed, probes, self.phi.rows());
            mc_trace(self.phi, self.dict, &model.cosupport, side, &stream, &self.krylov)
        };
        match mode {
            TraceMode::MonteCarlo { seed, probes } => mc(seed, probes),
            TraceMode::Dense => match DenseCospace::new(self.phi, self.dict, &model.cosupport) {
                Ok(cs) => Ok(Spectrum::exact(self.dense_a_trace(&cs, kind)?)),
                Err(Error::Capacity { .. }) => mc(0, HUTCHINSON_PROBES),
                Err(e) => Err(e),
            },
        }
    }

    fn dense_a_trace(&self, cs: &DenseCospace, kind: RiskKind) -> Result<f64> {
        if cs.dim() == 0 {
            return Ok(0.0);
        }
        match kind {
            RiskKind::Prediction => Ok(cs.dim() as f64),
            RiskKind::Estimation => Ok(cs.trace()?),
            RiskKind::Projection => {
                // tr(ΠA^[J]) = tr(G⁻¹ U_J*ΠU_J)
                let w = match &self.spectrum {
                    Some(s) => s.row_space.transpose() * cs.basis(),
                    None if self.phi.kind() == KindTag::Identity => cs.basis().clone(),
                    None if self.phi.has_orthonormal_rows() => cs.phi_basis().clone(),
                    None => return Err(Error::Capacity { entries: self.phi.rows() * self.phi.cols(), limit: DEFAULT_DENSE_LIMIT }),
                };
                Ok((cs.inverse_gram()? * (w.transpose() * w)).trace())
            }
        }
    }

    /// `GSURE_Π` at `x` (with `(H_J)` on `model`).
    pub fn gsure_projection(&self, y: &[f64], x: &[f64], model: &CosupportModel) -> Result<GsureValue> {
        self.gsure_projection_with(y, x, model, self.mode)
    }

    fn gsure_projection_with(&self, y: &[f64], x: &[f64], model: &CosupportModel, mode: TraceMode) -> Result<GsureValue> {
        dof_estimate(model)?;
        let tr_pinv = self
            .tr_cogram_pinv
            .ok_or_else(|| Error::UnsupportedRisk("tr((ΦΦ*)⁺) is not computable for this operator".into()))?;
        let xml_y = x_ml(self.phi, y, &self.krylov)?;
        let pi_x = x_ml(self.phi, &self.phi.apply(x)?, &self.krylov)?;
        let trace = self.a_trace(model, RiskKind::Projection, mode)?;
        let value = dist2_sq(&xml_y, &pi_x) - self.sigma2 * tr_pinv.value + 2.0 * self.sigma2 * trace.value;
        Ok(GsureValue { value, trace })
    }

    /// `GSURE_Id` at `x`; requires `Φ` of full column rank.
    pub fn gsure_estimation(&self, y: &[f64], x: &[f64], model: &CosupportModel) -> Result<GsureValue> {
        self.gsure_estimation_with(y, x, model, self.mode)
    }

    fn gsure_estimation_with(&self, y: &[f64], x: &[f64], model: &CosupportModel, mode: TraceMode) -> Result<GsureValue> {
        dof_estimate(model)?;
        let tr_inv = self
            .tr_gram_inv
            .ok_or_else(|| Error::UnsupportedRisk("the estimation risk needs Φ of full column rank".into()))?;
        let xml_y = x_ml(self.phi, y, &self.krylov)?;
        let trace = self.a_trace(model, RiskKind::Estimation, mode)?;
        let value = dist2_sq(&xml_y, x) - self.sigma2 * tr_inv.value + 2.0 * self.sigma2 * trace.value;
        Ok(GsureValue { value, trace })
    }

    /// Cosupport analysis of a solution, reducing it first when `(H_J)` fails.
    pub fn analyse(&self, problem: &Problem, solution: &Solution) -> Result<(Vec<f64>, CosupportModel, bool)> {
        let model = detect_cosupport_in(problem, &solution.x, DEFAULT_EPS_REL)?;
        if model.hj_holds {
            return Ok((solution.x.clone(), model, false));
        }
        log::info!("λ = {}: (H_J) fails at the solver output, reducing the cosupport", problem.lambda);
        let (v, m) = reduce_to_hj_descent(problem, &solution.x, &model)?;
        Ok((v, m, true))
    }

    /// Every requested risk at one solution. Risks whose preconditions fail
    /// are reported as `None`.
    pub fn evaluate(&self, problem: &Problem, solution: &Solution, risks: RiskSelection) -> Result<RiskReport> {
        self.evaluate_with_mode(problem, solution, risks, self.mode)
    }

    /// As [`RiskContext::evaluate`] with another trace mode (e.g. a per-trial probe seed).
    pub fn evaluate_with_mode(
        &self,
        problem: &Problem,
        solution: &Solution,
        risks: RiskSelection,
        mode: TraceMode,
    ) -> Result<RiskReport> {
        let (x, model, reduced) = self.analyse(problem, solution)?;
        let hint: Option<Vec<f64>> = (solution.dual.len() == problem.p() && problem.lambda > 0.0)
            .then(|| model.cosupport.iter().map(|&j| solution.dual[j] / problem.lambda).collect());
        let cert_margin = if problem.lambda > 0.0 {
            certificate(problem, &x, &model, hint.as_deref())?.margin
        } else {
            f64::NAN
        };
        let dof = dof_estimate(&model)?;
        let mu = self.phi.apply(&x)?;
        let gsure_pred = sure_prediction(&problem.y, &mu, self.sigma2, dof);
        let (mut gsure_proj, mut stderr_proj) = (None, None);
        if risks.projection && self.tr_cogram_pinv.is_some() {
            let g = self.gsure_projection_with(&problem.y, &x, &model, mode)?;
            gsure_proj = Some(g.value);
            stderr_proj = g.trace.stderr.map(|s| 2.0 * self.sigma2 * s);
        }
        let (mut gsure_est, mut stderr_est) = (None, None);
        if risks.estimation && self.supports_estimation() {
            let g = self.gsure_estimation_with(&problem.y, &x, &model, mode)?;
            gsure_est = Some(g.value);
            stderr_est = g.trace.stderr.map(|s| 2.0 * self.sigma2 * s);
        }
        let (mut se_pred, mut se_proj, mut se_est) = (None, None, None);
        if let Some(x0) = &problem.x0 {
            let mu0 = self.phi.apply(x0)?;
            se_pred = Some(dist2_sq(&mu0, &mu));
            if risks.projection && gsure_proj.is_some() {
                let diff: Vec<f64> = mu0.iter().zip(&mu).map(|(a, b)| a - b).collect();
                let proj_diff = x_ml(self.phi, &diff, &self.krylov)?;
                se_proj = Some(dot(&proj_diff, &proj_diff));
            }
            if risks.estimation && gsure_est.is_some() {
                se_est = Some(dist2_sq(x0, &x));
            }
        }
        let (mc_probes, seed) = match mode {
            TraceMode::MonteCarlo { seed, probes } => (probes, Some(seed)),
            TraceMode::Dense => (0, None),
        };
        Ok(RiskReport {
            lambda: problem.lambda,
            dof,
            gsure_pred,
            gsure_proj,
            gsure_est,
            se_pred,
            se_proj,
            se_est,
            stderr_proj,
            stderr_est,
            mc_probes,
            seed,
            cert_margin,
            reduced,
        })
    }
}

/// `GSURE_Π` for one solution and its cosupport model.
pub fn gsure_projection(
    problem: &Problem,
    solution: &Solution,
    model: &CosupportModel,
    sigma2: f64,
    mode: TraceMode,
) -> Result<GsureValue> {
    RiskContext::new(&problem.phi, &problem.dict, sigma2, mode)?.gsure_projection(&problem.y, &solution.x, model)
}

/// `GSURE_Id` for one solution and its cosupport model.
pub fn gsure_estimation(
    problem: &Problem,
    solution: &Solution,
    model: &CosupportModel,
    sigma2: f64,
    mode: TraceMode,
) -> Result<GsureValue> {
    RiskContext::new(&problem.phi, &problem.dict, sigma2, mode)?.gsure_estimation(&problem.y, &solution.x, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosparse::detect_cosupport;

    #[test]
    fn sure_examples() {
        let y = [1.0, -2.0, 0.5];
        assert!((sure_prediction(&y, &y, 0.3, 3) - 3.0 * 0.3).abs() < 1e-15);
        let z = [0.0; 3];
        assert!((sure_prediction(&y, &z, 0.3, 0) - (5.25 - 0.9)).abs() < 1e-15);
    }

    #[test]
    fn dof_requires_hj() {
        let phi = LinearMap::dense(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        let m = detect_cosupport(&phi, &DictionarySpec::identity(2), &[1.0, 1.0], 1e-5).unwrap();
        assert!(matches!(dof_estimate(&m), Err(Error::Precondition(_))));
    }

    #[test]
    fn x_ml_identity_and_tight_frame() {
        let params = KrylovParams::default();
        assert_eq!(x_ml(&LinearMap::identity(3), &[1.0, 2.0, 3.0], &params).unwrap(), vec![1.0, 2.0, 3.0]);
        let phi = LinearMap::subsample(4, 2).unwrap();
        assert_eq!(x_ml(&phi, &[1.0, 2.0], &params).unwrap(), vec![1.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn risk_selection_parses() {
        assert_eq!("all".parse::<RiskSelection>().unwrap(), RiskSelection::ALL);
        assert!("proj".parse::<RiskSelection>().unwrap().projection);
        assert!("bogus".parse::<RiskSelection>().is_err());
    }

    #[test]
    fn scaled_identity_gram_trace() {
        let phi = LinearMap::identity(5).scaled(2.0);
        let dict = DictionarySpec::identity(5);
        let ctx = RiskContext::new(&phi, &dict, 1.0, TraceMode::Dense).unwrap();
        assert!((ctx.trace_gram_inv().unwrap().value - 5.0 / 4.0).abs() < 1e-12);
    }
}
