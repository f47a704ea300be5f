use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use super::{operator_norm, to_dense, LinearMap, LinearOperator, DEFAULT_DENSE_LIMIT};
use crate::error::{check_len, Error, Result};

/// A dictionary `D` (`N × P`, synthesis) together with its analysis operator `D*`.
#[derive(Clone, Debug)]
pub struct DictionarySpec {
    base: LinearMap,
    analysis: LinearMap,
    dense: OnceLock<Arc<DMatrix<f64>>>,
    norm: OnceLock<f64>,
}

impl DictionarySpec {
    /// Builds the pair from the analysis operator `D*` (`P × N`).
    pub fn from_analysis(analysis: LinearMap) -> Self {
        Self {
            base: analysis.adjoint_map(),
            analysis,
            dense: OnceLock::new(),
            norm: OnceLock::new(),
        }
    }

    /// Explicit pair; `base` must be the adjoint of `analysis`.
    pub fn from_pair(base: LinearMap, analysis: LinearMap) -> Result<Self> {
        check_len("dictionary rows", analysis.cols(), base.rows())?;
        check_len("dictionary atoms", analysis.rows(), base.cols())?;
        Ok(Self { base, analysis, dense: OnceLock::new(), norm: OnceLock::new() })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_analysis(LinearMap::identity(n))
    }

    /// Dense analysis matrix `D*` of shape `P × N`.
    pub fn dense_analysis(analysis: DMatrix<f64>) -> Self {
        Self::from_analysis(LinearMap::dense(analysis))
    }

    pub fn finite_diff_1d(n: usize) -> Result<Self> {
        Ok(Self::from_analysis(LinearMap::finite_diff_1d(n)?))
    }

    pub fn finite_diff_2d(height: usize, width: usize) -> Result<Self> {
        Ok(Self::from_analysis(LinearMap::finite_diff_2d(height, width)?))
    }

    pub fn haar_shift_invariant(n: usize, levels: usize) -> Result<Self> {
        Ok(Self::from_analysis(LinearMap::haar_shift_invariant(n, levels)?))
    }

    /// Signal dimension `N`.
    pub fn n(&self) -> usize {
        self.analysis.cols()
    }

    /// Number of atoms `P`.
    pub fn p(&self) -> usize {
        self.analysis.rows()
    }

    /// `D`, mapping `R^P -> R^N`.
    pub fn base(&self) -> &LinearMap {
        &self.base
    }

    /// `D*`, mapping `R^N -> R^P`.
    pub fn analysis(&self) -> &LinearMap {
        &self.analysis
    }

    /// Spectral norm `‖D‖`, estimated once by power iteration.
    pub fn norm(&self) -> f64 {
        *self.norm.get_or_init(|| operator_norm(&self.analysis, 200))
    }

    /// Dense `D*` (`P × N`), cached.
    pub fn dense_analysis_matrix(&self) -> Result<Arc<DMatrix<f64>>> {
        if let Some(m) = self.dense.get() {
            return Ok(m.clone());
        }
        let m = Arc::new(to_dense(&self.analysis, DEFAULT_DENSE_LIMIT)?);
        Ok(self.dense.get_or_init(|| m).clone())
    }

    /// `D_J*`: the rows of `D*` indexed by `cosupport`.
    pub fn analysis_rows(&self, cosupport: &[usize]) -> Result<LinearMap> {
        LinearMap::mask(self.p(), cosupport.to_vec())?.compose(&self.analysis)
    }

    /// `D_J`: the atoms indexed by `cosupport`.
    pub fn atoms(&self, cosupport: &[usize]) -> Result<LinearMap> {
        Ok(self.analysis_rows(cosupport)?.adjoint_map())
    }

    /// `D_I s_I`, with `signs` aligned to `support`.
    pub fn synthesize_signs(&self, support: &[usize], signs: &[f64]) -> Result<Vec<f64>> {
        check_len("sign vector", support.len(), signs.len())?;
        let mut full = vec![0.0; self.p()];
        for (&i, &s) in support.iter().zip(signs) {
            if i >= full.len() {
                return Err(Error::InvalidArgument(format!("atom index {i} out of range")));
            }
            full[i] = s;
        }
        self.base.apply(&full)
    }

    /// Graph edges when `D*` is an incidence (finite-difference) operator.
    pub fn difference_edges(&self) -> Option<Vec<(usize, usize)>> {
        self.analysis.difference_edges()
    }
}
