use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{check_len, Error, Result};
use crate::krylov::{kkt_solve, KrylovParams};
use crate::linops::{dense_mul, dense_mul_t, DictionarySpec, LinearMap, LinearOperator};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Largest `max(N, |J|) · N` for which the SVD route to `U_J` is used.
pub const SVD_COSPACE_LIMIT: usize = 2_000_000;

/// Orthonormal basis of `Ker D_J*` given as the columns of an `N × d` matrix.
///
/// Incidence-type dictionaries (finite differences) use connected components
/// of the graph spanned by the edges in `J`; other dictionaries go through
/// an SVD of `D_J`.
pub fn cospace_basis(dict: &DictionarySpec, cosupport: &[usize]) -> Result<DMatrix<f64>> {
    let n = dict.n();
    if let Some(p) = cosupport.iter().find(|&&j| j >= dict.p()) {
        return Err(Error::InvalidArgument(format!("cosupport index {p} out of range")));
    }
    if let Some(edges) = dict.difference_edges() {
        return Ok(component_basis(n, cosupport.iter().map(|&j| edges[j])));
    }
    if cosupport.is_empty() {
        return Ok(DMatrix::identity(n, n));
    }
    let rows = n.max(cosupport.len());
    if rows.saturating_mul(n) > SVD_COSPACE_LIMIT {
        return Err(Error::Capacity { entries: rows * n, limit: SVD_COSPACE_LIMIT });
    }
    let dstar = dict.dense_analysis_matrix()?;
    // D_J, padded with zero columns so the left factor is N × N
    let mut atoms = DMatrix::zeros(n, rows);
    for (c, &j) in cosupport.iter().enumerate() {
        for i in 0..n {
            atoms[(i, c)] = dstar[(j, i)];
        }
    }
    let svd = atoms.svd(true, false);
    let u = svd.u.as_ref().ok_or_else(|| Error::NumericalFailure("SVD failed".into()))?;
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..u.ncols())
        .filter(|&k| svd.singular_values[k] <= RANK_TOL * smax)
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &u.column(k));
    }
    Ok(basis)
}

fn component_basis(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> DMatrix<f64> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut comp = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = sizes.len();
            sizes.push(0usize);
        }
        comp[i] = label[r];
        sizes[label[r]] += 1;
    }
    let mut basis = DMatrix::zeros(n, sizes.len());
    for i in 0..n {
        basis[(i, comp[i])] = 1.0 / (sizes[comp[i]] as f64).sqrt();
    }
    basis
}

/// `dim G_J` (`= N − rank D_J`).
pub fn cospace_dim(dict: &DictionarySpec, cosupport: &[usize]) -> Result<usize> {
    Ok(cospace_basis(dict, cosupport)?.ncols())
}

/// Dense realization of `A^[J] = U_J (U_J* Φ*Φ U_J)^{-1} U_J*`.
#[derive(Clone)]
pub struct DenseCospace {
    basis: DMatrix<f64>,
    phi_basis: DMatrix<f64>,
    gram: Option<Cholesky<f64, Dyn>>,
    hj_holds: bool,
    sigma_ratio: f64,
}

impl DenseCospace {
    pub fn new(phi: &LinearMap, dict: &DictionarySpec, cosupport: &[usize]) -> Result<Self> {
        check_len("Φ columns vs dictionary", dict.n(), phi.cols())?;
        let basis = cospace_basis(dict, cosupport)?;
        Self::from_basis(phi, basis)
    }

    pub fn from_basis(phi: &LinearMap, basis: DMatrix<f64>) -> Result<Self> {
        let (q, d) = (phi.rows(), basis.ncols());
        let mut phi_basis = DMatrix::zeros(q, d);
        let mut col = vec![0.0; q];
        for c in 0..d {
            let b: Vec<f64> = basis.column(c).iter().copied().collect();
            phi.apply_into(&b, &mut col);
            phi_basis.column_mut(c).copy_from_slice(&col);
        }
        let (hj_holds, sigma_ratio) = if d == 0 {
            (true, 1.0)
        } else if q < d {
            (false, 0.0)
        } else {
            let sv = phi_basis.clone().singular_values();
            let (smin, smax) = (sv.min(), sv.max());
            let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
            (ratio > RANK_TOL, ratio)
        };
        let gram = if hj_holds {
            Cholesky::new(phi_basis.transpose() * &phi_basis)
        } else {
            None
        };
        let hj_holds = hj_holds && gram.is_some();
        Ok(Self { basis, phi_basis, gram, hj_holds, sigma_ratio })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn hj_holds(&self) -> bool {
        self.hj_holds
    }

    /// `σ_min(ΦU_J) / σ_max(ΦU_J)`.
    pub fn conditioning(&self) -> f64 {
        self.sigma_ratio
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `ΦU_J`.
    pub fn phi_basis(&self) -> &DMatrix<f64> {
        &self.phi_basis
    }

    fn chol(&self) -> Result<&Cholesky<f64, Dyn>> {
        self.gram
            .as_ref()
            .ok_or_else(|| Error::RankDeficient("(H_J) fails: Φ is not injective on G_J".into()))
    }

    /// `A^[J] u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("A^[J] input", self.basis.nrows(), u.len())?;
        let chol = self.chol()?;
        if self.dim() == 0 {
            return Ok(vec![0.0; u.len()]);
        }
        let coeffs = nalgebra::DVector::from_vec(dense_mul_t(&self.basis, u));
        let alpha = chol.solve(&coeffs);
        Ok(dense_mul(&self.basis, alpha.as_slice()))
    }

    /// `(U_J*Φ*ΦU_J)^{-1}`.
    pub fn inverse_gram(&self) -> Result<DMatrix<f64>> {
        Ok(self.chol()?.inverse())
    }

    /// Dense `A^[J]` (`N × N`).
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let g = self.inverse_gram()?;
        Ok(&self.basis * g * self.basis.transpose())
    }

    /// `ΦA^[J]Φ*`, the orthogonal projector onto `Φ(G_J)`.
    pub fn prediction_jacobian(&self) -> Result<DMatrix<f64>> {
        let g = self.inverse_gram()?;
        Ok(&self.phi_basis * g * self.phi_basis.transpose())
    }

    /// `tr A^[J] = tr (U_J*Φ*ΦU_J)^{-1}` for orthonormal `U_J`.
    pub fn trace(&self) -> Result<f64> {
        Ok(self.inverse_gram()?.trace())
    }
}

/// How `A^[J]` is applied.
pub enum CospaceSolver<'a> {
    Dense(DenseCospace),
    Kkt {
        phi: &'a LinearMap,
        atoms: LinearMap,
        params: KrylovParams,
    },
}

impl<'a> CospaceSolver<'a> {
    /// Dense whenever a basis of `G_J` is affordable, saddle-point MINRES otherwise.
    pub fn new(
        phi: &'a LinearMap,
        dict: &DictionarySpec,
        cosupport: &[usize],
        params: KrylovParams,
    ) -> Result<Self> {
        match DenseCospace::new(phi, dict, cosupport) {
            Ok(dense) => Ok(Self::Dense(dense)),
            Err(Error::Capacity { .. }) => Self::kkt(phi, dict, cosupport, params),
            Err(e) => Err(e),
        }
    }

    pub fn kkt(
        phi: &'a LinearMap,
        dict: &DictionarySpec,
        cosupport: &[usize],
        params: KrylovParams,
    ) -> Result<Self> {
        Ok(Self::Kkt { phi, atoms: dict.atoms(cosupport)?, params })
    }

    /// `Some` when decided densely.
    pub fn hj_holds(&self) -> Option<bool> {
        match self {
            Self::Dense(d) => Some(d.hj_holds()),
            Self::Kkt { .. } => None,
        }
    }

    pub fn dense(&self) -> Option<&DenseCospace> {
        match self {
            Self::Dense(d) => Some(d),
            Self::Kkt { .. } => None,
        }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Dense(d) => d.apply(u),
            Self::Kkt { phi, atoms, params } => Ok(kkt_solve(phi, atoms, u, params)?.nu),
        }
    }
}

/// `A^[J] u` through the saddle-point system.
pub fn apply_aj(
    phi: &LinearMap,
    dict: &DictionarySpec,
    cosupport: &[usize],
    u: &[f64],
    params: &KrylovParams,
) -> Result<Vec<f64>> {
    check_len("A^[J] input", dict.n(), u.len())?;
    let atoms = dict.atoms(cosupport)?;
    Ok(kkt_solve(phi, &atoms, u, params)?.nu)
}

/// Dense `ΦA^[J]Φ*` (`Q × Q`).
pub fn prediction_jacobian(phi: &LinearMap, dict: &DictionarySpec, cosupport: &[usize]) -> Result<DMatrix<f64>> {
    let q = phi.rows();
    if q.saturating_mul(q) > crate::linops::DEFAULT_DENSE_LIMIT {
        return Err(Error::Capacity { entries: q * q, limit: crate::linops::DEFAULT_DENSE_LIMIT });
    }
    DenseCospace::new(phi, dict, cosupport)?.prediction_jacobian()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dictionary_basis_spans_free_axes() {
        let dict = DictionarySpec::identity(3);
        let u = cospace_basis(&dict, &[1]).unwrap();
        assert_eq!(u.ncols(), 2);
        for c in 0..2 {
            assert!(u[(1, c)].abs() < 1e-14);
        }
    }

    #[test]
    fn tv_full_cosupport_gives_constants() {
        let dict = DictionarySpec::finite_diff_1d(5).unwrap();
        let u = cospace_basis(&dict, &[0, 1, 2, 3]).unwrap();
        assert_eq!(u.ncols(), 1);
        for i in 0..5 {
            assert!((u[(i, 0)] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn graph_and_svd_routes_agree_on_dimension() {
        let tv = DictionarySpec::finite_diff_1d(8).unwrap();
        let dense = DictionarySpec::dense_analysis(tv.analysis().to_dense().unwrap());
        let j = [0, 2, 3, 6];
        assert_eq!(cospace_dim(&tv, &j).unwrap(), cospace_dim(&dense, &j).unwrap());
    }
}
