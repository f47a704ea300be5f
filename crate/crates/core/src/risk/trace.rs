use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::krylov::{cg, kkt_solve, KrylovParams};
use crate::linops::{CoGram, DictionarySpec, Gram, LinearMap, LinearOperator};
use crate::vecops::{dot, mean_and_stderr, mix_seed};

/// Reproducible sequence of standard Gaussian probe vectors.
///
/// Probe `i` is drawn from a generator seeded with `mix_seed(seed, i)`, so
/// probes can be produced in any order or in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeStream {
    pub seed: u64,
    pub count: usize,
    pub dim: usize,
}

impl ProbeStream {
    pub fn new(seed: u64, count: usize, dim: usize) -> Self {
        Self { seed, count, dim }
    }

    pub fn probe(&self, index: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, index as u64));
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Same seed and count, other dimension.
    pub fn with_dim(&self, dim: usize) -> Self {
        Self { dim, ..*self }
    }

    /// Independent stream derived from this one.
    pub fn derived(&self, salt: u64) -> Self {
        Self { seed: mix_seed(self.seed ^ 0xA5A5_5A5A_0F0F_F0F0, salt), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    /// Standard error of the mean; `None` with fewer than two probes.
    pub stderr: Option<f64>,
    pub probes_used: usize,
    pub dropped: usize,
}

/// Weighting `Φ*A*A z` paired with `ν(z)` in [`mc_trace`].
#[derive(Clone, Copy)]
pub enum ProbeSide<'a> {
    /// `A = Id`: estimates `tr(ΦA^[J]Φ*) = dim G_J`.
    Prediction,
    /// `A = Φ*(ΦΦ*)⁺`: estimates `tr(ΠA^[J])`.
    Projection,
    /// `A = (Φ*Φ)⁻¹Φ*`: estimates `tr(A^[J])`.
    Estimation,
    /// Arbitrary `A` (`M × Q`).
    Factor(&'a LinearMap),
}

impl ProbeSide<'_> {
    fn weight(&self, phi: &LinearMap, z: &[f64], params: &KrylovParams) -> Result<Vec<f64>> {
        match self {
            ProbeSide::Prediction => phi.adjoint(z),
            ProbeSide::Projection => {
                if phi.has_orthonormal_rows() {
                    return phi.adjoint(z);
                }
                let w = cg(&CoGram::new(phi), z, params)?;
                phi.adjoint(&w.x)
            }
            ProbeSide::Estimation => {
                let rhs = phi.adjoint(z)?;
                Ok(cg(&Gram::new(phi), &rhs, params)?.x)
            }
            ProbeSide::Factor(a) => {
                check_len("A columns vs Φ rows", phi.rows(), a.cols())?;
                let az = a.apply(z)?;
                phi.adjoint(&a.adjoint(&az)?)
            }
        }
    }
}

/// Monte Carlo estimate of `tr(AΦA^[J]Φ*A*)` as the mean of
/// `⟨ν(z), Φ*A*Az⟩` over Gaussian `z ∈ R^Q`, where `ν(z) = A^[J]Φ*z` is
/// obtained from the saddle-point system. Probes whose Krylov solves fail
/// are dropped and counted.
pub fn mc_trace(
    phi: &LinearMap,
    dict: &DictionarySpec,
    cosupport: &[usize],
    side: ProbeSide<'_>,
    probes: &ProbeStream,
    params: &KrylovParams,
) -> Result<TraceEstimate> {
    check_len("probe dimension", phi.rows(), probes.dim)?;
    let atoms = dict.atoms(cosupport)?;
    let samples: Vec<Option<f64>> = (0..probes.count)
        .into_par_iter()
        .map(|i| {
            let z = probes.probe(i);
            let eval = || -> Result<f64> {
                let rhs = phi.adjoint(&z)?;
                let nu = kkt_solve(phi, &atoms, &rhs, params)?.nu;
                let w = side.weight(phi, &z, params)?;
                Ok(dot(&nu, &w))
            };
            match eval() {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) => None,
                Err(e) => {
                    log::debug!("probe {i} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    finish(samples)
}

/// Hutchinson estimate of `tr(M)` from `z ↦ ⟨z, Mz⟩`.
pub fn hutchinson<F>(probes: &ProbeStream, quad: F) -> Result<TraceEstimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let samples: Vec<Option<f64>> = (0..probes.count)
        .into_par_iter()
        .map(|i| quad(&probes.probe(i)).ok().filter(|v| v.is_finite()))
        .collect();
    finish(samples)
}

fn finish(samples: Vec<Option<f64>>) -> Result<TraceEstimate> {
    let values: Vec<f64> = samples.iter().flatten().copied().collect();
    let dropped = samples.len() - values.len();
    if values.is_empty() && !samples.is_empty() {
        return Err(Error::NumericalFailure(format!("all {dropped} probes failed")));
    }
    let (value, stderr) = mean_and_stderr(&values);
    Ok(TraceEstimate { value, stderr, probes_used: values.len(), dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible_and_order_free() {
        let s = ProbeStream::new(42, 4, 5);
        assert_eq!(s.probe(3), s.probe(3));
        assert_ne!(s.probe(2), s.probe(3));
    }

    #[test]
    fn zero_factor_gives_zero() {
        let phi = LinearMap::identity(4);
        let zero = LinearMap::dense(nalgebra::DMatrix::zeros(2, 4));
        let dict = DictionarySpec::identity(4);
        let est = mc_trace(&phi, &dict, &[1], ProbeSide::Factor(&zero), &ProbeStream::new(1, 10, 4), &KrylovParams::default())
            .unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn single_probe_has_no_stderr() {
        let phi = LinearMap::identity(3);
        let dict = DictionarySpec::identity(3);
        let est = mc_trace(&phi, &dict, &[0], ProbeSide::Prediction, &ProbeStream::new(9, 1, 3), &KrylovParams::default())
            .unwrap();
        assert!(est.stderr.is_none());
        assert_eq!(est.probes_used, 1);
    }
}
